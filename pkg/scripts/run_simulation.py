#!/usr/bin/env python3
"""Run the crowd simulator. Thin wrapper over ``python -m chainstory.sim``.

    python scripts/run_simulation.py --workers 25 --steps 500 --seed 7 --out ./run
"""

import sys

from chainstory.sim import main

if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
