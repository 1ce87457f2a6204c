#!/usr/bin/env python3
"""Start the service. Thin wrapper over ``python -m chainstory.service``.

    python scripts/run_server.py --data-dir ./data --port 8787
"""

import sys

from chainstory.service import main

if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
