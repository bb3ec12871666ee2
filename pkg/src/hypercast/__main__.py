"""Allow ``python -m hypercast`` as an alias for the console script."""

import sys

from hypercast.cli import main

if __name__ == "__main__":
    sys.exit(main())
