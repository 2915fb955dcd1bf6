"""Allow running adaptkernel as a module with python -m adaptkernel."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
