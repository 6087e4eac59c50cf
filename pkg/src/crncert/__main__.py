"""Allow ``python -m crncert``."""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
