import sys

from src.ftn.cli import main

if __name__ == "__main__":
    sys.exit(main())
