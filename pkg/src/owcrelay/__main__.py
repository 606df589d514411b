import sys

from owcrelay.cli import main

if __name__ == "__main__":
    sys.exit(main())
