"""Allow cbc_lab to be executed as a module with python -m cbc_lab."""

import sys

from cbc_lab.cli import main


if __name__ == "__main__":
    sys.exit(main())
