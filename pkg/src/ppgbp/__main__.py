"""Allow ``python -m ppgbp`` as an alias for the ``ppgbp`` console script."""

import sys

from ppgbp.cli import main

if __name__ == "__main__":
    sys.exit(main())
