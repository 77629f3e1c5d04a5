import sys

from embalance.cli import main

sys.exit(main())
