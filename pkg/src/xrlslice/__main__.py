import sys

from xrlslice.harness.cli import main

sys.exit(main())
