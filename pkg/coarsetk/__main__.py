import sys

from coarsetk.cli import main

sys.exit(main())
