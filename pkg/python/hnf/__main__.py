import sys

from hnf.cli import main

sys.exit(main())
