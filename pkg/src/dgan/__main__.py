import sys

from dgan.cli import main

sys.exit(main())
