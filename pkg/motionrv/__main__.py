import sys

from motionrv.cli import main

sys.exit(main())
