import sys

from silent_tracker.cli import main

sys.exit(main())
