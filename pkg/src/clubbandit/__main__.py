import sys

from clubbandit.cli import main

sys.exit(main())
