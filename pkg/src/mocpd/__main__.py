import sys

from mocpd.cli import main

sys.exit(main())
