import sys

from bwgrape.cli import main

sys.exit(main())
