import sys

from pdnskit.cli import main

sys.exit(main())
