import sys

from patspec.cli import main

sys.exit(main())
