import sys

from pathharden.cli import main

sys.exit(main())
