import sys

from esckit.cli import main

sys.exit(main())
