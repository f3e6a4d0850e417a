import sys

from nambukit.cli import main

sys.exit(main())
