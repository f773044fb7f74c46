import sys

from formalnets.cli import main

sys.exit(main())
