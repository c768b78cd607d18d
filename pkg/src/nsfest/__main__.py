"""Run the command-line interface with ``python -m nsfest``."""

import sys

from .cli import main

sys.exit(main())
