"""Allow ``python -m higsfa``."""

import sys

from .cli import main

sys.exit(main())
