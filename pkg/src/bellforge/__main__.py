"""Module entry point: python -m bellforge <command> ..."""

import sys

from .cli import main

sys.exit(main())
