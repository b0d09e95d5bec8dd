import sys

from qkrlab.cli import main

sys.exit(main())
