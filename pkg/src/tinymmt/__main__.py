import sys

from tinymmt.cli import main

sys.exit(main())
