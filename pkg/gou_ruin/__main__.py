import sys

from gou_ruin.main import main

sys.exit(main())
