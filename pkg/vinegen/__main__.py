import sys

from vinegen.main import main

sys.exit(main())
