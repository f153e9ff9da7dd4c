import sys

from kcore_lab.harness import main

sys.exit(main())
