import sys

from fusecal.main import main

sys.exit(main())
