import sys

from rqa_pinn.cli import main

sys.exit(main())
