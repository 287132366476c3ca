import sys

from iotmesh.cli import main

sys.exit(main())
