import sys

from src.free_actions.api.app import main

if __name__ == "__main__":
    sys.exit(main())
