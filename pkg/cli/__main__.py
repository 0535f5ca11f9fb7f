"""
Entry point для запуска CLI.
Используйте: python -m cli <command> [flags]
"""

import sys

from cli.main import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
