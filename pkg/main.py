"""
Root-level entry point: ``python main.py <command> [options]``.
"""

from src.cli import main

if __name__ == "__main__":
    main()
