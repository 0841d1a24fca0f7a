#!/usr/bin/env python3
"""
Noisy-label streaming multi-label learner
Main entry point
"""

import sys
import os

# Add the current directory to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli import main as cli_main


def main():
    """Main entry point"""
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
