#!/usr/bin/env python3
"""Penalized runs for the three penalty parameter sets (writes experiment2_out/)."""
import sys

from meshshape.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "2", *sys.argv[1:]]))
