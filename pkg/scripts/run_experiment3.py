#!/usr/bin/env python3
"""Unpenalized elasticity vs rank-one metric on finer discs (writes experiment3_out/)."""
import sys

from meshshape.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "3", *sys.argv[1:]]))
