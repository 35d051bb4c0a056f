#!/usr/bin/env python3
"""Unpenalized metric comparison on the coarse disc (writes experiment1_out/)."""
import sys

from meshshape.cli import main

if __name__ == "__main__":
    sys.exit(main(["experiment", "1", *sys.argv[1:]]))
