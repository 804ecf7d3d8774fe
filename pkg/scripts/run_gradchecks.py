#!/usr/bin/env python3
"""Run every finite-difference gradient verification suite and exit
nonzero if any max relative error reaches 1e-4."""

import sys

from l2okit.cli import main

if __name__ == "__main__":
    sys.exit(main(["gradcheck"]))
