#!/usr/bin/env python3
"""
QSME Stability - command-line entry point

Usage:
    python run_qsme.py check --model config/models/qubit_fig1_left.json
    python run_qsme.py rates --model config/models/three_level_driven.json --out outputs/rates
    python run_qsme.py simulate --model config/models/qubit_fig1_left.json --t-final 5
    python run_qsme.py ensemble --model config/models/qubit_fig1_left.json --n-traj 8
    python run_qsme.py exponent --model config/models/qubit_fig1_right.json --n-traj 32 --t-final 7
    python run_qsme.py reproduce-fig1 --out outputs/fig1
"""

import sys

from src.cli.commands import main

if __name__ == "__main__":
    sys.exit(main())
