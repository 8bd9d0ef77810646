"""monogamy_qkd command-line application.

Security analysis of the CHSH key-distribution protocol when the only
assumption about the eavesdropper is a Bell-monogamy relation.

Usage:
  python3 cli_app.py critical-beta ns
  python3 cli_app.py curve --step 0.001 > curves.csv
  python3 cli_app.py lp-verify --step 0.05
  python3 cli_app.py simulate --beta 0.9 --rounds 100000 --seed 7 --adversary ns

Run `python3 cli_app.py --help` for every subcommand.
"""
import sys

from monogamy_qkd.cli import main

if __name__ == "__main__":
    sys.exit(main())
