"""Print one PASS/FAIL line per acceptance criterion; exit 4 if any fails."""
import sys

from hardyp.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify"]))
