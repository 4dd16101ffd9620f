"""Recompute the published nausea-trial results and compare them with the printed values."""
import argparse
import sys

from mcpanova.reproduce import WHICH, reproduce


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("which", nargs="?", choices=WHICH, default="all")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    rep = reproduce(args.which, args.seed)
    print(rep.to_json() if args.json else rep.to_text())
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
