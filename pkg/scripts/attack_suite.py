"""Run every scripted attack against a scenario and tabulate the outcome.

Exits non-zero if any attack succeeds or any run breaks an invariant.
"""
import argparse
import sys
from pathlib import Path

from xchain.agents import ATTACKS
from xchain.config import load_config
from xchain.harness import run_attack

DEFAULT = Path(__file__).resolve().parent.parent / "scenarios" / "attack.json"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=DEFAULT)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    cfg = load_config(args.config, seed=args.seed)

    bad = 0
    print(f"{'attack':16}{'tried':>6}{'won':>5}  rejection codes")
    for kind in sorted(ATTACKS):
        outcome, report = run_attack(kind, cfg)
        codes = ", ".join(f"{c}x{n}" for c, n in sorted(outcome.rejection_codes.items()))
        print(f"{kind:16}{outcome.attempted:>6}{outcome.succeeded:>5}  {codes}")
        bad += outcome.succeeded > 0 or not report.ok
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
