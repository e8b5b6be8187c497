"""Mean transfer duration per protocol across relay lags and timing modes.

    python3 scripts/durations.py [--n 50] [--lags 1 2 3 4 5 6] [--csv out.csv]
"""
import argparse
import csv
import sys

from xchain.config import parse_config
from xchain.harness import run_scenario


def scenario(protocol, lag, timing, n, seed):
    chains = [{"id": c, "interBlockSeconds": 15, "confirmations": 5, "timing": timing} for c in (1, 2)]
    return {
        "name": f"p{protocol}-lag{lag}-{timing}", "seed": seed, "protocol": protocol, "chains": chains,
        "registry": {"1": "asset-1", "2": "asset-2"},
        "genesisOwnership": [{"chain": 1, "user": "alice", "count": 2 * n}],
        "transfers": [{"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 1,
                       "y": 1 if protocol == 2 else 0, "submitTime": 7.5 + 15 * i} for i in range(n)],
        "relays": [{"host": h, "remote": r, "lagBlocks": lag} for h, r in ((2, 1), (1, 2))],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--lags", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args(argv)

    rows = []
    for timing in ("fixed", "exponential"):
        for lag in args.lags:
            for protocol in (1, 2):
                report = run_scenario(parse_config(scenario(protocol, lag, timing, args.n, args.seed)))
                st = report.duration_stats
                rows.append({"timing": timing, "lag": lag, "protocol": protocol,
                             "total_mean": st["total"]["mean"], "total_std": st["total"]["stddev"],
                             "burn_relay_mean": st["burn"]["relay"]["mean"],
                             "claim_inclusion_mean": st["claim"]["inclusion"]["mean"]})
    print(f"{'timing':12}{'lag':>4}{'P':>3}{'total':>10}{'std':>8}{'relay':>8}")
    for r in rows:
        print(f"{r['timing']:12}{r['lag']:>4}{r['protocol']:>3}{r['total_mean']:>10.1f}"
              f"{r['total_std']:>8.1f}{r['burn_relay_mean']:>8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
