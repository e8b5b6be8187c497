"""Monte-Carlo inclusion delay for uniformly timed submissions.

Fixed blocks give a mean of half the interval; exponential blocks give a
mean close to the full interval, since the wait is memoryless.
"""
import argparse
import random
import statistics
import sys

from xchain.chain import ChainConfig, Network
from xchain.model import ContractAddress, Receipt, Transaction


class Echo:
    def execute(self, tx, ctx):
        return Receipt(tx.id, True, ())


def delays(timing, n, gap, seed):
    net = Network([ChainConfig(1, inter_block_seconds=gap, timing=timing)], seed=seed)
    net.chain(1).register_contract(ContractAddress(1, "echo"), Echo())
    rng = random.Random(seed)
    span = n * gap
    times = sorted(rng.uniform(0, span) for _ in range(n))
    txs = [Transaction.create("u", i, ContractAddress(1, "echo"), (i,)) for i in range(n)]
    for t, tx in zip(times, txs):
        net.scheduler.schedule(t, 100, lambda now, tx=tx: net.submit_tx(1, tx))
    net.run(span + 50 * gap)
    return [net.chain(1).locate(tx.id).header.timestamp - t for t, tx in zip(times, txs)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--gap", type=float, default=15.0)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)
    for timing in ("fixed", "exponential"):
        d = delays(timing, args.n, args.gap, args.seed)
        print(f"{timing:12} n={len(d)} mean={statistics.fmean(d):.3f}s std={statistics.pstdev(d):.3f}s "
              f"max={max(d):.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
