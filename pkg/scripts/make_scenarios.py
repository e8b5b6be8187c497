"""Regenerate the JSON scenarios shipped in scenarios/."""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios"


def two_chains(k=5, timing="fixed"):
    return [{"id": c, "interBlockSeconds": 15, "confirmations": k, "timing": timing, "maxTxPerBlock": None}
            for c in (1, 2)]


def relays(pairs, lag=1):
    return [{"host": h, "remote": r, "lagBlocks": lag, "fee": 0, "pauses": []} for h, r in pairs]


def params(**kw):
    base = {"claimTimeoutBlocks": 10, "confirmTimeoutBlocks": 40, "feeEntityCount": 1, "minConfirmations": 5}
    base.update(kw)
    return base


def bulk(protocol, n=500, per_block=10):
    y = 1 if protocol == 2 else 0
    return {
        "name": f"bulk_p{protocol}",
        "seed": 7,
        "protocol": protocol,
        "chains": two_chains(),
        "registry": {"1": "asset-1", "2": "asset-2"},
        "genesisOwnership": [{"chain": 1, "user": "alice", "count": n * (1 + y)}],
        "agents": [],
        "transfers": [{"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 1, "y": y,
                       "submitTime": 7.5 + 15 * (i // per_block)} for i in range(n)],
        "params": params(),
        "relays": relays([(2, 1), (1, 2)]),
        "horizonSeconds": None,
    }


def example():
    return {
        "name": "example",
        "seed": 1,
        "protocol": 2,
        "chains": two_chains(),
        "registry": {"1": "asset-1", "2": "asset-2"},
        "genesisOwnership": [{"chain": 1, "user": "alice", "count": 6}, {"chain": 2, "user": "bob", "count": 2}],
        "agents": [{"user": "alice", "behavior": "HonestSender"}, {"user": "bob", "behavior": "HonestRecipient"}],
        "transfers": [
            {"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 2, "y": 1, "submitTime": 7.5},
            {"sender": "bob", "recipient": "alice", "src": 2, "dest": 1, "x": 1, "y": 1, "submitTime": 22.5},
            {"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 1, "y": 0, "submitTime": 37.5},
        ],
        "params": params(),
        "relays": relays([(2, 1), (1, 2)]),
        "horizonSeconds": None,
    }


def stochastic():
    cfg = bulk(2, n=100)
    cfg.update(name="stochastic_p2", chains=two_chains(timing="exponential"))
    return cfg


def attack():
    chains = two_chains() + [{"id": 3, "interBlockSeconds": 15, "confirmations": 5, "timing": "fixed",
                              "maxTxPerBlock": None}]
    return {
        "name": "attack",
        "seed": 3,
        "protocol": 2,
        "chains": chains,
        "registry": {"1": "asset-1", "2": "asset-2", "3": "asset-3"},
        "genesisOwnership": [{"chain": 1, "user": "alice", "count": 12}, {"chain": 1, "user": "mallory", "count": 4},
                             {"chain": 2, "user": "carol", "count": 2}],
        "agents": [],
        "transfers": [{"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 1, "y": 1,
                       "submitTime": 7.5 + 30 * i} for i in range(4)]
        + [{"sender": "carol", "recipient": "alice", "src": 2, "dest": 1, "x": 1, "y": 0, "submitTime": 12.0}],
        "params": params(),
        "relays": relays([(2, 1), (1, 2), (3, 1)]),
        "attack": {"user": "mallory", "src": 1, "dest": 2, "third": 3, "startTime": 0, "attempts": 3},
        "horizonSeconds": 3000,
    }


def withholder():
    return {
        "name": "withholder",
        "seed": 5,
        "protocol": 2,
        "chains": two_chains(),
        "registry": {"1": "asset-1", "2": "asset-2"},
        "genesisOwnership": [{"chain": 1, "user": "alice", "count": 40}],
        "agents": [{"user": "bob", "behavior": "ByzantineWithholder"},
                   {"user": "alice", "behavior": "ByzantineWithholder"},
                   {"user": "dave", "behavior": "AltruisticFinalizer"}],
        "transfers": [{"sender": "alice", "recipient": "bob", "src": 1, "dest": 2, "x": 2, "y": 2,
                       "submitTime": 7.5 + 15 * i} for i in range(10)],
        "params": params(),
        "relays": relays([(2, 1), (1, 2)]),
        "horizonSeconds": None,
    }


def main():
    OUT.mkdir(exist_ok=True)
    for cfg in (bulk(2), bulk(1), example(), stochastic(), attack(), withholder()):
        (OUT / f"{cfg['name']}.json").write_text(json.dumps(cfg, indent=2) + "\n")
        print("wrote", OUT / f"{cfg['name']}.json")


if __name__ == "__main__":
    main()
