"""Global invariants re-checked from the event trace alone.

The monitor rebuilds entity ownership by folding the effects recorded on
every successful contract execution, so it shares no state with the ledgers
it audits.  Feed records live during a run or replay a ``trace.jsonl``.
"""
from __future__ import annotations

import json
from pathlib import Path

PHASE_ORDER = {"Rejected": -1, "Burned": 0, "Claimed": 1, "Confirmed": 2}


class InvariantMonitor:
    def __init__(self):
        self.total: int | None = None
        # entity -> ("own", chain, user) | ("transit", burn) | ("lock", burn)
        self.where: dict[int, tuple] = {}
        self.in_transit: dict[str, set] = {}
        self.locked: dict[str, set] = {}
        self.claimed: set[str] = set()
        self.unlocked: set[str] = set()
        self.phases: dict[str, str] = {}
        self.heads: dict[tuple[int, int], int] = {}
        self.heights: dict[int, int] = {}
        self.violations: list[str] = []
        self.records = 0

    def _fail(self, rec, msg):
        self.violations.append(f"t={rec.get('time')} chain={rec.get('chain')}: {msg}")

    def feed(self, rec: dict):
        self.records += 1
        handler = getattr(self, "_on_" + rec.get("kind", ""), None)
        if handler is not None:
            handler(rec)

    def _put(self, rec, e, loc):
        if e in self.where:
            self._fail(rec, f"entity {e} placed at {loc} while at {self.where[e]}")
        if self.total is not None and not 0 <= e < self.total:
            self._fail(rec, f"entity {e} outside the asset")
        self.where[e] = loc

    def _move(self, rec, e, expect, loc):
        if self.where.get(e) != expect:
            self._fail(rec, f"entity {e} expected at {expect}, found {self.where.get(e)}")
        self.where.pop(e, None)
        self._put(rec, e, loc)

    def _on_genesis(self, rec):
        d = rec["details"]
        if self.total is None:
            self.total = d["totalSupply"]
        for user, ids in d["owners"].items():
            for e in ids:
                self._put(rec, e, ("own", rec["chain"], user))

    def _on_tx_executed(self, rec):
        d = rec["details"]
        if not d["status"]:
            if d["effects"]:
                self._fail(rec, f"failed {d['txKind']} has effects")
            return
        chain = rec["chain"]
        debited: dict[int, tuple] = {}
        for eff in d["effects"]:
            op = eff[0]
            if op == "debit":
                _, user, ids = eff
                for e in ids:
                    if self.where.get(e) != ("own", chain, user):
                        self._fail(rec, f"debit of entity {e} not owned by {user} on {chain}")
                    debited[e] = self.where.pop(e, None)
            elif op == "credit":
                _, user, ids = eff
                for e in ids:
                    if debited.pop(e, None) is None:
                        self._fail(rec, f"credit of entity {e} that was not debited")
                    self._put(rec, e, ("own", chain, user))
            elif op in ("burn", "lock"):
                _, burn, ids = eff
                if op == "burn" and (burn in self.in_transit or burn in self.claimed):
                    self._fail(rec, f"burn {burn[:12]} recorded twice")
                (self.in_transit if op == "burn" else self.locked)[burn] = set(ids)
                tag = "transit" if op == "burn" else "lock"
                for e in ids:
                    if debited.pop(e, None) is None:
                        self._fail(rec, f"{op} of entity {e} that was not debited")
                    self._put(rec, e, (tag, burn))
            elif op == "mint":
                _, burn, user, ids = eff
                if burn in self.claimed:
                    self._fail(rec, f"burn {burn[:12]} claimed twice")
                elif burn not in self.in_transit:
                    self._fail(rec, f"claim of {burn[:12]} without a preceding successful burn")
                pool = self.in_transit.get(burn, set())
                for e in ids:
                    pool.discard(e)
                    self._move(rec, e, ("transit", burn), ("own", chain, user))
            elif op == "unlock":
                _, burn, user, ids = eff
                if burn in self.unlocked:
                    self._fail(rec, f"stake of {burn[:12]} paid twice")
                stake = self.locked.pop(burn, None)
                if stake != set(ids):
                    self._fail(rec, f"unlock of {burn[:12]} does not match its locked stake")
                self.unlocked.add(burn)
                for e in ids:
                    self._move(rec, e, ("lock", burn), ("own", chain, user))
            else:
                self._fail(rec, f"unknown effect {op!r}")
        for e in debited:
            self._fail(rec, f"entity {e} debited and never placed")
        if d["txKind"] == "claim":
            burn = d["refs"].get("burnTx")
            left = self.in_transit.pop(burn, set())
            if left:
                self._fail(rec, f"claim of {burn[:12]} left {sorted(left)} unaccounted")
            self.claimed.add(burn)

    def _on_block(self, rec):
        chain, number = rec["chain"], rec["details"]["number"]
        prev = self.heights.get(chain)
        if prev is not None and number != prev + 1:
            self._fail(rec, f"block height {number} after {prev}")
        self.heights[chain] = number
        if self.total is not None and len(self.where) != self.total:
            self._fail(rec, f"accounted supply {len(self.where)} != {self.total}")

    def _on_relay_sync(self, rec):
        d = rec["details"]
        key = (d["hostChain"], d["remoteChain"])
        if d["mainHeadHeight"] < self.heads.get(key, -1):
            self._fail(rec, f"relay {key} head height went backwards")
        self.heads[key] = d["mainHeadHeight"]

    def _on_transfer(self, rec):
        d = rec["details"]
        burn, phase = d["burnTx"], d["phase"]
        prev = self.phases.get(burn)
        if prev is not None and PHASE_ORDER[phase] <= PHASE_ORDER[prev]:
            self._fail(rec, f"transfer {burn[:12]} went {prev} -> {phase}")
        self.phases[burn] = phase

    def owners(self) -> dict[int, tuple]:
        return {e: loc[1:] for e, loc in self.where.items() if loc[0] == "own"}

    def final_check(self) -> list[str]:
        """End of run: the census is complete and each entity sits in one place."""
        if self.total is None:
            return []
        missing = set(range(self.total)) - set(self.where)
        return [f"entities {sorted(missing)[:5]} unaccounted at run end"] if missing else []


def replay(records) -> InvariantMonitor:
    mon = InvariantMonitor()
    for rec in records:
        mon.feed(rec)
    return mon


def read_trace(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def check_trace(path) -> list[str]:
    mon = replay(read_trace(path))
    return mon.violations + mon.final_check()
