"""One scenario's simulated world: chains, asset contracts, relays, agents, trace."""
from __future__ import annotations

from collections import Counter

from .chain import Network
from .codec import to_jsonable
from .config import ScenarioConfig, TransferSpec
from .invariants import InvariantMonitor
from .model import ContractAddress, Transaction
from .protocol import (
    BURNED,
    CLAIMED,
    CONFIRMED,
    AssetContract,
    AssetLedger,
    Outcome,
    TransferRecord,
    total_accounted_supply,
)
from .relay import Relayer, RelayState

# scheduler keys; chain block events use the chain id, everything else runs after them
KEY_RELAYER = 1 << 40
KEY_AGENT = 1 << 41

LEGS = ("burn", "claim", "confirm")


class Trace:
    def __init__(self, monitor: InvariantMonitor | None = None):
        self.records: list[dict] = []
        self.monitor = monitor

    def emit(self, time, chain, kind, tx_id=None, block_hash=None, **details):
        rec = {"time": time, "chain": chain, "kind": kind}
        if tx_id is not None:
            rec["txId"] = tx_id.hex() if isinstance(tx_id, bytes) else tx_id
        if block_hash is not None:
            rec["blockHash"] = block_hash.hex()
        rec["details"] = to_jsonable(details)
        self.records.append(rec)
        if self.monitor is not None:
            self.monitor.feed(rec)
        return rec


class TransferTracker:
    """Follows every successful burn on an authorized contract through its phases."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        self.records: dict[str, TransferRecord] = {}
        self.rejected: list[TransferRecord] = []
        self.rejected_ids: set[str] = set()
        self.block_of: dict[str, dict[str, bytes]] = {}
        self._conf_watch: dict[int, list] = {}
        self._relay_watch: list = []

    def all_records(self) -> list[TransferRecord]:
        return list(self.records.values()) + self.rejected

    def done(self, rec: TransferRecord) -> bool:
        if rec.phase == "Rejected":
            return True
        last = "claim" if self.sim.protocol == 1 else "confirm"
        return f"{last}Confirmed" in rec.times

    def _emit(self, rec: TransferRecord, time: float):
        self.sim.trace.emit(time, rec.src, "transfer", tx_id=rec.burn_tx_id, burnTx=rec.burn_tx_id,
                            phase=rec.phase)

    def on_block(self, chain, block, outcomes: list[Outcome]):
        sim, t, height = self.sim, block.header.timestamp, block.header.number
        for out in outcomes:
            txh = out.tx_id.hex()
            if out.kind == "burn" and out.status:
                rec = TransferRecord(txh, out.submitter, out.refs["recipient"], chain.id, out.refs["dest"],
                                     tuple(out.refs["x"]), tuple(out.refs["y"]))
                self.records[txh] = rec
                self._included(rec, "burn", out.tx_id, chain, block)
                self._emit(rec, t)
            elif out.kind == "burn" and out.tx_id in sim.scheduled_burns:
                spec = sim.scheduled_burns[out.tx_id]
                rec = TransferRecord(txh, spec.sender, spec.recipient, spec.src, spec.dest,
                                     tuple(out.refs.get("x", ())), tuple(out.refs.get("y", ())), phase="Rejected")
                rec.rejection_code = out.code
                rec.times["burnSubmit"] = sim.net.submit_times[out.tx_id]
                self.rejected.append(rec)
                self.rejected_ids.add(txh)
                self._emit(rec, t)
            elif out.kind == "claim" and out.status:
                rec = self.records[out.refs["burnTx"]]
                rec.advance(CLAIMED)
                rec.claim_tx_id = txh
                rec.fee_paid = tuple(out.refs["fee"])
                self._included(rec, "claim", out.tx_id, chain, block)
                self._emit(rec, t)
            elif out.kind == "confirm" and out.status:
                rec = self.records.get(out.refs["burnTx"])
                if rec is None or rec.phase != CLAIMED:
                    continue
                rec.advance(CONFIRMED)
                rec.confirm_tx_id = txh
                if "beneficiary" in out.refs:
                    ben = out.refs["beneficiary"]
                    rec.stake_outcome = "ReturnedToSender" if ben == rec.sender else f"PaidToConfirmer({ben})"
                self._included(rec, "confirm", out.tx_id, chain, block)
                self._emit(rec, t)

        due = [w for w in self._conf_watch.get(chain.id, []) if w[0] <= height]
        if due:
            self._conf_watch[chain.id] = [w for w in self._conf_watch[chain.id] if w[0] > height]
        for _target, rec, leg, bh in due:
            rec.times[f"{leg}Confirmed"] = t
            rec.durations[f"{leg}Confirmation"] = t - rec.times[f"{leg}Included"]
            host = {"burn": rec.dest, "claim": rec.src}.get(leg)
            if leg == "burn" or (leg == "claim" and sim.protocol == 2):
                self._relay_watch.append((host, chain.id, bh, rec, leg))

        keep = []
        for w in self._relay_watch:
            host, remote, bh, rec, leg = w
            relay = sim.relays.get((host, remote))
            if host == chain.id and relay is not None:
                depth = relay.confirmations(bh)
                if depth is not None and depth >= sim.params.min_confirmations:
                    rec.times[f"{leg}RelayReady"] = t
                    rec.durations[f"{leg}Relay"] = t - rec.times[f"{leg}Confirmed"]
                    continue
            keep.append(w)
        self._relay_watch = keep

    def _included(self, rec, leg, tx_id, chain, block):
        t = block.header.timestamp
        rec.times[f"{leg}Submit"] = self.sim.net.submit_times[tx_id]
        rec.times[f"{leg}Included"] = t
        rec.durations[f"{leg}Inclusion"] = t - rec.times[f"{leg}Submit"]
        self.block_of.setdefault(rec.burn_tx_id, {})[leg] = block.hash
        target = block.header.number + chain.config.confirmations
        self._conf_watch.setdefault(chain.id, []).append((target, rec, leg, block.hash))

    def finalize(self):
        legs = ("burn", "claim") if self.sim.protocol == 1 else LEGS
        parts = []
        for leg in legs:
            parts += [f"{leg}Inclusion", f"{leg}Confirmation"]
            if leg != legs[-1]:
                parts.append(f"{leg}Relay")
        for rec in self.records.values():
            if self.done(rec) and all(p in rec.durations for p in parts):
                rec.durations["total"] = sum(rec.durations[p] for p in parts)
                end = rec.times[f"{legs[-1]}Confirmed"]
                rec.durations["elapsed"] = end - rec.times["burnSubmit"]


class Simulation:
    def __init__(self, cfg: ScenarioConfig, agent_factory=None):
        from .agents import build_agents

        self.cfg = cfg
        self.params = cfg.params
        self.protocol = cfg.protocol
        self.monitor = InvariantMonitor()
        self.trace = Trace(self.monitor)
        self.net = Network(cfg.chains, seed=cfg.seed)
        self.registry = {cid: ContractAddress(cid, addr) for cid, addr in cfg.registry.items()}
        self.contracts: dict[int, AssetContract] = {}
        self.relays: dict[tuple[int, int], RelayState] = {}
        self.relayers: list[Relayer] = []
        self.nonces: Counter = Counter()
        self.scheduled_burns: dict[bytes, TransferSpec] = {}
        self.pending_transfers = len(cfg.transfers)
        self.skipped: list[TransferSpec] = []
        self._unsettled: list[bytes] = []
        self.violations: list[str] = []
        self.warnings: list[str] = []
        self._outcomes: dict[int, list[Outcome]] = {cid: [] for cid in self.net.chains}
        self._heads: dict[tuple[int, int], int] = {}
        self.total_supply = cfg.total_supply
        self.tracker = TransferTracker(self)

        for cid in sorted(self.net.chains):
            ledger = AssetLedger(cid, self.registry[cid], self.registry, cfg.params)
            contract = AssetContract(ledger)
            contract.listeners.append(self._on_outcome)
            self.contracts[cid] = contract
            self.net.chain(cid).register_contract(self.registry[cid], contract)

        owners: dict[int, dict[str, list[int]]] = {}
        next_id = 0
        for chain, user, count in cfg.genesis:
            ids = list(range(next_id, next_id + count))
            next_id += count
            self.contracts[chain].ledger.holdings(user).update(ids)
            owners.setdefault(chain, {}).setdefault(user, []).extend(ids)
        for cid in sorted(self.net.chains):
            self.trace.emit(0.0, cid, "genesis", contract=self.registry[cid].addr,
                            owners=owners.get(cid, {}), totalSupply=self.total_supply)

        for spec in cfg.relays:
            remote = self.net.chain(spec.remote)
            relay = RelayState(spec.host, spec.remote, remote.blocks[0].header,
                               lag_blocks=spec.lag_blocks, fee_per_verification=spec.fee)
            self.relays[(spec.host, spec.remote)] = relay
            self.contracts[spec.host].relays[spec.remote] = relay
            self._heads[(spec.host, spec.remote)] = relay.main_head_height
            self.net.chain(spec.host).pre_block_hooks.append(lambda ctx, r=relay: r.on_host_block(ctx.time))
            relayer = Relayer(relay, remote, pauses=list(spec.pauses), name=f"relayer:{spec.host}<-{spec.remote}")
            self.relayers.append(relayer)
            remote.post_block_hooks.append(lambda ch, blk, r=relayer: r.step(blk.header.timestamp))
            for _start, end in spec.pauses:
                self.net.scheduler.schedule(end, KEY_RELAYER, lambda t, r=relayer: r.step(t))

        for cid in sorted(self.net.chains):
            self.net.chain(cid).post_block_hooks.append(self._after_block)

        self.agents = (agent_factory or build_agents)(self)
        for i, spec in enumerate(cfg.transfers):
            self.net.scheduler.schedule(spec.submit_time, KEY_AGENT + i, lambda t, s=spec: self._start_transfer(s))

    # public, agent-facing surface
    @property
    def now(self) -> float:
        return self.net.scheduler.now

    def chain(self, cid: int):
        return self.net.chain(cid)

    def ledger(self, cid: int) -> AssetLedger:
        return self.contracts[cid].ledger

    def relay(self, host: int, remote: int) -> RelayState | None:
        return self.relays.get((host, remote))

    def relay_ready(self, host: int, remote: int, block_hash: bytes, depth: int | None = None) -> bool:
        relay = self.relays.get((host, remote))
        if relay is None:
            return False
        conf = relay.confirmations(block_hash)
        need = self.params.min_confirmations if depth is None else depth
        return conf is not None and conf >= need

    def submit(self, user: str, chain: int, payload: tuple, target: ContractAddress | None = None) -> Transaction:
        """Sign as ``user`` and send to ``chain``; the default target is the registered contract."""
        tx = Transaction.create(user, self.nonces[user], target or self.registry[chain], payload)
        self.nonces[user] += 1
        self.net.submit_tx(chain, tx)
        self.trace.emit(self.now, chain, "tx_submitted", tx_id=tx.id, signer=user, txKind=tx.kind,
                        target=str(tx.target))
        return tx

    def deploy(self, address: ContractAddress, contract):
        self.net.chain(address.chain).register_contract(address, contract)

    def warn(self, msg: str):
        self.warnings.append(msg)

    def agent(self, user: str):
        return self.agents[user]

    # internals
    def _start_transfer(self, spec: TransferSpec):
        self.pending_transfers -= 1
        tx = self.agents[spec.sender].start_transfer(spec)
        if tx is None:
            self.skipped.append(spec)
            self.warn(f"transfer {spec.sender}->{spec.recipient} at {spec.submit_time}: insufficient balance, skipped")
        else:
            self.scheduled_burns[tx.id] = spec
            self._unsettled.insert(0, tx.id)

    def _on_outcome(self, out: Outcome):
        self._outcomes[out.chain].append(out)
        self.trace.emit(out.time, out.chain, "tx_executed", tx_id=out.tx_id, txKind=out.kind,
                        status=out.status, code=out.code, submitter=out.submitter, height=out.height,
                        ops=out.ops, effects=out.effects, refs=out.refs)

    def _after_block(self, chain, block):
        t = block.header.timestamp
        self.trace.emit(t, chain.id, "block", block_hash=block.hash, number=block.header.number,
                        txCount=len(block.transactions))
        outcomes, self._outcomes[chain.id] = self._outcomes[chain.id], []
        self.tracker.on_block(chain, block, outcomes)
        for (host, remote), relay in sorted(self.relays.items()):
            if host == chain.id and relay.main_head_height != self._heads[(host, remote)]:
                self._heads[(host, remote)] = relay.main_head_height
                self.trace.emit(t, host, "relay_sync", hostChain=host, remoteChain=remote,
                                mainHeadHeight=relay.main_head_height)
        self._census(t, chain.id)
        for user in sorted(self.agents):
            self.agents[user].on_block(chain, block)

    def _census(self, t, cid):
        ledgers = [c.ledger for c in self.contracts.values()]
        records = list(self.tracker.records.values())
        total = total_accounted_supply(ledgers, records)
        self.trace.emit(t, cid, "supply", totalAccountedSupply=total)
        if total != self.total_supply:
            self.violations.append(f"t={t} chain={cid}: totalAccountedSupply {total} != {self.total_supply}")
        seen = Counter()
        for led in ledgers:
            seen.update(led.all_owned())
            seen.update(led.all_locked())
        for r in records:
            if r.phase == BURNED:
                seen.update(r.x)
        dupes = [e for e, n in seen.items() if n > 1]
        if dupes:
            self.violations.append(f"t={t} chain={cid}: entities {sorted(dupes)[:5]} held twice")

    def transfers_settled(self) -> bool:
        """Every scheduled transfer was submitted and reached its last phase."""
        if self.pending_transfers:
            return False
        while self._unsettled:
            tx_id = self._unsettled[-1]
            rec = self.tracker.records.get(tx_id.hex())
            if rec is None and tx_id.hex() not in self.tracker.rejected_ids:
                return False
            if rec is not None and not self.tracker.done(rec):
                return False
            self._unsettled.pop()
        return True

    def finished(self) -> bool:
        return self.transfers_settled() and all(a.done() for a in self.agents.values())

    def run(self):
        horizon = self.cfg.horizon()
        if self.cfg.horizon_seconds is not None:
            # an explicit horizon is a run length, not just a safety net
            self.net.run(horizon)
            completed = self.finished()
        else:
            completed = self.finished() or self.net.run(horizon, stop=self.finished)
        self.net.running = False
        if not completed:
            self.warn(f"horizon {horizon}s reached before every transfer finished")
        self.tracker.finalize()
        self._final_warnings()
        return self

    def _final_warnings(self):
        for rec in self.tracker.records.values():
            if rec.phase == BURNED:
                self.warn(f"burn {rec.burn_tx_id[:12]} never claimed; stake {list(rec.y)} stays locked")
            elif rec.phase == CLAIMED and self.protocol == 2:
                self.warn(f"claim of burn {rec.burn_tx_id[:12]} never confirmed; stake {list(rec.y)} stays locked")
        for relay in self.relays.values():
            for source, why in relay.rejected:
                self.warn(f"relay {relay.host_chain}<-{relay.remote_chain} rejected header from {source}: {why}")
        self.violations.extend(self.monitor.violations)
        self.violations.extend(self.monitor.final_check())
        holders = Counter()
        for led in (c.ledger for c in self.contracts.values()):
            for e in set(led.all_owned()) | set(led.all_locked()):
                holders[e] += 1
        for r in self.tracker.records.values():
            if r.phase == BURNED:
                holders.update(r.x)
        bad = [e for e in range(self.total_supply) if holders[e] != 1]
        if bad:
            self.violations.append(f"run end: entities {bad[:5]} not held on exactly one chain")
