"""Scripted participants: honest users, altruistic and rational finalizers, adversaries.

Agents only look at what any off-chain client could: blocks of every chain,
relay state and the public ledger of each asset contract.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

from .config import AgentSpec, TransferSpec
from .codec import encode
from .merkle import InclusionProofBundle, build_tree, prove_membership
from .model import ContractAddress, Receipt, Transaction, XChainError
from .protocol import INCLUSION_FAILED, ClaimPayload, MimicAssetContract


class UnknownAttack(XChainError, KeyError):
    pass


@dataclass
class AttackOutcome:
    attack: str
    attempted: int = 0
    succeeded: int = 0
    rejection_codes: dict = field(default_factory=dict)
    pending: int = 0


def _flip(b: bytes) -> bytes:
    return bytes([b[0] ^ 1]) + b[1:] if b else b"\x01"


def _honest_burns(block, registry):
    """(tx, receipt) of every successful burn on the chain's authorized contract."""
    addr = registry.get(block.header.chain)
    for tx, rc in zip(block.transactions, block.receipts):
        if tx.target == addr and rc.status and tx.kind == "burn":
            yield tx, rc


def _successful(block, registry, kind):
    addr = registry.get(block.header.chain)
    for tx, rc in zip(block.transactions, block.receipts):
        if tx.target == addr and rc.status and tx.kind == kind:
            yield tx


class Agent:
    def __init__(self, spec: AgentSpec, sim):
        self.spec = spec
        self.user = spec.user
        self.sim = sim
        self.reserved: dict[int, set] = {}

    def active(self) -> bool:
        return self.spec.active(self.sim.now)

    def done(self) -> bool:
        return True

    def on_block(self, chain, block):
        pass

    def pick(self, chain: int, n: int) -> list[int]:
        free = sorted(self.sim.ledger(chain).owned.get(self.user, set()) - self.reserved.get(chain, set()))
        return free[:n]

    def start_transfer(self, t: TransferSpec) -> Transaction | None:
        """Submit the burn for a scheduled transfer; None if the balance is short."""
        ents = self.pick(t.src, t.x + t.y)
        if len(ents) < t.x + t.y:
            return None
        x, y = ents[:t.x], ents[t.x:]
        self.reserved.setdefault(t.src, set()).update(ents)
        tx = self.sim.submit(self.user, t.src, ("burn", t.recipient, t.dest, tuple(x), tuple(y)))
        self.sent_burn(tx, t)
        return tx

    def sent_burn(self, tx, t):
        pass

    def _release_reserved(self, block):
        mine = self.reserved.get(block.header.chain)
        if not mine:
            return
        for tx in block.transactions:
            if tx.signer == self.user and tx.kind == "burn":
                _, _, _, x, y = tx.payload
                mine.difference_update(x)
                mine.difference_update(y)

    def claim(self, burn_tx: Transaction, src: int, dest: int) -> Transaction:
        bundle = self.sim.chain(src).proof_bundle(burn_tx.id)
        return self.sim.submit(self.user, dest, ClaimPayload(burn_tx, bundle).to_payload())

    def confirm(self, claim_tx: Transaction, dest: int, src: int) -> Transaction:
        bundle = self.sim.chain(dest).proof_bundle(claim_tx.id)
        return self.sim.submit(self.user, src, ("confirm", claim_tx, bundle))


class Finalizer(Agent):
    """Shared bookkeeping: which burns await a claim and which claims await a confirm.

    Subclasses decide which items to act on through ``wants_claim`` and
    ``wants_confirm``.
    """

    def __init__(self, spec, sim):
        super().__init__(spec, sim)
        self.burns: dict[bytes, tuple] = {}     # burn id -> (tx, src, dest, block hash)
        self.claims: dict[bytes, tuple] = {}    # claim id -> (tx, burn tx, src, dest, block hash)
        self.in_flight: dict[bytes, bytes] = {}  # my tx id -> burn or claim id it serves
        self.burn_height: dict[bytes, int] = {}
        self.retries: Counter = Counter()

    max_retries = 3

    def wants_claim(self, burn_tx, dest, src, block_hash) -> bool:
        return False

    def wants_confirm(self, claim_tx, burn_tx, src, dest, block_hash) -> bool:
        return False

    def on_block(self, chain, block):
        sim, reg = self.sim, self.sim.registry
        self._release_reserved(block)
        cid = block.header.chain
        for tx, rc in zip(block.transactions, block.receipts):
            if tx.target != reg.get(cid):
                continue
            if tx.signer == self.user and tx.id in self.in_flight:
                item = self.in_flight.pop(tx.id)
                if not rc.status and rc.events and rc.events[0] == INCLUSION_FAILED \
                        and self.retries[item] < self.max_retries:
                    self.retries[item] += 1  # leave the item pending and retry
                elif tx.kind == "claim":
                    self.burns.pop(item, None)
                else:
                    self.claims.pop(item, None)
            if not rc.status:
                continue
            if tx.kind == "burn":
                dest = tx.payload[2]
                self.burn_height[tx.id] = block.header.number
                if dest in sim.contracts and self.tracks_burn(tx):
                    self.burns[tx.id] = (tx, cid, dest, block.hash)
            elif tx.kind == "claim" and sim.protocol == 2:
                burn_tx = tx.payload[1]
                self.burns.pop(burn_tx.id, None)
                src = burn_tx.target.chain
                if src in sim.contracts and self.tracks_claim(tx, burn_tx):
                    self.claims[tx.id] = (tx, burn_tx, src, cid, block.hash)
            elif tx.kind == "claim":
                self.burns.pop(tx.payload[1].id, None)
            elif tx.kind == "confirm":
                self.claims.pop(tx.payload[1].id, None)
        if self.active():
            self._act(cid)

    def tracks_burn(self, burn_tx) -> bool:
        return True

    def tracks_claim(self, claim_tx, burn_tx) -> bool:
        return True

    def _busy(self, item: bytes) -> bool:
        return item in self.in_flight.values()

    def _act(self, cid):
        sim = self.sim
        for bid, (tx, src, dest, bh) in list(self.burns.items()):
            if dest != cid or self._busy(bid):
                continue
            if bid in sim.ledger(dest).used_burns:
                del self.burns[bid]
            elif sim.relay_ready(dest, src, bh) and self.wants_claim(tx, dest, src, bh):
                self.in_flight[self.claim(tx, src, dest).id] = bid
        for cl_id, (tx, burn_tx, src, dest, bh) in list(self.claims.items()):
            if src != cid or self._busy(cl_id):
                continue
            if cl_id in sim.ledger(src).used_claims:
                del self.claims[cl_id]
            elif sim.relay_ready(src, dest, bh) and self.wants_confirm(tx, burn_tx, src, dest, bh):
                self.in_flight[self.confirm(tx, dest, src).id] = cl_id

    def done(self) -> bool:
        return not self.in_flight


class HonestUser(Finalizer):
    """Claims burns addressed to it and confirms claims of its own burns."""

    claims_own = True
    confirms_own = True

    def __init__(self, spec, sim):
        super().__init__(spec, sim)
        self.sent: set[bytes] = set()

    def sent_burn(self, tx, t):
        self.sent.add(tx.id)

    def tracks_burn(self, burn_tx):
        return self.claims_own and burn_tx.payload[1] == self.user

    def tracks_claim(self, claim_tx, burn_tx):
        return self.confirms_own and burn_tx.id in self.sent

    def wants_claim(self, *args):
        return True

    def wants_confirm(self, *args):
        return True


class ByzantineWithholder(HonestUser):
    """Sends burns but never claims what it receives nor confirms what it sent."""

    claims_own = False
    confirms_own = False


class AltruisticFinalizer(Finalizer):
    """Finalizes every pending transfer regardless of reward.

    ``patience_blocks`` delays action until the relayed depth exceeds the
    minimum by that many blocks.
    """

    def _deep(self, host, remote, bh):
        return self.sim.relay_ready(host, remote, bh, self.sim.params.min_confirmations + self.spec.patience_blocks)

    def wants_claim(self, burn_tx, dest, src, bh):
        return self._deep(dest, src, bh)

    def wants_confirm(self, claim_tx, burn_tx, src, dest, bh):
        return self._deep(src, dest, bh)


class RationalFinalizer(Finalizer):
    """Acts only once the timeout makes a reward claimable and it beats the cost."""

    def wants_claim(self, burn_tx, dest, src, bh):
        _, recipient, _, x, _ = burn_tx.payload
        reward = self.sim.params.fee_size(len(x)) if recipient != self.user else 0
        timed_out = self.sim.relay_ready(dest, src, bh, self.sim.params.claim_timeout_blocks)
        return reward > self.spec.cost_threshold and timed_out

    def wants_confirm(self, claim_tx, burn_tx, src, dest, bh):
        stake = len(burn_tx.payload[4])
        burn_height = self.burn_height.get(burn_tx.id)
        if burn_height is None:
            return False
        # the confirm lands in the next block at the earliest
        timed_out = self.sim.chain(src).height + 1 - burn_height > self.sim.params.confirm_timeout_blocks
        return stake > self.spec.cost_threshold and timed_out


# ---------------------------------------------------------------- attacks


def single_field_mutations(tx: Transaction, bundle: InclusionProofBundle, forged_receipt: Receipt | None = None):
    """Every one-field corruption of a (transaction, bundle) pair, labelled.

    None of these may pass inclusion verification.
    """
    U = InclusionProofBundle.unchecked
    tp, rp = bundle.tx_proof, bundle.receipt_proof
    out = [
        ("tx.leaf", tx, U(replace(tp, leaf_hash=_flip(tp.leaf_hash)), rp, bundle.path, bundle.block_hash, bundle.receipt)),
        ("receipt.leaf", tx, U(tp, replace(rp, leaf_hash=_flip(rp.leaf_hash)), bundle.path, bundle.block_hash, bundle.receipt)),
        ("blockHash", tx, U(tp, rp, bundle.path, _flip(bundle.block_hash), bundle.receipt)),
        ("path", tx, U(tp, rp, bundle.path ^ 1, bundle.block_hash, bundle.receipt)),
        ("receipt.status", tx, U(tp, rp, bundle.path, bundle.block_hash, replace(bundle.receipt, status=not bundle.receipt.status))),
        ("receipt.txId", tx, U(tp, rp, bundle.path, bundle.block_hash, replace(bundle.receipt, tx_id=_flip(bundle.receipt.tx_id)))),
        ("receipt.events", tx, U(tp, rp, bundle.path, bundle.block_hash, replace(bundle.receipt, events=bundle.receipt.events + ("x",)))),
        ("receipt.none", tx, U(tp, rp, bundle.path, bundle.block_hash, None)),
    ]
    for name, proof in (("tx", tp), ("receipt", rp)):
        def swap(p, name=name):
            return U(p, rp, bundle.path, bundle.block_hash, bundle.receipt) if name == "tx" else \
                U(tp, p, bundle.path, bundle.block_hash, bundle.receipt)
        for i in range(len(proof.siblings)):
            sib = list(proof.siblings)
            sib[i] = _flip(sib[i])
            out.append((f"{name}.sibling[{i}]", tx, swap(replace(proof, siblings=tuple(sib)))))
        if proof.siblings:
            out.append((f"{name}.siblings.drop", tx, swap(replace(proof, siblings=proof.siblings[:-1]))))
        out.append((f"{name}.siblings.extra", tx, swap(replace(proof, siblings=proof.siblings + (proof.leaf_hash,)))))
        out.append((f"{name}.index", tx, swap(replace(proof, index=proof.index ^ 1))))
    width = 1 << len(tp.siblings)
    for j in range(width):
        if j != bundle.path:
            out.append((f"index={j}", tx, U(replace(tp, index=j), replace(rp, index=j), j, bundle.block_hash, bundle.receipt)))
    kind = tx.kind
    if kind == "burn":
        _, recipient, dest, x, y = tx.payload
        variants = {
            "tx.recipient": ("burn", recipient + "'", dest, x, y),
            "tx.x": ("burn", recipient, dest, tuple(sorted(set(x) | {max(x) + 1})), y),
            "tx.y": ("burn", recipient, dest, x, y + (max(x + y) + 1,)),
        }
        for label, payload in variants.items():
            out.append((label, Transaction.create(tx.signer, tx.nonce, tx.target, payload), bundle))
    out.append(("tx.nonce", Transaction.create(tx.signer, tx.nonce + 1, tx.target, tx.payload), bundle))
    out.append(("tx.signer", Transaction.create(tx.signer + "'", tx.nonce, tx.target, tx.payload), bundle))
    out.append(("tx.target", Transaction.create(tx.signer, tx.nonce, ContractAddress(tx.target.chain, tx.target.addr + "'"), tx.payload), bundle))
    return out


def fabricated_bundle(tx: Transaction, block_hash: bytes) -> InclusionProofBundle:
    """A self-consistent proof for ``tx`` against a tree the attacker built alone."""
    rc = Receipt(tx.id, True, ("Burned",))
    tp = prove_membership(build_tree([encode(tx)]), 0)
    rp = prove_membership(build_tree([encode(rc)]), 0)
    return InclusionProofBundle(tp, rp, 0, block_hash, rc)


class AttackAgent(Agent):
    attack = ""

    def __init__(self, spec, sim):
        super().__init__(spec, sim)
        a = sim.cfg.attack
        self.src, self.dest, self.third = a.src, a.dest, a.third
        self.attempts_wanted = spec.attempts
        self.start = max(spec.active_from, a.start_time)
        self.tracked: dict[bytes, str] = {}
        self.results: dict[bytes, tuple[bool, str]] = {}
        self.started = False
        self.script_done = False
        self.followups: set[bytes] = set()

    def track(self, tx: Transaction, label: str):
        self.tracked[tx.id] = label

    def follow(self, tx: Transaction):
        """An untallied transaction the run should still wait for."""
        self.followups.add(tx.id)

    def foreign_entity(self, chain: int) -> int:
        mine = self.sim.ledger(chain).owned.get(self.user, set())
        return next((e for e in range(self.sim.total_supply) if e not in mine), self.sim.total_supply)

    def on_block(self, chain, block):
        self._release_reserved(block)
        for tx, rc in zip(block.transactions, block.receipts):
            if tx.id in self.tracked:
                self.results[tx.id] = (rc.status, rc.events[0] if rc.events else "")
            self.followups.discard(tx.id)
        if not self.started and self.sim.now >= self.start:
            self.started = True
            self.begin()
        if self.started and not self.script_done:
            self.step(chain, block)

    def begin(self):
        pass

    def step(self, chain, block):
        pass

    def done(self) -> bool:
        return self.started and self.script_done and len(self.results) == len(self.tracked) \
            and not self.followups

    def outcome(self) -> AttackOutcome:
        codes = Counter(code for ok, code in self.results.values() if not ok)
        return AttackOutcome(self.attack, attempted=len(self.results),
                             succeeded=sum(1 for ok, _ in self.results.values() if ok),
                             rejection_codes=dict(sorted(codes.items())),
                             pending=len(self.tracked) - len(self.results))


class MimicContractAttack(AttackAgent):
    """Burn through a counterfeit contract, then claim; also confirm a claim made on one."""

    attack = "mimic-contract"

    def begin(self):
        self.fake_src = ContractAddress(self.src, "mimic-asset")
        self.fake_dest = ContractAddress(self.dest, "mimic-asset")
        self.sim.deploy(self.fake_src, MimicAssetContract(self.fake_src))
        self.sim.deploy(self.fake_dest, MimicAssetContract(self.fake_dest))
        self.fake_burns = {}
        for i in range(self.attempts_wanted):
            tx = self.sim.submit(self.user, self.src, ("burn", self.user, self.dest, (i,), ()), target=self.fake_src)
            self.fake_burns[tx.id] = [tx, None, False]
        self.victims: dict[bytes, list] = {}
        self.fake_claims: dict[bytes, list] = {}
        self.second_leg = self.sim.protocol == 2 and self.sim.relay(self.src, self.dest) is not None

    def step(self, chain, block):
        sim, cid = self.sim, block.header.chain
        for tx in block.transactions:
            if tx.id in self.fake_burns:
                self.fake_burns[tx.id][1] = block.hash
            elif tx.id in self.fake_claims:
                self.fake_claims[tx.id][1] = block.hash
        if cid == self.src and self.second_leg:
            for tx, _rc in _honest_burns(block, sim.registry):
                if tx.signer != self.user and tx.payload[2] == self.dest and len(self.victims) < self.attempts_wanted:
                    self.victims[tx.id] = [tx, block.hash, False]
        if cid == self.dest:
            for entry in self.fake_burns.values():
                tx, bh, sent = entry
                if bh and not sent and sim.relay_ready(self.dest, self.src, bh):
                    entry[2] = True
                    self.track(self.claim(tx, self.src, self.dest), "claim-of-mimic-burn")
            for entry in self.victims.values():
                tx, bh, sent = entry
                if not sent and sim.relay_ready(self.dest, self.src, bh):
                    entry[2] = True
                    bundle = sim.chain(self.src).proof_bundle(tx.id)
                    fc = sim.submit(self.user, self.dest, ("claim", tx, bundle), target=self.fake_dest)
                    self.fake_claims[fc.id] = [fc, None, False]
        if cid == self.src:
            for entry in self.fake_claims.values():
                tx, bh, sent = entry
                if bh and not sent and sim.relay_ready(self.src, self.dest, bh):
                    entry[2] = True
                    self.track(self.confirm(tx, self.dest, self.src), "confirm-of-mimic-claim")
        first = all(e[2] for e in self.fake_burns.values())
        second = not self.second_leg or (
            (len(self.victims) >= self.attempts_wanted or sim.transfers_settled())
            and all(e[2] for e in self.victims.values()) and all(e[2] for e in self.fake_claims.values()))
        self.script_done = first and second


class FakeProofAttack(AttackAgent):
    """Claim a real burn with every single-field corruption of its proof, plus a forged burn."""

    attack = "fake-proof"

    def begin(self):
        sim = self.sim
        x = self.pick(self.src, 2) or self.pick(self.src, 1)
        if not x:
            sim.warn("fake-proof attacker owns nothing on src; nothing to attack with")
            self.script_done = True
            return
        self.burn = sim.submit(self.user, self.src, ("burn", self.user, self.dest, tuple(x), ()))
        self.reserved.setdefault(self.src, set()).update(x)
        other = self.foreign_entity(self.src)
        for i in range(3):  # failing fillers widen the block's tree
            sim.submit(self.user, self.src, ("burn", self.user, self.dest, (other,), (i + other + 1,)))
        self.burn_block = None
        self.phase = "wait"

    def step(self, chain, block):
        sim, cid = self.sim, block.header.chain
        if self.phase == "wait" and cid == self.src and self.burn in block.transactions:
            self.burn_block = block.hash
        if self.phase == "wait" and self.burn_block and cid == self.dest and \
                sim.relay_ready(self.dest, self.src, self.burn_block):
            bundle = sim.chain(self.src).proof_bundle(self.burn.id)
            for label, tx, b in single_field_mutations(self.burn, bundle):
                self.track(sim.submit(self.user, self.dest, ("claim", tx, b)), label)
            forged = Transaction.create(self.user, 10 ** 9, self.burn.target,
                                        ("burn", self.user, self.dest, (self.foreign_entity(self.src),), ()))
            self.track(sim.submit(self.user, self.dest, ("claim", forged, bundle)), "forged+real-bundle")
            self.track(sim.submit(self.user, self.dest, ("claim", forged, fabricated_bundle(forged, self.burn_block))),
                       "forged+fabricated-tree")
            self.track(sim.submit(self.user, self.dest, ("claim", forged, fabricated_bundle(forged, b"\x07" * 32))),
                       "forged+unknown-block")
            self.phase = "mutated"
        elif self.phase == "mutated" and len(self.results) == len(self.tracked) and cid == self.dest:
            self.follow(self.claim(self.burn, self.src, self.dest))  # genuine claim, not tallied
            self.phase = "done"
            self.script_done = True


class DoubleClaimAttack(AttackAgent):
    """Replays other users' successful claims on the destination chain."""

    attack = "double-claim"

    def step(self, chain, block):
        if block.header.chain != self.dest:
            return
        for tx in _successful(block, self.sim.registry, "claim"):
            if tx.signer != self.user and len(self.tracked) < self.attempts_wanted:
                self.track(self.sim.submit(self.user, self.dest, tx.payload), "replay")
        self.script_done = len(self.tracked) >= self.attempts_wanted or self._no_more_traffic()

    def _no_more_traffic(self):
        return self.sim.transfers_settled()


class WrongChainAttack(AttackAgent):
    """Claims other users' burns on a chain that is not their destination."""

    attack = "wrong-chain"

    def begin(self):
        self.waiting: list[tuple] = []

    def step(self, chain, block):
        sim, cid = self.sim, block.header.chain
        for tx, _rc in _honest_burns(block, sim.registry):
            if tx.signer != self.user and len(self.waiting) < self.attempts_wanted:
                wrong = self.third if self.third is not None and self.third != tx.payload[2] else cid
                self.waiting.append([tx, cid, wrong, block.header.number, False])
        for entry in self.waiting:
            tx, src, wrong, height, sent = entry
            if not sent and sim.chain(src).height - height >= sim.params.min_confirmations:
                entry[4] = True
                bundle = sim.chain(src).proof_bundle(tx.id)
                self.track(sim.submit(self.user, wrong, ("claim", tx, bundle)), f"claim-on-{wrong}")
        enough = len(self.waiting) >= self.attempts_wanted or DoubleClaimAttack._no_more_traffic(self)
        self.script_done = enough and all(e[4] for e in self.waiting)


class DoubleConfirmAttack(AttackAgent):
    """Replays confirms, sends them to the wrong chain, and confirms a failed claim."""

    attack = "double-confirm"

    def begin(self):
        self.failed_claims: dict[bytes, list] = {}
        self.replayed = 0

    def step(self, chain, block):
        sim, reg, cid = self.sim, self.sim.registry, block.header.chain
        if cid == self.src:
            for tx in _successful(block, reg, "confirm"):
                if tx.signer != self.user and self.replayed < self.attempts_wanted:
                    self.replayed += 1
                    self.track(sim.submit(self.user, self.src, tx.payload), "confirm-replay")
                    self.track(sim.submit(self.user, self.dest, tx.payload), "confirm-on-dest")
        if cid == self.dest:
            for tx in _successful(block, reg, "claim"):
                if tx.signer != self.user and len(self.failed_claims) < self.attempts_wanted:
                    dup = sim.submit(self.user, self.dest, tx.payload)
                    self.track(dup, "claim-replay")
                    self.failed_claims[dup.id] = [dup, None, False]
            for tx in block.transactions:
                if tx.id in self.failed_claims:
                    self.failed_claims[tx.id][1] = block.hash
        if cid == self.src:
            for entry in self.failed_claims.values():
                tx, bh, sent = entry
                if bh and not sent and sim.relay_ready(self.src, self.dest, bh):
                    entry[2] = True
                    self.track(self.confirm(tx, self.dest, self.src), "confirm-of-failed-claim")
        quiet = DoubleClaimAttack._no_more_traffic(self)
        enough = self.replayed >= self.attempts_wanted and len(self.failed_claims) >= self.attempts_wanted
        self.script_done = (enough or quiet) and all(e[2] for e in self.failed_claims.values())


class ForkRelayerAttack(AttackAgent):
    """Feeds the destination relay a side branch carrying a burn that never happened."""

    attack = "fork-relayer"

    def begin(self):
        self.forks: list[dict] = []
        self.last_fork = -10 ** 9

    def step(self, chain, block):
        sim, cid = self.sim, block.header.chain
        relay = sim.relay(self.dest, self.src)
        if relay is None:
            sim.warn("fork-relayer needs a relay of src hosted on dest")
            self.script_done = True
            return
        k = sim.params.min_confirmations
        if cid == self.src and len(self.forks) < self.attempts_wanted and block.header.number - self.last_fork > k + 1:
            h = block.header.number
            victim = self.foreign_entity(self.src)
            fake = Transaction.create(self.user, 10 ** 9 + len(self.forks), sim.registry[self.src],
                                      ("burn", self.user, self.dest, (victim,), ()))
            length = max(1, k)  # never deeper than the verifier's threshold
            headers = sim.chain(self.src).inject_fork(h, length, transactions=[fake],
                                                      receipts=[Receipt(fake.id, True, ("Burned",))])
            for hdr in headers:
                relay.enqueue(hdr, sim.now, source=self.name)
            self.forks.append({"tx": fake, "block": headers[0].self_hash, "sent": False})
            self.last_fork = h
        if cid == self.dest:
            for f in self.forks:
                if not f["sent"] and f["block"] in relay.headers:
                    f["sent"] = True
                    bundle = sim.chain(self.src).proof_bundle(f["tx"].id, block_hash=f["block"])
                    self.track(sim.submit(self.user, self.dest, ("claim", f["tx"], bundle)), "claim-from-fork")
        self.script_done = len(self.forks) >= self.attempts_wanted and all(f["sent"] for f in self.forks)

    @property
    def name(self):
        return f"fork-relayer:{self.user}"


class BadBurnAttack(AttackAgent):
    """Burns of entities one does not hold, overlapping stakes, junk payloads."""

    attack = "bad-burn"

    def begin(self):
        sim, me = self.sim, self.user
        mine = self.pick(self.src, 1)
        other = self.foreign_entity(self.src)
        own = mine[0] if mine else other
        cases = [
            ("NotOwnerX", self.src, ("burn", me, self.dest, (other,), ())),
            ("NotOwnerY", self.src, ("burn", me, self.dest, (own,), (other,))),
            ("Overlap", self.src, ("burn", me, self.dest, (own,), (own,))),
            ("UnknownDest", self.src, ("burn", me, 10 ** 6, (own,), ())),
            ("empty-X", self.src, ("burn", me, self.dest, (), ())),
            ("junk-claim", self.dest, ("claim", "junk")),
            ("junk-confirm", self.src, ("confirm",)),
            ("unknown-kind", self.src, ("mint", me, (own,))),
        ]
        for label, chain, payload in cases:
            self.track(sim.submit(me, chain, payload), label)
        self.script_done = True


class FailedBurnAttack(AttackAgent):
    """Claims a burn that was included but failed."""

    attack = "failed-burn"

    def begin(self):
        self.bad = self.sim.submit(self.user, self.src, ("burn", self.user, self.dest, (self.foreign_entity(self.src),), ()))
        self.track(self.bad, "failed-burn")
        self.block = None

    def step(self, chain, block):
        cid = block.header.chain
        if cid == self.src and self.bad in block.transactions:
            self.block = block.hash
        if cid == self.dest and self.block and self.sim.relay_ready(self.dest, self.src, self.block):
            self.track(self.claim(self.bad, self.src, self.dest), "claim-of-failed-burn")
            self.script_done = True


ATTACKS = {
    cls.attack: cls
    for cls in (MimicContractAttack, FakeProofAttack, DoubleClaimAttack, WrongChainAttack,
                DoubleConfirmAttack, ForkRelayerAttack, BadBurnAttack, FailedBurnAttack)
}

ATTACK_BEHAVIOR = {
    "mimic-contract": "ByzantineForger", "fake-proof": "ByzantineForger", "bad-burn": "ByzantineForger",
    "failed-burn": "ByzantineForger", "double-claim": "ByzantineDoubleClaimer",
    "wrong-chain": "ByzantineDoubleClaimer", "double-confirm": "ByzantineDoubleClaimer",
    "fork-relayer": "ForkFeedingRelayer",
}

_DEFAULT_ATTACK = {"ByzantineForger": "fake-proof", "ByzantineDoubleClaimer": "double-claim",
                   "ForkFeedingRelayer": "fork-relayer"}

BEHAVIOR_CLASSES = {
    "HonestSender": HonestUser,
    "HonestRecipient": HonestUser,
    "AltruisticFinalizer": AltruisticFinalizer,
    "RationalFinalizer": RationalFinalizer,
    "ByzantineWithholder": ByzantineWithholder,
}


def attack_class(kind: str):
    try:
        return ATTACKS[kind]
    except KeyError:
        raise UnknownAttack(f"unknown attack {kind!r}; known: {', '.join(sorted(ATTACKS))}") from None


def make_agent(spec: AgentSpec, sim) -> Agent:
    if spec.behavior in BEHAVIOR_CLASSES:
        return BEHAVIOR_CLASSES[spec.behavior](spec, sim)
    kind = spec.attack or _DEFAULT_ATTACK[spec.behavior]
    cls = attack_class(kind)
    if ATTACK_BEHAVIOR[kind] != spec.behavior:
        raise UnknownAttack(f"attack {kind!r} belongs to {ATTACK_BEHAVIOR[kind]}, not {spec.behavior}")
    return cls(spec, sim)


def build_agents(sim) -> dict[str, Agent]:
    """Configured agents, plus an honest user for everyone else in the scenario."""
    agents = {spec.user: make_agent(spec, sim) for spec in sim.cfg.agents}
    for user in sim.cfg.users():
        if user not in agents:
            agents[user] = HonestUser(AgentSpec(user, "HonestSender"), sim)
    return agents


def attack_outcomes(sim) -> list[AttackOutcome]:
    return [a.outcome() for _, a in sorted(sim.agents.items()) if isinstance(a, AttackAgent)]
