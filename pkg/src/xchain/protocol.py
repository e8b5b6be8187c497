"""The per-chain asset contract: ownership ledger plus burn, claim and confirm."""
from __future__ import annotations

from dataclasses import dataclass, field

from .merkle import InclusionProofBundle
from .model import ContractAddress, EntityId, Receipt, Transaction, UserId, called_contract, submitter
from .relay import RelayState, VerificationQuery

# Stable rejection codes, part of the output contract.
UNKNOWN_DEST = "UnknownDest"
NOT_OWNER_X = "NotOwnerX"
NOT_OWNER_Y = "NotOwnerY"
OVERLAP = "Overlap"
WRONG_DEST = "WrongDest"
ALREADY_CLAIMED = "AlreadyClaimed"
INCLUSION_FAILED = "InclusionFailed"
UNAUTHORIZED_BURN_CONTRACT = "UnauthorizedBurnContract"
BURN_FAILED = "BurnFailed"
ALREADY_CONFIRMED = "AlreadyConfirmed"
WRONG_SOURCE_CONTRACT = "WrongSourceContract"
UNAUTHORIZED_CLAIM_CONTRACT = "UnauthorizedClaimContract"
CLAIM_FAILED = "ClaimFailed"
MALFORMED = "Malformed"

BURN_CODES = (UNKNOWN_DEST, NOT_OWNER_X, NOT_OWNER_Y, OVERLAP)
CLAIM_CODES = (WRONG_DEST, ALREADY_CLAIMED, INCLUSION_FAILED, UNAUTHORIZED_BURN_CONTRACT, BURN_FAILED)
CONFIRM_CODES = (ALREADY_CONFIRMED, WRONG_SOURCE_CONTRACT, INCLUSION_FAILED,
                 UNAUTHORIZED_CLAIM_CONTRACT, CLAIM_FAILED)
REJECTION_CODES = tuple(dict.fromkeys(BURN_CODES + CLAIM_CODES + CONFIRM_CODES + (MALFORMED,)))

BURNED, CLAIMED, CONFIRMED = "Burned", "Claimed", "Confirmed"


class MalformedPayload(ValueError):
    pass


@dataclass
class ProtocolParams:
    claim_timeout_blocks: int = 10
    confirm_timeout_blocks: int = 40
    fee_entity_count: int = 1
    min_confirmations: int = 5

    def __post_init__(self):
        for name in ("claim_timeout_blocks", "confirm_timeout_blocks", "fee_entity_count", "min_confirmations"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def fee_size(self, transferred: int) -> int:
        # recipient always keeps at least one entity
        return max(0, min(self.fee_entity_count, transferred - 1))


def _entity_set(value) -> frozenset:
    if not isinstance(value, tuple) or not all(isinstance(e, int) and not isinstance(e, bool) for e in value):
        raise MalformedPayload("entity set must be a tuple of ints")
    out = frozenset(value)
    if len(out) != len(value):
        raise MalformedPayload("entity set lists an entity twice")
    return out


@dataclass(frozen=True)
class BurnPayload:
    recipient: UserId
    dest: int
    x: frozenset
    y: frozenset = frozenset()

    def to_payload(self) -> tuple:
        return ("burn", self.recipient, self.dest, tuple(sorted(self.x)), tuple(sorted(self.y)))

    @classmethod
    def decode(cls, payload) -> BurnPayload:
        if not isinstance(payload, tuple) or len(payload) != 5 or payload[0] != "burn":
            raise MalformedPayload("not a burn payload")
        _, recipient, dest, x, y = payload
        if not isinstance(recipient, str) or not isinstance(dest, int) or isinstance(dest, bool):
            raise MalformedPayload("bad recipient or dest")
        x, y = _entity_set(x), _entity_set(y)
        if not x:
            raise MalformedPayload("X must not be empty")
        return cls(recipient, dest, x, y)


@dataclass(frozen=True)
class ClaimPayload:
    burn_tx: Transaction
    burn_bundle: InclusionProofBundle

    def to_payload(self) -> tuple:
        return ("claim", self.burn_tx, self.burn_bundle)

    @classmethod
    def decode(cls, payload) -> ClaimPayload:
        if not isinstance(payload, tuple) or len(payload) != 3 or payload[0] != "claim":
            raise MalformedPayload("not a claim payload")
        if not isinstance(payload[1], Transaction) or not isinstance(payload[2], InclusionProofBundle):
            raise MalformedPayload("claim must carry a transaction and a proof bundle")
        return cls(payload[1], payload[2])


@dataclass(frozen=True)
class ConfirmPayload:
    claim_tx: Transaction
    claim_bundle: InclusionProofBundle

    def to_payload(self) -> tuple:
        return ("confirm", self.claim_tx, self.claim_bundle)

    @classmethod
    def decode(cls, payload) -> ConfirmPayload:
        if not isinstance(payload, tuple) or len(payload) != 3 or payload[0] != "confirm":
            raise MalformedPayload("not a confirm payload")
        if not isinstance(payload[1], Transaction) or not isinstance(payload[2], InclusionProofBundle):
            raise MalformedPayload("confirm must carry a transaction and a proof bundle")
        return cls(payload[1], payload[2])


@dataclass
class LockedStake:
    sender: UserId
    stake: frozenset
    burn_height: int


@dataclass
class AssetLedger:
    chain: int
    address: ContractAddress
    registry: dict
    params: ProtocolParams
    owned: dict = field(default_factory=dict)
    used_burns: set = field(default_factory=set)
    used_claims: set = field(default_factory=set)
    locked_stakes: dict = field(default_factory=dict)

    def holdings(self, user: UserId) -> set:
        return self.owned.setdefault(user, set())

    def all_owned(self):
        for user in self.owned:
            yield from self.owned[user]

    def all_locked(self):
        for lock in self.locked_stakes.values():
            yield from lock.stake


@dataclass
class Outcome:
    """What one contract execution did; feeds the trace and the metrics."""

    tx_id: bytes
    chain: int
    height: int
    time: float
    kind: str
    status: bool
    code: str
    submitter: UserId
    ops: int = 0
    effects: list = field(default_factory=list)
    refs: dict = field(default_factory=dict)


class _Exec:
    def __init__(self, tx: Transaction, ctx, kind: str):
        self.out = Outcome(tx.id, ctx.chain, ctx.height, ctx.time, kind, False, "", submitter(tx))

    def op(self, n: int = 1):
        self.out.ops += n

    def check(self, ok: bool) -> bool:
        self.out.ops += 1
        return ok

    def effect(self, *parts):
        self.out.effects.append([p if not isinstance(p, (set, frozenset)) else sorted(p) for p in parts])
        self.out.ops += 1


class AssetContract:
    """Contract managing asset A on one chain; executed by chain-sim per transaction."""

    def __init__(self, ledger: AssetLedger, relays: dict | None = None):
        self.ledger = ledger
        self.relays: dict[int, RelayState] = relays if relays is not None else {}
        self.listeners: list = []

    @property
    def address(self) -> ContractAddress:
        return self.ledger.address

    def execute(self, tx: Transaction, ctx) -> Receipt:
        kind = tx.kind or "unknown"
        handler = {"burn": self.exec_burn, "claim": self.exec_claim, "confirm": self.exec_confirm}.get(kind)
        if handler is None:
            run = _Exec(tx, ctx, kind)
            run.out.code = MALFORMED
            out = run.out
        else:
            out = handler(tx, ctx)
        for listener in self.listeners:
            listener(out)
        return Receipt(tx.id, out.status, (out.code,))

    def exec_burn(self, tx: Transaction, ctx) -> Outcome:
        led = self.ledger
        run = _Exec(tx, ctx, "burn")
        out = run.out
        try:
            run.op()
            p = BurnPayload.decode(tx.payload)
        except MalformedPayload:
            out.code = MALFORMED
            return out
        sender = submitter(tx)
        mine = led.owned.get(sender, set())
        if not run.check(p.dest in led.registry):
            out.code = UNKNOWN_DEST
        elif not run.check(p.x <= mine):
            out.code = NOT_OWNER_X
        elif not run.check(p.y <= mine):
            out.code = NOT_OWNER_Y
        elif not run.check(not (p.x & p.y)):
            out.code = OVERLAP
        else:
            led.holdings(sender).difference_update(p.x | p.y)
            run.effect("debit", sender, p.x | p.y)
            run.effect("burn", tx.id.hex(), p.x)
            led.locked_stakes[tx.id] = LockedStake(sender, p.y, ctx.height)
            run.effect("lock", tx.id.hex(), p.y)
            out.status, out.code = True, BURNED
        out.refs = {"recipient": p.recipient, "dest": p.dest, "x": sorted(p.x), "y": sorted(p.y)}
        return out

    def _relay_fee_offer(self, relay: RelayState, payer: UserId) -> int:
        fee = relay.fee_per_verification
        return fee if fee and len(self.ledger.owned.get(payer, ())) >= fee else 0

    def _charge_relay_fee(self, relay: RelayState, payer: UserId, run: _Exec):
        fee = relay.fee_per_verification
        if not fee:
            return
        paid = set(sorted(self.ledger.owned[payer])[:fee])
        self.ledger.holdings(payer).difference_update(paid)
        self.ledger.holdings(relay.fee_collector).update(paid)
        run.effect("debit", payer, paid)
        run.effect("credit", relay.fee_collector, paid)

    def exec_claim(self, tx: Transaction, ctx) -> Outcome:
        led = self.ledger
        run = _Exec(tx, ctx, "claim")
        out = run.out
        try:
            run.op()
            c = ClaimPayload.decode(tx.payload)
            run.op()
            burn = BurnPayload.decode(c.burn_tx.payload)
        except MalformedPayload:
            out.code = MALFORMED
            return out
        burn_tx, bundle = c.burn_tx, c.burn_bundle
        src = burn_tx.target.chain
        out.refs = {"burnTx": burn_tx.id.hex(), "src": src, "recipient": burn.recipient}
        if not run.check(led.chain == burn.dest):
            out.code = WRONG_DEST
            return out
        if not run.check(burn_tx.id not in led.used_burns):
            out.code = ALREADY_CLAIMED
            return out
        relay = self.relays.get(src)
        ok = False
        if relay is not None:
            offer = self._relay_fee_offer(relay, submitter(tx))
            run.op()
            ok = relay.verify_inclusion(VerificationQuery(burn_tx, bundle, src, led.params.min_confirmations), offer)
        if not run.check(ok):
            out.code = INCLUSION_FAILED
            return out
        if not run.check(called_contract(burn_tx) == led.registry.get(src)):
            out.code = UNAUTHORIZED_BURN_CONTRACT
            return out
        if not run.check(bundle.receipt.status):
            out.code = BURN_FAILED
            return out
        self._charge_relay_fee(relay, submitter(tx), run)
        run.op()
        timeout = relay.confirmations(bundle.block_hash) >= led.params.claim_timeout_blocks
        claimer = submitter(tx)
        fee = frozenset()
        if timeout and claimer != burn.recipient:
            fee = frozenset(sorted(burn.x)[:led.params.fee_size(len(burn.x))])
        if fee:
            led.holdings(claimer).update(fee)
            run.effect("mint", burn_tx.id.hex(), claimer, fee)
        rest = burn.x - fee
        led.holdings(burn.recipient).update(rest)
        run.effect("mint", burn_tx.id.hex(), burn.recipient, rest)
        led.used_burns.add(burn_tx.id)
        run.op()
        out.status, out.code = True, CLAIMED
        out.refs.update({"fee": sorted(fee), "timeout": timeout, "x": sorted(burn.x)})
        return out

    def exec_confirm(self, tx: Transaction, ctx) -> Outcome:
        led = self.ledger
        run = _Exec(tx, ctx, "confirm")
        out = run.out
        try:
            run.op()
            cf = ConfirmPayload.decode(tx.payload)
            run.op()
            claim = ClaimPayload.decode(cf.claim_tx.payload)
            run.op()
            burn = BurnPayload.decode(claim.burn_tx.payload)
        except MalformedPayload:
            out.code = MALFORMED
            return out
        claim_tx, bundle, burn_tx = cf.claim_tx, cf.claim_bundle, claim.burn_tx
        dest = burn.dest
        out.refs = {"claimTx": claim_tx.id.hex(), "burnTx": burn_tx.id.hex(), "dest": dest}
        if not run.check(claim_tx.id not in led.used_claims):
            out.code = ALREADY_CONFIRMED
            return out
        if not run.check(called_contract(burn_tx) == led.address):
            out.code = WRONG_SOURCE_CONTRACT
            return out
        relay = self.relays.get(dest)
        ok = False
        if relay is not None:
            offer = self._relay_fee_offer(relay, submitter(tx))
            run.op()
            ok = relay.verify_inclusion(VerificationQuery(claim_tx, bundle, dest, led.params.min_confirmations), offer)
        if not run.check(ok):
            out.code = INCLUSION_FAILED
            return out
        if not run.check(called_contract(claim_tx) == led.registry.get(dest)):
            out.code = UNAUTHORIZED_CLAIM_CONTRACT
            return out
        if not run.check(bundle.receipt.status):
            out.code = CLAIM_FAILED
            return out
        self._charge_relay_fee(relay, submitter(tx), run)
        run.op()
        lock = led.locked_stakes.pop(burn_tx.id, None)
        run.op()
        timeout = lock is not None and (ctx.height - lock.burn_height) > led.params.confirm_timeout_blocks
        if lock is not None:
            beneficiary = submitter(tx) if timeout else lock.sender
            led.holdings(beneficiary).update(lock.stake)
            run.effect("unlock", burn_tx.id.hex(), beneficiary, lock.stake)
            out.refs.update({"beneficiary": beneficiary, "stake": sorted(lock.stake), "sender": lock.sender})
        led.used_claims.add(claim_tx.id)
        run.op()
        out.status, out.code = True, CONFIRMED
        out.refs["timeout"] = timeout
        return out


class MimicAssetContract:
    """Counterfeit contract that mirrors the real interface but checks nothing."""

    def __init__(self, address: ContractAddress):
        self.address = address

    def execute(self, tx: Transaction, ctx) -> Receipt:
        code = {"burn": BURNED, "claim": CLAIMED, "confirm": CONFIRMED}.get(tx.kind, MALFORMED)
        return Receipt(tx.id, code != MALFORMED, (code,))


@dataclass
class TransferRecord:
    burn_tx_id: str
    sender: UserId
    recipient: UserId
    src: int
    dest: int
    x: tuple
    y: tuple
    phase: str = BURNED
    claim_tx_id: str | None = None
    confirm_tx_id: str | None = None
    durations: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)
    fee_paid: tuple = ()
    stake_outcome: str = "Pending"
    rejection_code: str | None = None

    _ORDER = {BURNED: 0, CLAIMED: 1, CONFIRMED: 2}

    def advance(self, phase: str):
        if self.phase == "Rejected" or self._ORDER[phase] <= self._ORDER[self.phase]:
            raise ValueError(f"illegal phase transition {self.phase} -> {phase}")
        self.phase = phase


def total_accounted_supply(ledgers, records) -> int:
    """Owned + locked + burned-but-unclaimed entities across all chains."""
    total = 0
    for led in ledgers:
        total += sum(len(s) for s in led.owned.values())
        total += sum(len(lock.stake) for lock in led.locked_stakes.values())
    total += sum(len(r.x) for r in records if r.phase == BURNED)
    return total
