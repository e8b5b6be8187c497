"""On-chain header relay and the transaction-inclusion verifier built on it."""
from __future__ import annotations

from dataclasses import dataclass, field

from .codec import encode
from .merkle import InclusionProofBundle, leaf_hash, verify_membership
from .model import BlockHeader, Transaction, UserId, XChainError


class RelayError(XChainError, ValueError):
    pass


class UnknownParent(RelayError):
    pass


class BadLinkage(RelayError):
    pass


class BadHash(RelayError):
    pass


@dataclass(frozen=True)
class VerificationQuery:
    tx: Transaction
    bundle: InclusionProofBundle
    remote: int
    min_confirmations: int


@dataclass
class PendingHeader:
    header: BlockHeader
    forwarded_at: float
    blocks_left: int
    source: str


class RelayState:
    """Replica of a remote chain's headers hosted on ``host_chain``.

    Headers only enter through :meth:`submit_header`; the main branch is the
    stored header of greatest height, first-seen winning ties.
    """

    def __init__(self, host_chain: int, remote_chain: int, checkpoint: BlockHeader,
                 lag_blocks: int = 1, fee_per_verification: int = 0, fee_collector: UserId | None = None):
        if lag_blocks < 0 or fee_per_verification < 0:
            raise ValueError("lag_blocks and fee_per_verification must be >= 0")
        if checkpoint.chain != remote_chain:
            raise BadLinkage("checkpoint belongs to another chain")
        self.host_chain = host_chain
        self.remote_chain = remote_chain
        self.lag_blocks = lag_blocks
        self.fee_per_verification = fee_per_verification
        self.fee_collector = fee_collector or f"relay:{host_chain}<-{remote_chain}"
        self.checkpoint = checkpoint.self_hash
        self.headers: dict[bytes, BlockHeader] = {checkpoint.self_hash: checkpoint}
        self.main_head = checkpoint.self_hash
        self._main_at: dict[int, bytes] = {checkpoint.number: checkpoint.self_hash}
        self.pending: list[PendingHeader] = []
        self.rejected: list[tuple[str, str]] = []
        self.verifications = 0

    @property
    def main_head_header(self) -> BlockHeader:
        return self.headers[self.main_head]

    @property
    def main_head_height(self) -> int:
        return self.main_head_header.number

    def submit_header(self, header: BlockHeader) -> bool:
        """Store a header; returns False if it was already known."""
        if header.self_hash in self.headers:
            return False
        if header.recompute_hash() != header.self_hash:
            raise BadHash(f"header {header.number} hash does not recompute")
        if header.chain != self.remote_chain:
            raise BadLinkage(f"header from chain {header.chain}, relay tracks {self.remote_chain}")
        parent = self.headers.get(header.parent_hash)
        if parent is None:
            raise UnknownParent(f"parent of header {header.number} unknown")
        if header.number != parent.number + 1:
            raise BadLinkage(f"height {header.number} does not follow parent {parent.number}")
        self.headers[header.self_hash] = header
        if header.number > self.main_head_height:
            self._set_head(header)
        return True

    def _set_head(self, header: BlockHeader):
        self.main_head = header.self_hash
        cur = header
        while self._main_at.get(cur.number) != cur.self_hash:
            self._main_at[cur.number] = cur.self_hash
            if cur.self_hash == self.checkpoint:
                break
            cur = self.headers[cur.parent_hash]

    def is_on_main(self, block_hash: bytes) -> bool:
        hdr = self.headers.get(block_hash)
        return hdr is not None and self._main_at.get(hdr.number) == block_hash

    def confirmations(self, block_hash: bytes) -> int | None:
        """Succeeding main-branch headers, or None if not on the branch."""
        if not self.is_on_main(block_hash):
            return None
        return self.main_head_height - self.headers[block_hash].number

    def verify_inclusion(self, q: VerificationQuery, fee_paid: int = 0) -> bool:
        self.verifications += 1
        try:
            return self._verify(q, fee_paid)
        except (AttributeError, TypeError, ValueError):
            return False

    def _verify(self, q: VerificationQuery, fee_paid: int) -> bool:
        if fee_paid < self.fee_per_verification:
            return False
        if q.remote != self.remote_chain:
            return False
        b = q.bundle
        if not isinstance(b, InclusionProofBundle) or not isinstance(q.tx, Transaction):
            return False
        depth = self.confirmations(b.block_hash)
        if depth is None or depth < q.min_confirmations:
            return False
        if not (b.tx_proof.index == b.receipt_proof.index == b.path):
            return False
        header = self.headers[b.block_hash]
        if b.tx_proof.leaf_hash != leaf_hash(encode(q.tx)):
            return False
        if not verify_membership(b.tx_proof, header.tx_root):
            return False
        rc = b.receipt
        if rc is None or rc.tx_id != q.tx.id:
            return False
        if b.receipt_proof.leaf_hash != leaf_hash(encode(rc)):
            return False
        return verify_membership(b.receipt_proof, header.receipt_root)

    def enqueue(self, header: BlockHeader, time: float, source: str = "relayer", lag: int | None = None):
        """Queue a forwarded header; it lands after ``lag`` host blocks."""
        lag = self.lag_blocks if lag is None else lag
        if lag == 0:
            self._apply(header, source)
        else:
            self.pending.append(PendingHeader(header, time, lag, source))

    def _apply(self, header: BlockHeader, source: str) -> bool:
        try:
            return self.submit_header(header)
        except RelayError as exc:
            self.rejected.append((source, f"{type(exc).__name__}: {exc}"))
            return False

    def on_host_block(self, time: float) -> int:
        """Apply due pending headers before the host block executes; returns count stored."""
        stored = 0
        keep = []
        for p in self.pending:
            if p.forwarded_at < time:
                p.blocks_left -= 1
            if p.blocks_left <= 0:
                stored += self._apply(p.header, p.source)
            else:
                keep.append(p)
        self.pending = keep
        return stored


def verify_inclusion(relay: RelayState, q: VerificationQuery, fee_paid: int = 0) -> bool:
    return relay.verify_inclusion(q, fee_paid)


@dataclass
class Relayer:
    """Honest off-chain client that forwards every new remote main-chain header."""

    relay: RelayState
    remote: object
    pauses: list = field(default_factory=list)
    name: str = "relayer"
    cursor: int = 0

    def paused(self, time: float) -> bool:
        return any(start <= time < end for start, end in self.pauses)

    def step(self, time: float) -> list[BlockHeader]:
        if self.paused(time):
            return []
        out = []
        blocks = self.remote.blocks
        for blk in blocks[self.cursor:]:
            h = blk.header
            if h.self_hash not in self.relay.headers:
                self.relay.enqueue(h, time, source=self.name)
                out.append(h)
        self.cursor = len(blocks)
        return out


def relayer_step(relayer: Relayer, time: float) -> list[BlockHeader]:
    return relayer.step(time)
