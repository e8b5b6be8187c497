"""Shared vocabulary: chains, users, entities, transactions, receipts, blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import codec
from .codec import encode, sha256

ChainId = int
UserId = str
EntityId = int

ZERO_HASH = b"\x00" * 32


class XChainError(Exception):
    """Base class for every error raised by this package."""


class NotIncluded(XChainError):
    pass


@codec.register(b"A")
@dataclass(frozen=True, order=True)
class ContractAddress:
    chain: ChainId
    addr: str

    def __str__(self):
        return f"{self.chain}:{self.addr}"


def freeze(value):
    """Recursively turn lists into tuples so decoded values compare equal."""
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    return value


def transaction_id(signer: UserId, nonce: int, target: ContractAddress, payload: tuple) -> bytes:
    return sha256(encode((signer, nonce, target, payload)))


@codec.register(b"X")
@dataclass(frozen=True)
class Transaction:
    """A signed contract invocation.

    ``id`` is derived from the other fields and checked on construction, so a
    decoded or hand-built transaction can never carry a stale hash.
    Signatures are reduced to the ``signer`` field.
    """

    id: bytes
    signer: UserId
    nonce: int
    target: ContractAddress
    payload: tuple

    def __post_init__(self):
        if not isinstance(self.payload, tuple):
            raise codec.CodecError("payload must be a tuple")
        if self.id != transaction_id(self.signer, self.nonce, self.target, self.payload):
            raise codec.CodecError("transaction id does not match its fields")

    @classmethod
    def create(cls, signer: UserId, nonce: int, target: ContractAddress, payload: tuple) -> Transaction:
        payload = freeze(payload)
        return cls(transaction_id(signer, nonce, target, payload), signer, nonce, target, payload)

    @property
    def kind(self) -> str | None:
        if self.payload and isinstance(self.payload[0], str):
            return self.payload[0]
        return None


@codec.register(b"R")
@dataclass(frozen=True)
class Receipt:
    tx_id: bytes
    status: bool
    events: tuple = ()


def header_hash(chain, number, parent_hash, tx_root, receipt_root, timestamp) -> bytes:
    return sha256(encode((chain, number, parent_hash, tx_root, receipt_root, float(timestamp))))


@codec.register(b"H")
@dataclass(frozen=True)
class BlockHeader:
    chain: ChainId
    number: int
    parent_hash: bytes
    tx_root: bytes
    receipt_root: bytes
    timestamp: float
    self_hash: bytes = field(default=ZERO_HASH)

    @classmethod
    def create(cls, chain, number, parent_hash, tx_root, receipt_root, timestamp) -> BlockHeader:
        timestamp = float(timestamp)
        h = header_hash(chain, number, parent_hash, tx_root, receipt_root, timestamp)
        return cls(chain, number, parent_hash, tx_root, receipt_root, timestamp, h)

    def recompute_hash(self) -> bytes:
        return header_hash(self.chain, self.number, self.parent_hash,
                           self.tx_root, self.receipt_root, self.timestamp)

    @classmethod
    def from_dict(cls, d: dict) -> BlockHeader:
        return cls(int(d["chain"]), int(d["number"]), bytes.fromhex(d["parent_hash"]),
                   bytes.fromhex(d["tx_root"]), bytes.fromhex(d["receipt_root"]),
                   float(d["timestamp"]), bytes.fromhex(d["self_hash"]))


@codec.register(b"K")
@dataclass(frozen=True)
class Block:
    header: BlockHeader
    transactions: tuple = ()
    receipts: tuple = ()

    def __post_init__(self):
        if len(self.transactions) != len(self.receipts):
            raise codec.CodecError("every transaction needs exactly one receipt")
        for tx, rc in zip(self.transactions, self.receipts):
            if rc.tx_id != tx.id:
                raise codec.CodecError("receipt order does not match transaction order")

    @property
    def hash(self) -> bytes:
        return self.header.self_hash

    def index_of(self, tx: Transaction) -> int:
        for i, t in enumerate(self.transactions):
            if t.id == tx.id:
                return i
        raise NotIncluded(f"tx {tx.id.hex()[:12]} not in block {self.header.number}")


def called_contract(tx: Transaction) -> ContractAddress:
    return tx.target


def submitter(tx: Transaction) -> UserId:
    return tx.signer


def is_successful(tx: Transaction, block: Block) -> bool:
    return block.receipts[block.index_of(tx)].status
