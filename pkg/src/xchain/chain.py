"""Deterministic discrete-event simulation of one or more blockchains."""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Callable

from .codec import encode
from .merkle import InclusionProofBundle, MerkleTree, build_tree, prove_membership
from .model import (
    ZERO_HASH,
    Block,
    BlockHeader,
    ContractAddress,
    Receipt,
    Transaction,
    XChainError,
)

EMPTY_MARKER = b""
SIDE_OFFSET = 0.5


class UnknownChain(XChainError, KeyError):
    pass


class DuplicateTxId(XChainError, ValueError):
    pass


class UnknownBlock(XChainError, KeyError):
    pass


class NotOnMainChain(XChainError, ValueError):
    pass


class InvalidHeight(XChainError, ValueError):
    pass


@dataclass
class ChainConfig:
    chain: int
    inter_block_seconds: float = 15.0
    confirmations: int = 5
    timing: str = "fixed"
    max_tx_per_block: int | None = None

    def __post_init__(self):
        if not self.inter_block_seconds > 0:
            raise ValueError("inter_block_seconds must be > 0")
        if self.confirmations < 0:
            raise ValueError("confirmations must be >= 0")
        if self.timing not in ("fixed", "exponential"):
            raise ValueError(f"unknown timing mode {self.timing!r}")
        if self.max_tx_per_block is not None and self.max_tx_per_block < 1:
            raise ValueError("max_tx_per_block must be >= 1")


@dataclass(frozen=True)
class BlockContext:
    chain: int
    height: int
    time: float


class Scheduler:
    """Time-ordered event queue; equal times run by (order key, insertion)."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, time: float, key: int, fn: Callable[[float], None]):
        if time < self.now:
            raise ValueError(f"cannot schedule in the past ({time} < {self.now})")
        heapq.heappush(self._heap, (time, key, self._seq, fn))
        self._seq += 1

    def __len__(self):
        return len(self._heap)

    def run(self, until: float, stop: Callable[[], bool] | None = None):
        while self._heap and self._heap[0][0] <= until:
            time, _key, _seq, fn = heapq.heappop(self._heap)
            self.now = time
            fn(time)
            if stop is not None and stop():
                return True
        return False


def tx_leaves(transactions) -> list[bytes]:
    return [encode(tx) for tx in transactions] or [EMPTY_MARKER]


def receipt_leaves(receipts) -> list[bytes]:
    return [encode(rc) for rc in receipts] or [EMPTY_MARKER]


class Chain:
    """State of one blockchain: main chain, injected side branches, FIFO mempool.

    A transaction submitted at time ``t`` is eligible for the first block whose
    timestamp is strictly greater than ``t``.
    """

    def __init__(self, config: ChainConfig):
        self.config = config
        self.id = config.chain
        self.contracts: dict[ContractAddress, object] = {}
        self.pre_block_hooks: list = []
        self.post_block_hooks: list = []
        self.mempool: list[tuple[float, Transaction]] = []
        self.blocks: list[Block] = []
        self.side_blocks: dict[bytes, Block] = {}
        self.trees: dict[bytes, tuple[MerkleTree, MerkleTree]] = {}
        self._main: dict[bytes, Block] = {}
        self._tx_location: dict[bytes, bytes] = {}
        self._pending_ids: set[bytes] = set()
        self.clock = 0.0
        self._append(self._seal(0, ZERO_HASH, (), (), 0.0), main=True)

    def _seal(self, number, parent_hash, txs, receipts, timestamp) -> Block:
        tx_tree = build_tree(tx_leaves(txs))
        rc_tree = build_tree(receipt_leaves(receipts))
        header = BlockHeader.create(self.id, number, parent_hash, tx_tree.root, rc_tree.root, timestamp)
        block = Block(header, tuple(txs), tuple(receipts))
        self.trees[block.hash] = (tx_tree, rc_tree)
        return block

    def _append(self, block: Block, main: bool):
        if main:
            self.blocks.append(block)
            self._main[block.hash] = block
            for tx in block.transactions:
                self._tx_location[tx.id] = block.hash
        else:
            self.side_blocks[block.hash] = block

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.head.header.number

    def register_contract(self, address: ContractAddress, contract):
        if address.chain != self.id:
            raise ValueError(f"contract {address} does not live on chain {self.id}")
        self.contracts[address] = contract

    def submit_tx(self, tx: Transaction, time: float) -> float:
        if tx.id in self._pending_ids or tx.id in self._tx_location:
            raise DuplicateTxId(tx.id.hex())
        self._pending_ids.add(tx.id)
        self.mempool.append((time, tx))
        return time

    def produce_block(self, time: float) -> Block:
        if time < self.clock:
            raise ValueError("clock must be monotone")
        self.clock = time
        height = self.height + 1
        ctx = BlockContext(self.id, height, time)
        for hook in self.pre_block_hooks:
            hook(ctx)
        limit = self.config.max_tx_per_block
        take, keep = [], []
        for entry in self.mempool:
            if entry[0] < time and (limit is None or len(take) < limit):
                take.append(entry[1])
            else:
                keep.append(entry)
        self.mempool = keep
        receipts = []
        for tx in take:
            self._pending_ids.discard(tx.id)
            contract = self.contracts.get(tx.target)
            if contract is None:
                receipts.append(Receipt(tx.id, False, ("NoContract",)))
            else:
                receipts.append(contract.execute(tx, ctx))
        block = self._seal(height, self.head.hash, take, receipts, time)
        self._append(block, main=True)
        for hook in self.post_block_hooks:
            hook(self, block)
        return block

    def block(self, block_hash: bytes) -> Block:
        blk = self._main.get(block_hash) or self.side_blocks.get(block_hash)
        if blk is None:
            raise UnknownBlock(block_hash.hex())
        return blk

    def is_main(self, block_hash: bytes) -> bool:
        return block_hash in self._main

    def confirmations_of(self, block_hash: bytes) -> int:
        if block_hash in self.side_blocks:
            raise NotOnMainChain(block_hash.hex())
        blk = self._main.get(block_hash)
        if blk is None:
            raise UnknownBlock(block_hash.hex())
        return self.height - blk.header.number

    def locate(self, tx_id: bytes) -> Block | None:
        h = self._tx_location.get(tx_id)
        return self._main[h] if h is not None else None

    def proof_bundle(self, tx_id: bytes, block_hash: bytes | None = None) -> InclusionProofBundle:
        """Off-chain construction of the tx + receipt proofs for an included tx."""
        blk = self.locate(tx_id) if block_hash is None else self.block(block_hash)
        if blk is None:
            raise UnknownBlock(f"tx {tx_id.hex()} not on main chain")
        index = next(i for i, t in enumerate(blk.transactions) if t.id == tx_id)
        tx_tree, rc_tree = self.trees[blk.hash]
        return InclusionProofBundle(prove_membership(tx_tree, index), prove_membership(rc_tree, index),
                                    index, blk.hash, blk.receipts[index])

    def inject_fork(self, from_height: int, length: int, transactions=(), receipts=None) -> list[BlockHeader]:
        """Grow a side branch off main-chain block ``from_height``.

        ``transactions`` go into the first fork block with the given (or
        all-successful) receipts; later fork blocks are empty.  Side blocks
        never join the main chain.  Their timestamps sit half a second after
        the main-chain slot so an empty side block never hashes like its
        main-chain sibling.
        """
        if not 0 <= from_height <= self.height:
            raise InvalidHeight(f"fork point {from_height} beyond head {self.height}")
        if length < 1:
            raise InvalidHeight("fork length must be >= 1")
        txs = tuple(transactions)
        if receipts is None:
            receipts = tuple(Receipt(tx.id, True, ()) for tx in txs)
        parent = self.blocks[from_height].header
        out = []
        for i in range(length):
            body_txs, body_rcs = (txs, tuple(receipts)) if i == 0 else ((), ())
            blk = self._seal(parent.number + 1, parent.self_hash, body_txs, body_rcs,
                             parent.timestamp + self.config.inter_block_seconds + SIDE_OFFSET)
            self._append(blk, main=False)
            out.append(blk.header)
            parent = blk.header
        return out


class Network:
    """All chains of one scenario driven by a shared scheduler."""

    def __init__(self, configs, seed: int = 0, scheduler: Scheduler | None = None):
        self.scheduler = scheduler or Scheduler()
        self.seed = seed
        self.chains: dict[int, Chain] = {}
        self.submit_times: dict[bytes, float] = {}
        self._rngs: dict[int, random.Random] = {}
        self.running = True
        for cfg in configs:
            if cfg.chain in self.chains:
                raise ValueError(f"duplicate chain id {cfg.chain}")
            self.chains[cfg.chain] = Chain(cfg)
            self._rngs[cfg.chain] = random.Random(f"{seed}:blocks:{cfg.chain}")
        for cid in sorted(self.chains):
            self._schedule_next(cid, 0.0)

    def chain(self, chain_id: int) -> Chain:
        try:
            return self.chains[chain_id]
        except KeyError:
            raise UnknownChain(chain_id) from None

    def _schedule_next(self, chain_id: int, after: float):
        cfg = self.chains[chain_id].config
        if cfg.timing == "fixed":
            gap = cfg.inter_block_seconds
        else:
            gap = self._rngs[chain_id].expovariate(1.0 / cfg.inter_block_seconds)
        self.scheduler.schedule(after + gap, chain_id, lambda t, c=chain_id: self._on_block_event(c, t))

    def _on_block_event(self, chain_id: int, time: float):
        if not self.running:
            return
        self.produce_block(chain_id, time)
        self._schedule_next(chain_id, time)

    def submit_tx(self, chain_id: int, tx: Transaction, time: float | None = None) -> float:
        time = self.scheduler.now if time is None else time
        self.chain(chain_id).submit_tx(tx, time)
        self.submit_times.setdefault(tx.id, time)
        return time

    def produce_block(self, chain_id: int, time: float | None = None) -> Block:
        return self.chain(chain_id).produce_block(self.scheduler.now if time is None else time)

    def confirmations_of(self, chain_id: int, block_hash: bytes) -> int:
        return self.chain(chain_id).confirmations_of(block_hash)

    def inject_fork(self, chain_id: int, from_height: int, length: int, **kw) -> list[BlockHeader]:
        return self.chain(chain_id).inject_fork(from_height, length, **kw)

    def run(self, until: float, stop=None) -> bool:
        return self.scheduler.run(until, stop)
