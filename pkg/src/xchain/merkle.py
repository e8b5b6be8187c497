"""Binary Merkle trees with domain-separated hashing and membership proofs.

Leaves hash as ``H(0x00 | data)`` and inner nodes as ``H(0x01 | left | right)``;
a level with an odd node count duplicates its last node.  Leaves are assumed
distinct, which always holds for transaction and receipt lists.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .codec import sha256
from .model import Receipt, XChainError


class EmptyLeaves(XChainError, ValueError):
    pass


class IndexOutOfRange(XChainError, IndexError):
    pass


class PathMismatch(XChainError, ValueError):
    pass


def leaf_hash(data: bytes) -> bytes:
    return sha256(b"\x00" + data)


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(b"\x01" + left + right)


@dataclass(frozen=True)
class MerkleTree:
    leaves: tuple
    levels: tuple
    root: bytes

    def __len__(self):
        return len(self.leaves)


@codec.register(b"P")
@dataclass(frozen=True)
class MerkleProof:
    leaf_hash: bytes
    index: int
    siblings: tuple = ()

    @classmethod
    def from_dict(cls, d: dict) -> MerkleProof:
        return cls(bytes.fromhex(d["leaf_hash"]), int(d["index"]),
                   tuple(bytes.fromhex(s) for s in d["siblings"]))


@codec.register(b"B")
@dataclass(frozen=True)
class InclusionProofBundle:
    """Transaction proof and receipt proof along one shared search path.

    The receipt itself travels with the bundle so the verifier can read its
    status flag after checking it against the receipt root.
    """

    tx_proof: MerkleProof
    receipt_proof: MerkleProof
    path: int
    block_hash: bytes
    receipt: Receipt | None

    def __post_init__(self):
        if not (self.tx_proof.index == self.receipt_proof.index == self.path):
            raise PathMismatch(
                f"tx index {self.tx_proof.index}, receipt index {self.receipt_proof.index}, path {self.path}")

    @classmethod
    def unchecked(cls, tx_proof, receipt_proof, path, block_hash, receipt) -> InclusionProofBundle:
        """Build a bundle without the same-path check, as an adversary could."""
        obj = object.__new__(cls)
        for name, value in (("tx_proof", tx_proof), ("receipt_proof", receipt_proof), ("path", path),
                            ("block_hash", block_hash), ("receipt", receipt)):
            object.__setattr__(obj, name, value)
        return obj

    @classmethod
    def from_dict(cls, d: dict) -> InclusionProofBundle:
        rc = d.get("receipt")
        receipt = None
        if rc is not None:
            receipt = Receipt(bytes.fromhex(rc["tx_id"]), bool(rc["status"]), tuple(rc.get("events", ())))
        return cls.unchecked(MerkleProof.from_dict(d["tx_proof"]), MerkleProof.from_dict(d["receipt_proof"]),
                             int(d["path"]), bytes.fromhex(d["block_hash"]), receipt)


def build_tree(leaves) -> MerkleTree:
    leaves = list(leaves)
    if not leaves:
        raise EmptyLeaves("a Merkle tree needs at least one leaf")
    level = tuple(leaf_hash(bytes(x)) for x in leaves)
    levels = [level]
    while len(level) > 1:
        padded = level + (level[-1],) if len(level) % 2 else level
        level = tuple(node_hash(padded[i], padded[i + 1]) for i in range(0, len(padded), 2))
        levels.append(level)
    return MerkleTree(levels[0], tuple(levels), level[0])


def prove_membership(tree: MerkleTree, index: int) -> MerkleProof:
    if not 0 <= index < len(tree.leaves):
        raise IndexOutOfRange(f"index {index} outside tree of {len(tree.leaves)} leaves")
    siblings = []
    i = index
    for level in tree.levels[:-1]:
        partner = i ^ 1
        siblings.append(level[partner] if partner < len(level) else level[i])
        i >>= 1
    return MerkleProof(tree.leaves[index], index, tuple(siblings))


def verify_membership(proof: MerkleProof, expected_root: bytes) -> bool:
    try:
        h = proof.leaf_hash
        i = proof.index
        if not isinstance(i, int) or i < 0 or len(h) != 32:
            return False
        for sib in proof.siblings:
            if len(sib) != 32:
                return False
            if i & 1:
                # a right-hand node is never a copy of its left neighbour
                if sib == h:
                    return False
                h = node_hash(sib, h)
            else:
                h = node_hash(h, sib)
            i >>= 1
        return i == 0 and h == expected_root
    except (TypeError, AttributeError):
        return False
