"""Sorted Merkle tree over compound-key leaves.

Leaves are strictly ordered by key. Internal digests are
``sha256(0x03 || left || right)``; when a level has odd width its last node is
promoted unchanged. Proofs carry the leaf index and tree size, which lets the
verifier recompute the path shape and check leaf adjacency for non-existence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import codec
from .model import CompoundKey


class SmtError(ValueError):
    pass


@dataclass(frozen=True)
class SmtLeaf:
    key: CompoundKey
    ptr_h: bytes
    id_pre: Optional[int] = None  # NetChain+ only

    def encode(self) -> bytes:
        return codec.encode_leaf(self.key.u, self.key.type, self.ptr_h, self.id_pre)

    def digest(self) -> bytes:
        return codec.sha256(self.encode())

    @classmethod
    def decode(cls, buf: bytes) -> "SmtLeaf":
        u, t, ptr_h, id_pre = codec.decode_leaf(buf)
        return cls(CompoundKey(u, t), ptr_h, id_pre)


def hash_internal(left: bytes, right: bytes) -> bytes:
    return codec.sha256(codec.encode_internal(left, right))


def path_shape(index: int, size: int) -> list[Optional[int]]:
    """Sibling positions from leaf level upward.

    Each entry is 0 if the sibling sits on the left, 1 if on the right, or
    None where the node is promoted (no sibling at that level).
    """
    if size < 1 or not 0 <= index < size:
        raise SmtError(f"leaf index {index} out of range for size {size}")
    shape: list[Optional[int]] = []
    while size > 1:
        if index % 2 == 1:
            shape.append(0)
        elif index == size - 1:
            shape.append(None)
        else:
            shape.append(1)
        index //= 2
        size = (size + 1) // 2
    return shape


@dataclass(frozen=True)
class MerkleProof:
    leaf: SmtLeaf
    leaf_index: int
    siblings: tuple[bytes, ...]
    tree_size: int

    def root_from_path(self) -> Optional[bytes]:
        """Recompute the root implied by this proof, or None if malformed."""
        try:
            shape = path_shape(self.leaf_index, self.tree_size)
        except SmtError:
            return None
        steps = [s for s in shape if s is not None]
        if len(steps) != len(self.siblings):
            return None
        h = self.leaf.digest()
        sib = iter(self.siblings)
        for side in shape:
            if side is None:
                continue
            s = next(sib)
            if len(s) != codec.DIGEST_SIZE:
                return None
            h = hash_internal(s, h) if side == 0 else hash_internal(h, s)
        return h


@dataclass(frozen=True)
class NonExistenceProof:
    left: Optional[MerkleProof]
    right: Optional[MerkleProof]


@dataclass
class SmtTree:
    leaves: list[SmtLeaf]
    levels: list[list[bytes]] = field(repr=False)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def keys(self) -> list[CompoundKey]:
        return [leaf.key for leaf in self.leaves]

    def index_of(self, k: CompoundKey) -> int:
        """Insertion position of ``k`` among the sorted leaf keys."""
        lo, hi = 0, len(self.leaves)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.leaves[mid].key < k:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def find(self, k: CompoundKey) -> Optional[int]:
        i = self.index_of(k)
        if i < len(self.leaves) and self.leaves[i].key == k:
            return i
        return None

    def leaf_for(self, k: CompoundKey) -> Optional[SmtLeaf]:
        i = self.find(k)
        return None if i is None else self.leaves[i]

    def proof_at(self, index: int) -> MerkleProof:
        siblings = []
        i = index
        for level in self.levels[:-1]:
            partner = i ^ 1
            if partner < len(level):
                siblings.append(level[partner])
            i //= 2
        return MerkleProof(self.leaves[index], index, tuple(siblings), len(self.leaves))


def build_levels(digests: list[bytes]) -> list[list[bytes]]:
    levels = [digests]
    level = digests
    while len(level) > 1:
        nxt = [hash_internal(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        levels.append(nxt)
        level = nxt
    return levels


def build(leaves: Sequence[SmtLeaf]) -> SmtTree:
    if not leaves:
        raise SmtError("cannot build an SMT with no leaves")
    for a, b in zip(leaves, leaves[1:]):
        if not a.key < b.key:
            raise SmtError(f"leaf keys not strictly increasing: {a.key} then {b.key}")
    leaves = list(leaves)
    return SmtTree(leaves, build_levels([leaf.digest() for leaf in leaves]))


def prove_existence(tree: SmtTree, k: CompoundKey) -> MerkleProof:
    i = tree.find(k)
    if i is None:
        raise SmtError(f"key {k} not in tree; use prove_non_existence")
    return tree.proof_at(i)


def verify_existence(root: bytes, k: CompoundKey, proof: MerkleProof) -> bool:
    if proof.leaf.key != k:
        return False
    return proof.root_from_path() == root


def prove_non_existence(tree: SmtTree, k: CompoundKey) -> NonExistenceProof:
    i = tree.index_of(k)
    if i < len(tree.leaves) and tree.leaves[i].key == k:
        raise SmtError(f"key {k} is present; use prove_existence")
    left = tree.proof_at(i - 1) if i > 0 else None
    right = tree.proof_at(i) if i < len(tree.leaves) else None
    return NonExistenceProof(left, right)


def verify_non_existence(root: bytes, k: CompoundKey, proof: NonExistenceProof) -> bool:
    left, right = proof.left, proof.right
    if left is None and right is None:
        return False
    for side in (left, right):
        if side is not None and side.root_from_path() != root:
            return False
    if left is not None and right is not None:
        if left.tree_size != right.tree_size:
            return False
        if right.leaf_index != left.leaf_index + 1:
            return False
        return left.leaf.key < k < right.leaf.key
    if right is not None:
        return right.leaf_index == 0 and k < right.leaf.key
    return left.leaf_index == left.tree_size - 1 and left.leaf.key < k

