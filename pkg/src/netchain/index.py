"""Per-block authenticated two-layer index.

Objects sharing a compound key form an ordered hash chain (weight descending,
each item pointing at the digest of its successor). The chain heads are
anchored in a sorted Merkle tree whose root goes into the block header. In
NetChain+ mode each leaf also records the id of the previous block holding the
same key, taken from the global MPT, which is then advanced to this block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import codec, smt
from .model import NETCHAIN, NETCHAIN_PLUS, NO_BLOCK, ChainItem, CompoundKey, CompoundValue, Object
from .mpt import MptStore


class AdsError(ValueError):
    pass


HashChain = tuple[ChainItem, ...]


def chain_order(values: Sequence[CompoundValue]) -> list[CompoundValue]:
    """Weight descending, then v ascending; Python's sort keeps input order for full ties."""
    return sorted(values, key=lambda cv: (-cv.w, cv.v.encode("utf-8")))


def build_chain(values: Sequence[CompoundValue]) -> HashChain:
    if not values:
        raise AdsError("a hash chain needs at least one value")
    ordered = chain_order(values)
    items: list[ChainItem] = [None] * len(ordered)  # type: ignore[list-item]
    ptr: Optional[bytes] = None
    for j in range(len(ordered) - 1, -1, -1):
        item = ChainItem(ordered[j], ptr)
        items[j] = item
        ptr = item.digest()
    return tuple(items)


def chain_links_ok(chain: Sequence[ChainItem]) -> bool:
    for cur, nxt in zip(chain, chain[1:]):
        if cur.ptr != nxt.digest():
            return False
    return bool(chain) and chain[-1].ptr is None


@dataclass
class BlockAds:
    chains: dict[CompoundKey, HashChain]
    tree: smt.SmtTree

    @property
    def root(self) -> bytes:
        return self.tree.root

    def chain(self, k: CompoundKey) -> Optional[HashChain]:
        return self.chains.get(k)

    def encode(self) -> bytes:
        """Body serialization: sorted (key, chain) records, then leaves and levels."""
        out = [codec.u32(len(self.chains))]
        for k in sorted(self.chains):
            chain = self.chains[k]
            out.append(codec.lp(k.u) + codec.lp(k.type) + codec.u32(len(chain)))
            for item in chain:
                out.append(codec.lp(item.value.v) + codec.i64(item.value.w) + codec.encode_ptr(item.ptr))
        out.append(codec.u32(len(self.tree.leaves)))
        for leaf in self.tree.leaves:
            out.append(codec.lp(leaf.encode()))
        out.append(codec.u32(len(self.tree.levels)))
        for level in self.tree.levels[1:]:
            out.append(codec.u32(len(level)))
            out.extend(level)
        return b"".join(out)

    @classmethod
    def decode(cls, r: codec.Reader) -> "BlockAds":
        chains: dict[CompoundKey, HashChain] = {}
        for _ in range(r.u32()):
            k = CompoundKey(r.str_lp(), r.str_lp())
            items = []
            for _ in range(r.u32()):
                v = r.str_lp()
                w = r.i64()
                items.append(ChainItem(CompoundValue(v, w), r.ptr()))
            chains[k] = tuple(items)
        leaves = [smt.SmtLeaf.decode(r.bytes_lp()) for _ in range(r.u32())]
        n_levels = r.u32()
        levels = [[leaf.digest() for leaf in leaves]]
        for _ in range(n_levels - 1):
            levels.append([r.digest() for _ in range(r.u32())])
        return cls(chains, smt.SmtTree(leaves, levels))

    def check(self, plus: bool) -> Optional[str]:
        """Self-consistency of a decoded ADS; returns a reason string on failure."""
        if not self.tree.leaves:
            return "empty SMT"
        if [leaf.key for leaf in self.tree.leaves] != sorted(self.chains):
            return "SMT leaf keys differ from chain keys"
        for a, b in zip(self.tree.leaves, self.tree.leaves[1:]):
            if not a.key < b.key:
                return "SMT leaves not strictly sorted"
        for leaf in self.tree.leaves:
            chain = self.chains[leaf.key]
            if (leaf.id_pre is not None) != plus:
                return f"leaf {leaf.key} has wrong mode"
            if chain != build_chain([it.value for it in chain]):
                return f"hash chain for {leaf.key} broken or out of order"
            if leaf.ptr_h != chain[0].digest():
                return f"leaf {leaf.key} ptr_h mismatch"
        if smt.build_levels(self.tree.levels[0]) != self.tree.levels:
            return "SMT levels inconsistent"
        return None


def group_by_key(objects: Iterable[Object]) -> dict[CompoundKey, list[CompoundValue]]:
    groups: dict[CompoundKey, list[CompoundValue]] = {}
    for o in objects:
        o.validate()
        groups.setdefault(CompoundKey(o.u, o.type), []).append(CompoundValue(o.v, o.w))
    return groups


def build_block_ads(objects: Sequence[Object], mode: str = NETCHAIN,
                    mpt: Optional[MptStore] = None, block_id: int = 0) -> tuple[BlockAds, Optional[bytes]]:
    """Build the ADS for one block; in plus mode also advance ``mpt`` to ``block_id``.

    Returns the ADS and the new MPT root (None in NetChain mode).
    """
    if not objects:
        raise AdsError("a block needs at least one object")
    plus = mode == NETCHAIN_PLUS
    if mode not in (NETCHAIN, NETCHAIN_PLUS):
        raise AdsError(f"unknown mode {mode!r}")
    if plus != (mpt is not None):
        raise AdsError("an MPT store is required in plus mode and only there")
    groups = group_by_key(objects)
    chains: dict[CompoundKey, HashChain] = {}
    leaves = []
    for k in sorted(groups):
        chain = build_chain(groups[k])
        chains[k] = chain
        id_pre = None
        if plus:
            prev, _ = mpt.get(k)
            id_pre = NO_BLOCK if prev is None else prev
        leaves.append(smt.SmtLeaf(k, chain[0].digest(), id_pre))
    tree = smt.build(leaves)
    new_root = None
    if plus:
        for k in chains:
            mpt.set(k, block_id)
        new_root = mpt.root
    return BlockAds(chains, tree), new_root
