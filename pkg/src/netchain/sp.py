"""Service-provider query engines.

NetChain answers a window by visiting every block and attaching an existence
or non-existence proof for the query key. NetChain+ locates the matched blocks
through the MPT and the ``id_pre`` links stored in SMT leaves, computes the
global top-k in a first pass, and in a second pass returns only the valid
prefix of each matched chain plus one out-boundary item.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Union

from . import smt
from .ledger import Ledger, LedgerError
from .model import NETCHAIN, NETCHAIN_PLUS, ChainItem, CompoundKey
from .mpt import MptProof

Proof = Union[smt.MerkleProof, smt.NonExistenceProof]


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class Query:
    u: str
    type: str
    k: int
    lb: int
    ub: int

    @property
    def key(self) -> CompoundKey:
        return CompoundKey(self.u, self.type)

    def validate(self) -> None:
        if self.k < 1:
            raise QueryError(f"k must be >= 1, got {self.k}")
        if self.lb < 0 or self.lb > self.ub:
            raise QueryError(f"bad window [{self.lb}, {self.ub}]")

    def in_window(self, i: int) -> bool:
        return self.lb <= i <= self.ub


@dataclass
class Response:
    mode: str
    query: Query
    results: dict[int, tuple[ChainItem, ...]] = field(default_factory=dict)
    proofs: dict[int, Proof] = field(default_factory=dict)
    mpt_proof: Optional[MptProof] = None
    out_boundary: Optional[int] = None

    @property
    def n_items(self) -> int:
        return sum(len(r) for r in self.results.values())


def rank(w: int, block_id: int, pos: int) -> tuple[int, int, int]:
    """Sort key shared by SP and verifier: weight desc, block asc, chain position asc."""
    return (-w, block_id, pos)


def top_k(candidates: list[tuple[int, int, int]], k: int) -> list[tuple[int, int, int]]:
    """``candidates`` are (w, block_id, pos); returns the best k in rank order."""
    return heapq.nsmallest(k, candidates, key=lambda c: rank(*c))


def _check_range(store: Ledger, q: Query) -> None:
    q.validate()
    if q.ub >= len(store):
        raise QueryError(f"window [{q.lb}, {q.ub}] exceeds chain height {len(store)}")


def search_netchain(store: Ledger, q: Query) -> Response:
    _check_range(store, q)
    kq = q.key
    resp = Response(NETCHAIN, q)
    for i in range(q.lb, q.ub + 1):
        ads = store.get_block(i).ads
        idx = ads.tree.find(kq)
        if idx is None:
            resp.proofs[i] = smt.prove_non_existence(ads.tree, kq)
        else:
            resp.proofs[i] = ads.tree.proof_at(idx)
            resp.results[i] = ads.chains[kq][:q.k]
    return resp


@dataclass
class Boundaries:
    a: Optional[int]          # right boundary matched block (may lie below lb, or be -1)
    b: Optional[int]          # out boundary block
    mpt_proof: Optional[MptProof]
    b_proof: Optional[smt.MerkleProof]


def _leaf(store: Ledger, i: int, kq: CompoundKey) -> smt.SmtLeaf:
    leaf = store.get_block(i).ads.tree.leaf_for(kq)
    if leaf is None:
        raise LedgerError(f"block {i} is linked for {kq} but does not contain it")
    return leaf


def find_boundaries(store: Ledger, q: Query) -> Boundaries:
    if not store.plus:
        raise QueryError("boundary search needs a NetChain+ ledger")
    kq = q.key
    i, pi_mpt = store.mpt.get(kq)
    if i is None:
        return Boundaries(None, None, pi_mpt, None)
    if i <= q.ub:
        return Boundaries(i, i, pi_mpt, None)
    while i > q.ub:
        leaf = _leaf(store, i, kq)
        if leaf.id_pre <= q.ub:
            proof = smt.prove_existence(store.get_block(i).ads.tree, kq)
            return Boundaries(leaf.id_pre, i, None, proof)
        i = leaf.id_pre
    raise AssertionError("unreachable: the id_pre walk always crosses ub")


def search_netchain_plus(store: Ledger, q: Query) -> Response:
    _check_range(store, q)
    kq = q.key
    bounds = find_boundaries(store, q)
    resp = Response(NETCHAIN_PLUS, q, mpt_proof=bounds.mpt_proof, out_boundary=bounds.b)
    if bounds.b_proof is not None:
        resp.proofs[bounds.b] = bounds.b_proof
    if bounds.a is None:
        return resp

    # first round: collect every matched value in the window
    matched: list[int] = []
    candidates: list[tuple[int, int, int]] = []
    i = bounds.a
    while q.in_window(i):
        matched.append(i)
        for pos, item in enumerate(store.get_block(i).ads.chains[kq]):
            candidates.append((item.value.w, i, pos))
        i = _leaf(store, i, kq).id_pre
    valid = {(bid, pos) for _, bid, pos in top_k(candidates, q.k)}

    # second round: valid prefix plus the out-boundary item per block
    for i in matched:
        ads = store.get_block(i).ads
        chain = ads.chains[kq]
        j = 0
        while j < len(chain) - 1 and (i, j) in valid:
            j += 1
        resp.results[i] = chain[:j + 1]
        resp.proofs[i] = smt.prove_existence(ads.tree, kq)
    return resp


def search(store: Ledger, q: Query) -> Response:
    if store.plus:
        return search_netchain_plus(store, q)
    return search_netchain(store, q)
