"""Light-client verification of query responses against block headers only.

The verifier never touches a ledger: its inputs are the header chain, the
query the user issued, and the response received from the service provider.
Any failed check raises :class:`VerifyError`; there is no partial acceptance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from . import mpt, smt
from .ledger import BlockHeader
from .model import NETCHAIN, NETCHAIN_PLUS, ChainItem, CompoundKey, CompoundValue
from .sp import Query, Response, rank, top_k

PROOF_FAILURE = "proof-failure"
KEY_MISMATCH = "key-mismatch"
CHAIN_BREAK = "chain-break"
TRUNCATION = "truncation"
BOUNDARY_VIOLATION = "boundary-violation"
COVERAGE_GAP = "coverage-gap"
MPT_FAILURE = "mpt-failure"

ERROR_KINDS = (PROOF_FAILURE, KEY_MISMATCH, CHAIN_BREAK, TRUNCATION,
               BOUNDARY_VIOLATION, COVERAGE_GAP, MPT_FAILURE)


class VerifyError(Exception):
    def __init__(self, kind: str, block_id: Optional[int] = None, detail: str = ""):
        self.kind = kind
        self.block_id = block_id
        self.detail = detail
        where = "" if block_id is None else f" at block {block_id}"
        super().__init__(f"{kind}{where}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class VerifiedResult:
    entries: tuple[tuple[CompoundValue, int], ...]

    @property
    def values(self) -> list[CompoundValue]:
        return [v for v, _ in self.entries]


def _header(headers: Sequence[BlockHeader], i: int) -> BlockHeader:
    if not 0 <= i < len(headers):
        raise VerifyError(COVERAGE_GAP, i, "no header for this block")
    return headers[i]


def _check_leaf(root: bytes, kq: CompoundKey, proof: object, i: int, plus: bool) -> smt.SmtLeaf:
    if not isinstance(proof, smt.MerkleProof):
        raise VerifyError(PROOF_FAILURE, i, "matched block needs an existence proof")
    if proof.leaf.key != kq:
        raise VerifyError(KEY_MISMATCH, i, f"proof is for {proof.leaf.key}")
    if (proof.leaf.id_pre is not None) != plus:
        raise VerifyError(PROOF_FAILURE, i, "leaf format does not match ledger mode")
    if not smt.verify_existence(root, kq, proof):
        raise VerifyError(PROOF_FAILURE, i, "existence proof does not reach H_s")
    return proof.leaf


def _walk_chain(items: Sequence[ChainItem], ptr_h: bytes, i: int) -> None:
    expected: Optional[bytes] = ptr_h
    for j, item in enumerate(items):
        if expected is None or item.digest() != expected:
            raise VerifyError(CHAIN_BREAK, i, f"chain item {j} does not match its pointer")
        expected = item.ptr


def _assemble(pool: list[tuple[int, int, int]], lookup: dict[tuple[int, int], CompoundValue],
              k: int) -> VerifiedResult:
    best = top_k(pool, k)
    return VerifiedResult(tuple((lookup[(bid, pos)], bid) for _, bid, pos in best))


def verify_netchain(headers: Sequence[BlockHeader], q: Query, resp: Response) -> VerifiedResult:
    q.validate()
    kq = q.key
    if resp.mode != NETCHAIN:
        raise VerifyError(PROOF_FAILURE, None, f"response mode {resp.mode!r}")
    stray = [i for i in list(resp.proofs) + list(resp.results) if not q.in_window(i)]
    if stray:
        raise VerifyError(BOUNDARY_VIOLATION, stray[0], "entry outside the query window")
    pool: list[tuple[int, int, int]] = []
    lookup: dict[tuple[int, int], CompoundValue] = {}
    for i in range(q.lb, q.ub + 1):
        root = _header(headers, i).smt_root
        proof = resp.proofs.get(i)
        if proof is None:
            raise VerifyError(COVERAGE_GAP, i, "no proof for block in window")
        items = resp.results.get(i)
        if items is None:
            if not isinstance(proof, smt.NonExistenceProof):
                raise VerifyError(PROOF_FAILURE, i, "unmatched block needs a non-existence proof")
            if not smt.verify_non_existence(root, kq, proof):
                raise VerifyError(PROOF_FAILURE, i, "non-existence proof rejected")
            continue
        leaf = _check_leaf(root, kq, proof, i, plus=False)
        _walk_chain(items, leaf.ptr_h, i)
        if not items or (len(items) < q.k and items[-1].ptr is not None):
            raise VerifyError(TRUNCATION, i, f"{len(items)} items returned but chain continues")
        for pos, item in enumerate(items):
            pool.append((item.value.w, i, pos))
            lookup[(i, pos)] = item.value
    return _assemble(pool, lookup, q.k)


def verify_netchain_plus(headers: Sequence[BlockHeader], q: Query, resp: Response) -> VerifiedResult:
    q.validate()
    kq = q.key
    if resp.mode != NETCHAIN_PLUS:
        raise VerifyError(PROOF_FAILURE, None, f"response mode {resp.mode!r}")
    if not headers:
        raise VerifyError(COVERAGE_GAP, None, "no headers")
    latest = headers[-1]
    if latest.mpt_root is None:
        raise VerifyError(MPT_FAILURE, None, "headers carry no MPT root")

    # candidate result set from everything returned
    pool: list[tuple[int, int, int]] = []
    lookup: dict[tuple[int, int], CompoundValue] = {}
    for i, items in resp.results.items():
        for pos, item in enumerate(items):
            pool.append((item.value.w, i, pos))
            lookup[(i, pos)] = item.value
    res = {(bid, pos) for _, bid, pos in top_k(pool, q.k)}

    b = resp.out_boundary
    if b is None:
        # key never written: the MPT must prove absence, and nothing may be returned
        if resp.mpt_proof is None or not mpt.kv_check(latest.mpt_root, kq, None, resp.mpt_proof):
            raise VerifyError(MPT_FAILURE, None, "absence of the key is not proven")
        if resp.results or resp.proofs:
            raise VerifyError(BOUNDARY_VIOLATION, None, "results returned for an absent key")
        return VerifiedResult(())
    if b <= q.ub:
        if resp.mpt_proof is None or not mpt.kv_check(latest.mpt_root, kq, b, resp.mpt_proof):
            raise VerifyError(MPT_FAILURE, b, "latest occurrence not proven by the MPT")
        a = b
    else:
        leaf = _check_leaf(_header(headers, b).smt_root, kq, resp.proofs.get(b), b, plus=True)
        if leaf.id_pre > q.ub:
            raise VerifyError(BOUNDARY_VIOLATION, b, "out-boundary block is not the first above ub")
        a = leaf.id_pre

    # pass 1: follow the authenticated links and check every proof and chain
    walked: list[int] = []
    i = a
    while q.in_window(i):
        proof = resp.proofs.get(i)
        if proof is None:
            raise VerifyError(BOUNDARY_VIOLATION, i, "linked matched block missing from response")
        leaf = _check_leaf(_header(headers, i).smt_root, kq, proof, i, plus=True)
        items = resp.results.get(i, ())
        if not items:
            raise VerifyError(TRUNCATION, i, "matched block returned no items")
        _walk_chain(items, leaf.ptr_h, i)
        walked.append(i)
        if leaf.id_pre >= i:
            raise VerifyError(BOUNDARY_VIOLATION, i, "id_pre does not point backwards")
        i = leaf.id_pre

    visited = set(walked)
    allowed_proofs = visited | ({b} if b > q.ub else set())
    extra = (set(resp.results) - visited) | (set(resp.proofs) - allowed_proofs)
    if extra:
        raise VerifyError(BOUNDARY_VIOLATION, min(extra), "entry not on the verified link walk")

    # pass 2: every block returns its valid prefix plus one out-boundary item
    for i in walked:
        items = resp.results[i]
        last = len(items) - 1
        for pos, item in enumerate(items):
            in_res = (i, pos) in res
            if pos < last and not in_res:
                raise VerifyError(BOUNDARY_VIOLATION, i, f"interior item {pos} is not in the top-k")
            if pos == last and in_res and item.ptr is not None:
                raise VerifyError(TRUNCATION, i, f"valid item {pos} returned as the boundary")

    best = sorted(res, key=lambda p: rank(lookup[p].w, *p))
    return VerifiedResult(tuple((lookup[p], p[0]) for p in best))


def verify(headers: Sequence[BlockHeader], q: Query, resp: Response) -> VerifiedResult:
    if headers and headers[-1].mpt_root is not None:
        return verify_netchain_plus(headers, q, resp)
    return verify_netchain(headers, q, resp)
