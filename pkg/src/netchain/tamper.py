"""Adversarial service-provider strategies.

Each strategy takes an honest response and returns a mutated copy that a
cheating SP might send. A sound verifier must reject every one of them. A
strategy raises :class:`NotApplicable` when the response has nothing it can
attack (e.g. no matched block to drop).
"""

from __future__ import annotations

import copy
import random
from typing import Callable

from . import client, smt
from .model import NETCHAIN, ChainItem, CompoundValue
from .sp import Response


class NotApplicable(Exception):
    pass


def _matched(resp: Response) -> list[int]:
    return sorted(i for i, items in resp.results.items() if items and resp.query.in_window(i))


def _pick(rng: random.Random, seq):
    if not seq:
        raise NotApplicable("no target")
    return rng.choice(list(seq))


def _replace(resp: Response, i: int, pos: int, item: ChainItem) -> None:
    items = list(resp.results[i])
    items[pos] = item
    resp.results[i] = tuple(items)


def identity(resp: Response, rng: random.Random) -> Response:
    return resp


def forge_object(resp: Response, rng: random.Random) -> Response:
    """Swap a returned edge's end vertex for one that was never mined."""
    i = _pick(rng, _matched(resp))
    pos = rng.randrange(len(resp.results[i]))
    old = resp.results[i][pos]
    _replace(resp, i, pos, ChainItem(CompoundValue(old.value.v + "~forged", old.value.w), old.ptr))
    return resp


def forge_in_unmatched(resp: Response, rng: random.Random) -> Response:
    """Claim results for a block that does not hold the key, reusing another block's proof."""
    q = resp.query
    donors = _matched(resp)
    targets = [i for i in range(q.lb, q.ub + 1) if i not in resp.results]
    donor = _pick(rng, donors)
    target = _pick(rng, targets)
    resp.results[target] = resp.results[donor]
    resp.proofs[target] = resp.proofs[donor]
    return resp


def drop_matched_block(resp: Response, rng: random.Random) -> Response:
    i = _pick(rng, _matched(resp))
    del resp.results[i]
    resp.proofs.pop(i, None)
    return resp


def shorten_chain(resp: Response, rng: random.Random) -> Response:
    """Withhold the tail of one block's chain, pretending it holds fewer items."""
    i = _pick(rng, _matched(resp))
    resp.results[i] = resp.results[i][:-1]
    return resp


def relabel_valid_as_boundary(resp: Response, rng: random.Random) -> Response:
    """Cut a block's items so a valid item is presented as the out-boundary one."""
    i = _pick(rng, [i for i in _matched(resp) if len(resp.results[i]) >= 2])
    cut = rng.randrange(1, len(resp.results[i]))
    resp.results[i] = resp.results[i][:cut]
    return resp


def swap_weight(resp: Response, rng: random.Random) -> Response:
    i = _pick(rng, _matched(resp))
    pos = rng.randrange(len(resp.results[i]))
    old = resp.results[i][pos]
    delta = rng.choice((-1, 1)) * rng.randint(1, 50)
    _replace(resp, i, pos, ChainItem(CompoundValue(old.value.v, old.value.w + delta), old.ptr))
    return resp


def reorder_items(resp: Response, rng: random.Random) -> Response:
    candidates = [(i, p) for i in _matched(resp) for p in range(len(resp.results[i]) - 1)
                  if resp.results[i][p] != resp.results[i][p + 1]]
    i, p = _pick(rng, candidates)
    items = list(resp.results[i])
    items[p], items[p + 1] = items[p + 1], items[p]
    resp.results[i] = tuple(items)
    return resp


def stale_boundary(resp: Response, rng: random.Random) -> Response:
    """Present an outdated boundary so the newest matched blocks can be hidden.

    NetChain has no boundary, so the analogue there is replaying another
    block's non-existence proof for a matched block.
    """
    if resp.mode == NETCHAIN:
        stale = [i for i, p in resp.proofs.items() if isinstance(p, smt.NonExistenceProof)]
        src = _pick(rng, stale)
        target = _pick(rng, _matched(resp))
        del resp.results[target]
        resp.proofs[target] = resp.proofs[src]
        return resp
    b = resp.out_boundary
    if b is None:
        raise NotApplicable("key absent; no boundary")
    q = resp.query
    if b <= q.ub:
        # keep the MPT proof but claim an older latest occurrence, dropping block b
        older = [i for i in _matched(resp) if i < b]
        resp.out_boundary = max(older) if older else b - 1
        resp.results.pop(b, None)
        resp.proofs.pop(b, None)
    else:
        # claim the key was last seen inside the window, hiding the true boundary
        resp.proofs.pop(b, None)
        matched = _matched(resp)
        resp.out_boundary = max(matched) if matched else q.ub
    return resp


STRATEGIES: dict[str, Callable[[Response, random.Random], Response]] = {
    "identity": identity,
    "forge-object": forge_object,
    "forge-in-unmatched": forge_in_unmatched,
    "drop-matched-block": drop_matched_block,
    "shorten-chain": shorten_chain,
    "relabel-valid-as-boundary": relabel_valid_as_boundary,
    "swap-weight": swap_weight,
    "reorder-items": reorder_items,
    "stale-boundary": stale_boundary,
}

ATTACKS = tuple(name for name in STRATEGIES if name != "identity")

# error kind the verifier reports for each strategy, per mode
EXPECTED_KIND = {
    "netchain": {
        "forge-object": client.CHAIN_BREAK,
        "forge-in-unmatched": client.PROOF_FAILURE,
        "drop-matched-block": client.COVERAGE_GAP,
        "shorten-chain": client.TRUNCATION,
        "relabel-valid-as-boundary": client.TRUNCATION,
        "swap-weight": client.CHAIN_BREAK,
        "reorder-items": client.CHAIN_BREAK,
        "stale-boundary": client.PROOF_FAILURE,
    },
    "netchain-plus": {
        "forge-object": client.CHAIN_BREAK,
        "forge-in-unmatched": client.BOUNDARY_VIOLATION,
        "drop-matched-block": client.BOUNDARY_VIOLATION,
        "shorten-chain": client.TRUNCATION,
        "relabel-valid-as-boundary": client.TRUNCATION,
        "swap-weight": client.CHAIN_BREAK,
        "reorder-items": client.CHAIN_BREAK,
        "stale-boundary": client.MPT_FAILURE,
    },
}


def apply(name: str, resp: Response, seed: int = 0) -> Response:
    try:
        fn = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown tamper strategy {name!r}; choose from {', '.join(STRATEGIES)}") from None
    return fn(copy.deepcopy(resp), random.Random(seed))
