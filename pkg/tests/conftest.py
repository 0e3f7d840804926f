"""Shared fixtures and brute-force oracles.

The oracles here deliberately avoid the package's chain and tree code: they
work straight from the raw objects of each block.
"""

from __future__ import annotations

import random

import pytest

from netchain.ledger import Ledger
from netchain.model import NETCHAIN, NETCHAIN_PLUS, CompoundKey, Object
from netchain.sp import Query

MODES = (NETCHAIN, NETCHAIN_PLUS)


def fixed_clock():
    return 1_600_000_000


def make_ledger(blocks, mode, path=None):
    store = Ledger(mode, path, clock=fixed_clock) if path is None else Ledger.create(path, mode, fixed_clock)
    for objs in blocks:
        store.append(objs)
    return store


def random_blocks(rng: random.Random, n_blocks: int, per_block=(1, 12), n_vertices=12,
                  types=("t1", "t2"), weights=(1, 30)):
    """Small alphabets so keys recur across blocks and weights tie often."""
    blocks = []
    for _ in range(n_blocks):
        objs = []
        for _ in range(rng.randint(*per_block)):
            u = f"u{rng.randrange(n_vertices)}"
            v = f"v{rng.randrange(n_vertices * 2)}"
            objs.append(Object(u, v, rng.choice(types), rng.randint(*weights)))
        blocks.append(objs)
    return blocks


def random_query(rng: random.Random, blocks, n_vertices=12, types=("t1", "t2"), max_k=8) -> Query:
    lb = rng.randrange(len(blocks))
    ub = rng.randrange(lb, len(blocks))
    return Query(f"u{rng.randrange(n_vertices)}", rng.choice(types), rng.randint(1, max_k), lb, ub)


def oracle_top_k(blocks, q: Query) -> list[tuple[str, int, int]]:
    """Flat scan: (v, w, block) of the best k matching objects.

    Ties go to the earlier block, then smaller v (UTF-8 bytes), then input order.
    """
    hits = []
    for bid in range(q.lb, q.ub + 1):
        for n, o in enumerate(blocks[bid]):
            if o.u == q.u and o.type == q.type:
                hits.append((-o.w, bid, o.v.encode(), n, o))
    hits.sort()
    return [(o.v, o.w, bid) for _, bid, _, _, o in hits[:q.k]]


def oracle_matched(blocks, key: CompoundKey, lb: int, ub: int) -> list[int]:
    return [i for i in range(lb, ub + 1) if any((o.u, o.type) == key for o in blocks[i])]


def oracle_last_occurrence(blocks, key: CompoundKey, upto: int) -> int:
    hits = oracle_matched(blocks, key, 0, upto)
    return hits[-1] if hits else -1


K1 = CompoundKey("u1", "t1")

# K1's edges in the four blocks that hold it; weights chosen so the global
# top-3 over [0, 299] is v2:18, v8:15, v13:11.
FIG_CHAINS = {
    5: [("v1", 10), ("v3", 9), ("v4", 7), ("v5", 3)],
    73: [("v13", 11), ("v6", 8), ("v7", 4)],
    219: [("v2", 18), ("v8", 15), ("v9", 5)],
    301: [("v20", 50), ("v21", 2)],
}


def scenario_blocks(n_blocks: int = 302):
    """Sparse chain where K1 appears only in blocks 5, 73, 219 and 301."""
    rng = random.Random(5)
    blocks = []
    for bid in range(n_blocks):
        objs = [Object(f"x{rng.randrange(40)}", f"y{rng.randrange(40)}", rng.choice(["t1", "t3"]),
                       rng.randint(1, 20)) for _ in range(rng.randint(2, 6))]
        if bid in FIG_CHAINS:
            pairs = FIG_CHAINS[bid][:]
            rng.shuffle(pairs)
            objs += [Object(K1.u, v, K1.type, w) for v, w in pairs]
            objs.append(Object("u2", "v1", "t1", 7))
        blocks.append(objs)
    return blocks


@pytest.fixture(scope="session")
def scenario():
    blocks = scenario_blocks()
    return blocks, {mode: make_ledger(blocks, mode) for mode in MODES}


def honest_fixtures(mode, seed=0):
    """Endless stream of (headers, query, honest response) over fresh random chains."""
    from netchain.sp import search

    rng = random.Random(seed)
    while True:
        blocks = random_blocks(rng, rng.randint(8, 40), per_block=(2, 10), n_vertices=6)
        store = make_ledger(blocks, mode)
        headers = store.headers()
        keys = sorted({o.key for objs in blocks for o in objs})
        for _ in range(10):
            key = rng.choice(keys)
            lb = rng.randrange(len(blocks))
            q = Query(key.u, key.type, rng.randint(1, 6), lb, rng.randrange(lb, len(blocks)))
            yield headers, q, search(store, q)
