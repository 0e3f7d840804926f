"""SNAP edge-list ingestion: parse, weight, and batch edges into blocks."""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .ledger import Ledger
from .model import Object


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    nodes: int
    edges: int
    edge_type: str
    directed: bool
    objects_per_block: int


# Node and edge counts from the SNAP pages; edge types per dataset.
DATASETS = {
    "email": DatasetInfo("email", 36_692, 183_831, "friend", False, 150),
    "wiki": DatasetInfo("wiki", 7_115, 103_689, "vote", True, 100),
    "gplus": DatasetInfo("gplus", 107_614, 13_673_453, "share", True, 500),
}


class ParseError(ValueError):
    def __init__(self, path: str, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {msg}")


@dataclass(frozen=True)
class EdgeRecord:
    u: str
    v: str
    type: str
    w: Optional[int] = None


@dataclass(frozen=True)
class BatchPlan:
    objects_per_block: int = 100
    seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        if self.objects_per_block < 1:
            raise ValueError("objects_per_block must be >= 1")


def parse_snap(path: Path, default_type: str, directed: bool = True) -> Iterator[EdgeRecord]:
    """Yield edges of a SNAP text file in file order.

    Lines are ``u v`` or ``u v w``; lines starting with '#' and blank lines are
    skipped. Undirected inputs yield each edge in both directions.
    """
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            cols = s.split()
            if len(cols) not in (2, 3):
                raise ParseError(str(path), line_no, f"expected 2 or 3 columns, got {len(cols)}")
            w = None
            if len(cols) == 3:
                try:
                    w = int(cols[2])
                except ValueError:
                    raise ParseError(str(path), line_no, f"weight {cols[2]!r} is not an integer") from None
            u, v = cols[0], cols[1]
            yield EdgeRecord(u, v, default_type, w)
            if not directed:
                yield EdgeRecord(v, u, default_type, w)


def edge_weight(seed: int, u: str, v: str, type_: str) -> int:
    return random.Random(f"{seed}|{u}|{v}|{type_}").randint(1, 100)


def assign_weights(records: Iterable[EdgeRecord], seed: int) -> Iterator[Object]:
    for rec in records:
        w = rec.w if rec.w is not None else edge_weight(seed, rec.u, rec.v, rec.type)
        yield Object(rec.u, rec.v, rec.type, w)


def plan_blocks(objects: Iterable[Object], plan: BatchPlan) -> list[list[Object]]:
    objs = list(objects)
    if plan.shuffle:
        random.Random(plan.seed).shuffle(objs)
    n = plan.objects_per_block
    return [objs[i:i + n] for i in range(0, len(objs), n)]


def batch(objects: Iterable[Object], plan: BatchPlan, store: Ledger) -> list[int]:
    return [store.append(blk) for blk in plan_blocks(objects, plan)]


def load_objects(path: Path, edge_type: str, directed: bool = True, seed: int = 0,
                 limit: Optional[int] = None) -> list[Object]:
    out = []
    for o in assign_weights(parse_snap(path, edge_type, directed), seed):
        if limit is not None and len(out) >= limit:
            break
        out.append(o)
    return out


def _degree_sequence(n_sources: int, edges: int, max_degree: int) -> np.ndarray:
    """Power-law out-degrees, rank r gets ~max_degree * r**-alpha, summing to ``edges``."""
    ranks = np.arange(1, n_sources + 1, dtype=float)
    lo, hi = 0.01, 5.0
    for _ in range(100):
        alpha = (lo + hi) / 2
        total = (max_degree * ranks ** -alpha).sum()
        if total > edges:
            lo = alpha
        else:
            hi = alpha
    deg = np.maximum(1, np.floor(max_degree * ranks ** -alpha)).astype(int)
    short = edges - int(deg.sum())
    i = 0
    while short != 0:
        step = 1 if short > 0 else -1
        j = i % n_sources
        if deg[j] + step >= 1:
            deg[j] += step
            short -= step
        i += 1
    return deg


def synthesize_snap(path: Path, nodes: int, edges: int, seed: int = 0, directed: bool = True,
                    name: str = "synthetic", max_degree: Optional[int] = None,
                    source_fraction: float = 1 / 3) -> int:
    """Write a SNAP-format edge list with a heavy-tailed out-degree profile.

    Sources are listed in ascending id order like the SNAP files. For
    undirected graphs each unordered pair is written once. Returns the number
    of edge lines written.
    """
    rng = np.random.default_rng(seed)
    n_sources = max(1, min(nodes, int(nodes * source_fraction)))
    if max_degree is None:
        max_degree = max(1, min(nodes - 1, edges // 100))
    deg = _degree_sequence(n_sources, edges, max_degree)
    sources = np.sort(rng.choice(nodes, size=n_sources, replace=False))
    rng.shuffle(deg)
    kind = "Directed" if directed else "Undirected"
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {kind} graph: {name}\n# Nodes: {nodes} Edges: {edges}\n# FromNodeId\tToNodeId\n")
        for u, d in zip(sources, deg):
            d = min(int(d), nodes - 1)
            targets = rng.choice(nodes - 1, size=d, replace=False)
            targets[targets >= u] += 1  # no self loops
            for v in np.sort(targets):
                f.write(f"{u}\t{v}\n")
    return int(np.minimum(deg, nodes - 1).sum())


def synthesize_dataset(name: str, path: Path, seed: int = 0, scale: float = 1.0) -> DatasetInfo:
    """Stand-in for a SNAP dataset with the published node and edge counts (optionally scaled)."""
    info = DATASETS[name]
    nodes = max(2, int(info.nodes * scale))
    edges = max(1, int(info.edges * scale))
    synthesize_snap(path, nodes, edges, seed=seed, directed=info.directed, name=f"synthetic-{name}")
    return info

