"""Measurement helpers behind ``netchain mine``, ``query`` and ``bench``."""

from __future__ import annotations

import csv
import statistics
import time
from collections import Counter
from typing import Callable, Iterable, Optional, Sequence, TextIO, TypeVar

from . import client, wire
from .ledger import HEADER_SIZE, Ledger
from .model import CompoundKey
from .sp import Query, search

T = TypeVar("T")

DEFAULT_WINDOWS = (200, 400, 600, 800, 1000)
DEFAULT_KS = (10, 20, 50)
DEFAULT_REPEATS = 20

MINE_FIELDS = ["dataset", "mode", "blocks", "T", "T_median", "S", "header_bytes"]
QUERY_FIELDS = ["dataset", "mode", "lb", "ub", "window", "k", "search_ms", "search_ms_mean",
                "resp_bytes", "r_bytes", "vo_bytes", "n_proofs", "n_items", "n_matched"]
BENCH_FIELDS = QUERY_FIELDS + ["verify_ms", "verify_ms_mean"]


def timed(fn: Callable[[], T], repeats: int) -> tuple[float, float, T]:
    """Median and mean wall time in milliseconds over ``repeats`` calls."""
    samples = []
    out = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        out = fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples), statistics.mean(samples), out


def mine_row(dataset: str, store: Ledger) -> dict:
    """T in s/block (mean ADS build time), S in KB/block (serialized ADS)."""
    n = len(store)
    ads_bytes = sum(len(store.get_block(i).ads.encode()) for i in range(n))
    times = store.ads_seconds or [0.0]
    return {
        "dataset": dataset,
        "mode": store.mode,
        "blocks": n,
        "T": statistics.mean(times),
        "T_median": statistics.median(times),
        "S": ads_bytes / max(n, 1) / 1024,
        "header_bytes": HEADER_SIZE[store.mode],
    }


def matched_counts(store: Ledger, lb: int = 0, ub: Optional[int] = None) -> Counter:
    """Number of blocks in [lb, ub] containing each compound key."""
    ub = len(store) - 1 if ub is None else ub
    counts: Counter = Counter()
    for i in range(lb, ub + 1):
        counts.update(store.get_block(i).ads.chains.keys())
    return counts


def pick_query_key(store: Ledger, fraction: float = 0.01, ub: Optional[int] = None) -> CompoundKey:
    """Key whose matched-block count is closest to ``fraction`` of the chain."""
    counts = matched_counts(store, 0, ub)
    if not counts:
        raise ValueError("empty ledger")
    target = fraction * (len(store) if ub is None else ub + 1)
    return min(counts, key=lambda k: (abs(counts[k] - target), -counts[k], k))


def query_row(dataset: str, store: Ledger, q: Query, repeats: int = DEFAULT_REPEATS,
              verify: bool = True) -> tuple[dict, object]:
    search(store, q)  # warm the decoded-block cache
    s_med, s_mean, resp = timed(lambda: search(store, q), repeats)
    size = wire.sizes(resp)
    row = {
        "dataset": dataset,
        "mode": store.mode,
        "lb": q.lb,
        "ub": q.ub,
        "window": q.ub - q.lb + 1,
        "k": q.k,
        "search_ms": s_med,
        "search_ms_mean": s_mean,
        "resp_bytes": size.total,
        "r_bytes": size.results,
        "vo_bytes": size.vo,
        "n_proofs": len(resp.proofs),
        "n_items": resp.n_items,
        "n_matched": sum(1 for i in resp.results if q.in_window(i)),
    }
    if verify:
        headers = store.headers()
        v_med, v_mean, _ = timed(lambda: client.verify(headers, q, resp), repeats)
        row["verify_ms"] = v_med
        row["verify_ms_mean"] = v_mean
    return row, resp


def grid(dataset: str, stores: Sequence[Ledger], key: CompoundKey,
         windows: Iterable[int] = DEFAULT_WINDOWS, ks: Iterable[int] = DEFAULT_KS,
         repeats: int = DEFAULT_REPEATS, default_k: int = 20) -> list[dict]:
    """Window sweep at ``default_k`` plus a k sweep at the largest window."""
    windows = [w for w in windows if w <= min(len(s) for s in stores)]
    plan = [(w, default_k) for w in windows]
    if windows:
        plan += [(windows[-1], k) for k in ks if k != default_k]
    rows = []
    for store in stores:
        for w, k in plan:
            q = Query(key.u, key.type, k, 0, w - 1)
            row, _ = query_row(dataset, store, q, repeats)
            rows.append(row)
    return rows


def write_csv(rows: Sequence[dict], out: TextIO, fields: Optional[Sequence[str]] = None,
              header: bool = True) -> None:
    fields = list(fields or (rows[0].keys() if rows else []))
    w = csv.DictWriter(out, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    if header:
        w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
