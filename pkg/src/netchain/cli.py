"""Command-line front end: synth, mine, query, verify, tamper, bench.

The seed used by ``synth``, ``mine`` (weights/shuffle) and ``tamper`` defaults
to 0 and can be overridden with the ``NETCHAIN_SEED`` environment variable;
an explicit ``--seed`` wins over both.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import bench, client, ingest, report, tamper, wire
from .codec import DecodeError
from .ledger import Ledger, LedgerError, read_headers
from .model import MODES, NETCHAIN, CompoundKey
from .sp import Query, QueryError

SEED_ENV = "NETCHAIN_SEED"


class CliError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _seed(args) -> int:
    return args.seed if args.seed is not None else default_seed()


def _emit_csv(rows, fields, path: Optional[Path]) -> None:
    if path is None:
        bench.write_csv(rows, sys.stdout, fields)
        return
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as f:
        bench.write_csv(rows, f, fields, header=new)


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    seed = _seed(args)
    ingest.synthesize_dataset(args.dataset, args.out, seed=seed, scale=args.scale)
    print(f"wrote {args.out}")
    return 0


def cmd_mine(args) -> int:
    info = ingest.DATASETS.get(args.preset) if args.preset else None
    edge_type = args.type or (info.edge_type if info else "edge")
    directed = info.directed if info and args.undirected is None else not args.undirected
    opb = args.objects_per_block or (info.objects_per_block if info else 100)
    seed = _seed(args)
    limit = args.blocks * opb if args.blocks else None
    try:
        objects = ingest.load_objects(args.dataset, edge_type, directed, seed, limit)
    except OSError as exc:
        raise CliError(f"cannot read dataset: {exc}") from exc
    if not objects:
        raise CliError(f"{args.dataset}: no edges")
    store = Ledger.create(args.ledger, args.mode)
    ingest.batch(objects, ingest.BatchPlan(opb, seed, args.shuffle), store)
    if args.headers:
        store.export_headers(args.headers)
    name = args.name or (args.preset or Path(args.dataset).stem)
    _emit_csv([bench.mine_row(name, store)], bench.MINE_FIELDS, args.csv)
    return 0


def _query_from(args, height: int) -> Query:
    ub = height - 1 if args.ub is None else args.ub
    q = Query(args.u, args.type, args.k, args.lb, ub)
    q.validate()
    return q


def cmd_query(args) -> int:
    store = Ledger.open(args.ledger)
    q = _query_from(args, len(store))
    row, resp = bench.query_row(args.name, store, q, args.repeats, verify=False)
    if args.out:
        wire.write_response(args.out, resp)
    _emit_csv([row], bench.QUERY_FIELDS, args.csv)
    return 0


def cmd_verify(args) -> int:
    mode, headers = read_headers(args.headers)
    resp = wire.read_response(args.response)
    q = resp.query
    if args.u is not None:
        expected = Query(args.u, args.type, args.k, args.lb, len(headers) - 1 if args.ub is None else args.ub)
        if expected != q:
            print(f"rejected: {client.BOUNDARY_VIOLATION}: response answers {q}, not {expected}")
            return 1
    if resp.mode != mode:
        print(f"rejected: {client.PROOF_FAILURE}: response mode {resp.mode} but headers are {mode}")
        return 1
    try:
        t0 = time.perf_counter()
        result = client.verify(headers, q, resp)
        ms = (time.perf_counter() - t0) * 1e3
    except client.VerifyError as exc:
        print(f"rejected: {exc}")
        return 1
    except QueryError as exc:
        print(f"rejected: {client.PROOF_FAILURE}: {exc}")
        return 1
    for rank_, (value, bid) in enumerate(result.entries, 1):
        print(f"{rank_}\t{value.v}\t{value.w}\tblock {bid}")
    print(f"accepted {len(result.entries)} entries in {ms:.3f} ms")
    return 0


def cmd_tamper(args) -> int:
    resp = wire.read_response(args.response)
    try:
        forged = tamper.apply(args.strategy, resp, _seed(args))
    except tamper.NotApplicable as exc:
        raise CliError(f"strategy {args.strategy} does not apply to this response: {exc}") from exc
    wire.write_response(args.out, forged)
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    stores = [Ledger.open(p) for p in args.ledger]
    if args.u is not None:
        key = CompoundKey(args.u, args.type)
    else:
        key = bench.pick_query_key(stores[0], args.match_fraction, ub=max(args.windows) - 1)
    rows = bench.grid(args.name, stores, key, args.windows, args.ks, args.repeats, args.k)
    if not rows:
        raise CliError("no window fits the shortest ledger")
    _emit_csv(rows, bench.BENCH_FIELDS, args.csv)
    if args.figures:
        paths = report.window_figures(rows, args.figures, k=args.k) + report.k_figure(rows, args.figures)
        for p in paths:
            print(f"wrote {p}", file=sys.stderr)
    print(f"query key u={key.u} type={key.type}", file=sys.stderr)
    return 0


# -- parser -----------------------------------------------------------------

def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _query_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--u", required=required, help="start vertex")
    p.add_argument("--type", required=required, help="edge type")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--lb", type=int, default=0)
    p.add_argument("--ub", type=int, default=None, help="defaults to the last block")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic SNAP-format edge list")
    p.add_argument("--dataset", choices=sorted(ingest.DATASETS), required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mine", help="build a ledger from an edge list")
    p.add_argument("--dataset", type=Path, required=True, help="SNAP edge list")
    p.add_argument("--preset", choices=sorted(ingest.DATASETS), help="edge type, direction and block size defaults")
    p.add_argument("--name", help="dataset label for the CSV row")
    p.add_argument("--mode", choices=MODES, default=NETCHAIN)
    p.add_argument("--ledger", type=Path, required=True)
    p.add_argument("--headers", type=Path, help="header export for light clients")
    p.add_argument("--objects-per-block", type=int)
    p.add_argument("--blocks", type=int, help="stop after this many blocks")
    p.add_argument("--type", help="edge type for every object")
    p.add_argument("--undirected", action="store_true", default=None)
    p.add_argument("--shuffle", action="store_true", help="seeded shuffle before batching")
    p.add_argument("--seed", type=int)
    p.add_argument("--csv", type=Path, help="append the summary row here instead of stdout")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("query", help="run a top-k query and write the response")
    p.add_argument("--ledger", type=Path, required=True)
    _query_flags(p, required=True)
    p.add_argument("--out", type=Path, help="response file")
    p.add_argument("--name", default="", help="dataset label for the CSV row")
    p.add_argument("--repeats", type=int, default=bench.DEFAULT_REPEATS)
    p.add_argument("--csv", type=Path)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="check a response against exported headers")
    p.add_argument("--headers", type=Path, required=True)
    p.add_argument("--response", type=Path, required=True)
    _query_flags(p, required=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tamper", help="apply an adversarial strategy to a response")
    p.add_argument("--response", type=Path, required=True)
    p.add_argument("--strategy", required=True, help=", ".join(tamper.STRATEGIES))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_tamper)

    p = sub.add_parser("bench", help="window and k sweep over one or more ledgers")
    p.add_argument("--ledger", type=Path, action="append", required=True)
    p.add_argument("--name", default="")
    p.add_argument("--u")
    p.add_argument("--type")
    p.add_argument("--match-fraction", type=float, default=0.01,
                   help="pick the key matched in about this fraction of blocks")
    p.add_argument("--windows", type=_ints, default=list(bench.DEFAULT_WINDOWS))
    p.add_argument("--ks", type=_ints, default=list(bench.DEFAULT_KS))
    p.add_argument("--k", type=int, default=20, help="k for the window sweep")
    p.add_argument("--repeats", type=int, default=bench.DEFAULT_REPEATS)
    p.add_argument("--csv", type=Path)
    p.add_argument("--figures", type=Path, help="directory for PNG figures")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench" and (args.u is None) != (args.type is None):
        print("netchain: error: --u and --type go together", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, LedgerError, QueryError, DecodeError, ValueError, OSError) as exc:
        print(f"netchain: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
