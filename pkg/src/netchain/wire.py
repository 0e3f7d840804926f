"""Binary response format: what the service provider sends to the light client.

Layout::

    "NCRESP" | version u8 | mode u8
    query    lp(u) lp(type) u32 k i64 lb i64 ub
    R        u32 n, then per block: i64 id | u32 count | (lp(v) i64 w ptr)*
    VO       u32 n, then per block: i64 id | kind u8 | proof
    MPT      u8 flag [u32 count | lp(node)*]
    b        u8 flag [i64 id]

An existence proof is ``lp(leaf) u32 index u32 size u8 count digest*``; a
non-existence proof is a side bitmap (1 = left, 2 = right) followed by the
present existence proofs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import codec, smt
from .model import MODES, ChainItem, CompoundValue
from .mpt import MptProof
from .sp import Proof, Query, Response

MAGIC = b"NCRESP"
VERSION = 1

_EXISTS = 1
_ABSENT = 2


class WireError(codec.DecodeError):
    pass


@dataclass(frozen=True)
class SizeBreakdown:
    total: int
    results: int
    vo: int


def _merkle(p: smt.MerkleProof) -> bytes:
    if len(p.siblings) > 255:
        raise ValueError("proof too deep")
    return (codec.lp(p.leaf.encode()) + codec.u32(p.leaf_index) + codec.u32(p.tree_size)
            + bytes([len(p.siblings)]) + b"".join(p.siblings))


def _read_merkle(r: codec.Reader) -> smt.MerkleProof:
    leaf = smt.SmtLeaf.decode(r.bytes_lp())
    index = r.u32()
    size = r.u32()
    n = r.byte()
    return smt.MerkleProof(leaf, index, tuple(r.digest() for _ in range(n)), size)


def encode_proof(p: Proof) -> bytes:
    if isinstance(p, smt.MerkleProof):
        return bytes([_EXISTS]) + _merkle(p)
    sides = (1 if p.left else 0) | (2 if p.right else 0)
    out = bytes([_ABSENT, sides])
    if p.left:
        out += _merkle(p.left)
    if p.right:
        out += _merkle(p.right)
    return out


def read_proof(r: codec.Reader) -> Proof:
    kind = r.byte()
    if kind == _EXISTS:
        return _read_merkle(r)
    if kind != _ABSENT:
        raise WireError(f"unknown proof kind {kind}")
    sides = r.byte()
    if sides & ~3:
        raise WireError("bad side bitmap")
    left = _read_merkle(r) if sides & 1 else None
    right = _read_merkle(r) if sides & 2 else None
    return smt.NonExistenceProof(left, right)


def _results(resp: Response) -> bytes:
    out = [codec.u32(len(resp.results))]
    for i in sorted(resp.results):
        items = resp.results[i]
        out.append(codec.i64(i) + codec.u32(len(items)))
        for it in items:
            out.append(codec.lp(it.value.v) + codec.i64(it.value.w) + codec.encode_ptr(it.ptr))
    return b"".join(out)


def _vo(resp: Response) -> bytes:
    out = [codec.u32(len(resp.proofs))]
    for i in sorted(resp.proofs):
        out.append(codec.i64(i) + encode_proof(resp.proofs[i]))
    if resp.mpt_proof is None:
        out.append(b"\x00")
    else:
        nodes = resp.mpt_proof.nodes
        out.append(b"\x01" + codec.u32(len(nodes)) + b"".join(codec.lp(n) for n in nodes))
    if resp.out_boundary is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01" + codec.i64(resp.out_boundary))
    return b"".join(out)


def _query(q: Query) -> bytes:
    return codec.lp(q.u) + codec.lp(q.type) + codec.u32(q.k) + codec.i64(q.lb) + codec.i64(q.ub)


def encode_response(resp: Response) -> bytes:
    head = MAGIC + bytes([VERSION, MODES.index(resp.mode)])
    return head + _query(resp.query) + _results(resp) + _vo(resp)


def sizes(resp: Response) -> SizeBreakdown:
    r, vo = len(_results(resp)), len(_vo(resp))
    return SizeBreakdown(len(encode_response(resp)), r, vo)


def decode_response(buf: bytes) -> Response:
    try:
        return _decode(codec.Reader(buf))
    except WireError:
        raise
    except codec.DecodeError as exc:
        raise WireError(f"malformed response: {exc}") from exc


def _decode(r: codec.Reader) -> Response:
    if r.take(len(MAGIC)) != MAGIC:
        raise WireError("not a response file")
    if r.byte() != VERSION:
        raise WireError("unsupported response version")
    mode_i = r.byte()
    if mode_i >= len(MODES):
        raise WireError("unknown mode")
    q = Query(r.str_lp(), r.str_lp(), r.u32(), r.i64(), r.i64())
    resp = Response(MODES[mode_i], q)
    for _ in range(r.u32()):
        i = r.i64()
        items = []
        for _ in range(r.u32()):
            v = r.str_lp()
            w = r.i64()
            items.append(ChainItem(CompoundValue(v, w), r.ptr()))
        if i in resp.results:
            raise WireError(f"duplicate result entry for block {i}")
        resp.results[i] = tuple(items)
    for _ in range(r.u32()):
        i = r.i64()
        if i in resp.proofs:
            raise WireError(f"duplicate proof for block {i}")
        resp.proofs[i] = read_proof(r)
    if r.byte():
        resp.mpt_proof = MptProof(tuple(r.bytes_lp() for _ in range(r.u32())))
    if r.byte():
        resp.out_boundary = r.i64()
    r.done()
    return resp


def write_response(path: Path, resp: Response) -> int:
    data = encode_response(resp)
    Path(path).write_bytes(data)
    return len(data)


def read_response(path: Path) -> Response:
    return decode_response(Path(path).read_bytes())
