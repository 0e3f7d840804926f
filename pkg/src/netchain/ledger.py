"""Append-only block store with a hash-linked header chain.

File layout (all integers big-endian)::

    magic "NCLEDGER" | version u8 | mode u8
    record*   where record = kind u8 | length u32 | payload
      kind 0x01 block:    header (112 or 144 bytes) | body
      kind 0x02 MPT log:  u32 count | length-prefixed node encodings

A block record is always followed by one MPT log record in NetChain+ mode.
Bodies are decoded lazily and re-verified against their header on first read.
"""

from __future__ import annotations

import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import codec
from .index import BlockAds, build_block_ads, build_chain, group_by_key
from .model import MODES, NETCHAIN, NETCHAIN_PLUS, Object
from .mpt import EMPTY_ROOT, Branch, Extension, MptStore, decode_node

MAGIC = b"NCLEDGER"
VERSION = 1
HEADER_MAGIC = b"NCHEADERS"

REC_BLOCK = 0x01
REC_MPT = 0x02

_MODE_BYTE = {NETCHAIN: 0, NETCHAIN_PLUS: 1}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}

_HDR = struct.Struct(">qq32s32s32s")
_HDR_PLUS = struct.Struct(">qq32s32s32s32s")
HEADER_SIZE = {NETCHAIN: _HDR.size, NETCHAIN_PLUS: _HDR_PLUS.size}

GENESIS_PREV = bytes(codec.DIGEST_SIZE)


class LedgerError(Exception):
    pass


class IntegrityError(LedgerError):
    """Stored data does not match its authenticated digests, or is truncated."""


@dataclass(frozen=True)
class BlockHeader:
    id: int
    timestamp: int
    prev_hash: bytes
    tx_root: bytes
    smt_root: bytes
    mpt_root: Optional[bytes] = None

    @property
    def mode(self) -> str:
        return NETCHAIN if self.mpt_root is None else NETCHAIN_PLUS

    def to_bytes(self) -> bytes:
        if self.mpt_root is None:
            return _HDR.pack(self.id, self.timestamp, self.prev_hash, self.tx_root, self.smt_root)
        return _HDR_PLUS.pack(self.id, self.timestamp, self.prev_hash, self.tx_root,
                              self.smt_root, self.mpt_root)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "BlockHeader":
        if len(buf) == _HDR.size:
            return cls(*_HDR.unpack(buf))
        if len(buf) == _HDR_PLUS.size:
            return cls(*_HDR_PLUS.unpack(buf))
        raise codec.DecodeError(f"header must be 112 or 144 bytes, got {len(buf)}")

    def digest(self) -> bytes:
        return codec.sha256(bytes([codec.TAG_HEADER]) + self.to_bytes())


def tx_root(objects: Sequence[Object]) -> bytes:
    """Plain Merkle root over canonical object encodings (odd nodes promoted)."""
    level = [codec.sha256(o.encode()) for o in objects]
    if not level:
        return bytes(codec.DIGEST_SIZE)
    while len(level) > 1:
        nxt = [codec.sha256(bytes([codec.TAG_TX_INTERNAL]) + level[i] + level[i + 1])
               for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


@dataclass
class Block:
    header: BlockHeader
    objects: list[Object]
    ads: BlockAds

    def encode_body(self) -> bytes:
        parts = [codec.u32(len(self.objects))]
        parts.extend(o.encode() for o in self.objects)
        parts.append(self.ads.encode())
        return b"".join(parts)


def _decode_object(r: codec.Reader) -> Object:
    if r.byte() != codec.TAG_OBJECT:
        raise codec.DecodeError("not an object record")
    return Object(r.str_lp(), r.str_lp(), r.str_lp(), r.i64())


def decode_block(header: BlockHeader, body: bytes) -> Block:
    """Decode a body and check every stored byte against ``header``."""
    plus = header.mpt_root is not None
    try:
        r = codec.Reader(body)
        objects = [_decode_object(r) for _ in range(r.u32())]
        ads = BlockAds.decode(r)
        r.done()
    except codec.DecodeError as exc:
        raise IntegrityError(f"block {header.id}: undecodable body ({exc})") from exc
    if not objects:
        raise IntegrityError(f"block {header.id}: empty body")
    if tx_root(objects) != header.tx_root:
        raise IntegrityError(f"block {header.id}: tx_root mismatch")
    try:
        expected = {k: build_chain(vs) for k, vs in group_by_key(objects).items()}
    except ValueError as exc:
        raise IntegrityError(f"block {header.id}: invalid object ({exc})") from exc
    if expected != ads.chains:
        raise IntegrityError(f"block {header.id}: chains do not match objects")
    problem = ads.check(plus)
    if problem:
        raise IntegrityError(f"block {header.id}: {problem}")
    if ads.root != header.smt_root:
        raise IntegrityError(f"block {header.id}: SMT root does not match header")
    return Block(header, objects, ads)


def verify_header_chain(headers: Sequence[BlockHeader]) -> None:
    prev = GENESIS_PREV
    for i, h in enumerate(headers):
        if h.id != i:
            raise IntegrityError(f"header {i} carries id {h.id}")
        if h.prev_hash != prev:
            raise IntegrityError(f"header {i} prev_hash mismatch")
        prev = h.digest()


class Ledger:
    """Block store. ``path=None`` keeps everything in memory."""

    def __init__(self, mode: str = NETCHAIN, path: Optional[Path] = None,
                 clock: Callable[[], float] = time.time):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self.mpt: Optional[MptStore] = MptStore() if mode == NETCHAIN_PLUS else None
        self._headers: list[BlockHeader] = []
        self._bodies: list[bytes] = []
        self._blocks: dict[int, Block] = {}
        self.ads_seconds: list[float] = []  # per appended block, this session only
        self._lock = threading.Lock()

    @property
    def plus(self) -> bool:
        return self.mode == NETCHAIN_PLUS

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, path: Path, mode: str, clock: Callable[[], float] = time.time) -> "Ledger":
        led = cls(mode, path, clock)
        try:
            with open(path, "wb") as f:
                f.write(MAGIC + bytes([VERSION, _MODE_BYTE[mode]]))
        except OSError as exc:
            raise LedgerError(f"cannot create ledger {path}: {exc}") from exc
        return led

    @classmethod
    def open(cls, path: Path, clock: Callable[[], float] = time.time) -> "Ledger":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise LedgerError(f"cannot read ledger {path}: {exc}") from exc
        if len(data) < len(MAGIC) + 2 or data[:len(MAGIC)] != MAGIC:
            raise IntegrityError(f"{path} is not a ledger file")
        if data[len(MAGIC)] != VERSION or data[len(MAGIC) + 1] not in _BYTE_MODE:
            raise IntegrityError(f"{path}: unsupported version or mode")
        led = cls(_BYTE_MODE[data[len(MAGIC) + 1]], path, clock)
        led._load_records(codec.Reader(data, len(MAGIC) + 2))
        return led

    def _load_records(self, r: codec.Reader) -> None:
        hsize = HEADER_SIZE[self.mode]
        try:
            while r.remaining():
                kind = r.byte()
                payload = r.bytes_lp()
                if kind == REC_BLOCK:
                    if len(payload) < hsize:
                        raise IntegrityError("short block record")
                    self._headers.append(BlockHeader.from_bytes(payload[:hsize]))
                    self._bodies.append(payload[hsize:])
                    if self.plus:
                        if r.remaining() == 0 or r.byte() != REC_MPT:
                            raise IntegrityError(f"block {len(self._headers) - 1} has no MPT node log")
                        self._load_node_log(r.bytes_lp(), self._headers[-1].mpt_root)
                else:
                    raise IntegrityError(f"unexpected record kind {kind:#x}")
        except codec.DecodeError as exc:
            raise IntegrityError(f"ledger truncated or corrupt: {exc}") from exc
        verify_header_chain(self._headers)
        if self.plus:
            self.mpt.root = self._headers[-1].mpt_root if self._headers else EMPTY_ROOT
            self.mpt.take_fresh()

    def _load_node_log(self, payload: bytes, root: bytes) -> None:
        """Add one block's new MPT nodes, checking they form a closed subtrie under ``root``."""
        pr = codec.Reader(payload)
        encodings = [pr.bytes_lp() for _ in range(pr.u32())]
        pr.done()
        fresh = {codec.sha256(enc): decode_node(enc) for enc in encodings}
        referenced = set()
        for node in fresh.values():
            if isinstance(node, Extension):
                referenced.add(node.child)
            elif isinstance(node, Branch):
                referenced.update(c for c in node.children if c is not None)
        known = fresh.keys() | self.mpt.nodes.keys()
        if root not in known or not referenced <= known or fresh.keys() - referenced - {root}:
            raise IntegrityError(f"MPT node log for block {len(self._headers) - 1} does not match H_m")
        self.mpt.add_encoded(encodings)

    # -- writing ------------------------------------------------------------

    def append(self, objects: Sequence[Object], timestamp: Optional[int] = None) -> int:
        objects = list(objects)
        if not objects:
            raise LedgerError("cannot append an empty block")
        with self._lock:
            bid = len(self._headers)
            t0 = time.perf_counter()
            ads, mpt_root = build_block_ads(objects, self.mode, self.mpt, bid)
            self.ads_seconds.append(time.perf_counter() - t0)
            prev = self._headers[-1].digest() if self._headers else GENESIS_PREV
            ts = int(self.clock()) if timestamp is None else timestamp
            header = BlockHeader(bid, ts, prev, tx_root(objects), ads.root, mpt_root)
            block = Block(header, objects, ads)
            body = block.encode_body()
            if self.path is not None:
                rec = bytes([REC_BLOCK]) + codec.lp(header.to_bytes() + body)
                if self.plus:
                    fresh = self.mpt.take_fresh()
                    log = codec.u32(len(fresh)) + b"".join(codec.lp(n) for n in fresh)
                    rec += bytes([REC_MPT]) + codec.lp(log)
                try:
                    with open(self.path, "ab") as f:
                        f.write(rec)
                except OSError as exc:
                    raise LedgerError(f"cannot append to {self.path}: {exc}") from exc
            elif self.plus:
                self.mpt.take_fresh()
            self._bodies.append(body)
            self._blocks[bid] = block
            self._headers.append(header)
            return bid

    def extend(self, batches: Iterable[Sequence[Object]]) -> list[int]:
        return [self.append(b) for b in batches]

    # -- reading ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._headers)

    def get_block(self, bid: int) -> Block:
        if not 0 <= bid < len(self._headers):
            raise LedgerError(f"block {bid} does not exist (height {len(self._headers)})")
        block = self._blocks.get(bid)
        if block is None:
            block = decode_block(self._headers[bid], self._bodies[bid])
            self._blocks[bid] = block
        return block

    def body_size(self, bid: int) -> int:
        return len(self._bodies[bid])

    def header(self, bid: int) -> BlockHeader:
        return self._headers[bid]

    def headers(self) -> list[BlockHeader]:
        return list(self._headers)

    def export_headers(self, path: Path) -> None:
        write_headers(path, self.mode, self._headers)


def encode_headers(headers: Sequence[BlockHeader]) -> bytes:
    return b"".join(h.to_bytes() for h in headers)


def write_headers(path: Path, mode: str, headers: Sequence[BlockHeader]) -> None:
    """Light-client export: magic, mode byte, then the flat header array."""
    Path(path).write_bytes(HEADER_MAGIC + bytes([_MODE_BYTE[mode]]) + encode_headers(headers))


def read_headers(path: Path) -> tuple[str, list[BlockHeader]]:
    data = Path(path).read_bytes()
    if data[:len(HEADER_MAGIC)] != HEADER_MAGIC or len(data) <= len(HEADER_MAGIC):
        raise IntegrityError(f"{path} is not a header export")
    mode = _BYTE_MODE.get(data[len(HEADER_MAGIC)])
    if mode is None:
        raise IntegrityError(f"{path}: unknown mode byte")
    size = HEADER_SIZE[mode]
    flat = data[len(HEADER_MAGIC) + 1:]
    if len(flat) % size:
        raise IntegrityError(f"{path}: header array is not a multiple of {size} bytes")
    headers = [BlockHeader.from_bytes(flat[i:i + size]) for i in range(0, len(flat), size)]
    verify_header_chain(headers)
    return mode, headers
