"""Canonical byte encodings and the hash primitive.

Every digest in the package is computed over bytes produced here, so proofs
are reproducible bit for bit. Layouts are documented in docs/encoding.md.

Conventions: integers are big-endian fixed width, strings are UTF-8 with a
4-byte length prefix, and every hashed structure starts with a one-byte
domain tag.
"""

from __future__ import annotations

import hashlib
import struct

DIGEST_SIZE = 32

TAG_CHAIN_ITEM = 0x01
TAG_SMT_LEAF = 0x02
TAG_SMT_INTERNAL = 0x03
TAG_MPT_NODE = 0x04
TAG_HEADER = 0x05
TAG_OBJECT = 0x06
TAG_TX_INTERNAL = 0x07

PTR_BOTTOM = 0x00
PTR_DIGEST = 0x01

BOTTOM_BYTES = bytes([PTR_BOTTOM]) + bytes(DIGEST_SIZE)

_I64 = struct.Struct(">q")
_U32 = struct.Struct(">I")


class DecodeError(ValueError):
    """Raised when bytes do not parse as the expected canonical structure."""


def sha256(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()


def i64(n: int) -> bytes:
    return _I64.pack(n)


def u32(n: int) -> bytes:
    return _U32.pack(n)


def lp(s: str | bytes) -> bytes:
    """Length-prefixed bytes of a string (UTF-8) or raw byte string."""
    raw = s.encode("utf-8") if isinstance(s, str) else s
    return _U32.pack(len(raw)) + raw


def encode_ptr(ptr: bytes | None) -> bytes:
    if ptr is None:
        return BOTTOM_BYTES
    if len(ptr) != DIGEST_SIZE:
        raise ValueError("hash pointer must be 32 bytes")
    return bytes([PTR_DIGEST]) + ptr


def encode_chain_item(v: str, w: int, ptr: bytes | None) -> bytes:
    return bytes([TAG_CHAIN_ITEM]) + lp(v) + _I64.pack(w) + encode_ptr(ptr)


def encode_key(u: str, type_: str) -> bytes:
    """Canonical compound-key bytes; also the MPT key before nibble expansion."""
    return lp(u) + lp(type_)


def encode_leaf(u: str, type_: str, ptr_h: bytes, id_pre: int | None = None) -> bytes:
    """SMT leaf bytes. ``id_pre`` is present only for NetChain+ leaves."""
    if len(ptr_h) != DIGEST_SIZE:
        raise ValueError("ptr_h must be 32 bytes")
    out = bytes([TAG_SMT_LEAF]) + encode_key(u, type_) + ptr_h
    if id_pre is not None:
        out += _I64.pack(id_pre)
    return out


def encode_internal(left: bytes, right: bytes) -> bytes:
    return bytes([TAG_SMT_INTERNAL]) + left + right


def encode_object(u: str, v: str, type_: str, w: int) -> bytes:
    return bytes([TAG_OBJECT]) + lp(u) + lp(v) + lp(type_) + _I64.pack(w)


class Reader:
    """Cursor over a byte string; every read is bounds-checked."""

    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if n < 0 or end > len(self.buf):
            raise DecodeError(f"truncated input at offset {self.pos}")
        out = self.buf[self.pos:end]
        self.pos = end
        return out

    def byte(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def digest(self) -> bytes:
        return self.take(DIGEST_SIZE)

    def bytes_lp(self) -> bytes:
        return self.take(self.u32())

    def str_lp(self) -> str:
        raw = self.bytes_lp()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid UTF-8 string") from exc

    def ptr(self) -> bytes | None:
        tag = self.byte()
        body = self.digest()
        if tag == PTR_BOTTOM:
            if body != bytes(DIGEST_SIZE):
                raise DecodeError("bottom pointer with nonzero body")
            return None
        if tag != PTR_DIGEST:
            raise DecodeError(f"unknown pointer tag {tag:#x}")
        return body

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise DecodeError(f"{len(self.buf) - self.pos} trailing bytes")


def decode_chain_item(buf: bytes) -> tuple[str, int, bytes | None]:
    r = Reader(buf)
    if r.byte() != TAG_CHAIN_ITEM:
        raise DecodeError("not a chain item")
    v = r.str_lp()
    w = r.i64()
    ptr = r.ptr()
    r.done()
    return v, w, ptr


def decode_leaf(buf: bytes) -> tuple[str, str, bytes, int | None]:
    r = Reader(buf)
    if r.byte() != TAG_SMT_LEAF:
        raise DecodeError("not an SMT leaf")
    u = r.str_lp()
    t = r.str_lp()
    ptr_h = r.digest()
    id_pre = None
    if r.remaining():
        id_pre = r.i64()
    r.done()
    return u, t, ptr_h, id_pre
