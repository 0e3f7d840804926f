"""Plain data types shared by the index, ledger, query and verifier layers."""

from __future__ import annotations

from typing import NamedTuple, Optional

from . import codec

# NetChain+ leaves use -1 when the key never occurred in an earlier block.
NO_BLOCK = -1

NETCHAIN = "netchain"
NETCHAIN_PLUS = "netchain-plus"
MODES = (NETCHAIN, NETCHAIN_PLUS)

_W_MIN = -(1 << 63)
_W_MAX = (1 << 63) - 1


class Object(NamedTuple):
    """One graph edge <u, v, type, w>."""

    u: str
    v: str
    type: str
    w: int

    @property
    def key(self) -> "CompoundKey":
        return CompoundKey(self.u, self.type)

    @property
    def value(self) -> "CompoundValue":
        return CompoundValue(self.v, self.w)

    def validate(self) -> None:
        if not (self.u and self.v and self.type):
            raise ValueError(f"object fields u, v, type must be nonempty: {self!r}")
        if not _W_MIN <= self.w <= _W_MAX:
            raise ValueError(f"weight out of signed 64-bit range: {self.w}")

    def encode(self) -> bytes:
        return codec.encode_object(self.u, self.v, self.type, self.w)


class CompoundKey(NamedTuple):
    """<u, type>. Tuple order equals lexicographic order of the UTF-8 bytes."""

    u: str
    type: str

    def encode(self) -> bytes:
        return codec.encode_key(self.u, self.type)


class CompoundValue(NamedTuple):
    v: str
    w: int


class ChainItem(NamedTuple):
    value: CompoundValue
    ptr: Optional[bytes]  # None is the bottom pointer

    def encode(self) -> bytes:
        return codec.encode_chain_item(self.value.v, self.value.w, self.ptr)

    def digest(self) -> bytes:
        return codec.sha256(self.encode())
