"""Merkle Patricia trie mapping compound keys to the latest block id.

Nodes are immutable and content addressed: a node's digest is the SHA-256 of
its canonical encoding (which begins with tag 0x04), and every child is
referenced by digest. Old roots therefore stay readable after updates.

Node encodings::

    leaf       04 00 | u16 nibble count | packed nibbles | i64 value
    extension  04 01 | u16 nibble count | packed nibbles | child digest
    branch     04 02 | u16 child bitmap | child digests  | 00 or 01 + i64 value
    empty      04 ff
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import codec
from .model import CompoundKey

_LEAF = 0x00
_EXT = 0x01
_BRANCH = 0x02
_EMPTY = 0xFF

EMPTY_NODE = bytes([codec.TAG_MPT_NODE, _EMPTY])
EMPTY_ROOT = codec.sha256(EMPTY_NODE)

_U16 = struct.Struct(">H")

Nibbles = tuple[int, ...]


@dataclass(frozen=True)
class Leaf:
    path: Nibbles
    value: int


@dataclass(frozen=True)
class Extension:
    path: Nibbles
    child: bytes


@dataclass(frozen=True)
class Branch:
    children: tuple[Optional[bytes], ...]
    value: Optional[int] = None


Node = Union[Leaf, Extension, Branch]


def to_nibbles(raw: bytes) -> Nibbles:
    out = []
    for b in raw:
        out.append(b >> 4)
        out.append(b & 0x0F)
    return tuple(out)


def key_nibbles(k: CompoundKey) -> Nibbles:
    return to_nibbles(k.encode())


def _pack(path: Nibbles) -> bytes:
    padded = list(path) + [0] * (len(path) % 2)
    packed = bytes((padded[i] << 4) | padded[i + 1] for i in range(0, len(padded), 2))
    return _U16.pack(len(path)) + packed


def _unpack(r: codec.Reader) -> Nibbles:
    n = _U16.unpack(r.take(2))[0]
    raw = r.take((n + 1) // 2)
    nib = to_nibbles(raw)
    if n % 2 and nib[-1] != 0:
        raise codec.DecodeError("nonzero nibble padding")
    return nib[:n]


def encode_node(node: Node) -> bytes:
    head = bytes([codec.TAG_MPT_NODE])
    if isinstance(node, Leaf):
        return head + bytes([_LEAF]) + _pack(node.path) + codec.i64(node.value)
    if isinstance(node, Extension):
        return head + bytes([_EXT]) + _pack(node.path) + node.child
    bitmap = 0
    body = b""
    for i, c in enumerate(node.children):
        if c is not None:
            bitmap |= 1 << i
            body += c
    tail = b"\x00" if node.value is None else b"\x01" + codec.i64(node.value)
    return head + bytes([_BRANCH]) + _U16.pack(bitmap) + body + tail


def decode_node(buf: bytes) -> Node:
    """Strict decoder; rejects anything that is not a canonical node."""
    r = codec.Reader(buf)
    if r.byte() != codec.TAG_MPT_NODE:
        raise codec.DecodeError("not an MPT node")
    kind = r.byte()
    if kind == _LEAF:
        node: Node = Leaf(_unpack(r), r.i64())
    elif kind == _EXT:
        path = _unpack(r)
        if not path:
            raise codec.DecodeError("extension with empty path")
        node = Extension(path, r.digest())
    elif kind == _BRANCH:
        bitmap = _U16.unpack(r.take(2))[0]
        children = tuple(r.digest() if bitmap >> i & 1 else None for i in range(16))
        flag = r.byte()
        if flag not in (0, 1):
            raise codec.DecodeError("bad branch value flag")
        value = r.i64() if flag else None
        if bin(bitmap).count("1") + (value is not None) < 2:
            raise codec.DecodeError("degenerate branch")
        node = Branch(children, value)
    else:
        raise codec.DecodeError(f"unknown MPT node kind {kind:#x}")
    r.done()
    return node


def _common_prefix(a: Nibbles, b: Nibbles) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


@dataclass(frozen=True)
class MptProof:
    nodes: tuple[bytes, ...]


class MptStore:
    """Content-addressed node store plus the current root."""

    def __init__(self, nodes: Optional[dict[bytes, bytes]] = None, root: bytes = EMPTY_ROOT):
        self.nodes: dict[bytes, bytes] = {} if nodes is None else nodes
        self.root = root
        self._fresh: list[bytes] = []

    def _put(self, node: Node) -> bytes:
        enc = encode_node(node)
        h = codec.sha256(enc)
        if h not in self.nodes:
            self.nodes[h] = enc
            self._fresh.append(enc)
        return h

    def _load(self, h: bytes) -> Node:
        try:
            return decode_node(self.nodes[h])
        except KeyError:
            raise KeyError(f"MPT node {h.hex()} missing from store") from None

    def take_fresh(self) -> list[bytes]:
        """Encodings of nodes created since the last call that the current root still uses.

        Nodes superseded within the same batch of updates are left out, so the
        result is exactly the new part of the trie under ``self.root``.
        """
        fresh = {codec.sha256(enc): enc for enc in self._fresh}
        self._fresh = []
        out = []
        stack = [self.root]
        while stack:
            h = stack.pop()
            enc = fresh.pop(h, None)
            if enc is None:
                continue
            out.append(enc)
            node = decode_node(enc)
            if isinstance(node, Extension):
                stack.append(node.child)
            elif isinstance(node, Branch):
                stack.extend(c for c in node.children if c is not None)
        return out

    def add_encoded(self, encodings: Iterable[bytes]) -> None:
        for enc in encodings:
            self.nodes[codec.sha256(enc)] = enc

    def set(self, k: CompoundKey, v: int) -> bytes:
        root = None if self.root == EMPTY_ROOT else self.root
        self.root = self._insert(root, key_nibbles(k), v)
        return self.root

    def _split(self, path: Nibbles, old_rest: Nibbles, old_ref: Union[int, bytes],
               old_is_leaf: bool, new_rest: Nibbles, value: int) -> bytes:
        children: list[Optional[bytes]] = [None] * 16
        bvalue = None
        if not old_rest:
            bvalue = old_ref  # only reachable for a leaf ending here
        elif old_is_leaf:
            children[old_rest[0]] = self._put(Leaf(old_rest[1:], old_ref))
        elif len(old_rest) == 1:
            children[old_rest[0]] = old_ref
        else:
            children[old_rest[0]] = self._put(Extension(old_rest[1:], old_ref))
        if not new_rest:
            bvalue = value
        else:
            children[new_rest[0]] = self._put(Leaf(new_rest[1:], value))
        branch = self._put(Branch(tuple(children), bvalue))
        return self._put(Extension(path, branch)) if path else branch

    def _insert(self, h: Optional[bytes], path: Nibbles, value: int) -> bytes:
        if h is None:
            return self._put(Leaf(path, value))
        node = self._load(h)
        if isinstance(node, Leaf):
            if node.path == path:
                return self._put(Leaf(path, value))
            c = _common_prefix(node.path, path)
            return self._split(path[:c], node.path[c:], node.value, True, path[c:], value)
        if isinstance(node, Extension):
            c = _common_prefix(node.path, path)
            if c == len(node.path):
                child = self._insert(node.child, path[c:], value)
                return self._put(Extension(node.path, child))
            return self._split(path[:c], node.path[c:], node.child, False, path[c:], value)
        if not path:
            return self._put(Branch(node.children, value))
        children = list(node.children)
        children[path[0]] = self._insert(children[path[0]], path[1:], value)
        return self._put(Branch(tuple(children), node.value))

    def get(self, k: CompoundKey, root: Optional[bytes] = None) -> tuple[Optional[int], MptProof]:
        """Value for ``k`` under ``root`` (default: current) with its path proof."""
        h = self.root if root is None else root
        if h == EMPTY_ROOT:
            return None, MptProof((EMPTY_NODE,))
        path = key_nibbles(k)
        nodes = []
        while True:
            nodes.append(self.nodes[h])
            node = self._load(h)
            if isinstance(node, Leaf):
                return (node.value if node.path == path else None), MptProof(tuple(nodes))
            if isinstance(node, Extension):
                n = len(node.path)
                if path[:n] != node.path:
                    return None, MptProof(tuple(nodes))
                path, h = path[n:], node.child
                continue
            if not path:
                return node.value, MptProof(tuple(nodes))
            nxt = node.children[path[0]]
            if nxt is None:
                return None, MptProof(tuple(nodes))
            path, h = path[1:], nxt

    def missing(self, root: Optional[bytes] = None) -> Optional[bytes]:
        """Digest of some node reachable from ``root`` but absent from the store."""
        h = self.root if root is None else root
        stack = [] if h == EMPTY_ROOT else [h]
        while stack:
            h = stack.pop()
            if h not in self.nodes:
                return h
            node = self._load(h)
            if isinstance(node, Extension):
                stack.append(node.child)
            elif isinstance(node, Branch):
                stack.extend(c for c in node.children if c is not None)
        return None

    def items(self, root: Optional[bytes] = None) -> dict[bytes, int]:
        """Every (key bytes, value) pair reachable from ``root``."""
        h = self.root if root is None else root
        out: dict[bytes, int] = {}
        if h != EMPTY_ROOT:
            self._walk(h, (), out)
        return out

    def _walk(self, h: bytes, prefix: Nibbles, out: dict[bytes, int]) -> None:
        node = self._load(h)
        if isinstance(node, Leaf):
            out[_from_nibbles(prefix + node.path)] = node.value
        elif isinstance(node, Extension):
            self._walk(node.child, prefix + node.path, out)
        else:
            if node.value is not None:
                out[_from_nibbles(prefix)] = node.value
            for i, c in enumerate(node.children):
                if c is not None:
                    self._walk(c, prefix + (i,), out)


def _from_nibbles(nib: Nibbles) -> bytes:
    return bytes((nib[i] << 4) | nib[i + 1] for i in range(0, len(nib) - 1, 2))


def kv_check(root: bytes, k: CompoundKey, v: Optional[int], proof: MptProof) -> bool:
    """True iff ``proof`` shows that ``k`` maps to ``v`` (None: absent) under ``root``."""
    nodes = proof.nodes
    if root == EMPTY_ROOT:
        return nodes == (EMPTY_NODE,) and v is None
    path = key_nibbles(k)
    expected = root
    last = len(nodes) - 1
    for i, enc in enumerate(nodes):
        if codec.sha256(enc) != expected:
            return False
        try:
            node = decode_node(enc)
        except codec.DecodeError:
            return False
        if isinstance(node, Leaf):
            return i == last and (node.value if node.path == path else None) == v
        if isinstance(node, Extension):
            n = len(node.path)
            if path[:n] != node.path:
                return i == last and v is None
            path, expected = path[n:], node.child
            continue
        if not path:
            return i == last and node.value == v
        nxt = node.children[path[0]]
        if nxt is None:
            return i == last and v is None
        path, expected = path[1:], nxt
    return False
