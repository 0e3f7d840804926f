import os
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netchain import codec, mpt
from netchain.index import build_block_ads
from netchain.model import NETCHAIN_PLUS, CompoundKey

from conftest import random_blocks


def ref_root(entries: dict[CompoundKey, int]) -> bytes:
    """Build the trie bottom-up from the final map, never inserting incrementally."""
    if not entries:
        return mpt.EMPTY_ROOT
    return _ref_node([(mpt.key_nibbles(k), v) for k, v in entries.items()])


def _ref_node(pairs) -> bytes:
    if len(pairs) == 1:
        path, value = pairs[0]
        return codec.sha256(mpt.encode_node(mpt.Leaf(path, value)))
    n = 0
    first = pairs[0][0]
    while all(len(p) > n and p[n] == first[n] for p, _ in pairs):
        n += 1
    if n:
        child = _ref_node([(p[n:], v) for p, v in pairs])
        return codec.sha256(mpt.encode_node(mpt.Extension(first[:n], child)))
    children = [None] * 16
    value = None
    for nib in range(16):
        group = [(p[1:], v) for p, v in pairs if p and p[0] == nib]
        if group:
            children[nib] = _ref_node(group)
    for p, v in pairs:
        if not p:
            value = v
    return codec.sha256(mpt.encode_node(mpt.Branch(tuple(children), value)))


def reachable(store: mpt.MptStore, root: bytes) -> set[bytes]:
    out = set()
    stack = [] if root == mpt.EMPTY_ROOT else [root]
    while stack:
        h = stack.pop()
        out.add(h)
        node = mpt.decode_node(store.nodes[h])
        if isinstance(node, mpt.Extension):
            stack.append(node.child)
        elif isinstance(node, mpt.Branch):
            stack.extend(c for c in node.children if c is not None)
    return out


def rand_key(rng):
    return CompoundKey(f"u{rng.randrange(300)}", rng.choice(["a", "b", "friend"]))


def test_empty_trie():
    s = mpt.MptStore()
    value, proof = s.get(CompoundKey("u", "t"))
    assert value is None
    assert proof.nodes == (mpt.EMPTY_NODE,)
    assert mpt.kv_check(mpt.EMPTY_ROOT, CompoundKey("u", "t"), None, proof)
    assert not mpt.kv_check(mpt.EMPTY_ROOT, CompoundKey("u", "t"), 0, proof)


def test_set_then_get():
    s = mpt.MptStore()
    k = CompoundKey("u1", "t1")
    root = s.set(k, 7)
    value, proof = s.get(k)
    assert value == 7
    assert mpt.kv_check(root, k, 7, proof)
    assert not mpt.kv_check(root, k, 8, proof)
    assert not mpt.kv_check(root, k, None, proof)


def test_update_touches_only_the_path():
    s = mpt.MptStore()
    keys = [CompoundKey(u, "t") for u in ("00f0", "00f1", "0f00", "0f01", "f000", "1234")]
    for i, k in enumerate(keys):
        s.set(k, i)
    before = reachable(s, s.root)
    _, proof = s.get(keys[0])
    path_nodes = {codec.sha256(n) for n in proof.nodes}
    s.set(keys[0], 99)
    after = reachable(s, s.root)
    assert before - after == path_nodes
    assert len(after - before) == len(path_nodes)


def test_old_roots_stay_readable():
    s = mpt.MptStore()
    k = CompoundKey("a", "b")
    r1 = s.set(k, 1)
    s.set(k, 2)
    assert s.get(k, r1)[0] == 1
    assert s.get(k)[0] == 2


def test_random_ops_match_rebuild():
    rng = random.Random(1)
    s = mpt.MptStore()
    truth = {}
    for i in range(1000):
        k = rand_key(rng)
        s.set(k, i)
        truth[k] = i
        if i % 97 == 0:
            assert s.root == ref_root(truth)
    assert s.root == ref_root(truth)
    assert s.items() == {k.encode(): v for k, v in truth.items()}


def test_insertion_order_independent():
    rng = random.Random(2)
    entries = {rand_key(rng): rng.randrange(500) for _ in range(40)}
    expected = ref_root(entries)
    items = list(entries.items())
    for _ in range(200):
        rng.shuffle(items)
        s = mpt.MptStore()
        for k, v in items:
            s.set(k, v)
        assert s.root == expected


def test_proofs_for_present_and_absent_keys():
    rng = random.Random(3)
    s = mpt.MptStore()
    truth = {}
    for i in range(300):
        k = rand_key(rng)
        s.set(k, i)
        truth[k] = i
    for _ in range(300):
        k = rand_key(rng)
        value, proof = s.get(k)
        assert value == truth.get(k)
        assert mpt.kv_check(s.root, k, value, proof)
        assert not mpt.kv_check(s.root, k, (value or 0) + 1, proof)
        if value is not None:
            assert not mpt.kv_check(s.root, k, None, proof)


def test_bit_flip_fuzz():
    rng = random.Random(4)
    s = mpt.MptStore()
    keys = [rand_key(rng) for _ in range(200)]
    for i, k in enumerate(keys):
        s.set(k, i)
    for _ in range(1000):
        k = rng.choice(keys) if rng.random() < 0.7 else rand_key(rng)
        value, proof = s.get(k)
        nodes = list(proof.nodes)
        j = rng.randrange(len(nodes))
        buf = bytearray(nodes[j])
        pos = rng.randrange(len(buf))
        buf[pos] ^= 1 << rng.randrange(8)
        nodes[j] = bytes(buf)
        assert not mpt.kv_check(s.root, k, value, mpt.MptProof(tuple(nodes)))


def test_proof_truncation_and_padding_fail():
    s = mpt.MptStore()
    for i in range(50):
        s.set(CompoundKey(f"u{i}", "t"), i)
    k = CompoundKey("u7", "t")
    _, proof = s.get(k)
    assert len(proof.nodes) > 1
    assert not mpt.kv_check(s.root, k, 7, mpt.MptProof(proof.nodes[:-1]))
    assert not mpt.kv_check(s.root, k, 7, mpt.MptProof(proof.nodes + (mpt.EMPTY_NODE,)))
    assert not mpt.kv_check(s.root, k, None, mpt.MptProof(proof.nodes[:-1]))


def test_proof_for_one_key_does_not_prove_another():
    s = mpt.MptStore()
    a, b = CompoundKey("ua", "t"), CompoundKey("ub", "t")
    s.set(a, 1)
    s.set(b, 2)
    _, proof = s.get(a)
    assert not mpt.kv_check(s.root, b, 1, proof)
    assert not mpt.kv_check(s.root, b, 2, proof)


@pytest.mark.parametrize("buf", [
    b"",
    b"\x05\xff",
    b"\x04\x09",
    b"\x04\x01\x00\x00" + bytes(32),  # empty extension path
    b"\x04\x02\x00\x01" + bytes(32) + b"\x00",  # branch with a single child
    b"\x04\x00\x00\x01\x0f" + bytes(8),  # odd path with nonzero padding
])
def test_non_canonical_nodes_rejected(buf):
    with pytest.raises(codec.DecodeError):
        mpt.decode_node(buf)


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.text(max_size=6), st.integers(-1, 10**6), max_size=30))
def test_any_map_matches_rebuild(d):
    s = mpt.MptStore()
    for u, v in d.items():
        s.set(CompoundKey(u, "t"), v)
    assert s.root == ref_root({CompoundKey(u, "t"): v for u, v in d.items()})


def test_node_round_trip():
    rng = random.Random(5)
    for _ in range(200):
        path = tuple(rng.randrange(16) for _ in range(rng.randrange(1, 9)))
        for node in (mpt.Leaf(path, rng.randrange(-1, 10**9)), mpt.Extension(path, os.urandom(32))):
            assert mpt.decode_node(mpt.encode_node(node)) == node
        kids = [os.urandom(32) if rng.random() < 0.4 else None for _ in range(16)]
        kids[0] = kids[0] or os.urandom(32)
        kids[15] = kids[15] or os.urandom(32)
        node = mpt.Branch(tuple(kids), rng.choice([None, 3]))
        assert mpt.decode_node(mpt.encode_node(node)) == node


def test_last_occurrence_over_50_blocks():
    rng = random.Random(6)
    blocks = random_blocks(rng, 50)
    s = mpt.MptStore()
    for bid, objs in enumerate(blocks):
        build_block_ads(objs, NETCHAIN_PLUS, s, bid)
    seen = {o.key for objs in blocks for o in objs}
    for k in seen:
        last = max(bid for bid, objs in enumerate(blocks) if any(o.key == k for o in objs))
        value, proof = s.get(k)
        assert value == last
        assert mpt.kv_check(s.root, k, last, proof)
