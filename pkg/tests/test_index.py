import random

import pytest

from netchain import codec, mpt, smt
from netchain.index import (AdsError, BlockAds, build_block_ads, build_chain, chain_links_ok,
                            chain_order)
from netchain.model import NETCHAIN, NETCHAIN_PLUS, ChainItem, CompoundKey, CompoundValue, Object

from conftest import random_blocks


def cv(v, w):
    return CompoundValue(v, w)


def test_single_value_chain():
    (item,) = build_chain([cv("a", 3)])
    assert item.ptr is None


def test_chain_order_and_links():
    rng = random.Random(0)
    values = [cv(f"v{rng.randrange(50)}", rng.randint(-5, 20)) for _ in range(100)]
    chain = build_chain(values)
    assert sorted(it.value for it in chain) == sorted(values)
    for cur, nxt in zip(chain, chain[1:]):
        assert cur.ptr == codec.sha256(codec.encode_chain_item(nxt.value.v, nxt.value.w, nxt.ptr))
        assert (-cur.value.w, cur.value.v.encode()) <= (-nxt.value.w, nxt.value.v.encode())
    assert chain[-1].ptr is None
    assert chain_links_ok(chain)


def test_ties_broken_by_vertex_bytes():
    assert [x.v for x in chain_order([cv("b", 5), cv("a", 5), cv("c", 9)])] == ["c", "a", "b"]
    # code point order equals UTF-8 byte order, unlike UTF-16 order
    assert [x.v for x in chain_order([cv("\U0001F600", 1), cv("\ufffd", 1)])] == ["\ufffd", "\U0001F600"]


def test_broken_links_detected():
    chain = list(build_chain([cv("a", 3), cv("b", 2), cv("c", 1)]))
    chain[1] = ChainItem(cv("b", 4), chain[1].ptr)
    assert not chain_links_ok(chain)
    assert not chain_links_ok([])


def test_empty_chain_rejected():
    with pytest.raises(AdsError):
        build_chain([])


# Four keys in one block; <u1, t3> is absent and falls between the second and third leaf.
FOUR_KEY_BLOCK = [
    Object("u1", "v1", "t1", 10), Object("u1", "v3", "t1", 9), Object("u1", "v4", "t1", 7),
    Object("u1", "v2", "t2", 5), Object("u1", "v7", "t2", 6),
    Object("u1", "v5", "t4", 8),
    Object("u2", "v1", "t1", 4), Object("u2", "v9", "t1", 4),
]


def test_four_key_block():
    ads, root = build_block_ads(FOUR_KEY_BLOCK, NETCHAIN)
    assert root is None
    keys = [CompoundKey("u1", "t1"), CompoundKey("u1", "t2"), CompoundKey("u1", "t4"), CompoundKey("u2", "t1")]
    assert ads.tree.keys == keys
    assert [it.value for it in ads.chain(keys[0])] == [cv("v1", 10), cv("v3", 9), cv("v4", 7)]
    assert [it.value for it in ads.chain(keys[1])] == [cv("v7", 6), cv("v2", 5)]
    for leaf in ads.tree.leaves:
        assert leaf.ptr_h == ads.chain(leaf.key)[0].digest()
    absent = CompoundKey("u1", "t3")
    p = smt.prove_non_existence(ads.tree, absent)
    assert (p.left.leaf.key, p.right.leaf.key) == (keys[1], keys[2])
    assert smt.verify_non_existence(ads.root, absent, p)


def test_one_key_block_root_is_leaf_digest():
    objs = [Object("u", f"v{i}", "t", i) for i in range(5)]
    ads, _ = build_block_ads(objs, NETCHAIN)
    assert len(ads.tree.leaves) == 1
    assert ads.root == ads.tree.leaves[0].digest()


def test_id_pre_links_follow_flat_scan():
    rng = random.Random(1)
    blocks = random_blocks(rng, 20)
    store = mpt.MptStore()
    ads_list = [build_block_ads(objs, NETCHAIN_PLUS, store, bid)[0] for bid, objs in enumerate(blocks)]
    keys = {o.key for objs in blocks for o in objs}
    for k in keys:
        truth = [bid for bid, objs in enumerate(blocks) if any(o.key == k for o in objs)]
        walk = []
        bid = truth[-1]
        while bid != -1:
            walk.append(bid)
            bid = ads_list[bid].tree.leaf_for(k).id_pre
        assert walk[::-1] == truth


def test_mode_and_store_must_agree():
    with pytest.raises(AdsError):
        build_block_ads(FOUR_KEY_BLOCK, NETCHAIN_PLUS, None)
    with pytest.raises(AdsError):
        build_block_ads(FOUR_KEY_BLOCK, NETCHAIN, mpt.MptStore())
    with pytest.raises(AdsError):
        build_block_ads([], NETCHAIN)


@pytest.mark.parametrize("mode", [NETCHAIN, NETCHAIN_PLUS])
def test_ads_round_trip(mode):
    store = mpt.MptStore() if mode == NETCHAIN_PLUS else None
    ads, _ = build_block_ads(FOUR_KEY_BLOCK, mode, store, 0)
    enc = ads.encode()
    r = codec.Reader(enc)
    back = BlockAds.decode(r)
    r.done()
    assert back.chains == ads.chains
    assert back.tree.levels == ads.tree.levels
    assert back.check(mode == NETCHAIN_PLUS) is None
    assert back.check(mode != NETCHAIN_PLUS) is not None


def test_mutated_ads_fails_check():
    ads, _ = build_block_ads(FOUR_KEY_BLOCK, NETCHAIN)
    enc = ads.encode()
    rng = random.Random(2)
    caught = 0
    for _ in range(300):
        buf = bytearray(enc)
        buf[rng.randrange(len(buf))] ^= 1 << rng.randrange(8)
        try:
            r = codec.Reader(bytes(buf))
            back = BlockAds.decode(r)
            r.done()
        except (codec.DecodeError, smt.SmtError, KeyError, IndexError):
            caught += 1
            continue
        try:
            problem = back.check(False)
        except (KeyError, IndexError, ValueError):
            problem = "crash"
        if problem is not None or back.root != ads.root:
            caught += 1
    assert caught == 300
