import itertools
import os
import subprocess
import sys

import numpy as np
import pytest

from colourcontainers import hosts, kernels, properties
from colourcontainers.properties import get_property


def _system(prop, n):
    return properties.property_constraints(prop, prop.host_for(n))


def _count_call(cs, k, collect=False, capacity=0):
    out = np.empty((capacity, cs.num_sites), dtype=np.int8)
    count = kernels.enumerate_colourings(
        cs.num_sites, k, cs.con_ptr, cs.con_edge, cs.con_col,
        cs.last_ptr, cs.last_idx, collect, out)
    return int(count), out


def test_enumerate_matches_brute_force():
    for name, n in (("rainbow-k3", 3), ("triangle-free", 4), ("path-3colour", 5)):
        prop = get_property(name)
        cs = _system(prop, n)
        count, _ = _count_call(cs, prop.k)
        brute = 0
        for combo in itertools.product(range(1, prop.k + 1), repeat=cs.num_sites):
            arr = np.array(combo, dtype=np.int8)
            if not properties._matches_any(cs, arr):
                brute += 1
        assert count == brute


def test_enumerate_backends_agree():
    prop = get_property("rainbow-k3")
    cs = _system(prop, 4)
    count, _ = _count_call(cs, 3)
    out = np.empty((0, cs.num_sites), dtype=np.int8)
    alt = kernels._enumerate_colourings_numpy(
        cs.num_sites, 3, cs.con_ptr, cs.con_edge, cs.con_col,
        cs.last_ptr, cs.last_idx, False, out)
    assert count == int(alt) == 279


def test_enumerate_collect():
    prop = get_property("rainbow-k3")
    cs = _system(prop, 3)
    count, rows = _count_call(cs, 3, collect=True, capacity=21)
    assert count == 21
    assert len({r.tobytes() for r in rows}) == 21
    # rows appear in odometer order with the last edge fastest
    codes = [int("".join(str(c - 1) for c in r), 3) for r in rows]
    assert codes == sorted(codes)
    # a short buffer still yields the full count
    short_count, short = _count_call(cs, 3, collect=True, capacity=5)
    assert short_count == 21
    assert np.array_equal(short, rows[:5])


def test_representable_flags():
    prop = get_property("rainbow-k3")
    cs = _system(prop, 4)
    rng = np.random.default_rng(0)
    for _ in range(25):
        mask = rng.integers(1, 8, size=cs.num_sites).astype(np.int64)
        flags = np.zeros(cs.num_patterns, dtype=np.int8)
        got = kernels.representable_flags(
            mask, cs.con_ptr, cs.con_edge, cs.con_bit, flags)
        flags_alt = np.zeros(cs.num_patterns, dtype=np.int8)
        alt = kernels._representable_flags_numpy(
            mask, cs.con_ptr, cs.con_edge, cs.con_bit, flags_alt)
        assert got == alt and np.array_equal(flags, flags_alt)
        expected = 0
        for cid in range(cs.num_patterns):
            span = range(cs.con_ptr[cid], cs.con_ptr[cid + 1])
            hit = all(mask[cs.con_edge[j]] & cs.con_bit[j] for j in span)
            assert bool(flags[cid]) == hit
            expected += hit
        assert got == expected


def test_cover_index():
    rng = np.random.default_rng(1)
    cols = rng.integers(1, 4, size=(40, 5)).astype(np.int8)
    pal = rng.integers(1, 8, size=(12, 5)).astype(np.int64)
    got = kernels.cover_index(cols, pal)
    alt = kernels._cover_index_numpy(cols, pal)
    assert np.array_equal(np.asarray(got), np.asarray(alt))
    for i in range(cols.shape[0]):
        admits = [f for f in range(pal.shape[0])
                  if all((pal[f, e] >> (cols[i, e] - 1)) & 1
                         for e in range(cols.shape[1]))]
        assert got[i] == (admits[0] if admits else -1)


def _brute_cut(wd, disjoint):
    m, _, kk = wd.shape
    best = 0.0
    for smask in range(1 << m):
        sel = (smask >> np.arange(m)) & 1
        a = np.tensordot(sel.astype(float), wd, axes=(0, 0))
        for sig in range(1 << kk):
            signs = np.where((sig >> np.arange(kk)) & 1, -1.0, 1.0)
            sj = a @ signs
            if disjoint:
                sj = np.where(sel > 0, 0.0, sj)
            best = max(best, float(np.clip(sj, 0.0, None).sum()))
    return best


def test_cut_norm_exact():
    rng = np.random.default_rng(5)
    for kk in (2, 3):
        for disjoint in (0, 1):
            wd = rng.normal(size=(4, 4, kk)) / 16.0
            wd = (wd + wd.transpose(1, 0, 2)) / 2.0
            val, smask, tmask = kernels.cut_norm_exact(wd, disjoint)
            alt = kernels._cut_norm_exact_numpy(wd, disjoint)
            assert val == pytest.approx(_brute_cut(wd, disjoint), abs=1e-12)
            assert alt[0] == pytest.approx(val, abs=1e-12)
            if disjoint:
                assert smask & tmask == 0
                assert alt[1] & alt[2] == 0


def test_cut_norm_witness_attains_value():
    rng = np.random.default_rng(9)
    wd = rng.normal(size=(5, 5, 2)) / 25.0
    wd = (wd + wd.transpose(1, 0, 2)) / 2.0
    val, smask, tmask = kernels.cut_norm_exact(wd, 0)
    sel = (smask >> np.arange(5)) & 1
    a = np.tensordot(sel.astype(float), wd, axes=(0, 0))
    tsel = ((tmask >> np.arange(5)) & 1).astype(bool)
    attained = max(
        abs(float((a[tsel] @ np.array([s0, s1])).sum()))
        for s0 in (1.0, -1.0) for s1 in (1.0, -1.0))
    assert attained == pytest.approx(val, abs=1e-12)


def test_sampled_pair_entropy():
    rng = np.random.default_rng(3)
    cells = rng.dirichlet((1.0, 1.0, 1.0), size=(6, 6))
    logk = np.log(3.0)
    got = kernels.sampled_pair_entropy(cells, logk)
    alt = kernels._sampled_pair_entropy_numpy(cells, logk)
    direct = 0.0
    for i in range(6):
        for j in range(i + 1, 6):
            p = cells[i, j]
            direct += float(-(p * np.log(p)).sum() / logk)
    assert got == pytest.approx(direct, abs=1e-12)
    assert alt == pytest.approx(direct, abs=1e-12)
    # zero entries are skipped, not propagated as nan
    cells0 = np.zeros((2, 2, 2))
    cells0[:, :, 0] = 1.0
    assert kernels.sampled_pair_entropy(cells0, np.log(2.0)) == 0.0
    assert kernels._sampled_pair_entropy_numpy(cells0, np.log(2.0)) == 0.0


def _tiny_bb_instance():
    # two edges, k=2; palette options per edge sorted by value descending
    pal_mask = np.array([[3, 1, 2], [3, 1, 2]], dtype=np.int64)
    pal_cnt = np.array([3, 3], dtype=np.int64)
    pal_val = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    ub_suffix = np.array([2.0, 1.0, 0.0])
    # forbid colour 1 being available on both edges at once
    con_ptr = np.array([0, 2], dtype=np.int64)
    con_edge = np.array([0, 1], dtype=np.int64)
    con_bit = np.array([1, 1], dtype=np.int64)
    last_ptr = np.array([0, 0, 1], dtype=np.int64)
    last_idx = np.array([0], dtype=np.int64)
    return (pal_mask, pal_cnt, pal_val, ub_suffix,
            con_ptr, con_edge, con_bit, last_ptr, last_idx)


def test_bb_search_small_instance():
    args = _tiny_bb_instance()
    seed = np.zeros(2, dtype=np.int64)
    val, mask, nodes, exhausted, found = kernels.bb_search(
        *args, 0.0, seed, False, 10000)
    assert found and exhausted
    assert val == pytest.approx(1.0)
    # ties at value 1.0 break to the lexicographically least mask vector
    assert list(mask) == [2, 3]
    assert nodes > 0


def test_bb_search_budget_and_seed():
    args = _tiny_bb_instance()
    seed = np.zeros(2, dtype=np.int64)
    _, _, _, exhausted, _ = kernels.bb_search(*args, 0.0, seed, False, 1)
    assert not exhausted
    # an unbeatable incumbent survives untouched
    strong = np.array([3, 3], dtype=np.int64)
    val, mask, _, exhausted, found = kernels.bb_search(
        *args, 5.0, strong, True, 10000)
    assert found and exhausted
    assert val == pytest.approx(5.0) and list(mask) == [3, 3]


def test_numba_toggle_selects_fallbacks():
    code = (
        "import os\n"
        "os.environ['COLOURCONTAINERS_NO_NUMBA'] = '1'\n"
        "from colourcontainers import kernels, properties\n"
        "assert not kernels.USING_NUMBA\n"
        "prop = properties.get_property('rainbow-k3')\n"
        "print(properties.speed(prop, 4))\n")
    env = dict(os.environ, COLOURCONTAINERS_NO_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env)
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip() == "279"


def test_numba_is_active_by_default():
    if os.environ.get("COLOURCONTAINERS_NO_NUMBA"):
        pytest.skip("fallback path requested via environment")
    assert kernels.USING_NUMBA
