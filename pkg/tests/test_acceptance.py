"""Acceptance checks, one test per criterion.

Each test prints a single "criterion NN <name>: PASS/FAIL" line; run with
pytest -s to see the lines for passing tests too.  Every numeric target is
checked against an oracle computed inside this file (closed forms, brute
enumeration, or an independent reimplementation), never against the
package's own output.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np

from colourcontainers import (containers, extremal, graphons, hosts,
                              properties, templates)
from colourcontainers.extremal import (RandomTemplateSpec, extremal_entropy,
                                       random_template,
                                       relative_extremal_entropy)
from colourcontainers.properties import get_property, speed
from colourcontainers.templates import Template, entropy, rng_stream

LOG32 = math.log(2) / math.log(3)    # per-pair entropy of a two-colour pair, k=3
LOG43 = math.log(3) / math.log(4)
LOG52 = math.log(2) / math.log(5)
LOG5_15 = math.log(1.5) / math.log(5)


@contextmanager
def _criterion(label):
    try:
        yield
    except BaseException:
        print("%s: FAIL" % label)
        raise
    print("%s: PASS" % label)


# ---------------------------------------------------------------------------
# criterion 1: rainbow-triangle-free closed form with witness shape
# ---------------------------------------------------------------------------


def test_c01_rainbow_extremal_closed_form():
    prop = get_property("rainbow-k3")
    with _criterion("criterion 01 rainbow-k3 extremal"):
        t0 = time.time()
        for n in (3, 4, 5):
            res = extremal_entropy(prop, n)
            assert res.proved
            assert abs(res.value - LOG32 * math.comb(n, 2)) <= 1e-9
            # optimal witnesses give every pair one common two-colour palette
            pal = np.asarray(res.witness.palettes)
            assert (pal == pal[0]).all()
            assert bin(int(pal[0])).count("1") == 2
        assert time.time() - t0 < 600.0


# ---------------------------------------------------------------------------
# criterion 2: two-triangle closed form
# ---------------------------------------------------------------------------


def test_c02_dk3_extremal_closed_form():
    prop = get_property("dk3")
    with _criterion("criterion 02 dk3 extremal"):
        for n in (3, 4, 5):
            res = extremal_entropy(prop, n)
            assert res.proved
            want = (1.0 - LOG43) * (n * n // 4) + LOG43 * math.comb(n, 2)
            assert abs(res.value - want) <= 1e-9


# ---------------------------------------------------------------------------
# criterion 3: multigraph entropy closed form plus exact weight maximum
# ---------------------------------------------------------------------------


def _max_total_weight(n, cap=4):
    """Maximum sum of edge weights 0..cap on K_n with every triangle summing
    to at most cap, by depth-first search over vertex-incremental edges with
    triangle-cap propagation.  Exact: exhausts everything the incumbent
    bound cannot discard."""
    edges = sorted(itertools.combinations(range(n), 2), key=lambda e: (e[1], e[0]))
    m = len(edges)
    eidx = {e: i for i, e in enumerate(edges)}
    closing = [[] for _ in range(m)]
    for (u, v), i in eidx.items():
        for t in range(n):
            if t in (u, v):
                continue
            a = eidx[(min(u, t), max(u, t))]
            b = eidx[(min(v, t), max(v, t))]
            if a < i and b < i:
                closing[i].append((a, b))
    w = [0] * m
    half = n // 2
    best = sum(2 for (u, v) in edges if (u < half) != (v < half))

    def rec(i, cur):
        nonlocal best
        if cur + cap * (m - i) <= best:
            return
        if i == m:
            best = cur
            return
        hi = cap
        for a, b in closing[i]:
            hi = min(hi, cap - w[a] - w[b])
        for x in range(hi, -1, -1):
            w[i] = x
            rec(i + 1, cur + x)
        w[i] = 0

    rec(0, 0)
    return best


def test_c03_multigraph_extremal_and_weight():
    prop = get_property("multigraph-3-5")
    with _criterion("criterion 03 multigraph-3-5 extremal"):
        for n in (3, 4, 5):
            res = extremal_entropy(prop, n)
            assert res.proved
            want = LOG52 * math.comb(n, 2) + LOG5_15 * (n // 2)
            assert abs(res.value - want) <= 1e-9
        # the weight formulation: colour c means weight c-1, triangles carry
        # at most total weight 4, and the maximum total weight is floor(n^2/2)
        for n in range(3, 7):
            assert _max_total_weight(n) == n * n // 2


# ---------------------------------------------------------------------------
# criterion 4: path property closed forms and the count/entropy gap
# ---------------------------------------------------------------------------


def test_c04_path_extremal_and_count():
    prop = get_property("path-3colour")
    with _criterion("criterion 04 path closed forms"):
        for n in range(3, 21):
            res = extremal_entropy(prop, n)
            assert res.proved
            want = ((n - 1 + 1) // 2) * LOG32  # ceil((n-1)/2) pairs
            assert abs(res.value - want) <= 1e-9
        counts = {}
        for n in range(3, 13):
            counts[n] = speed(prop, n)
            assert counts[n] == 3 * 2 ** (n - 2)
        # the count outgrows k^ex: the ratio never falls and doubles every
        # other step
        gaps = [counts[n] / 2.0 ** (n // 2) for n in range(4, 13)]
        assert all(b >= a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] > gaps[0]
        assert gaps[-1] == 48.0


# ---------------------------------------------------------------------------
# criterion 5: counting sandwich for every registered property
# ---------------------------------------------------------------------------

# orders with enumerable counts; the hypercube edge host at dimension 5
# has 80 sites and 2^80 colourings, past the enumeration guard
SANDWICH_ORDERS = {
    "rainbow-k3": (2, 3, 4, 5),
    "dk3": (2, 3, 4, 5),
    "multigraph-3-5": (2, 3, 4, 5),
    "triangle-free": (2, 3, 4, 5),
    "inc-path-2": (2, 3, 4, 5),
    "max-degree-2": (2, 3, 4, 5),
    "all-colourings": (2, 3, 4, 5),
    "path-3colour": (2, 3, 4, 5),
    "cube-q2-free": (1, 2, 3, 4),
    "cube-vertex-q2-free": (1, 2, 3, 4, 5),
}


def _restriction_consistent_count():
    """|P_4| for rainbow-free colourings, counted only through order-3
    restrictions: a colouring of K_4 is admitted when all four induced
    triangles avoid a rainbow."""
    p3 = set()
    for cols in itertools.product((1, 2, 3), repeat=3):
        if set(cols) != {1, 2, 3}:
            p3.add(cols)
    pairs = list(itertools.combinations(range(4), 2))
    sidx = {p: i for i, p in enumerate(pairs)}
    triples = []
    for a, b, c in itertools.combinations(range(4), 3):
        triples.append((sidx[(a, b)], sidx[(a, c)], sidx[(b, c)]))
    count = 0
    for cols in itertools.product((1, 2, 3), repeat=6):
        if all((cols[i], cols[j], cols[l]) in p3 for i, j, l in triples):
            count += 1
    return len(p3), count


def test_c05_speed_sandwich_all_properties():
    with _criterion("criterion 05 counting sandwich"):
        p3_size, p4_count = _restriction_consistent_count()
        assert p3_size == 21
        assert speed(get_property("rainbow-k3"), 3) == 21
        assert speed(get_property("rainbow-k3"), 4) == p4_count
        for name, orders in SANDWICH_ORDERS.items():
            prop = get_property(name)
            for n in orders:
                count = speed(prop, n)
                res = extremal_entropy(prop, n)
                assert res.proved
                assert prop.k ** res.value <= count * (1.0 + 1e-9), (name, n)


# ---------------------------------------------------------------------------
# criterion 6: density monotonicity for every registered property
# ---------------------------------------------------------------------------

DENSITY_RANGES = [
    ("rainbow-k3", 2, 6),
    ("dk3", 2, 6),
    ("multigraph-3-5", 2, 6),
    ("triangle-free", 2, 7),
    ("inc-path-2", 2, 6),
    ("max-degree-2", 2, 6),
    ("all-colourings", 2, 6),
    ("path-3colour", 2, 12),
    ("cube-q2-free", 1, 4),
    ("cube-vertex-q2-free", 1, 5),
]


def test_c06_density_nonincreasing():
    # normalized by vertex pairs of the host, which coincides with the
    # per-site density on complete hosts and stays monotone on the path
    # and hypercube sequences as well
    with _criterion("criterion 06 density monotone"):
        for name, lo, hi in DENSITY_RANGES:
            prop = get_property(name)
            dens = []
            for n in range(lo, hi + 1):
                res = extremal_entropy(prop, n)
                assert res.proved, (name, n)
                pairs = math.comb(prop.host_for(n).num_vertices, 2)
                dens.append(res.value / pairs)
            assert all(b <= a + 1e-12 for a, b in zip(dens, dens[1:])), name


# ---------------------------------------------------------------------------
# criterion 7: supersaturation bound on random templates
# ---------------------------------------------------------------------------

SUPERSAT_PROPERTIES = ("rainbow-k3", "dk3", "multigraph-3-5",
                       "triangle-free", "inc-path-2", "max-degree-2")


def test_c07_supersaturation_bound():
    with _criterion("criterion 07 supersaturation"):
        for m in (4, 5):
            host = hosts.complete_graph(m)
            for pi, name in enumerate(SUPERSAT_PROPERTIES):
                prop = get_property(name)
                fam = prop.effective_family()
                ex = extremal_entropy(prop, m)
                assert ex.proved
                scale = math.log(2) / math.log(prop.k)  # log_k 2
                rng = rng_stream(1000 * m + pi)
                full = (1 << prop.k) - 1
                violations = 0
                for _ in range(1000):
                    masks = rng.integers(1, full + 1, size=host.num_sites)
                    t = Template(host, prop.k, masks.astype(np.int64))
                    bad = properties.bad_pairs(t, fam)
                    lower = (entropy(t) - ex.value) / scale
                    if bad < lower - 1e-9:
                        violations += 1
                assert violations == 0, (name, m)


# ---------------------------------------------------------------------------
# criterion 8: container family for rainbow-free colourings at n = 5 and 6
# ---------------------------------------------------------------------------


def test_c08_container_pipeline():
    prop = get_property("rainbow-k3")
    with _criterion("criterion 08 containers"):
        t0 = time.time()
        for n in (5, 6):
            rep = containers.container_pipeline(
                prop, n, delta=1.0 / 12.0, seed=0, sparsify=False,
                coverage_mode="exact")
            val = rep["validation"]
            assert val["family_size"] > 0
            cov = val["coverage"]
            assert cov["mode"] == "exact"
            assert cov["fraction"] == 1.0
            assert cov["uncovered"] == 0
            assert cov["checked"] == speed(prop, n)
            assert val["bad_max"] < 0.5 * math.comb(n, 3)
        assert time.time() - t0 < 1800.0


# ---------------------------------------------------------------------------
# criterion 9: random relative bounds never exceed the template entropy
# ---------------------------------------------------------------------------


def test_c09_transference():
    prop = get_property("triangle-free")
    with _criterion("criterion 09 transference"):
        ex7 = extremal_entropy(prop, 7)
        assert ex7.proved
        for p in (0.5, 0.8):
            ratios = []
            for trial in range(50):
                spec = RandomTemplateSpec(n=7, k=2, p=p, base_colour=1,
                                          seed=trial)
                t = random_template(spec)
                res = relative_extremal_entropy(t, prop)
                assert res.proved
                assert res.value <= entropy(t) + 1e-9
                ratios.append(res.value / (p * ex7.value))
            mean = sum(ratios) / len(ratios)
            assert 0.6 <= mean <= 1.4, p
        # p = 1 hands back the absolute optimum
        full = random_template(RandomTemplateSpec(n=7, k=2, p=1.0,
                                                  base_colour=1, seed=0))
        res = relative_extremal_entropy(full, prop)
        assert abs(res.value - ex7.value) <= 1e-12


# ---------------------------------------------------------------------------
# criterion 10: cut metric axioms and the two-colour collapse
# ---------------------------------------------------------------------------


def _classical_cut_norm(wd):
    """max_{S,T} |sum_{S x T}| of a square matrix by subset enumeration
    over S with the optimal T read off per sign."""
    m = wd.shape[0]
    best = 0.0
    for smask in range(1 << m):
        rows = [i for i in range(m) if smask >> i & 1]
        if not rows:
            continue
        col = wd[rows].sum(axis=0)
        pos = col[col > 0].sum()
        neg = -col[col < 0].sum()
        best = max(best, pos, neg)
    return best


def _random_pair(i, parts_a, parts_b, k):
    u = graphons.random_step_graphon(parts_a, k, seed=2 * i)
    v = graphons.random_step_graphon(parts_b, k, seed=2 * i + 1)
    return u, v


def test_c10_cut_metric():
    with _criterion("criterion 10 cut metric"):
        for i in range(1000):
            k = 2 + i % 2
            mu, mv, mw = 1 + i % 5, 1 + (i // 5) % 5, 1 + (i // 25) % 5
            u = graphons.random_step_graphon(mu, k, seed=3 * i)
            v = graphons.random_step_graphon(mv, k, seed=3 * i + 1)
            w = graphons.random_step_graphon(mw, k, seed=3 * i + 2)
            duv = graphons.cut_distance(u, v)
            dvw = graphons.cut_distance(v, w)
            duw = graphons.cut_distance(u, w)
            dvu = graphons.cut_distance(v, u)
            assert duv.exact and dvw.exact and duw.exact
            assert duv.value >= -1e-12
            assert abs(duv.value - dvu.value) <= 1e-9
            assert duw.value <= duv.value + dvw.value + 1e-9
            if i % 10 == 0:
                assert graphons.cut_distance(u, u).value <= 1e-9
        # k = 2 collapses onto twice the classical cut norm
        for i in range(100):
            u, v = _random_pair(5000 + i, 1 + i % 4, 1 + (i // 4) % 4, 2)
            res = graphons.cut_distance(u, v)
            assert res.exact
            widths, uc, vc = graphons._refined_pair(u, v)
            wd = (uc[:, :, 0] - vc[:, :, 0]) * widths[:, None] * widths[None, :]
            assert abs(res.value - 2.0 * _classical_cut_norm(wd)) <= 1e-9
            dis = graphons.cut_distance(u, v, disjoint=True)
            assert dis.exact
            assert dis.value >= res.value / 4.0 - 1e-12


# ---------------------------------------------------------------------------
# criterion 11: entropy under conditioning and under sampling
# ---------------------------------------------------------------------------

FIXED_TWO_PART = [
    (np.array([0.5, 0.5]),
     np.array([[[0.9, 0.1], [0.2, 0.8]], [[0.2, 0.8], [0.6, 0.4]]])),
    (np.array([0.3, 0.7]),
     np.array([[[0.5, 0.5], [0.95, 0.05]], [[0.95, 0.05], [0.25, 0.75]]])),
    (np.array([0.5, 0.5]),
     np.array([[[0.8, 0.2], [0.5, 0.5]], [[0.5, 0.5], [0.1, 0.9]]])),
]


def _random_partition(rng, atoms, classes):
    inner = np.sort(rng.random(atoms - 1))
    breaks = np.unique(np.concatenate(([0.0], inner, [1.0])))
    labels = rng.integers(0, classes, size=breaks.shape[0] - 1)
    return graphons.Partition(breaks, labels)


def test_c11_graphon_entropy():
    with _criterion("criterion 11 graphon entropy"):
        for i in range(1000):
            w = graphons.random_step_graphon(1 + i % 6, 2 + i % 2,
                                             seed=7000 + i)
            rng = rng_stream(8000 + i)
            part = _random_partition(rng, 2 + int(rng.integers(0, 3)),
                                     2 + int(rng.integers(0, 2)))
            cond = graphons.conditional_expectation(w, part)
            assert graphons.entropy_graphon(cond) >= \
                graphons.entropy_graphon(w) - 1e-12
        # sampled entropy density concentrates at the graphon entropy
        for weights, cells in FIXED_TWO_PART:
            w = graphons.StepGraphon(weights, cells)
            target = graphons.entropy_graphon(w)
            vals = [graphons.sample_entropy_density(w, 200, seed=s)
                    for s in range(20)]
            assert abs(sum(vals) / len(vals) - target) <= 0.05
            assert all(abs(v - target) <= 0.05 for v in vals)
        # sampled colourings of K_3 follow the product distribution
        weights, cells = FIXED_TWO_PART[0]
        w = graphons.StepGraphon(weights, cells)
        trials = 20000
        counts = {}
        for s in range(trials):
            res = graphons.sample(w, 3, mode="G", seed=s)
            key = tuple(int(c) for c in res.colouring.colours)
            counts[key] = counts.get(key, 0) + 1
        for outcome in itertools.product((1, 2), repeat=3):
            c1, c2, c3 = outcome
            p = 0.0
            for a, b, c in itertools.product(range(2), repeat=3):
                p += (weights[a] * weights[b] * weights[c]
                      * cells[a, b, c1 - 1] * cells[a, c, c2 - 1]
                      * cells[b, c, c3 - 1])
            sigma = math.sqrt(p * (1.0 - p) / trials)
            freq = counts.get(outcome, 0) / trials
            assert abs(freq - p) <= 4.0 * sigma, outcome


# ---------------------------------------------------------------------------
# criterion 12: goodness ratios for hypercubes and paths
# ---------------------------------------------------------------------------


def test_c12_goodness_ratios():
    with _criterion("criterion 12 goodness ratios"):
        diag = hosts.goodness_diagnostic("cube", 2, range(4, 11))
        ratios = [r.edge_ratio for r in diag["rows"]]
        assert diag["edge_ratio_strictly_decreasing"]
        assert all(b < a for a, b in zip(ratios, ratios[1:]))
        for n in range(6, 15):
            stats = hosts.overlap_statistics("path", 3, n)
            assert stats.edge_ratio >= 0.1


# ---------------------------------------------------------------------------
# criterion 13: certified colouring-number lower bound
# ---------------------------------------------------------------------------


def test_c13_chi_c_lower_bound():
    with _criterion("criterion 13 chi_c lower bound"):
        assert properties.chi_c_lower_bound(get_property("triangle-free"),
                                            4, 4) == 2
