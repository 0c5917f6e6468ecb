"""Constructive container pipeline for forbidden families.

The universe is E(host) x [k], with the pair (edge e, colour i) numbered
e*k + (i-1) so that containers, fingerprints and hyperedges all live in
single integer bitmasks (palette extraction is then a shift and mask per
edge).  One hyperedge is added per (copy of the pattern, banned
colouring) pair; colourings in the property are exactly the independent
transversals {(e, c(e))}.  Random sparsification follows the
probability p = eps1 / (24 k^(2r-3) C(N,3) C(n-3,N-3)) and removes one
edge from each overlapping pair; the container search branches on the
highest-degree vertex, excluded or retained, until induced edge counts
drop below delta * e(H).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import extremal, hosts, kernels, properties, templates
from .templates import Template, rng_stream

DEFAULT_CONTAINER_BUDGET = 5_000_000

# Retaining this many explored states for reuse is cheap; past the cap the
# search still terminates, it just recomputes overlapping subtrees.
MEMO_CAP = 1_000_000


@dataclass(frozen=True)
class ConstraintHypergraph:
    host: hosts.HostGraph
    k: int
    pattern_order: int
    r: int
    edges: tuple  # bitmasks over the universe, one per hyperedge

    @property
    def num_universe(self):
        return self.host.num_sites * self.k

    @property
    def num_edges(self):
        return len(self.edges)

    def vertex_label(self, vid):
        return vid // self.k, vid % self.k + 1

    def edges_inside(self, mask):
        return sum(1 for f in self.edges if f & ~mask == 0)


@dataclass(frozen=True)
class DirectPalette:
    """Defining order 2 needs no hypergraph: banning colourings of a
    single edge just shrinks every palette directly."""

    template: Template


def overlapping_pairs(edge_masks):
    """Pairs of distinct hyperedges sharing at least two vertices."""
    count = 0
    for i in range(len(edge_masks)):
        fi = edge_masks[i]
        for j in range(i + 1, len(edge_masks)):
            if (fi & edge_masks[j]).bit_count() >= 2:
                count += 1
    return count


def build_constraint_hypergraph(fam, n):
    """One r-edge per (order-preserving pattern copy, banned colouring);
    r = C(N,2) for complete patterns."""
    if fam.pattern.kind != "complete":
        raise ValueError("the container pipeline covers complete-host families")
    N = fam.order
    k = fam.k
    host = hosts.complete_graph(n)
    if N < 2:
        raise ValueError("defining order below 2")
    if N == 2:
        banned = 0
        for m in fam.members:
            banned |= 1 << (int(m.colours[0]) - 1)
        allowed = ((1 << k) - 1) & ~banned
        if allowed == 0:
            raise ValueError("family bans every colour on an edge")
        pal = np.full(host.num_sites, allowed, dtype=np.int64)
        return DirectPalette(Template(host, k, pal))
    embs = hosts.embeddings(fam.pattern, host)
    smaps = hosts.site_images(fam.pattern, host, embs)
    masks = []
    seen = set()
    for row in smaps:
        sites = row.tolist()
        for m in fam.members:
            f = 0
            for site, col in zip(sites, m.colours.tolist()):
                f |= 1 << (site * k + col - 1)
            if f not in seen:
                seen.add(f)
                masks.append(f)
    e = len(masks)
    lo, hi = math.comb(n, N), (k ** math.comb(N, 2)) * math.comb(n, N)
    if not lo <= e <= hi:
        raise AssertionError("e(H) = %d outside [%d, %d]" % (e, lo, hi))
    return ConstraintHypergraph(host, k, N, fam.pattern.num_sites, tuple(masks))


def sparsification_probability(n, N, k, eps1):
    denom = 24 * (k ** (2 * math.comb(N, 2) - 3)) * math.comb(N, 3) \
        * math.comb(n - 3, N - 3)
    return eps1 / denom


def sparsify_and_linearize(H, eps1, seed):
    """Keep each hyperedge with the prescribed probability, then delete
    one edge of every overlapping pair, yielding a linear subgraph."""
    n = H.host.num_vertices
    p_raw = sparsification_probability(n, H.pattern_order, H.k, eps1)
    p = min(1.0, p_raw)
    rng = rng_stream(seed)
    keep = rng.random(H.num_edges) < p
    kept = [f for f, kp in zip(H.edges, keep) if kp]
    overlaps = []
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if (kept[i] & kept[j]).bit_count() >= 2:
                overlaps.append((i, j))
    alive = [True] * len(kept)
    deleted = 0
    for i, j in overlaps:
        if alive[i] and alive[j]:
            alive[j] = False
            deleted += 1
    final = tuple(f for f, a in zip(kept, alive) if a)
    N, k = H.pattern_order, H.k
    f2_threshold = 3 * p * p * (k ** (2 * math.comb(N, 2) - 3)) \
        * math.comb(n, N) * math.comb(N, 3) * math.comb(n - 3, N - 3)
    stats = {
        "p": p,
        "p_clipped": p_raw > 1.0,
        "e_H": H.num_edges,
        "e_Hprime": len(kept),
        "overlap_pairs": len(overlaps),
        "deleted": deleted,
        "e_Hdouble": len(final),
        "F1": len(kept) >= p * H.num_edges / 2.0,
        "F1_threshold": p * H.num_edges / 2.0,
        "F2": len(overlaps) <= f2_threshold,
        "F2_threshold": f2_threshold,
        # F3 quantifies over all vertex sets; it is checked downstream on
        # the specific container sets and reported there.
        "hprime_edges": kept,
    }
    return ConstraintHypergraph(H.host, H.k, H.pattern_order, H.r, final), stats


def compute_containers(H, delta, node_budget=DEFAULT_CONTAINER_BUDGET):
    """Container family for the independent sets of a linear hypergraph.

    Depth-first over states (C, F): C is the candidate container, F the
    retained fingerprint (vertices committed to lie in the independent
    set).  A state whose induced edge count is below delta*e(H) emits C;
    otherwise it branches on the highest-degree vertex outside F.  Two
    sound reductions keep the tree small: a state whose fingerprint
    swallows a whole hyperedge covers nothing, and a hyperedge with all
    but one vertex retained forces the last vertex out of C.

    Each emission is greedily augmented: excluded vertices are added back
    (in vid order) while the induced edge count stays below the stopping
    threshold.  Coverage only improves, and the final family is an
    antichain: were C a strict subset of C', any vertex of C' \\ C could
    have been added to C without reaching the threshold, so the greedy
    pass would have taken it.  Duplicate leaves collapse in the output
    set, and no maximality filter is needed afterwards.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if overlapping_pairs(H.edges) > 0:
        raise ValueError("hypergraph is not linear; sparsify first")
    nv = H.num_universe
    universe = (1 << nv) - 1
    e0 = H.num_edges
    if e0 == 0:
        return [universe], {"nodes": 0, "emitted": 1, "family": 1}
    threshold = delta * e0
    edges = list(H.edges)
    by_vertex = [[] for _ in range(nv)]
    for f in edges:
        m = f
        while m:
            b = m & -m
            by_vertex[b.bit_length() - 1].append(f)
            m ^= b
    out = set()
    memo = set()
    nodes = 0
    emitted = 0
    stack = [(universe, 0)]
    while stack:
        C, F = stack.pop()
        if (C, F) in memo:
            continue
        if len(memo) < MEMO_CAP:
            memo.add((C, F))
        nodes += 1
        if nodes > node_budget:
            raise properties.ResourceLimitError(
                "container search exceeded %d nodes" % node_budget)
        dead = False
        changed = True
        while changed:
            changed = False
            for f in edges:
                if f & ~C:
                    continue
                free = f & ~F
                if free == 0:
                    dead = True
                    break
                if free.bit_count() == 1:
                    C &= ~free
                    changed = True
            if dead:
                break
        if dead:
            continue
        alive = sum(1 for f in edges if f & ~C == 0)
        if alive < threshold:
            emitted += 1
            for v in range(nv):
                bit = 1 << v
                if C & bit:
                    continue
                Cv = C | bit
                extra = sum(1 for f in by_vertex[v] if f & ~Cv == 0)
                if alive + extra < threshold:
                    C = Cv
                    alive += extra
            out.add(C)
            continue
        deg = {}
        for f in edges:
            if f & ~C:
                continue
            m = f & ~F
            while m:
                b = m & -m
                deg[b] = deg.get(b, 0) + 1
                m ^= b
        v = max(deg, key=lambda b: (deg[b], -b))
        stack.append((C, F | v))
        stack.append((C & ~v, F))
    family = sorted(out)
    stats = {"nodes": nodes, "emitted": emitted, "family": len(family)}
    return family, stats


def templates_from_containers(container_masks, host, k):
    """Read each container as a palette per edge; containers leaving some
    palette empty yield no proper template and are dropped."""
    full = (1 << k) - 1
    kept = []
    dropped = 0
    for C in container_masks:
        pal = np.array([(C >> (e * k)) & full for e in range(host.num_sites)],
                       dtype=np.int64)
        if (pal == 0).any():
            dropped += 1
            continue
        kept.append(Template(host, k, pal))
    return kept, dropped


# Vectorized mask arithmetic needs the whole universe in one word; larger
# instances fall back to per-template objects.
_MASK_VECTOR_LIMIT = 64
TEMPLATE_REPORT_CAP = 200


def _family_palettes(arr, num_sites, k):
    full = np.uint64((1 << k) - 1)
    pal = np.empty((arr.shape[0], num_sites), dtype=np.int64)
    for e in range(num_sites):
        pal[:, e] = ((arr >> np.uint64(e * k)) & full).astype(np.int64)
    return pal


def _subset_counts(arr, edge_masks):
    """For each container mask, how many of the given hyperedges lie
    fully inside it."""
    out = np.zeros(arr.shape[0], dtype=np.int64)
    if not edge_masks:
        return out
    edges = np.array(edge_masks, dtype=np.uint64)
    chunk = max(1, (1 << 24) // edges.shape[0])
    for s in range(0, arr.shape[0], chunk):
        c = arr[s:s + chunk]
        out[s:s + c.shape[0]] = ((edges[None, :] & ~c[:, None]) == 0).sum(axis=1)
    return out


def _wilson_interval(hits, trials, z=1.96):
    if trials == 0:
        return 0.0, 1.0
    phat = hits / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials
                         + z * z / (4 * trials * trials)) / denom
    # the interval contains the point estimate analytically; enforce it
    # against rounding at the endpoints
    return max(0.0, min(centre - half, phat)), min(1.0, max(centre + half, phat))


@dataclass(frozen=True)
class ContainerReport:
    family_size: int
    dropped_improper: int
    max_entropy: float
    entropy_bound: float  # ex(n,P) + eps*C(n,2); nan when ex is unavailable
    bad_counts: tuple
    bad_bound: float
    coverage_mode: str
    coverage: float
    coverage_ci: tuple  # 95% Wilson interval for sampled mode
    checked: int
    uncovered: int

    def to_json(self):
        data = {
            "family_size": self.family_size,
            "dropped_improper": self.dropped_improper,
            "max_entropy": self.max_entropy,
            "entropy_bound": self.entropy_bound,
            "bad_max": max(self.bad_counts) if self.bad_counts else 0,
            "bad_bound": self.bad_bound,
            "coverage": {"mode": self.coverage_mode, "fraction": self.coverage,
                         "ci95": list(self.coverage_ci),
                         "checked": self.checked, "uncovered": self.uncovered},
        }
        if len(self.bad_counts) <= 1000:
            data["bad_counts"] = list(self.bad_counts)
        else:
            data["bad_counts_len"] = len(self.bad_counts)
        return data


def _entropy_bound(prop, host, eps, budget):
    try:
        exact = extremal.extremal_entropy_host(prop, host, budget)
        if exact.proved:
            return exact.value + eps * host.num_sites
    except properties.ResourceLimitError:
        pass
    return float("nan")


def _coverage_check(pal_desc, prop, n, mode, seed, samples):
    """Fraction of P_n members admitted by some palette row; exact mode
    enumerates every member, sample mode draws uniform ones."""
    if mode == "exact":
        rows = properties.member_rows(prop, n)
        sampled = False
    elif mode == "sample":
        picked, _, _ = extremal._sample_members(prop, n, samples, seed)
        rows = np.array([c.colours for c in picked], dtype=np.int8)
        sampled = True
    else:
        raise ValueError("mode must be 'exact' or 'sample'")
    idx = kernels.cover_index(np.ascontiguousarray(rows), pal_desc)
    uncovered = int((idx < 0).sum())
    checked = rows.shape[0]
    coverage = 1.0 - uncovered / checked if checked else 1.0
    ci = (_wilson_interval(checked - uncovered, checked) if sampled
          else (coverage, coverage))
    return float(coverage), ci, checked, uncovered


def validate_container_family(tpls, prop, n, mode="exact", eps=0.5, seed=0,
                              samples=2000, dropped=0,
                              budget=extremal.DEFAULT_NODE_BUDGET):
    """Check the three container guarantees on a concrete family:
    coverage of P_n, per-template bad-pair counts against eps*C(n,N), and
    maximum entropy against ex(n,P) + eps*C(n,2)."""
    if not tpls:
        raise ValueError("empty container family")
    host = prop.host_for(n)
    fam = prop.effective_family()
    bad_counts = tuple(properties.bad_pairs(t, fam) for t in tpls)
    bad_bound = eps * math.comb(n, fam.order)
    ents = [templates.entropy(t) for t in tpls]
    max_entropy = float(max(ents))
    entropy_bound = _entropy_bound(prop, host, eps, budget)
    pal = np.array([t.palettes for t in tpls], dtype=np.int64)
    order = np.argsort(np.array(ents))[::-1]
    coverage, ci, checked, uncovered = _coverage_check(
        pal[order], prop, n, mode, seed, samples)
    return ContainerReport(
        family_size=len(tpls), dropped_improper=dropped,
        max_entropy=max_entropy, entropy_bound=float(entropy_bound),
        bad_counts=bad_counts, bad_bound=bad_bound,
        coverage_mode=mode, coverage=coverage, coverage_ci=ci,
        checked=checked, uncovered=uncovered)


def _validate_masks(arr, pal, prop, n, full_edges, mode, eps, seed, samples,
                    dropped, budget):
    """Mask-level counterpart of validate_container_family for large
    families; identical postconditions, no per-template objects."""
    host = prop.host_for(n)
    fam = prop.effective_family()
    k = prop.k
    bad = _subset_counts(arr, full_edges)
    bad_bound = eps * math.comb(n, fam.order)
    pop = np.array([bin(x).count("1") for x in range(1 << k)])
    if k > 1:
        ents = np.log(pop[pal]).sum(axis=1) / math.log(k)
    else:
        ents = np.zeros(arr.shape[0])
    max_entropy = float(ents.max())
    entropy_bound = _entropy_bound(prop, host, eps, budget)
    order = np.argsort(ents)[::-1]
    coverage, ci, checked, uncovered = _coverage_check(
        np.ascontiguousarray(pal[order]), prop, n, mode, seed, samples)
    return ContainerReport(
        family_size=arr.shape[0], dropped_improper=dropped,
        max_entropy=max_entropy, entropy_bound=float(entropy_bound),
        bad_counts=tuple(int(b) for b in bad), bad_bound=bad_bound,
        coverage_mode=mode, coverage=coverage, coverage_ci=ci,
        checked=checked, uncovered=uncovered)


def container_pipeline(prop, n, delta, seed, eps1=None, eps=0.5,
                       sparsify=True, coverage_mode="exact", samples=2000,
                       node_budget=DEFAULT_CONTAINER_BUDGET,
                       solver_budget=extremal.DEFAULT_NODE_BUDGET):
    """Full pipeline: hypergraph, optional sparsification, containers,
    templates, validation.  Returns a JSON-ready report."""
    fam = prop.effective_family()
    built = build_constraint_hypergraph(fam, n)
    if isinstance(built, DirectPalette):
        return {
            "direct_palette": built.template.to_json(),
            "note": "defining order 2: palettes restricted directly, "
                    "no hypergraph needed",
        }
    H = built
    report = {
        "n": n, "k": H.k, "pattern_order": H.pattern_order, "r": H.r,
        "universe": H.num_universe, "e_H": H.num_edges, "delta": delta,
        "seed": seed,
    }
    if sparsify:
        if eps1 is None:
            eps1 = eps * (H.k ** -math.comb(H.pattern_order, 2))
        H2, sstats = sparsify_and_linearize(H, eps1, seed)
        hprime = sstats.pop("hprime_edges")
        report["eps1"] = eps1
        report["sparsification"] = sstats
    else:
        H2 = H
        hprime = None
        report["sparsification"] = {
            "skipped": True,
            "overlap_pairs_H": overlapping_pairs(H.edges),
        }
    masks, cstats = compute_containers(H2, delta, node_budget)
    report["search"] = cstats
    if H.num_universe <= _MASK_VECTOR_LIMIT:
        return _finish_vectorized(report, masks, H, prop, n, hprime, eps1,
                                  eps, coverage_mode, samples, seed,
                                  solver_budget)
    return _finish_with_templates(report, masks, H, prop, n, hprime, eps1,
                                  eps, coverage_mode, samples, seed,
                                  solver_budget)


def _finish_vectorized(report, masks, H, prop, n, hprime, eps1, eps,
                       coverage_mode, samples, seed, solver_budget):
    arr_all = np.array(masks, dtype=np.uint64)
    pal_all = _family_palettes(arr_all, H.host.num_sites, H.k)
    if hprime is not None:
        # F3 surrogate: density preservation checked on the produced
        # container sets only, not all subsets
        inside_h = _subset_counts(arr_all, list(H.edges))
        inside_hp = _subset_counts(arr_all, list(hprime))
        dense = inside_h >= eps1 * H.num_edges
        ok = inside_hp[dense] >= (eps1 / 2.0) * len(hprime)
        report["sparsification"]["F3_on_containers"] = bool(ok.all())
        report["sparsification"]["F3_sets_checked"] = int(dense.sum())
    proper = (pal_all != 0).all(axis=1)
    dropped = int((~proper).sum())
    arr = arr_all[proper]
    pal = np.ascontiguousarray(pal_all[proper])
    if arr.shape[0] == 0:
        report["validation"] = {"error": "no proper templates survived"}
        return report
    val = _validate_masks(arr, pal, prop, n, list(H.edges), coverage_mode,
                          eps, seed, samples, dropped, solver_budget)
    report["validation"] = val.to_json()
    order = np.argsort(np.array(val.bad_counts))
    shown = [int(arr[i]) for i in order[:TEMPLATE_REPORT_CAP]]
    tpls, _ = templates_from_containers(shown, H.host, H.k)
    report["templates"] = [t.to_json() for t in tpls]
    report["templates_truncated"] = max(0, arr.shape[0] - len(shown))
    return report


def _finish_with_templates(report, masks, H, prop, n, hprime, eps1, eps,
                           coverage_mode, samples, seed, solver_budget):
    tpls, dropped = templates_from_containers(masks, H.host, H.k)
    if hprime is not None:
        eH = H.num_edges
        eHp = len(hprime)
        outcomes = []
        for C in masks:
            if H.edges_inside(C) >= eps1 * eH:
                inside = sum(1 for f in hprime if f & ~C == 0)
                outcomes.append(bool(inside >= eps1 / 2.0 * eHp))
        report["sparsification"]["F3_on_containers"] = (
            all(outcomes) if outcomes else True)
        report["sparsification"]["F3_sets_checked"] = len(outcomes)
    if not tpls:
        report["validation"] = {"error": "no proper templates survived"}
        return report
    val = validate_container_family(
        tpls, prop, n, mode=coverage_mode, eps=eps, seed=seed,
        samples=samples, dropped=dropped, budget=solver_budget)
    report["validation"] = val.to_json()
    if len(tpls) <= TEMPLATE_REPORT_CAP:
        report["templates"] = [t.to_json() for t in tpls]
        report["templates_truncated"] = 0
    else:
        report["templates"] = [t.to_json() for t in tpls[:TEMPLATE_REPORT_CAP]]
        report["templates_truncated"] = len(tpls) - TEMPLATE_REPORT_CAP
    return report
