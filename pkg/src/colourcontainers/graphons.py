"""Decorated step graphons: cell-valued probability maps on [0,1]^2.

A step graphon holds part weights and an m x m x k array of probability
vectors; cells[i, j] is the colour distribution on the block I_i x I_j.
Cut distances work on the common refinement of the two boundary sets and
are exact while the refinement stays within the enumeration budget
(subset-of-parts optimizers suffice because the objective is convex in
the fractional inclusion vector); beyond it, callers get certified
lower/upper bounds, clearly flagged.  Graphons built from templates put
a point mass on colour 1 along the diagonal blocks; every comparison in
this module applies the same convention, which perturbs integral
quantities by O(1/n).
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import hosts, kernels
from .templates import Colouring, Template, colours_of, rng_stream

WEIGHT_TOL = 1e-12
REFINE_BUDGET = kernels.CUT_ENUM_LIMIT
HOM_ASSIGNMENT_GUARD = 10 ** 7


@dataclass(frozen=True, eq=False)
class StepGraphon:
    weights: np.ndarray  # (m,) positive, summing to 1
    cells: np.ndarray    # (m, m, k) probability vectors, symmetric in i,j

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        c = np.asarray(self.cells, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cells", c)
        m = w.shape[0]
        if c.shape[:2] != (m, m) or c.ndim != 3:
            raise ValueError("cells must be m x m x k")
        if (w <= 0).any() or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("part weights must be positive and sum to 1")
        if (c < -WEIGHT_TOL).any() or np.abs(c.sum(axis=2) - 1.0).max() > WEIGHT_TOL:
            raise ValueError("cells must be probability vectors")
        if np.abs(c - c.transpose(1, 0, 2)).max() > WEIGHT_TOL:
            raise ValueError("cells must be symmetric")

    @property
    def k(self):
        return self.cells.shape[2]

    @property
    def num_parts(self):
        return self.weights.shape[0]

    def breaks(self):
        b = np.concatenate(([0.0], np.cumsum(self.weights)))
        b[-1] = 1.0
        return b

    def to_json(self):
        return {"k": self.k, "weights": [float(w) for w in self.weights],
                "cells": self.cells.tolist()}


def graphon_from_json(obj):
    return StepGraphon(np.array(obj["weights"]), np.array(obj["cells"]))


def constant_graphon(vector):
    v = np.asarray(vector, dtype=np.float64)
    return StepGraphon(np.array([1.0]), v.reshape(1, 1, -1))


def point_mass_vector(k, colour):
    v = np.zeros(k)
    v[colour - 1] = 1.0
    return v


def from_template(t):
    """W_t: n equal parts, cell (i,j) uniform on the palette of edge ij;
    accepts colourings too (point-mass cells).  Diagonal blocks carry a
    point mass on colour 1."""
    if isinstance(t, Colouring):
        t = Template.from_colouring(t)
    if t.host.kind != "complete":
        raise ValueError("graphons are built from complete-host templates")
    n = t.n
    k = t.k
    cells = np.zeros((n, n, k))
    cells[np.arange(n), np.arange(n), 0] = 1.0
    for (u, v), mask in zip(t.host.edges, t.palettes):
        cols = colours_of(int(mask))
        vec = np.zeros(k)
        vec[[c - 1 for c in cols]] = 1.0 / len(cols)
        cells[u, v] = vec
        cells[v, u] = vec
    return StepGraphon(np.full(n, 1.0 / n), cells)


def random_step_graphon(m, k, seed):
    rng = rng_stream(seed)
    w = 0.2 + rng.random(m)
    w /= w.sum()
    cells = rng.random((m, m, k)) + 0.05
    cells = (cells + cells.transpose(1, 0, 2)) / 2.0
    cells /= cells.sum(axis=2, keepdims=True)
    return StepGraphon(w, cells)


# ---------------------------------------------------------------------------
# refinement and averaging
# ---------------------------------------------------------------------------


def _merge_breaks(a, b):
    out = np.union1d(np.round(a, 15), np.round(b, 15))
    out = out[(out > -WEIGHT_TOL) & (out < 1.0 + WEIGHT_TOL)]
    out[0], out[-1] = 0.0, 1.0
    # drop zero-width atoms created by nearly-equal boundaries
    keep = np.concatenate(([True], np.diff(out) > 1e-13))
    return out[keep]


def _atom_parts(breaks, graphon):
    """Index of the graphon part containing each refinement atom."""
    gb = graphon.breaks()
    mids = (breaks[:-1] + breaks[1:]) / 2.0
    return np.clip(np.searchsorted(gb, mids, side="right") - 1, 0,
                   graphon.num_parts - 1)


def _refined_pair(U, W):
    breaks = _merge_breaks(U.breaks(), W.breaks())
    widths = np.diff(breaks)
    iu = _atom_parts(breaks, U)
    iw = _atom_parts(breaks, W)
    uc = U.cells[np.ix_(iu, iu)]
    wc = W.cells[np.ix_(iw, iw)]
    return widths, uc, wc


def average_graphon(W, n):
    """n equal parts; each new cell is the mass-weighted average of the
    overlapped cells (exact overlap integration)."""
    grid = np.linspace(0.0, 1.0, n + 1)
    gb = W.breaks()
    overlap = np.zeros((n, W.num_parts))
    for i in range(n):
        lo = np.maximum(grid[i], gb[:-1])
        hi = np.minimum(grid[i + 1], gb[1:])
        overlap[i] = np.clip(hi - lo, 0.0, None)
    cells = (n * n) * np.einsum("ia,jb,abc->ijc", overlap, overlap, W.cells)
    cells /= cells.sum(axis=2, keepdims=True)  # renormalize rounding dust
    return StepGraphon(np.full(n, 1.0 / n), cells)


# ---------------------------------------------------------------------------
# cut and L1 distances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutResult:
    value: float
    lower: float
    upper: float
    exact: bool
    atoms: int
    s_mask: int = 0
    t_mask: int = 0

    def to_json(self):
        return {"value": self.value, "lower": self.lower, "upper": self.upper,
                "exact": self.exact, "atoms": self.atoms}


def _weighted_diff(U, W):
    widths, uc, wc = _refined_pair(U, W)
    wd = (uc - wc) * widths[:, None, None] * widths[None, :, None]
    return widths, wd


def _l1_value(widths, uc, wc):
    area = widths[:, None] * widths[None, :]
    return float((np.abs(uc - wc).sum(axis=2) * area).sum())


def _local_search_cut(wd, disjoint, seed, restarts=8):
    """Alternating ascent on (S, signs, T); a certified lower bound."""
    m, _, k = wd.shape
    rng = rng_stream(seed)
    best = 0.0
    for _ in range(restarts):
        s = rng.random(m) < 0.5
        for _ in range(24):
            a = np.einsum("i,ijc->jc", s.astype(float), wd)
            if disjoint:
                a[s] = 0.0
            val = 0.0
            best_t = None
            for sig in range(1 << k):
                signs = np.array([-1.0 if (sig >> c) & 1 else 1.0
                                  for c in range(k)])
                proj = a @ signs
                t = proj > 0.0
                v = proj[t].sum()
                if v > val:
                    val, best_t = v, (t, signs)
            if best_t is None:
                break
            t, signs = best_t
            b = np.einsum("j,ijc->ic", t.astype(float), wd)
            proj = b @ signs
            if disjoint:
                proj[t] = -np.inf
            new_s = proj > 0.0
            if (new_s == s).all():
                break
            s = new_s
        a = np.einsum("i,ijc->jc", s.astype(float), wd)
        if disjoint:
            a[s] = 0.0
        for sig in range(1 << k):
            signs = np.array([-1.0 if (sig >> c) & 1 else 1.0
                              for c in range(k)])
            proj = a @ signs
            v = proj[proj > 0.0].sum()
            best = max(best, float(v))
    return best


def cut_distance(U, W, metric="dk", disjoint=False, seed=0):
    """Distance between two step graphons on their common refinement.

    metric "l1" integrates the summed absolute coordinate differences and
    is always exact.  metric "dk" maximizes the rectangle discrepancy;
    exact within the refinement budget, otherwise a certified lower bound
    from alternating search with the L1 value as upper bound (flagged via
    exact=False).
    """
    if U.k != W.k:
        raise ValueError("colour counts differ")
    widths, uc, wc = _refined_pair(U, W)
    m = widths.shape[0]
    if metric == "l1":
        v = _l1_value(widths, uc, wc)
        return CutResult(v, v, v, True, m)
    if metric != "dk":
        raise ValueError("metric must be 'dk' or 'l1'")
    if disjoint:
        # a disjoint rectangle pair may split an atom: taking one half of
        # every atom on each side turns any full rectangle into a disjoint
        # one at a quarter of its value, so enumerating on the half-atom
        # refinement keeps the factor-4 comparison with the plain maximum
        widths = np.repeat(widths / 2.0, 2)
        uc = np.repeat(np.repeat(uc, 2, axis=0), 2, axis=1)
        wc = np.repeat(np.repeat(wc, 2, axis=0), 2, axis=1)
        m = widths.shape[0]
    wd = (uc - wc) * widths[:, None, None] * widths[None, :, None]
    if m <= REFINE_BUDGET:
        val, smask, tmask = kernels.cut_norm_exact(
            np.ascontiguousarray(wd), 1 if disjoint else 0)
        val = float(val)
        return CutResult(val, val, val, True, m, int(smask), int(tmask))
    lower = _local_search_cut(wd, disjoint, seed)
    upper = min(_l1_value(widths, uc, wc), 2.0)
    return CutResult(lower, lower, upper, False, m)


@dataclass(frozen=True)
class DeltaResult:
    value: float
    permutation: tuple
    grid: int
    exhaustive: bool      # all m! permutations tried
    corrections: tuple    # averaging penalties for (U, W)

    def to_json(self):
        return {"value": self.value, "permutation": list(self.permutation),
                "grid": self.grid, "exhaustive": self.exhaustive,
                "corrections": list(self.corrections)}


def _commensurate(W, m):
    b = W.breaks() * m
    return np.abs(b - np.round(b)).max() <= 1e-9


def _averaging_penalty(W, m):
    if _commensurate(W, m):
        return 0.0, average_graphon(W, m)
    avg = average_graphon(W, m)
    res = cut_distance(W, avg, "dk")
    return (res.value if res.exact else res.upper), avg


def delta_cut_upper(U, W, grid_m, anneal_steps=2000, seed=0):
    """Upper bound on the rearrangement cut distance via part
    permutations of the m-grid averages.

    When a graphon's boundaries do not align with the grid, averaging
    loses information; the triangle inequality restores a true upper
    bound by adding the (exactly measured) distance to the average.
    Permutations are exhausted for m <= 8, otherwise annealed (flagged).
    """
    if U.k != W.k:
        raise ValueError("colour counts differ")
    m = grid_m
    pen_u, avg_u = _averaging_penalty(U, m)
    pen_w, avg_w = _averaging_penalty(W, m)

    def dist_for(perm):
        cells = avg_u.cells[np.ix_(perm, perm)]
        pu = StepGraphon(avg_u.weights, cells)
        return cut_distance(pu, avg_w, "dk").value

    ident = tuple(range(m))
    best_perm = ident
    best = dist_for(list(ident))
    if m <= 8:
        for perm in itertools.permutations(range(m)):
            d = dist_for(list(perm))
            if d < best - 1e-15:
                best, best_perm = d, perm
        exhaustive = True
    else:
        rng = rng_stream(seed)
        cur = list(ident)
        cur_d = best
        temp = 0.5
        for step in range(anneal_steps):
            i, j = rng.integers(0, m, size=2)
            if i == j:
                continue
            cur[i], cur[j] = cur[j], cur[i]
            d = dist_for(cur)
            if d < cur_d or rng.random() < math.exp(-(d - cur_d) / max(temp, 1e-6)):
                cur_d = d
                if d < best:
                    best, best_perm = d, tuple(cur)
            else:
                cur[i], cur[j] = cur[j], cur[i]
            temp *= 0.998
        exhaustive = False
    return DeltaResult(best + pen_u + pen_w, tuple(best_perm), m, exhaustive,
                       (pen_u, pen_w))


# ---------------------------------------------------------------------------
# entropy, conditioning, weak regularity
# ---------------------------------------------------------------------------


def _cell_entropies(cells, k):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(cells > 0.0, -cells * np.log(cells), 0.0)
    return terms.sum(axis=2) / np.log(k) if k > 1 else np.zeros(cells.shape[:2])


def entropy_graphon(W):
    """Integral of the base-k entropy of the cell distributions."""
    h = _cell_entropies(W.cells, W.k)
    return float(np.einsum("i,j,ij->", W.weights, W.weights, h))


@dataclass(frozen=True, eq=False)
class Partition:
    """Measurable partition of [0,1] into labelled classes, stored as
    atom boundaries plus a class label per atom."""

    breaks: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "breaks", np.asarray(self.breaks, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.labels.shape[0] != self.breaks.shape[0] - 1:
            raise ValueError("need one label per atom")

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def measures(self):
        w = np.diff(self.breaks)
        return np.bincount(self.labels, weights=w, minlength=self.num_classes)

    def to_json(self):
        return {"breaks": [float(b) for b in self.breaks],
                "labels": [int(x) for x in self.labels]}


def conditional_expectation(W, partition):
    """E[W|S]: averages over class products, returned as a step graphon
    on the common refinement of W's parts and the partition's atoms."""
    breaks = _merge_breaks(W.breaks(), partition.breaks)
    widths = np.diff(breaks)
    iw = _atom_parts(breaks, W)
    mids = (breaks[:-1] + breaks[1:]) / 2.0
    atom_cls = partition.labels[
        np.clip(np.searchsorted(partition.breaks, mids, side="right") - 1,
                0, partition.labels.shape[0] - 1)]
    ncls = partition.num_classes
    cw = W.cells[np.ix_(iw, iw)]
    mass = np.zeros(ncls)
    np.add.at(mass, atom_cls, widths)
    num = np.zeros((ncls, ncls, W.k))
    area = widths[:, None, None] * widths[None, :, None]
    np.add.at(num, (atom_cls[:, None].repeat(len(widths), 1),
                    atom_cls[None, :].repeat(len(widths), 0)), cw * area)
    denom = mass[:, None] * mass[None, :]
    avg = num / np.where(denom > 0, denom, 1.0)[:, :, None]
    cells = avg[np.ix_(atom_cls, atom_cls)]
    cells /= cells.sum(axis=2, keepdims=True)
    return StepGraphon(widths, cells)


def _l2_residual(W_cells, widths, atom_cls, ncls, k):
    mass = np.zeros(ncls)
    np.add.at(mass, atom_cls, widths)
    area = widths[:, None, None] * widths[None, :, None]
    num = np.zeros((ncls, ncls, k))
    np.add.at(num, (atom_cls[:, None].repeat(len(widths), 1),
                    atom_cls[None, :].repeat(len(widths), 0)), W_cells * area)
    denom = mass[:, None] * mass[None, :]
    avg = num / np.where(denom > 0, denom, 1.0)[:, :, None]
    resid = W_cells - avg[np.ix_(atom_cls, atom_cls)]
    return float((resid * resid * area).sum())


def weak_regularity(W, m):
    """Greedy equipartition-style regularity partition into m classes.

    Atoms are W's parts refined by a uniform grid chosen to stay inside
    the exact-distance budget.  Classes start as contiguous blocks of
    roughly equal measure and single-atom moves that shrink the squared
    L2 residual are applied while measures stay balanced.  Returns the
    partition, E[W|S], and the exactly measured cut distance.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    g = max(m, min(16, REFINE_BUDGET - W.num_parts))
    breaks = _merge_breaks(W.breaks(), np.linspace(0.0, 1.0, g + 1))
    widths = np.diff(breaks)
    na = widths.shape[0]
    iw = _atom_parts(breaks, W)
    cw = W.cells[np.ix_(iw, iw)]
    # contiguous initial classes of near-equal measure
    labels = np.zeros(na, dtype=np.int64)
    acc = 0.0
    cls = 0
    for i in range(na):
        if acc >= (cls + 1) / m - 1e-12 and cls < m - 1:
            cls += 1
        labels[i] = cls
        acc += widths[i]
    maxw = widths.max()
    target = 1.0 / m
    best = _l2_residual(cw, widths, labels, m, W.k)
    for _ in range(3):
        improved = False
        for i in range(na):
            here = labels[i]
            for cls in range(m):
                if cls == here:
                    continue
                trial = labels.copy()
                trial[i] = cls
                meas = np.bincount(trial, weights=widths, minlength=m)
                if meas.min() < target - maxw - 1e-12 or \
                        meas.max() > target + maxw + 1e-12:
                    continue
                r = _l2_residual(cw, widths, trial, m, W.k)
                if r < best - 1e-15:
                    best = r
                    labels = trial
                    improved = True
        if not improved:
            break
    part = Partition(breaks, labels)
    ews = conditional_expectation(W, part)
    res = cut_distance(W, ews, "dk")
    return part, ews, float(res.value)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecoratedSample:
    n: int
    mode: str             # "H" or "G"
    matrix: np.ndarray = None
    colouring: Colouring = None
    part_indices: np.ndarray = None


def sample(W, n, mode, seed):
    """H-mode: the matrix of cell distributions at n uniform sample
    points.  G-mode: additionally draws one colour per edge."""
    if mode not in ("H", "G"):
        raise ValueError("mode must be 'H' or 'G'")
    rng = rng_stream(seed)
    cum = np.cumsum(W.weights)
    xs = np.searchsorted(cum, rng.random(n), side="right")
    xs = np.clip(xs, 0, W.num_parts - 1)
    mat = W.cells[np.ix_(xs, xs)]
    if mode == "H":
        return DecoratedSample(n, "H", matrix=mat, part_indices=xs)
    host = hosts.complete_graph(n)
    draws = rng.random(host.num_sites)
    cols = np.empty(host.num_sites, dtype=np.int8)
    for e, (u, v) in enumerate(host.edges):
        cc = np.cumsum(mat[u, v])
        cols[e] = int(np.searchsorted(cc, draws[e], side="right")) + 1
    cols = np.clip(cols, 1, W.k)
    return DecoratedSample(n, "G", matrix=mat,
                           colouring=Colouring(host, W.k, cols),
                           part_indices=xs)


def sample_entropy_density(W, n, seed):
    """Mean base-k cell entropy over the sampled pair matrix; the
    empirical counterpart of entropy_graphon."""
    s = sample(W, n, "H", seed)
    total = kernels.sampled_pair_entropy(np.ascontiguousarray(s.matrix),
                                         np.log(W.k) if W.k > 1 else 1.0)
    pairs = n * (n - 1) / 2.0
    return float(total) / pairs if pairs else 0.0


# ---------------------------------------------------------------------------
# homomorphism densities and neighborhood counts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DecoratedPattern:
    """Small graph with a nonnegative weight vector over [k] per edge."""

    n: int
    edges: tuple  # ((u, v, vector), ...)

    @classmethod
    def from_colouring(cls, c):
        k = c.k
        edges = tuple((int(u), int(v), point_mass_vector(k, int(col)))
                      for (u, v), col in zip(c.host.edges, c.colours))
        return cls(c.host.num_vertices, edges)


def hom_density(pattern, W):
    """t(F, W): sum over vertex-to-part assignments of the product of
    part masses and edge-label inner products; exact for step
    functions."""
    m = W.num_parts
    if m ** pattern.n > HOM_ASSIGNMENT_GUARD:
        raise ValueError("too many assignments (%d^%d)" % (m, pattern.n))
    inner = [(u, v, W.cells @ np.asarray(vec, dtype=np.float64))
             for u, v, vec in pattern.edges]
    total = 0.0
    for phi in itertools.product(range(m), repeat=pattern.n):
        term = 1.0
        for x in phi:
            term *= W.weights[x]
        for u, v, tab in inner:
            term *= tab[phi[u], phi[v]]
        total += term
    return float(total)


def neighborhood_count(W, delta, n, metric="dk", grid_m=None, seed=0):
    """Count labelled colourings of K_n within delta of W.

    Exact for metric "dk"; for "deltak" each distance is an upper bound,
    so the returned count is a lower bound (flagged in the result).
    """
    host = hosts.complete_graph(n)
    k = W.k
    total = k ** host.num_sites
    if total > 1 << 21:
        raise ValueError("neighborhood enumeration out of reach at n=%d" % n)
    count = 0
    for combo in itertools.product(range(1, k + 1), repeat=host.num_sites):
        c = Colouring(host, k, np.array(combo, dtype=np.int8))
        wg = from_template(c)
        if metric == "dk":
            d = cut_distance(wg, W, "dk").value
        elif metric == "deltak":
            d = delta_cut_upper(wg, W, grid_m if grid_m else n, seed=seed).value
        else:
            raise ValueError("metric must be 'dk' or 'deltak'")
        if d <= delta + 1e-12:
            count += 1
    return {"count": count, "total": total,
            "flagged_lower_bound": metric == "deltak"}
