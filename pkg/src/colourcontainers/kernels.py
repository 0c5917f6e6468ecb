"""Hot inner loops, jitted with numba when available.

Everything here works on flat numpy arrays so that numba can compile it:
palettes are bitmasks in int64 arrays (bit c-1 set means colour c is
allowed), and forbidden patterns are CSR triples ``(con_ptr, con_edge,
con_col)`` listing, per pattern, the host edge indices and the colour each
edge must take.  Patterns are additionally bucketed by the *last* edge they
touch (``last_ptr``, ``last_idx``) so depth-first searches over edges in
index order can test a pattern exactly once, at the moment it becomes fully
assigned.

Setting ``COLOURCONTAINERS_NO_NUMBA=1`` (or running without numba
installed) selects pure numpy fallbacks; ``benchmarks/bench_kernels.py``
compares the two paths on representative workloads.
"""

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    numba = None
    _HAVE_NUMBA = False

USING_NUMBA = _HAVE_NUMBA and os.environ.get("COLOURCONTAINERS_NO_NUMBA", "") == ""

# Tolerance for treating two objective values as tied in branch and bound.
TIE_EPS = 1e-12

# Refusing to enumerate subsets beyond this keeps the exact cut-norm search
# bounded; callers fall back to certified lower/upper bounds above it.
CUT_ENUM_LIMIT = 24


# ---------------------------------------------------------------------------
# loop implementations (numba-compilable source)
# ---------------------------------------------------------------------------


def _enumerate_colourings_loops(num_edges, k, con_ptr, con_edge, con_col,
                                last_ptr, last_idx, collect, out):
    """DFS over colourings of the host edges in index order.

    Counts colourings in which no forbidden pattern is matched exactly, and
    optionally writes each survivor into ``out`` (rows of colour codes).
    Returns the count; when collecting, rows beyond the capacity of ``out``
    are counted but not written.
    """
    colour = np.zeros(num_edges, dtype=np.int8)
    count = 0
    d = 0
    while d >= 0:
        colour[d] += 1
        if colour[d] > k:
            colour[d] = 0
            d -= 1
            continue
        ok = True
        for t in range(last_ptr[d], last_ptr[d + 1]):
            cid = last_idx[t]
            hit = True
            for j in range(con_ptr[cid], con_ptr[cid + 1]):
                if colour[con_edge[j]] != con_col[j]:
                    hit = False
                    break
            if hit:
                ok = False
                break
        if not ok:
            continue
        if d == num_edges - 1:
            if collect and count < out.shape[0]:
                for e in range(num_edges):
                    out[count, e] = colour[e]
            count += 1
        else:
            d += 1
    return count


def _bb_search_loops(pal_mask, pal_cnt, pal_val, ub_suffix,
                     con_ptr, con_edge, con_bit, last_ptr, last_idx,
                     seed_val, seed_mask, have_seed, node_budget):
    """Branch and bound over palette assignments, maximizing the summed
    per-edge values subject to no forbidden pattern being representable.

    Palettes for each edge must be listed in non-increasing value order
    (ties in ascending mask order); ``ub_suffix[d]`` is the best value
    attainable from edges d..m-1 ignoring all constraints.  A pattern is
    representable when every one of its (edge, colour-bit) entries is
    present in the current masks.  Ties within TIE_EPS are broken toward
    the lexicographically smallest mask vector.

    Returns (best_val, best_masks, nodes, exhausted, found).
    """
    m = pal_mask.shape[0]
    cur = np.zeros(m, dtype=np.int64)
    val = np.zeros(m + 1, dtype=np.float64)
    choice = np.full(m, -1, dtype=np.int64)
    best = seed_mask.copy()
    best_val = seed_val
    found = have_seed
    nodes = 0
    exhausted = True
    d = 0
    while d >= 0:
        choice[d] += 1
        if choice[d] >= pal_cnt[d]:
            choice[d] = -1
            d -= 1
            continue
        v = val[d] + pal_val[d, choice[d]]
        bound = v + ub_suffix[d + 1]
        if found and bound < best_val - TIE_EPS:
            # values only decrease along the palette list, so the whole
            # depth is dominated by the incumbent
            choice[d] = -1
            d -= 1
            continue
        nodes += 1
        if nodes > node_budget:
            exhausted = False
            break
        cur[d] = pal_mask[d, choice[d]]
        if found and bound <= best_val + TIE_EPS:
            # at best a tie from here: only continue if the prefix can
            # still beat the incumbent lexicographically
            cmp = 0
            for e in range(d + 1):
                if cur[e] < best[e]:
                    cmp = -1
                    break
                if cur[e] > best[e]:
                    cmp = 1
                    break
            if cmp > 0:
                continue
        bad = False
        for t in range(last_ptr[d], last_ptr[d + 1]):
            cid = last_idx[t]
            hit = True
            for j in range(con_ptr[cid], con_ptr[cid + 1]):
                if cur[con_edge[j]] & con_bit[j] == 0:
                    hit = False
                    break
            if hit:
                bad = True
                break
        if bad:
            continue
        if d == m - 1:
            if (not found) or v > best_val + TIE_EPS:
                best_val = v
                for e in range(m):
                    best[e] = cur[e]
                found = True
            elif v >= best_val - TIE_EPS:
                smaller = False
                for e in range(m):
                    if cur[e] < best[e]:
                        smaller = True
                        break
                    if cur[e] > best[e]:
                        break
                if smaller:
                    best_val = v
                    for e in range(m):
                        best[e] = cur[e]
        else:
            d += 1
            val[d] = v
    return best_val, best, nodes, exhausted, found


def _representable_flags_loops(mask, con_ptr, con_edge, con_bit, flags):
    """Mark which forbidden patterns are representable in the mask vector.

    Returns the number of set flags.
    """
    ncon = con_ptr.shape[0] - 1
    cnt = 0
    for cid in range(ncon):
        hit = True
        for j in range(con_ptr[cid], con_ptr[cid + 1]):
            if mask[con_edge[j]] & con_bit[j] == 0:
                hit = False
                break
        if hit:
            flags[cid] = 1
            cnt += 1
        else:
            flags[cid] = 0
    return cnt


def _cover_index_loops(cols, pal):
    """For each colouring row, the index of the first palette-mask row that
    admits it edge-by-edge, or -1."""
    nm = cols.shape[0]
    nf = pal.shape[0]
    ne = cols.shape[1]
    out = np.full(nm, -1, dtype=np.int64)
    for i in range(nm):
        for f in range(nf):
            ok = True
            for e in range(ne):
                if (pal[f, e] >> (cols[i, e] - 1)) & 1 == 0:
                    ok = False
                    break
            if ok:
                out[i] = f
                break
    return out


def _cut_norm_exact_loops(wd, disjoint):
    """Exact k-decorated cut objective over all vertex sets S (Gray-code
    order), with the inner T optimum solved per colour-sign pattern.

    ``wd[i, j, c]`` already carries the cell-measure weights.  When
    ``disjoint`` is nonzero, T is restricted to the complement of S.
    Returns (value, S mask, T mask).
    """
    m = wd.shape[0]
    kk = wd.shape[2]
    nsig = 1 << kk
    a = np.zeros((m, kk), dtype=np.float64)
    best = 0.0
    best_s = 0
    best_t = 0
    scode = 0
    for g in range(1, 1 << m):
        # flip the lowest set bit position of g (standard Gray walk)
        i = 0
        while (g >> i) & 1 == 0:
            i += 1
        if (scode >> i) & 1:
            scode &= ~(1 << i)
            for j in range(m):
                for c in range(kk):
                    a[j, c] -= wd[i, j, c]
        else:
            scode |= 1 << i
            for j in range(m):
                for c in range(kk):
                    a[j, c] += wd[i, j, c]
        for sig in range(nsig):
            acc = 0.0
            tmask = 0
            for j in range(m):
                if disjoint and (scode >> j) & 1:
                    continue
                s = 0.0
                for c in range(kk):
                    if (sig >> c) & 1:
                        s -= a[j, c]
                    else:
                        s += a[j, c]
                if s > 0.0:
                    acc += s
                    tmask |= 1 << j
            if acc > best:
                best = acc
                best_s = scode
                best_t = tmask
    return best, best_s, best_t


def _sampled_pair_entropy_loops(cells, logk):
    """Sum over unordered pairs i<j of the base-k entropy of cells[i, j]."""
    n = cells.shape[0]
    kk = cells.shape[2]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            h = 0.0
            for c in range(kk):
                p = cells[i, j, c]
                if p > 0.0:
                    h -= p * np.log(p)
            total += h / logk
    return total


# ---------------------------------------------------------------------------
# numpy fallbacks
# ---------------------------------------------------------------------------

_ENUM_VECTOR_LIMIT = 1 << 26
_ENUM_CHUNK = 1 << 18


def _enumerate_colourings_numpy(num_edges, k, con_ptr, con_edge, con_col,
                                last_ptr, last_idx, collect, out):
    total = k ** int(num_edges)
    if total > _ENUM_VECTOR_LIMIT:
        # too many codes to materialize; fall back to the plain DFS
        return _enumerate_colourings_loops(num_edges, k, con_ptr, con_edge,
                                           con_col, last_ptr, last_idx,
                                           collect, out)
    ncon = con_ptr.shape[0] - 1
    count = 0
    powers = k ** np.arange(num_edges, dtype=np.int64)
    for start in range(0, total, _ENUM_CHUNK):
        codes = np.arange(start, min(start + _ENUM_CHUNK, total), dtype=np.int64)
        cols = ((codes[:, None] // powers[None, :]) % k + 1).astype(np.int8)
        keep = np.ones(codes.shape[0], dtype=bool)
        for cid in range(ncon):
            lo, hi = con_ptr[cid], con_ptr[cid + 1]
            hit = np.ones(codes.shape[0], dtype=bool)
            for j in range(lo, hi):
                hit &= cols[:, con_edge[j]] == con_col[j]
            keep &= ~hit
        kept = cols[keep]
        if collect:
            room = out.shape[0] - count
            if room > 0:
                out[count:count + min(room, kept.shape[0])] = kept[:room]
        count += kept.shape[0]
    return count


def _cut_norm_exact_numpy(wd, disjoint):
    m, _, kk = wd.shape
    signs = np.array([[1.0 if (sig >> c) & 1 == 0 else -1.0 for c in range(kk)]
                      for sig in range(1 << kk)])
    best = 0.0
    best_s = 0
    best_sig = 0
    chunk = 1 << 12
    for start in range(0, 1 << m, chunk):
        codes = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(m)) & 1).astype(np.float64)
        a = np.einsum("bi,ijc->bjc", bits, wd)
        s = np.einsum("bjc,sc->bsj", a, signs)
        if disjoint:
            s = np.where(bits[:, None, :] > 0.5, 0.0, s)
        vals = np.clip(s, 0.0, None).sum(axis=2)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[idx] > best:
            best = float(vals[idx])
            best_s = int(codes[idx[0]])
            best_sig = int(idx[1])
    # reconstruct the witness T for the winning (S, sign) pair
    bits = ((best_s >> np.arange(m)) & 1).astype(np.float64)
    a = np.einsum("i,ijc->jc", bits, wd)
    s = a @ signs[best_sig]
    if disjoint:
        s = np.where(bits > 0.5, 0.0, s)
    tmask = int(np.sum((1 << np.arange(m))[s > 0.0]))
    return best, int(best_s), tmask


def _representable_flags_numpy(mask, con_ptr, con_edge, con_bit, flags):
    hits = (mask[con_edge] & con_bit) != 0
    lengths = np.diff(con_ptr)
    full = np.add.reduceat(hits, con_ptr[:-1]) == lengths
    flags[:] = full.astype(flags.dtype)
    return int(full.sum())


def _cover_index_numpy(cols, pal):
    nm = cols.shape[0]
    out = np.full(nm, -1, dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, pal.shape[0] * pal.shape[1]))
    for start in range(0, nm, chunk):
        c = cols[start:start + chunk]
        adm = ((pal[None, :, :] >> (c[:, None, :].astype(np.int64) - 1)) & 1).all(axis=2)
        any_f = adm.any(axis=1)
        out[start:start + c.shape[0]][any_f] = np.argmax(adm[any_f], axis=1)
    return out


def _sampled_pair_entropy_numpy(cells, logk):
    n = cells.shape[0]
    iu = np.triu_indices(n, k=1)
    p = cells[iu]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, -p * np.log(p), 0.0)
    return float(terms.sum() / logk)


if USING_NUMBA:
    _nj = numba.njit(cache=True)
    enumerate_colourings = _nj(_enumerate_colourings_loops)
    bb_search = _nj(_bb_search_loops)
    representable_flags = _nj(_representable_flags_loops)
    cover_index = _nj(_cover_index_loops)
    cut_norm_exact = _nj(_cut_norm_exact_loops)
    sampled_pair_entropy = _nj(_sampled_pair_entropy_loops)
else:
    enumerate_colourings = _enumerate_colourings_numpy
    bb_search = _bb_search_loops
    representable_flags = _representable_flags_numpy
    cover_index = _cover_index_numpy
    cut_norm_exact = _cut_norm_exact_numpy
    sampled_pair_entropy = _sampled_pair_entropy_numpy
