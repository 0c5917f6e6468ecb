"""Extremal entropy solvers and the experiments built on them.

The core search maximizes template entropy over per-site palettes by
branch and bound: sites in index order, palettes per site in descending
size (ties by ascending mask), upper bound = value so far plus one unit
per unassigned site capped by the best remaining palette, infeasibility
detected through the shared constraint systems.  For properties closed
under lowering colours the palette list shrinks to the downward-closed
prefixes {1..j}, which preserves the optimum value (realisations of the
prefix witness are obtained from a feasible witness by lowering colours
one site at a time).  Path hosts with consecutive-edge constraints skip
the search entirely in favour of an exact dynamic program.

Everything is deterministic: fixed orders, explicit seeds, budgets in
explored nodes.
"""

from dataclasses import dataclass

import numpy as np

from . import hosts, kernels, properties, templates
from .templates import Colouring, Template, rng_stream

DEFAULT_NODE_BUDGET = 10_000_000

# Tolerance when comparing accumulated entropies for equality (the DP and
# the branch-and-bound both add up per-site logs).
VALUE_EPS = 1e-9


class InfeasibleTemplateError(ValueError):
    """No realisation of the base template lies in the property."""


@dataclass(frozen=True)
class ExtremalResult:
    value: float
    witness: Template
    nodes_explored: int
    optimality: str  # "proved" or "lower-bound-only"

    @property
    def proved(self):
        return self.optimality == "proved"

    def to_json(self):
        return {"value": self.value, "witness": self.witness.to_json(),
                "nodes": self.nodes_explored, "optimality": self.optimality}


@dataclass(frozen=True)
class RandomTemplateSpec:
    n: int
    k: int
    p: float
    base_colour: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0,1]")
        if not 1 <= self.base_colour <= self.k:
            raise ValueError("base colour outside 1..k")


def random_template(spec, host=None):
    """Each site gets the full palette with probability p, otherwise the
    singleton base colour."""
    h = host if host is not None else hosts.complete_graph(spec.n)
    return _random_template(h, spec.k, spec.p, spec.base_colour,
                            rng_stream(spec.seed))


def _random_template(host, k, p, base_colour, rng):
    full = np.int64((1 << k) - 1)
    single = np.int64(1 << (base_colour - 1))
    draws = rng.random(host.num_sites) < p
    return Template(host, k, np.where(draws, full, single))


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------


def _submasks(base):
    out = []
    s = base
    while s:
        out.append(s)
        s = (s - 1) & base
    return out


def _is_prefix_mask(mask):
    return mask & (mask + 1) == 0


def _palette_table(base_masks, k, chain):
    """Per-site palette options as padded arrays for the kernel, plus the
    suffix upper bounds."""
    logk = np.log(k) if k > 1 else 1.0
    rows = []
    for base in base_masks:
        base = int(base)
        if chain and _is_prefix_mask(base):
            masks = [(1 << j) - 1 for j in range(base.bit_count(), 0, -1)]
        else:
            masks = sorted(_submasks(base), key=lambda m: (-m.bit_count(), m))
        rows.append(masks)
    m = len(rows)
    width = max(len(r) for r in rows)
    pal_mask = np.zeros((m, width), dtype=np.int64)
    pal_val = np.zeros((m, width), dtype=np.float64)
    pal_cnt = np.zeros(m, dtype=np.int64)
    for i, r in enumerate(rows):
        pal_cnt[i] = len(r)
        for j, mask in enumerate(r):
            pal_mask[i, j] = mask
            pal_val[i, j] = np.log(mask.bit_count()) / logk
    ub_suffix = np.zeros(m + 1, dtype=np.float64)
    for i in range(m - 1, -1, -1):
        ub_suffix[i] = ub_suffix[i + 1] + pal_val[i, 0]
    return pal_mask, pal_cnt, pal_val, ub_suffix


def _constant_seed(host, k, base_masks, cs):
    """Best feasible constant-palette template, tried from the largest
    palettes down; gives the search a strong incumbent immediately."""
    m = host.num_sites
    flags = np.zeros(max(cs.num_patterns, 1), dtype=np.int8)
    for mask in sorted(_submasks((1 << k) - 1), key=lambda x: (-x.bit_count(), x)):
        if any(mask & ~int(b) for b in base_masks):
            continue
        vec = np.full(m, mask, dtype=np.int64)
        if cs.num_patterns:
            hits = kernels.representable_flags(vec, cs.con_ptr, cs.con_edge,
                                               cs.con_bit, flags)
            if hits:
                continue
        val = m * (np.log(mask.bit_count()) / np.log(k) if k > 1 else 0.0)
        return float(val), vec, True
    return 0.0, np.zeros(m, dtype=np.int64), False


def _solve(prop, host, base_masks, budget):
    k = prop.k
    m = host.num_sites
    if m == 0:
        return ExtremalResult(0.0, Template(host, k, np.empty(0, np.int64)),
                              0, "proved")
    cs = properties.property_constraints(prop, host)
    dp = _try_path_dp(prop, host, base_masks, cs)
    if dp is not None:
        return dp
    pal_mask, pal_cnt, pal_val, ub_suffix = _palette_table(
        base_masks, k, prop.chain_monotone)
    seed_val, seed_mask, have_seed = _constant_seed(host, k, base_masks, cs)
    best_val, best_mask, nodes, exhausted, found = kernels.bb_search(
        pal_mask, pal_cnt, pal_val, ub_suffix,
        cs.con_ptr, cs.con_edge, cs.con_bit, cs.last_ptr, cs.last_idx,
        float(seed_val), seed_mask, have_seed, int(budget))
    if not found:
        raise InfeasibleTemplateError(
            "no realisation satisfies %s on this host" % prop.name)
    witness = Template(host, k, best_mask.copy())
    if not properties.template_in_property(witness, prop):
        raise AssertionError("search returned an infeasible witness")
    return ExtremalResult(templates.entropy(witness), witness, int(nodes),
                          "proved" if exhausted else "lower-bound-only")


def _try_path_dp(prop, host, base_masks, cs):
    """Exact DP for path hosts when every constraint couples two
    consecutive edges; returns None when not applicable."""
    if host.kind != "path" or host.num_sites < 1:
        return None
    m = host.num_sites
    for cid in range(cs.num_patterns):
        lo, hi = cs.con_ptr[cid], cs.con_ptr[cid + 1]
        es = sorted(int(e) for e in cs.con_edge[lo:hi])
        if len(es) != 2 or es[1] != es[0] + 1:
            return None
    k = prop.k
    logk = np.log(k) if k > 1 else 1.0
    # blocked[a, b] = some forbidden pair is representable with first-edge
    # palette a and second-edge palette b
    nmask = 1 << k
    blocked = np.zeros((nmask, nmask), dtype=bool)
    for cid in range(cs.num_patterns):
        lo, hi = cs.con_ptr[cid], cs.con_ptr[cid + 1]
        pairs = sorted((int(cs.con_edge[j]), int(cs.con_bit[j]))
                       for j in range(lo, hi))
        b1, b2 = pairs[0][1], pairs[1][1]
        first = (np.arange(nmask) & b1) != 0
        second = (np.arange(nmask) & b2) != 0
        blocked |= first[:, None] & second[None, :]
    opts = []
    for base in base_masks:
        base = int(base)
        if prop.chain_monotone and _is_prefix_mask(base):
            masks = [(1 << j) - 1 for j in range(base.bit_count(), 0, -1)]
        else:
            masks = sorted(_submasks(base), key=lambda x: (-x.bit_count(), x))
        opts.append(masks)
    val = [{mask: np.log(mask.bit_count()) / logk for mask in o} for o in opts]
    # suffix[e][mask]: best total over edges e.. with edge e using mask
    suffix = [dict() for _ in range(m)]
    nodes = 0
    for mask in opts[m - 1]:
        suffix[m - 1][mask] = val[m - 1][mask]
    for e in range(m - 2, -1, -1):
        for mask in opts[e]:
            best = None
            for nxt in opts[e + 1]:
                nodes += 1
                if blocked[mask, nxt]:
                    continue
                cand = suffix[e + 1][nxt]
                if best is None or cand > best + VALUE_EPS:
                    best = cand
            if best is not None:
                suffix[e][mask] = val[e][mask] + best
    if not suffix[0]:
        raise InfeasibleTemplateError(
            "no realisation satisfies %s on this host" % prop.name)
    total = max(suffix[0].values())
    # reconstruct the lexicographically smallest optimal mask vector
    chosen = np.zeros(m, dtype=np.int64)
    prev = None
    remaining = total
    for e in range(m):
        for mask in sorted(suffix[e]):
            if prev is not None and blocked[prev, mask]:
                continue
            if abs(suffix[e][mask] - remaining) <= VALUE_EPS:
                chosen[e] = mask
                remaining -= val[e][mask]
                prev = mask
                break
        else:
            raise AssertionError("path DP reconstruction failed")
    witness = Template(host, k, chosen)
    return ExtremalResult(templates.entropy(witness), witness, nodes, "proved")


def extremal_entropy(prop, n, budget=DEFAULT_NODE_BUDGET):
    """ex(n, P): maximum entropy of an order-n template whose
    realisations all lie in the property."""
    return extremal_entropy_host(prop, prop.host_for(n), budget)


def extremal_entropy_host(prop, host, budget=DEFAULT_NODE_BUDGET):
    full = np.full(host.num_sites, (1 << prop.k) - 1, dtype=np.int64)
    return _solve(prop, host, full, budget)


def relative_extremal_entropy(base, prop, budget=DEFAULT_NODE_BUDGET):
    """ex(T, P): the extremal entropy among subtemplates of the base
    template (pointwise palette subsets on the same host)."""
    if base.k != prop.k:
        raise ValueError("colour counts differ")
    return _solve(prop, base.host, base.palettes, budget)


# ---------------------------------------------------------------------------
# entropy densities
# ---------------------------------------------------------------------------


def entropy_density_sequence(prop, n_max, n_min=2, budget=DEFAULT_NODE_BUDGET):
    """Terms ex(n,P)/e(host_n) for n = n_min..n_max, with a monotonicity
    certificate; stops early (flagged) if a term is not proved optimal."""
    terms = []
    truncated_at = None
    for n in range(n_min, n_max + 1):
        host = prop.host_for(n)
        if host.num_sites == 0:
            continue
        res = extremal_entropy(prop, n, budget)
        if not res.proved:
            truncated_at = n
            break
        terms.append({"n": n, "value": res.value,
                      "density": res.value / host.num_sites})
    dens = [t["density"] for t in terms]
    nonincreasing = all(b <= a + VALUE_EPS for a, b in zip(dens, dens[1:]))
    return {"terms": terms, "nonincreasing": nonincreasing,
            "truncated_at": truncated_at}


# ---------------------------------------------------------------------------
# transference and typical structure
# ---------------------------------------------------------------------------


def transference_experiment(prop, n, p, base_colour, trials, seed,
                            epsilon=None, budget=DEFAULT_NODE_BUDGET):
    """Distribution of ex(T,P)/(p·ex(n,P)) over p-random templates T.

    Trials whose inner solve is not proved optimal are discarded and
    counted.  With epsilon given, also reports the fraction of ratios in
    [1 - eps·n²/ex, 1 + 2·eps·n²/ex].
    """
    if base_colour not in prop.monotone_colours:
        raise ValueError("property is not monotone in colour %d" % base_colour)
    exact = extremal_entropy(prop, n, budget)
    if not exact.proved:
        raise properties.ResourceLimitError("ex(n,P) not proved within budget")
    host = prop.host_for(n)
    values = []
    ratios = []
    discarded = 0
    for trial in range(trials):
        T = _random_template(host, prop.k, p, base_colour,
                             rng_stream(seed, trial))
        try:
            res = relative_extremal_entropy(T, prop, budget)
        except InfeasibleTemplateError:
            discarded += 1
            continue
        if not res.proved:
            discarded += 1
            continue
        values.append(res.value)
        if p > 0 and exact.value > 0:
            ratios.append(res.value / (p * exact.value))
    out = {
        "n": n, "p": p, "base_colour": base_colour,
        "trials": trials, "discarded": discarded,
        "exact": exact.value, "values": values, "ratios": ratios,
        "mean": float(np.mean(ratios)) if ratios else float("nan"),
        "min": float(np.min(ratios)) if ratios else float("nan"),
        "max": float(np.max(ratios)) if ratios else float("nan"),
    }
    if epsilon is not None and exact.value > 0:
        lo = 1.0 - epsilon * n * n / exact.value
        hi = 1.0 + 2.0 * epsilon * n * n / exact.value
        inside = [r for r in ratios if lo <= r <= hi]
        out["band"] = [lo, hi]
        out["fraction_in_band"] = (len(inside) / len(ratios)) if ratios else 0.0
    return out


def _sample_members(prop, n, samples, seed):
    """Uniform members of P_n: rejection sampling when the acceptance
    rate allows, exact enumeration when it is enumerable, else an error."""
    host = prop.host_for(n)
    m = host.num_sites
    total = prop.k ** m
    count = properties.speed(prop, n)
    if count == 0:
        raise InfeasibleTemplateError("property is empty at order %d" % n)
    acceptance = count / total
    rng = rng_stream(seed)
    if acceptance >= 1e-4:
        pattern, mem = prop.pattern_members()
        cs = properties.constraint_system(pattern, mem, host)
        picked = []
        while len(picked) < samples:
            batch = rng.integers(1, prop.k + 1,
                                 size=(4096, m)).astype(np.int8)
            for row in batch:
                if not properties._matches_any(cs, row):
                    picked.append(Colouring(host, prop.k, row.copy()))
                    if len(picked) == samples:
                        break
        return picked, acceptance, "rejection"
    if total <= properties.COLLECT_BUFFER_LIMIT:
        mem = properties.members(prop, n)
        idx = rng.integers(0, len(mem), size=samples)
        return [mem[i] for i in idx], acceptance, "exact"
    raise properties.ResourceLimitError(
        "acceptance %.2e too low for rejection sampling; enumerate P_n "
        "explicitly at a smaller order" % acceptance)


def typical_structure_experiment(prop, n, witness_templates, samples, seed):
    """Edit distance from uniform members of P_n to the nearest witness
    template, as an empirical distribution."""
    if not witness_templates:
        raise ValueError("need at least one witness template")
    picked, acceptance, mode = _sample_members(prop, n, samples, seed)
    dists = [templates.edit_distance(c, list(witness_templates))
             for c in picked]
    order = np.sort(np.array(dists))
    uniq, counts = np.unique(order, return_counts=True)
    cum = np.cumsum(counts) / len(dists)
    return {
        "n": n, "samples": samples, "mode": mode, "acceptance": acceptance,
        "distances": [int(d) for d in dists],
        "median": float(np.median(order)),
        "mean": float(np.mean(order)),
        "cdf": [[int(d), float(f)] for d, f in zip(uniq, cum)],
    }
