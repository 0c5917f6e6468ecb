"""Order-hereditary properties of colourings.

A property is given either by a forbidden family (colourings of a small
pattern graph whose order-preserving copies are banned) or by a
membership predicate applied at a declared defining order.  Membership,
speed counting, supersaturation counts, the digraph and multigraph
encodings, and the universal-class tools for colouring numbers all live
here; the shared constraint-system builder turns a property into the
flat arrays the kernels consume.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import hosts, kernels
from .templates import Colouring, Template

# Enumeration guards: speed() refuses hosts with more colourings than
# SPEED_GUARD; predicate properties are materialized at their defining
# order, which must stay below PREDICATE_ENUM_GUARD colourings.
SPEED_GUARD = 10 ** 10
PREDICATE_ENUM_GUARD = 1 << 20
COLLECT_BUFFER_LIMIT = 1 << 22


class ResourceLimitError(RuntimeError):
    pass


class MalformedEncodingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# forbidden families and properties
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForbiddenFamily:
    """Nonempty list of banned colourings, all on one pattern host."""

    pattern: hosts.HostGraph
    k: int
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("forbidden family must be nonempty")
        for m in self.members:
            if m.host != self.pattern or m.k != self.k:
                raise ValueError("member does not live on the pattern host")

    @property
    def order(self):
        return self.pattern.num_vertices

    def symmetric_closure(self):
        """Close the members under all vertex permutations of the pattern
        (complete patterns only); the induced property is then invariant
        under relabelling."""
        if self.pattern.kind != "complete":
            raise ValueError("symmetric closure needs a complete pattern")
        n = self.order
        sidx = self.pattern.site_index()
        seen = {}
        for m in self.members:
            for perm in itertools.permutations(range(n)):
                cols = np.empty_like(m.colours)
                for e, (u, v) in enumerate(self.pattern.edges):
                    cols[sidx[tuple(sorted((perm[u], perm[v])))]] = m.colours[e]
                seen[cols.tobytes()] = cols
        members = tuple(Colouring(self.pattern, self.k, seen[b])
                        for b in sorted(seen))
        return ForbiddenFamily(self.pattern, self.k, members)

    def to_json(self):
        out = {"N": self.order, "k": self.k,
               "members": [[int(c) for c in m.colours] for m in self.members]}
        if self.pattern.kind != "complete":
            out["host"] = self.pattern.to_json()
        return out


def family_from_json(obj):
    k = obj["k"]
    pattern = (hosts.host_from_json(obj["host"]) if "host" in obj
               else hosts.complete_graph(obj["N"]))
    members = tuple(Colouring(pattern, k, np.array(a, dtype=np.int8))
                    for a in obj["members"])
    return ForbiddenFamily(pattern, k, members)


def _family(order, k, assignments, pattern=None):
    p = pattern if pattern is not None else hosts.complete_graph(order)
    return ForbiddenFamily(p, k, tuple(
        Colouring(p, k, np.array(a, dtype=np.int8)) for a in assignments))


@dataclass(eq=False)
class Property:
    """An order-hereditary class of k-colourings.

    Exactly one of ``forbidden`` and ``predicate`` is set.  A predicate
    property holds a membership test applied at ``defining_order``; its
    forbidden colourings at that order are derived once and cached.
    ``monotone_colours`` lists colours i such that recolouring any site
    to i never leaves the property; ``chain_monotone`` additionally
    records closure under lowering a colour to any smaller one, which
    the extremal search exploits.  ``host_builder`` overrides the
    default complete-graph hosts (paths, hypercubes).
    """

    name: str
    k: int
    forbidden: ForbiddenFamily = None
    predicate: object = None
    defining_order: int = None
    monotone_colours: frozenset = frozenset()
    chain_monotone: bool = False
    host_builder: object = None
    description: str = ""
    _derived: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if (self.forbidden is None) == (self.predicate is None):
            raise ValueError("exactly one of forbidden/predicate required")
        if self.predicate is not None and self.defining_order is None:
            raise ValueError("predicate properties need a defining order")
        self.monotone_colours = frozenset(self.monotone_colours)

    @property
    def kind(self):
        return "family" if self.forbidden is not None else "predicate"

    def host_for(self, n):
        if self.host_builder is not None:
            return self.host_builder(n)
        return hosts.complete_graph(n)

    def pattern_members(self):
        """The pattern host and the banned colourings on it (possibly
        empty for a trivially-true predicate)."""
        if self.forbidden is not None:
            return self.forbidden.pattern, self.forbidden.members
        if self._derived is None:
            pattern = hosts.complete_graph(self.defining_order)
            sites = pattern.num_sites
            if self.k ** sites > PREDICATE_ENUM_GUARD:
                raise ResourceLimitError(
                    "predicate defining order too large to materialize")
            bad = []
            for combo in itertools.product(range(1, self.k + 1), repeat=sites):
                c = Colouring(pattern, self.k, np.array(combo, dtype=np.int8))
                if not self.predicate(c):
                    bad.append(c)
            self._derived = (pattern, tuple(bad))
        return self._derived

    def effective_family(self):
        pattern, members = self.pattern_members()
        if not members:
            raise ValueError("property %r forbids nothing" % self.name)
        return ForbiddenFamily(pattern, self.k, members)


def symmetric_closure(prop):
    fam = prop.effective_family().symmetric_closure()
    return Property(name=prop.name + "-sym", k=prop.k, forbidden=fam,
                    monotone_colours=prop.monotone_colours,
                    chain_monotone=prop.chain_monotone,
                    description="symmetric closure of " + prop.name)


# ---------------------------------------------------------------------------
# constraint systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSystem:
    """Forbidden patterns instantiated on a concrete host, in the CSR
    layout of the kernels module, bucketed by last touched site."""

    num_sites: int
    k: int
    con_ptr: np.ndarray
    con_edge: np.ndarray
    con_col: np.ndarray
    con_bit: np.ndarray
    last_ptr: np.ndarray
    last_idx: np.ndarray

    @property
    def num_patterns(self):
        return self.con_ptr.shape[0] - 1


def constraint_system(pattern, members, host):
    """Instantiate each banned colouring over every order-preserving copy
    of the pattern in the host, deduplicated and sorted for reproducible
    enumeration order."""
    pats = set()
    if members:
        embs = hosts.embeddings(pattern, host)
        if embs.shape[0]:
            smaps = hosts.site_images(pattern, host, embs)
            for row in smaps:
                sites = row.tolist()
                for m in members:
                    pats.add(tuple(sorted(zip(sites, m.colours.tolist()))))
    plist = sorted(pats, key=lambda p: (p[-1][0], p))
    ncon = len(plist)
    con_ptr = np.zeros(ncon + 1, dtype=np.int64)
    lengths = [len(p) for p in plist]
    con_ptr[1:] = np.cumsum(lengths, dtype=np.int64) if ncon else 0
    flat = [pair for p in plist for pair in p]
    con_edge = np.array([e for e, _ in flat], dtype=np.int64)
    con_col = np.array([c for _, c in flat], dtype=np.int64)
    con_bit = np.int64(1) << (con_col - 1) if flat else np.empty(0, dtype=np.int64)
    last_ptr = np.zeros(host.num_sites + 1, dtype=np.int64)
    for p in plist:
        last_ptr[p[-1][0] + 1] += 1
    last_ptr = np.cumsum(last_ptr, dtype=np.int64)
    last_idx = np.arange(ncon, dtype=np.int64)
    return ConstraintSystem(host.num_sites, members[0].k if members else 0,
                            con_ptr, con_edge, con_col, con_bit,
                            last_ptr, last_idx)


def property_constraints(prop, host):
    pattern, members = prop.pattern_members()
    return constraint_system(pattern, members, host)


def _matches_any(cs, colours):
    if cs.num_patterns == 0:
        return False
    hits = colours[cs.con_edge] == cs.con_col
    full = np.add.reduceat(hits, cs.con_ptr[:-1]) == np.diff(cs.con_ptr)
    return bool(full.any())


# ---------------------------------------------------------------------------
# membership, speed, supersaturation
# ---------------------------------------------------------------------------


def violates(c, fam):
    """True iff some member of the family is an order-preserving
    subcolouring of c."""
    if c.k != fam.k:
        raise ValueError("colour counts differ")
    return _matches_any(constraint_system(fam.pattern, fam.members, c.host),
                        c.colours)


def in_property(c, prop):
    if c.k != prop.k:
        raise ValueError("colour counts differ")
    pattern, members = prop.pattern_members()
    if not members:
        return True
    return not _matches_any(constraint_system(pattern, members, c.host),
                            c.colours)


def _empty_rows(sites):
    return np.empty((0, max(sites, 1)), dtype=np.int8)


def speed(prop, n):
    """|P_n|: count colourings of the order-n host avoiding every
    instantiated pattern, by pruned depth-first enumeration."""
    host = prop.host_for(n)
    sites = host.num_sites
    if sites == 0:
        return 1
    if prop.k ** sites > SPEED_GUARD:
        raise ResourceLimitError(
            "speed(%s, %d) needs %d^%d colourings" % (prop.name, n, prop.k, sites))
    cs = property_constraints(prop, host)
    return int(kernels.enumerate_colourings(
        sites, prop.k, cs.con_ptr, cs.con_edge, cs.con_col,
        cs.last_ptr, cs.last_idx, False, _empty_rows(sites)))


def member_rows(prop, n, limit=None):
    """All colourings in P_n as an array of colour rows, one site per
    column, in enumeration order."""
    host = prop.host_for(n)
    sites = host.num_sites
    if sites == 0:
        return np.empty((1, 0), dtype=np.int8)
    total = prop.k ** sites
    if total > SPEED_GUARD:
        raise ResourceLimitError("member enumeration out of reach at n=%d" % n)
    cs = property_constraints(prop, host)
    if total <= COLLECT_BUFFER_LIMIT:
        out = np.empty((total, sites), dtype=np.int8)
        count = kernels.enumerate_colourings(
            sites, prop.k, cs.con_ptr, cs.con_edge, cs.con_col,
            cs.last_ptr, cs.last_idx, True, out)
    else:
        count = kernels.enumerate_colourings(
            sites, prop.k, cs.con_ptr, cs.con_edge, cs.con_col,
            cs.last_ptr, cs.last_idx, False, _empty_rows(sites))
        if limit is not None and count > limit:
            raise ResourceLimitError("|P_n| = %d exceeds limit %d" % (count, limit))
        out = np.empty((count, sites), dtype=np.int8)
        kernels.enumerate_colourings(
            sites, prop.k, cs.con_ptr, cs.con_edge, cs.con_col,
            cs.last_ptr, cs.last_idx, True, out)
    return out[:count]


def members(prop, n, limit=None):
    """All colourings in P_n, in enumeration order."""
    host = prop.host_for(n)
    rows = member_rows(prop, n, limit)
    return [Colouring(host, prop.k, rows[i].copy()) for i in range(rows.shape[0])]


def bad_pairs(t, fam):
    """Supersaturation count B(t): pairs (copy, member) with the member
    realisable inside the template's palettes on that copy."""
    if t.k != fam.k:
        raise ValueError("colour counts differ")
    cs = constraint_system(fam.pattern, fam.members, t.host)
    if cs.num_patterns == 0:
        return 0
    flags = np.zeros(cs.num_patterns, dtype=np.int8)
    return int(kernels.representable_flags(
        np.ascontiguousarray(t.palettes), cs.con_ptr, cs.con_edge,
        cs.con_bit, flags))


def template_in_property(t, prop):
    """Whether every realisation of t lies in the property."""
    if t.k != prop.k:
        raise ValueError("colour counts differ")
    pattern, mem = prop.pattern_members()
    if not mem:
        return True
    return bad_pairs(t, ForbiddenFamily(pattern, prop.k, mem)) == 0


# ---------------------------------------------------------------------------
# encodings of digraphs, tournaments, oriented graphs, multigraphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Digraph:
    """Arc set on vertices 1..n; (u, v) means an arc u -> v."""

    n: int
    arcs: frozenset

    def __post_init__(self):
        object.__setattr__(self, "arcs", frozenset(self.arcs))
        for u, v in self.arcs:
            if not (1 <= u <= self.n and 1 <= v <= self.n) or u == v:
                raise ValueError("bad arc (%r, %r)" % (u, v))


@dataclass(frozen=True)
class Multigraph:
    """Edge weights 0..max_weight, one per pair i<j in lexicographic order."""

    n: int
    max_weight: int
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        if len(self.weights) != self.n * (self.n - 1) // 2:
            raise ValueError("need one weight per vertex pair")
        if any(w < 0 or w > self.max_weight for w in self.weights):
            raise ValueError("weight outside 0..%d" % self.max_weight)


def _pair_colour(d, u, v):
    fwd = (u, v) in d.arcs
    bwd = (v, u) in d.arcs
    return 1 + (1 if fwd else 0) + (2 if bwd else 0)


def encode_digraph(d):
    """4-colouring of K_n: 1 no arc, 2 forward, 3 backward, 4 both."""
    host = hosts.complete_graph(d.n)
    cols = np.array([_pair_colour(d, u + 1, v + 1) for u, v in host.edges],
                    dtype=np.int8)
    return Colouring(host, 4, cols)


def decode_digraph(c):
    if c.k != 4:
        raise MalformedEncodingError("digraph encodings use k=4")
    arcs = set()
    for (u, v), col in zip(c.host.edges, c.colours):
        if col in (2, 4):
            arcs.add((u + 1, v + 1))
        if col in (3, 4):
            arcs.add((v + 1, u + 1))
    return Digraph(c.host.num_vertices, frozenset(arcs))


def encode_tournament(d):
    """3-colouring using only colours 2 (forward) and 3 (backward)."""
    host = hosts.complete_graph(d.n)
    cols = np.empty(host.num_sites, dtype=np.int8)
    for e, (u, v) in enumerate(host.edges):
        col = _pair_colour(d, u + 1, v + 1)
        if col not in (2, 3):
            raise ValueError("not a tournament at pair (%d, %d)" % (u + 1, v + 1))
        cols[e] = col
    return Colouring(host, 3, cols)


def decode_tournament(c):
    if c.k != 3 or not np.isin(c.colours, (2, 3)).all():
        raise MalformedEncodingError("tournament encodings use colours {2,3}")
    arcs = set()
    for (u, v), col in zip(c.host.edges, c.colours):
        arcs.add((u + 1, v + 1) if col == 2 else (v + 1, u + 1))
    return Digraph(c.host.num_vertices, frozenset(arcs))


def encode_orgraph(d):
    """3-colouring: 1 no arc, 2 forward, 3 backward; double arcs rejected."""
    host = hosts.complete_graph(d.n)
    cols = np.empty(host.num_sites, dtype=np.int8)
    for e, (u, v) in enumerate(host.edges):
        col = _pair_colour(d, u + 1, v + 1)
        if col == 4:
            raise ValueError("double arc at pair (%d, %d)" % (u + 1, v + 1))
        cols[e] = col
    return Colouring(host, 3, cols)


def decode_orgraph(c):
    if c.k != 3:
        raise MalformedEncodingError("oriented-graph encodings use k=3")
    arcs = set()
    for (u, v), col in zip(c.host.edges, c.colours):
        if col == 2:
            arcs.add((u + 1, v + 1))
        elif col == 3:
            arcs.add((v + 1, u + 1))
    return Digraph(c.host.num_vertices, frozenset(arcs))


def encode_multigraph(m):
    """(d+1)-colouring by multiplicity: weight w becomes colour w+1."""
    host = hosts.complete_graph(m.n)
    cols = np.array(m.weights, dtype=np.int8) + 1
    return Colouring(host, m.max_weight + 1, cols)


def decode_multigraph(c):
    return Multigraph(c.host.num_vertices, c.k - 1,
                      tuple(int(x) - 1 for x in c.colours))


_ENCODERS = {"digraph": encode_digraph, "tournament": encode_tournament,
             "orgraph": encode_orgraph, "multigraph": encode_multigraph}
_DECODERS = {"digraph": decode_digraph, "tournament": decode_tournament,
             "orgraph": decode_orgraph, "multigraph": decode_multigraph}


def encode(obj, kind):
    return _ENCODERS[kind](obj)


def decode(c, kind):
    return _DECODERS[kind](c)


# ---------------------------------------------------------------------------
# universal classes and colouring numbers
# ---------------------------------------------------------------------------


def universal_class_contained(prop, r, v, level):
    """Whether every graph in the level-`level` universal class H(r, v)
    lies in the (k=2, colour 2 = edge) property.

    H(r, v) puts the vertices into r parts, makes part i complete when
    v[i] = 1 and empty otherwise, and lets edges between parts vary
    freely.  Because the cross pairs are unconstrained, the class
    contains a bad graph exactly when some banned pattern only pins
    within-part pairs consistently, which is checked directly instead of
    expanding all 2^cross graphs.
    """
    if prop.k != 2:
        raise ValueError("universal classes apply to k=2 properties")
    if len(v) != r:
        raise ValueError("v must have length r")
    pattern, mem = prop.pattern_members()
    if not mem:
        return True
    if pattern.kind != "complete":
        raise ValueError("universal classes need complete-host patterns")
    N = pattern.num_vertices
    if N > level:
        return True
    sidx = pattern.site_index()
    for part in itertools.product(range(r), repeat=level):
        for A in itertools.combinations(range(level), N):
            for m in mem:
                ok = True
                for (a, b), col in zip(pattern.edges, m.colours):
                    pa, pb = part[A[a]], part[A[b]]
                    if pa != pb:
                        continue  # cross pair, any colour achievable
                    fixed = 2 if v[pa] else 1
                    if fixed != col:
                        ok = False
                        break
                if ok:
                    return False
    return True


def chi_c_lower_bound(prop, r_max, level):
    """Largest r <= r_max whose universal class fits inside the property
    for some completeness vector v, a certified colouring-number lower
    bound."""
    best = 0
    for r in range(1, r_max + 1):
        if any(universal_class_contained(prop, r, v, level)
               for v in itertools.product((0, 1), repeat=r)):
            best = r
        else:
            break  # classes grow with r, so the first failure is final
    return best


def approximating_family(prop, order):
    """All colourings of K_order outside the property, as a forbidden
    family (None when nothing is excluded).  Exposed for small orders
    only; the resulting Forb-family over-approximates the property."""
    if order > 5:
        raise ResourceLimitError("approximating families exposed up to order 5")
    pattern = hosts.complete_graph(order)
    bad = []
    for combo in itertools.product(range(1, prop.k + 1), repeat=pattern.num_sites):
        c = Colouring(pattern, prop.k, np.array(combo, dtype=np.int8))
        if not in_property(c, prop):
            bad.append(c)
    if not bad:
        return None
    return ForbiddenFamily(pattern, prop.k, tuple(bad))


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def _rainbow_k3():
    assignments = [p for p in itertools.permutations((1, 2, 3))]
    return Property(
        name="rainbow-k3", k=3, forbidden=_family(3, 3, assignments),
        description="3-colourings of complete graphs with no rainbow triangle")


def _dk3():
    return Property(
        name="dk3", k=4, forbidden=_family(3, 4, [(4, 4, 4)]),
        monotone_colours=(1, 2, 3), chain_monotone=True,
        description="digraph encodings (k=4) with no triangle of double arcs")


def _multigraph_3_5():
    bad = [(a, b, c) for a in range(1, 6) for b in range(1, 6)
           for c in range(1, 6) if a + b + c - 3 >= 5]
    return Property(
        name="multigraph-3-5", k=5, forbidden=_family(3, 5, bad),
        monotone_colours=(1,), chain_monotone=True,
        description="multiplicity encodings (k=5) with every triangle of "
                    "total weight at most 4")


def _triangle_free():
    return Property(
        name="triangle-free", k=2, forbidden=_family(3, 2, [(2, 2, 2)]),
        monotone_colours=(1,), chain_monotone=True,
        description="graphs (k=2, colour 2 = edge) with no triangle")


def _inc_path_2():
    # pattern edges of K_3 in order (12), (13), (23); the middle pair is free
    return Property(
        name="inc-path-2", k=2, forbidden=_family(3, 2, [(2, 1, 2), (2, 2, 2)]),
        monotone_colours=(1,), chain_monotone=True,
        description="graphs with no increasing two-edge path "
                    "(both 12 and 23 present for some triple)")


def _max_degree_2():
    def degree_ok(c):
        deg = [0] * c.host.num_vertices
        for (u, v), col in zip(c.host.edges, c.colours):
            if col == 2:
                deg[u] += 1
                deg[v] += 1
        return max(deg) <= 2

    return Property(
        name="max-degree-2", k=2, predicate=degree_ok, defining_order=4,
        monotone_colours=(1,), chain_monotone=True,
        description="graphs with maximum degree at most 2 "
                    "(predicate at defining order 4)")


def _all_colourings():
    return Property(
        name="all-colourings", k=2, predicate=lambda c: True, defining_order=2,
        monotone_colours=(1, 2), chain_monotone=True,
        description="every 2-colouring; the trivially full property")


def _path_3colour():
    return Property(
        name="path-3colour", k=3,
        forbidden=_family(3, 3, [(1, 1), (2, 2), (3, 3)],
                          pattern=hosts.path_graph(3)),
        host_builder=hosts.path_graph,
        description="3-colourings of paths with no two consecutive edges "
                    "sharing a colour")


def _cube_q2_free():
    return Property(
        name="cube-q2-free", k=2,
        forbidden=_family(4, 2, [(2, 2, 2, 2)], pattern=hosts.cube_graph(2)),
        host_builder=hosts.cube_graph,
        monotone_colours=(1,), chain_monotone=True,
        description="edge 2-colourings of hypercubes with no square "
                    "subcube fully in colour 2")


def _cube_vertex_q2_free():
    return Property(
        name="cube-vertex-q2-free", k=2,
        forbidden=_family(4, 2, [(2, 2, 2, 2)],
                          pattern=hosts.cube_vertex_host(2)),
        host_builder=hosts.cube_vertex_host,
        monotone_colours=(1,), chain_monotone=True,
        description="vertex 2-colourings of hypercubes with no square "
                    "subcube fully in colour 2")


_BUILTINS = {
    "rainbow-k3": _rainbow_k3,
    "dk3": _dk3,
    "multigraph-3-5": _multigraph_3_5,
    "triangle-free": _triangle_free,
    "inc-path-2": _inc_path_2,
    "max-degree-2": _max_degree_2,
    "all-colourings": _all_colourings,
    "path-3colour": _path_3colour,
    "cube-q2-free": _cube_q2_free,
    "cube-vertex-q2-free": _cube_vertex_q2_free,
}

_cache = {}


def get_property(name):
    if name not in _BUILTINS:
        raise KeyError("unknown property %r (try list_properties())" % name)
    if name not in _cache:
        _cache[name] = _BUILTINS[name]()
    return _cache[name]


def list_properties():
    return [(name, get_property(name).description) for name in sorted(_BUILTINS)]
