"""Colourings and palette templates over an ordered host graph.

A template assigns to each colour site (edge, or vertex for 1-uniform
hosts) a nonempty palette of allowed colours from 1..k, stored as a
bitmask with bit c-1 standing for colour c.  Its realisations are the
colourings picking one palette colour per site; there are exactly
prod |palette| = k^entropy of them.  All restriction and subtemplate
notions are order-preserving in the host's vertex order.
"""

from dataclasses import dataclass, field

import numpy as np

from . import hosts

MAX_COLOURS = 32


class EmptyMeetError(ValueError):
    """Raised when two templates share no realisation; carries the first
    site whose palettes are disjoint."""

    def __init__(self, site_index):
        self.site_index = site_index
        super().__init__("palettes disjoint at site %d" % site_index)


def mask_of(colours):
    m = 0
    for c in colours:
        if not 1 <= c <= MAX_COLOURS:
            raise ValueError("colour %r outside 1..%d" % (c, MAX_COLOURS))
        m |= 1 << (c - 1)
    return m


def colours_of(mask):
    return tuple(c + 1 for c in range(MAX_COLOURS) if (mask >> c) & 1)


def _popcount(masks):
    return np.array([int(m).bit_count() for m in masks], dtype=np.int64)


def as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def rng_stream(*keys):
    """A generator keyed by a tuple of integers, so experiments can hand
    out independent, reproducible streams per (seed, trial, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(x) for x in keys]))


@dataclass(frozen=True, eq=False)
class Colouring:
    host: hosts.HostGraph
    k: int
    colours: np.ndarray  # int8, one colour in 1..k per site

    def __post_init__(self):
        arr = np.asarray(self.colours, dtype=np.int8)
        object.__setattr__(self, "colours", arr)
        if arr.shape != (self.host.num_sites,):
            raise ValueError("expected %d site colours, got %d"
                             % (self.host.num_sites, arr.shape[0]))
        if arr.size and (arr.min() < 1 or arr.max() > self.k):
            raise ValueError("colours must lie in 1..%d" % self.k)

    def __eq__(self, other):
        return (isinstance(other, Colouring) and self.k == other.k
                and self.host == other.host
                and np.array_equal(self.colours, other.colours))

    def __hash__(self):
        return hash((self.host, self.k, self.colours.tobytes()))

    @property
    def n(self):
        return self.host.num_vertices

    def to_json(self):
        return {"n": self.n, "k": self.k, "host": self.host.to_json(),
                "colours": [int(c) for c in self.colours]}


@dataclass(frozen=True, eq=False)
class Template:
    host: hosts.HostGraph
    k: int
    palettes: np.ndarray = field()  # int64 bitmasks, one per site

    def __post_init__(self):
        arr = np.asarray(self.palettes, dtype=np.int64)
        object.__setattr__(self, "palettes", arr)
        if self.k < 1 or self.k > MAX_COLOURS:
            raise ValueError("k must lie in 1..%d" % MAX_COLOURS)
        if arr.shape != (self.host.num_sites,):
            raise ValueError("expected %d palettes, got %d"
                             % (self.host.num_sites, arr.shape[0]))
        full = (1 << self.k) - 1
        if arr.size and ((arr <= 0).any() or (arr & ~full).any()):
            raise ValueError("palettes must be nonempty subsets of 1..%d" % self.k)

    def __eq__(self, other):
        return (isinstance(other, Template) and self.k == other.k
                and self.host == other.host
                and np.array_equal(self.palettes, other.palettes))

    def __hash__(self):
        return hash((self.host, self.k, self.palettes.tobytes()))

    @property
    def n(self):
        return self.host.num_vertices

    @classmethod
    def complete(cls, n, k, host=None):
        """The full template: every site gets the palette [k]."""
        h = host if host is not None else hosts.complete_graph(n)
        return cls(h, k, np.full(h.num_sites, (1 << k) - 1, dtype=np.int64))

    @classmethod
    def constant(cls, n, k, colour, host=None):
        """E_n(colour): every palette the singleton {colour}."""
        h = host if host is not None else hosts.complete_graph(n)
        return cls(h, k, np.full(h.num_sites, 1 << (colour - 1), dtype=np.int64))

    @classmethod
    def from_colouring(cls, c):
        return cls(c.host, c.k, np.int64(1) << (c.colours.astype(np.int64) - 1))

    @classmethod
    def from_palette_sets(cls, n, k, palette_sets, host=None):
        h = host if host is not None else hosts.complete_graph(n)
        return cls(h, k, np.array([mask_of(p) for p in palette_sets], dtype=np.int64))

    def palette_set(self, site):
        return colours_of(int(self.palettes[site]))

    def to_json(self):
        return {"n": self.n, "k": self.k, "host": self.host.to_json(),
                "palettes": [list(colours_of(int(m))) for m in self.palettes]}


def template_from_json(obj):
    host = hosts.host_from_json(obj["host"]) if "host" in obj else hosts.complete_graph(obj["n"])
    return Template.from_palette_sets(obj["n"], obj["k"], obj["palettes"], host=host)


def colouring_from_json(obj):
    host = hosts.host_from_json(obj["host"]) if "host" in obj else hosts.complete_graph(obj["n"])
    return Colouring(host, obj["k"], np.array(obj["colours"], dtype=np.int8))


# ---------------------------------------------------------------------------
# entropy and realisations
# ---------------------------------------------------------------------------


def entropy(t):
    """Sum over sites of log_k |palette| (base-k units)."""
    if t.k == 1:
        return 0.0
    sizes = _popcount(t.palettes)
    return float(np.log(sizes).sum() / np.log(t.k))


def realisation_count(t):
    """Exact number of realisations, prod |palette|, as a big integer."""
    out = 1
    for m in t.palettes:
        out *= int(m).bit_count()
    return out


def realises(c, t):
    if c.host != t.host or c.k != t.k:
        raise ValueError("colouring and template live on different hosts")
    bits = (t.palettes >> (c.colours.astype(np.int64) - 1)) & 1
    return bool(bits.all()) if bits.size else True


def sample_realisation(t, seed):
    """Uniform independent choice from each palette, deterministic per seed."""
    rng = as_rng(seed)
    cols = np.empty(t.palettes.shape[0], dtype=np.int8)
    for i, m in enumerate(t.palettes):
        cs = colours_of(int(m))
        cols[i] = cs[rng.integers(0, len(cs))]
    return Colouring(t.host, t.k, cols)


def realisations(t):
    """Iterate all realisations (intended for small templates)."""
    options = [colours_of(int(m)) for m in t.palettes]
    if not options:
        yield Colouring(t.host, t.k, np.empty(0, dtype=np.int8))
        return
    idx = [0] * len(options)
    while True:
        yield Colouring(t.host, t.k,
                        np.array([options[i][j] for i, j in enumerate(idx)], dtype=np.int8))
        d = len(idx) - 1
        while d >= 0:
            idx[d] += 1
            if idx[d] < len(options[d]):
                break
            idx[d] = 0
            d -= 1
        if d < 0:
            return


# ---------------------------------------------------------------------------
# restriction and subtemplates
# ---------------------------------------------------------------------------


def _restriction_site_map(host, A, pattern):
    """Host site index for each pattern site under vertex map i -> A[i]."""
    A = list(A)
    if sorted(A) != A:
        raise ValueError("restriction set must be listed in increasing order")
    if any(v < 0 or v >= host.num_vertices for v in A):
        raise ValueError("restriction set outside host vertices")
    sidx = host.site_index()
    out = []
    for s in pattern.sites():
        img = tuple(sorted(A[v] for v in s))
        if img not in sidx:
            raise ValueError("restriction does not induce the pattern: %r" % (img,))
        out.append(sidx[img])
    return out


def restrict(t, A, pattern=None):
    """Order-preserving restriction t|_A.

    For complete hosts the pattern defaults to K_|A|; for other hosts the
    caller supplies the pattern host the ordered set A is meant to induce
    (for vertex hypercubes, a subcube image from hosts.subcube_embedding).
    """
    if pattern is None:
        if t.host.kind != "complete":
            raise ValueError("pattern host required for non-complete hosts")
        pattern = hosts.complete_graph(len(A))
    smap = _restriction_site_map(t.host, A, pattern)
    values = t.palettes[smap] if smap else np.empty(0, dtype=np.int64)
    return Template(pattern, t.k, values)


def restrict_colouring(c, A, pattern=None):
    if pattern is None:
        if c.host.kind != "complete":
            raise ValueError("pattern host required for non-complete hosts")
        pattern = hosts.complete_graph(len(A))
    smap = _restriction_site_map(c.host, A, pattern)
    values = c.colours[smap] if smap else np.empty(0, dtype=np.int8)
    return Colouring(pattern, c.k, values)


def is_subtemplate(s, t):
    """True iff some order-preserving injection embeds s below t pointwise.

    Enumerates injections (C(n, m) of them for complete hosts), so meant
    for small orders; equal orders reduce to a single pointwise check.
    """
    if s.k != t.k:
        raise ValueError("colour counts differ")
    if s.n > t.n:
        return False
    if s.host == t.host:
        return bool(((s.palettes & ~t.palettes) == 0).all())
    embs = hosts.embeddings(s.host, t.host)
    if len(embs) == 0:
        return False
    smaps = hosts.site_images(s.host, t.host, embs)
    for row in smaps:
        if ((s.palettes & ~t.palettes[row]) == 0).all():
            return True
    return False


# ---------------------------------------------------------------------------
# edit distance and meet
# ---------------------------------------------------------------------------


def edit_distance(x, y):
    """Number of sites on which x and y disagree.

    template-template: palettes differ; colouring-template: the colour is
    outside the palette; second argument may be a nonempty family of
    templates, in which case the minimum over members is returned.
    """
    if isinstance(y, (list, tuple)):
        if not y:
            raise ValueError("empty template family")
        return min(edit_distance(x, m) for m in y)
    if x.host != y.host or x.k != y.k:
        raise ValueError("operands live on different hosts")
    if isinstance(x, Colouring):
        miss = ((y.palettes >> (x.colours.astype(np.int64) - 1)) & 1) == 0
        return int(miss.sum())
    if isinstance(y, Colouring):
        return edit_distance(y, x)
    return int((x.palettes != y.palettes).sum())


def meet(t, u):
    """Edgewise palette intersection; errors if any intersection is empty
    (the two templates then share no realisation)."""
    if t.host != u.host or t.k != u.k:
        raise ValueError("operands live on different hosts")
    inter = t.palettes & u.palettes
    empty = np.nonzero(inter == 0)[0]
    if empty.size:
        raise EmptyMeetError(int(empty[0]))
    return Template(t.host, t.k, inter)
