"""Host graph sequences and embedding statistics.

Hosts carry a fixed linear vertex order (hypercube vertices by binary
value, grids row-major) because every restriction/embedding notion in this
package is order-preserving.  Colours live either on edges (graphs) or on
vertices (modelled as 1-uniform sites so the template calculus is shared).
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

_KIND_ALIASES = {
    "complete": "complete", "k": "complete", "kn": "complete",
    "path": "path",
    "grid": "grid",
    "multipartite": "multipartite", "kq": "multipartite",
    "cube": "cube-edges", "cube-edges": "cube-edges", "hypercube": "cube-edges",
    "cube-vertices": "cube-vertices", "hypercube-vertices": "cube-vertices",
}


@dataclass(frozen=True)
class HostGraph:
    """An ordered host with colour sites on edges or on vertices."""

    kind: str
    params: tuple
    num_vertices: int
    edges: tuple  # graph edges as (u, v) pairs with u < v, lexicographic
    colour_sites: str = "edges"

    @property
    def r(self):
        return 2 if self.colour_sites == "edges" else 1

    def sites(self):
        """The r-sets that carry palettes, in canonical order."""
        if self.colour_sites == "edges":
            return self.edges
        return tuple((v,) for v in range(self.num_vertices))

    @property
    def num_sites(self):
        return len(self.edges) if self.colour_sites == "edges" else self.num_vertices

    def site_index(self):
        return {s: i for i, s in enumerate(self.sites())}

    def to_json(self):
        return {
            "kind": self.kind,
            "params": list(self.params),
            "colour_sites": self.colour_sites,
            "edges": [list(e) for e in self.edges],
        }


def _sorted_edges(pairs):
    return tuple(sorted((min(u, v), max(u, v)) for u, v in pairs))


def complete_graph(n):
    if n < 1:
        raise ValueError("complete graph needs n >= 1")
    return HostGraph("complete", (n,), n, tuple(combinations(range(n), 2)))


def path_graph(n):
    if n < 2:
        raise ValueError("path needs n >= 2")
    return HostGraph("path", (n,), n, tuple((i, i + 1) for i in range(n - 1)))


def grid_graph(a, b):
    """a x b grid, vertices row-major: (i, j) -> i*b + j."""
    if a < 1 or b < 1:
        raise ValueError("grid needs positive dimensions")
    edges = []
    for i in range(a):
        for j in range(b):
            v = i * b + j
            if j + 1 < b:
                edges.append((v, v + 1))
            if i + 1 < a:
                edges.append((v, v + b))
    return HostGraph("grid", (a, b), a * b, _sorted_edges(edges))


def multipartite_graph(q, part_size):
    """Complete balanced q-partite graph K_q(part_size), parts contiguous."""
    if q < 1 or part_size < 1:
        raise ValueError("multipartite needs positive parameters")
    n = q * part_size
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)
             if u // part_size != v // part_size]
    return HostGraph("multipartite", (q, part_size), n, _sorted_edges(edges))


def cube_graph(dim):
    """Hypercube Q_dim with vertices ordered by binary value."""
    if dim < 1:
        raise ValueError("cube needs dim >= 1")
    n = 1 << dim
    edges = [(v, v | (1 << b)) for v in range(n) for b in range(dim)
             if not (v >> b) & 1]
    return HostGraph("cube-edges", (dim,), n, _sorted_edges(edges))


def cube_vertex_host(dim):
    """Q_dim with colours on vertices (1-uniform sites, cube adjacency)."""
    g = cube_graph(dim)
    return HostGraph("cube-vertices", (dim,), g.num_vertices, g.edges,
                     colour_sites="vertices")


def build_host(kind, params):
    k = _KIND_ALIASES.get(str(kind).lower())
    if k is None:
        raise ValueError("unknown host kind: %r" % (kind,))
    params = tuple(int(p) for p in params)
    if k == "complete":
        return complete_graph(*params)
    if k == "path":
        return path_graph(*params)
    if k == "grid":
        return grid_graph(*params)
    if k == "multipartite":
        return multipartite_graph(*params)
    if k == "cube-edges":
        return cube_graph(*params)
    return cube_vertex_host(*params)


def host_from_json(obj):
    return build_host(obj["kind"], obj["params"])


def subcube_embedding(dim, free_bits, base):
    """The order-preserving embedding of Q_|free_bits| into Q_dim fixing the
    remaining coordinates to those of ``base``.

    Returns the image vertex tuple in binary-value order of the pattern.
    """
    free = sorted(free_bits)
    nfree = len(free)
    if any(b < 0 or b >= dim for b in free):
        raise ValueError("free bits out of range")
    base_masked = base & ~sum(1 << b for b in free)
    images = []
    for x in range(1 << nfree):
        v = base_masked
        for j in range(nfree):
            if (x >> j) & 1:
                v |= 1 << free[j]
        images.append(v)
    return tuple(images)


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def embeddings(pattern, host):
    """All order-preserving injections of pattern into host carrying every
    pattern edge to a host edge.  Returns an int32 array (count, v(pattern)).
    """
    pv = pattern.num_vertices
    hv = host.num_vertices
    if pattern.colour_sites != host.colour_sites:
        raise ValueError("pattern and host carry colours on different sites")
    if pattern.kind == "complete" and host.kind == "complete":
        out = np.array(list(combinations(range(hv), pv)), dtype=np.int32)
        return out.reshape(-1, pv)
    prior = [[] for _ in range(pv)]
    for a, b in pattern.edges:
        prior[b].append(a)
    hadj = set(host.edges)
    out = []
    img = [0] * pv

    def place(i, lo):
        for v in range(lo, hv - (pv - 1 - i)):
            ok = True
            for a in prior[i]:
                u = img[a]
                if (u, v) not in hadj:
                    ok = False
                    break
            if ok:
                img[i] = v
                if i == pv - 1:
                    out.append(tuple(img))
                else:
                    place(i + 1, v + 1)

    if pv <= hv:
        place(0, 0)
    return np.array(out, dtype=np.int32).reshape(-1, pv)


def site_images(pattern, host, embs):
    """Map pattern site indices to host site indices under each embedding."""
    sidx = host.site_index()
    rows = []
    if pattern.colour_sites == "edges":
        pedges = pattern.edges
        for img in embs:
            rows.append([sidx[(min(img[a], img[b]), max(img[a], img[b]))]
                         for a, b in pedges])
    else:
        for img in embs:
            rows.append([sidx[(img[v],)] for v in range(pattern.num_vertices)])
    return np.array(rows, dtype=np.int32).reshape(len(embs), -1)


# ---------------------------------------------------------------------------
# overlap statistics and goodness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingStats:
    kind: str
    pattern_order_param: int
    host_order_param: int
    count: int
    overlap_i: float  # ordered pairs sharing >= 2 edges, halved (identity once)
    overlap_j: float  # same with >= 2 shared vertices
    edge_ratio: float
    vertex_ratio: float


def _pairs_sharing_two(images):
    """Number of unordered pairs of distinct rows sharing >= 2 entries.

    Rows are index tuples; a pair sharing s >= 2 entries lands in C(s,2)
    common entry-pair buckets, so collecting distinct colliding row pairs
    over all buckets counts each such pair exactly once.
    """
    buckets = {}
    for ridx, row in enumerate(images):
        for a, b in combinations(sorted(set(row)), 2):
            buckets.setdefault((a, b), []).append(ridx)
    seen = set()
    for members in buckets.values():
        if len(members) > 1:
            for x, y in combinations(members, 2):
                seen.add((x, y) if x < y else (y, x))
    return len(seen)


def _pattern_for(kind, order_param):
    return build_host(kind, (order_param,))


def overlap_statistics(kind, pattern_param, host_param):
    """Exact embedding count and the >=2-shared-edge / >=2-shared-vertex
    pair counts for the named host sequence, by pair enumeration.

    The shared counts include each identity pair once (ordered pairs
    divided by two), matching the way the edge-goodness ratio is used.
    """
    pattern = _pattern_for(kind, pattern_param)
    host = _pattern_for(kind, host_param)
    embs = embeddings(pattern, host)
    count = len(embs)
    if count == 0:
        return EmbeddingStats(host.kind, pattern_param, host_param, 0, 0.0, 0.0, 0.0, 0.0)
    edge_imgs = []
    sidx = {e: i for i, e in enumerate(host.edges)}
    for img in embs:
        edge_imgs.append(tuple(sidx[(min(img[a], img[b]), max(img[a], img[b]))]
                               for a, b in pattern.edges))
    n_i = _pairs_sharing_two(edge_imgs) + count / 2.0
    n_j = _pairs_sharing_two([tuple(img) for img in embs]) + count / 2.0
    edge_ratio = len(host.edges) * n_i / count ** 2
    vertex_ratio = host.num_vertices * n_j / count ** 2
    return EmbeddingStats(host.kind, pattern_param, host_param, count,
                          n_i, n_j, edge_ratio, vertex_ratio)


def goodness_diagnostic(kind, pattern_param, host_params):
    """Per-host goodness ratios with monotone-trend flags.

    Reports data only; no asymptotic claim is made.
    """
    rows = [overlap_statistics(kind, pattern_param, n) for n in host_params]
    edge_ratios = [r.edge_ratio for r in rows]
    vertex_ratios = [r.vertex_ratio for r in rows]
    return {
        "rows": rows,
        "edge_ratio_strictly_decreasing": all(
            b < a for a, b in zip(edge_ratios, edge_ratios[1:])),
        "vertex_ratio_strictly_decreasing": all(
            b < a for a, b in zip(vertex_ratios, vertex_ratios[1:])),
    }
