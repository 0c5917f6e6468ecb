import itertools
import json

import numpy as np
import pytest

from colourcontainers import hosts, properties, templates
from colourcontainers.properties import (
    Digraph, ForbiddenFamily, MalformedEncodingError, Multigraph, Property,
    ResourceLimitError, get_property, list_properties)
from colourcontainers.templates import Colouring, Template


def _brute_speed(prop, n):
    host = prop.host_for(n)
    count = 0
    for combo in itertools.product(range(1, prop.k + 1), repeat=host.num_sites):
        c = Colouring(host, prop.k, np.array(combo, dtype=np.int8))
        if properties.in_property(c, prop):
            count += 1
    return count


def test_registry():
    names = [name for name, _ in list_properties()]
    assert "rainbow-k3" in names and "triangle-free" in names
    assert get_property("rainbow-k3") is get_property("rainbow-k3")
    with pytest.raises(KeyError):
        get_property("no-such-property")


def test_family_validation():
    pattern = hosts.complete_graph(3)
    with pytest.raises(ValueError):
        ForbiddenFamily(pattern, 3, ())
    wrong = Colouring(hosts.complete_graph(4), 3,
                      np.array([1] * 6, dtype=np.int8))
    with pytest.raises(ValueError):
        ForbiddenFamily(pattern, 3, (wrong,))


def test_property_needs_exactly_one_definition():
    with pytest.raises(ValueError):
        Property(name="neither", k=2)
    with pytest.raises(ValueError):
        Property(name="pred-no-order", k=2, predicate=lambda c: True)


def test_symmetric_closure():
    pattern = hosts.complete_graph(3)
    one = ForbiddenFamily(pattern, 2, (
        Colouring(pattern, 2, np.array([1, 2, 2], dtype=np.int8)),))
    closed = one.symmetric_closure()
    # one pair in colour 1, two in colour 2: three placements of the 1
    assert len(closed.members) == 3
    assert {tuple(m.colours) for m in closed.members} == {
        (1, 2, 2), (2, 1, 2), (2, 2, 1)}
    rainbow = get_property("rainbow-k3")
    assert len(rainbow.forbidden.symmetric_closure().members) == 6


def test_membership():
    rainbow = get_property("rainbow-k3")
    host = hosts.complete_graph(3)
    hit = Colouring(host, 3, np.array([1, 2, 3], dtype=np.int8))
    miss = Colouring(host, 3, np.array([1, 1, 3], dtype=np.int8))
    assert not properties.in_property(hit, rainbow)
    assert properties.in_property(miss, rainbow)
    assert properties.violates(hit, rainbow.forbidden)
    assert not properties.violates(miss, rainbow.forbidden)
    with pytest.raises(ValueError):
        properties.in_property(
            Colouring(host, 2, np.array([1, 1, 1], dtype=np.int8)), rainbow)


def test_speed_small_orders():
    rainbow = get_property("rainbow-k3")
    assert properties.speed(rainbow, 1) == 1
    assert properties.speed(rainbow, 2) == 3
    assert properties.speed(rainbow, 3) == 21
    assert properties.speed(rainbow, 3) == _brute_speed(rainbow, 3)
    tri = get_property("triangle-free")
    assert properties.speed(tri, 3) == 7
    assert properties.speed(tri, 4) == _brute_speed(tri, 4)
    paths = get_property("path-3colour")
    # edges of P_4 form a path of 3 sites: 3 * 2 * 2 proper sequences
    assert properties.speed(paths, 4) == 12
    assert properties.speed(paths, 4) == _brute_speed(paths, 4)


def test_speed_guard():
    with pytest.raises(ResourceLimitError):
        properties.speed(get_property("rainbow-k3"), 7)


def test_member_rows_and_members():
    rainbow = get_property("rainbow-k3")
    rows = properties.member_rows(rainbow, 3)
    assert rows.shape == (21, 3)
    assert len(np.unique(rows, axis=0)) == 21
    for c in properties.members(rainbow, 3):
        assert properties.in_property(c, rainbow)


def test_predicate_property_matches_its_predicate():
    prop = get_property("max-degree-2")
    host = hosts.complete_graph(4)
    expected = 0
    for combo in itertools.product((1, 2), repeat=6):
        c = Colouring(host, 2, np.array(combo, dtype=np.int8))
        deg = [0] * 4
        for (u, v), col in zip(host.edges, c.colours):
            if col == 2:
                deg[u] += 1
                deg[v] += 1
        ok = max(deg) <= 2
        expected += ok
        assert properties.in_property(c, prop) == ok
    assert properties.speed(prop, 4) == expected


def test_bad_pairs():
    rainbow = get_property("rainbow-k3")
    fam = rainbow.forbidden
    # every triangle of K_4 admits all six rainbow orderings
    assert properties.bad_pairs(Template.complete(4, 3), fam) == 4 * 6
    t = Template.from_palette_sets(3, 3, [[1, 2], [2], [3]])
    assert properties.bad_pairs(t, fam) == 1
    mono = Template.constant(4, 3, 1)
    assert properties.bad_pairs(mono, fam) == 0
    assert properties.template_in_property(mono, rainbow)
    assert not properties.template_in_property(Template.complete(3, 3), rainbow)


def test_bad_pairs_counts_violating_realisations_zero_one():
    # for colouring-shaped templates, B(t) > 0 iff the colouring violates
    rainbow = get_property("rainbow-k3")
    rng = np.random.default_rng(2)
    host = hosts.complete_graph(4)
    for _ in range(40):
        cols = rng.integers(1, 4, size=6).astype(np.int8)
        c = Colouring(host, 3, cols)
        b = properties.bad_pairs(Template.from_colouring(c), rainbow.forbidden)
        assert (b > 0) == properties.violates(c, rainbow.forbidden)


def test_digraph_encoding():
    d = Digraph(3, frozenset({(1, 2), (3, 2)}))
    c = properties.encode(d, "digraph")
    assert c.k == 4
    assert list(c.colours) == [2, 1, 3]
    assert properties.decode(c, "digraph") == d
    both = Digraph(2, frozenset({(1, 2), (2, 1)}))
    cc = properties.encode(both, "digraph")
    assert list(cc.colours) == [4]
    assert properties.decode(cc, "digraph") == both
    with pytest.raises(MalformedEncodingError):
        properties.decode(Colouring(hosts.complete_graph(2), 3,
                                    np.array([1], dtype=np.int8)), "digraph")


def test_tournament_encoding():
    t = Digraph(3, frozenset({(1, 2), (2, 3), (3, 1)}))
    c = properties.encode(t, "tournament")
    assert c.k == 3 and set(c.colours) <= {2, 3}
    assert properties.decode(c, "tournament") == t
    not_t = Digraph(3, frozenset({(1, 2)}))
    with pytest.raises(ValueError):
        properties.encode(not_t, "tournament")


def test_orgraph_encoding():
    d = Digraph(3, frozenset({(2, 1)}))
    c = properties.encode(d, "orgraph")
    assert list(c.colours) == [3, 1, 1]
    assert properties.decode(c, "orgraph") == d
    with pytest.raises(ValueError):
        properties.encode(Digraph(2, frozenset({(1, 2), (2, 1)})), "orgraph")


def test_multigraph_encoding():
    m = Multigraph(3, 4, (0, 2, 4))
    c = properties.encode(m, "multigraph")
    assert c.k == 5 and list(c.colours) == [1, 3, 5]
    assert properties.decode(c, "multigraph") == m
    with pytest.raises(ValueError):
        Multigraph(3, 4, (0, 2, 5))


def test_family_json_round_trip():
    fam = get_property("path-3colour").forbidden
    back = properties.family_from_json(json.loads(json.dumps(fam.to_json())))
    assert back.k == fam.k and back.pattern == fam.pattern
    assert set(back.members) == set(fam.members)


def test_universal_classes():
    tri = get_property("triangle-free")
    # one empty part: edgeless graphs, trivially triangle-free
    assert properties.universal_class_contained(tri, 1, (0,), 4)
    # one complete part contains K_3 outright
    assert not properties.universal_class_contained(tri, 1, (1,), 3)
    # two empty parts give bipartite graphs
    assert properties.universal_class_contained(tri, 2, (0, 0), 4)
    # three parts allow a rainbow-split triangle via free cross pairs
    assert not properties.universal_class_contained(tri, 3, (0, 0, 0), 4)
    assert properties.chi_c_lower_bound(tri, 4, 4) == 2
    free = get_property("all-colourings")
    assert properties.chi_c_lower_bound(free, 3, 3) == 3


def test_approximating_family():
    tri = get_property("triangle-free")
    fam = properties.approximating_family(tri, 3)
    assert len(fam.members) == 1
    assert tuple(fam.members[0].colours) == (2, 2, 2)
    assert properties.approximating_family(get_property("all-colourings"), 3) is None
    with pytest.raises(ResourceLimitError):
        properties.approximating_family(tri, 6)


def test_effective_family_requires_exclusions():
    with pytest.raises(ValueError):
        get_property("all-colourings").effective_family()


def test_constraint_system_layout():
    rainbow = get_property("rainbow-k3")
    host = hosts.complete_graph(4)
    cs = properties.property_constraints(rainbow, host)
    assert cs.num_patterns == 4 * 6
    assert cs.con_ptr[-1] == cs.con_edge.shape[0] == cs.con_col.shape[0]
    # constraints are bucketed by their last touched site
    for ci in range(cs.num_patterns):
        last = cs.con_edge[cs.con_ptr[ci]:cs.con_ptr[ci + 1]].max()
        bucket = int(np.searchsorted(cs.last_ptr, ci, side="right")) - 1
        assert cs.last_ptr[bucket] <= ci < cs.last_ptr[bucket + 1]
        assert last == bucket
