import json

import numpy as np
import pytest
from hypothesis import given

from helpers import hierarchies
from ldsgm.hierarchy import (HierarchyError, build_adjacency, from_document, load_hierarchy,
                             normalized_adjacency, parse_hierarchy, pdtb_hierarchy)


def doc(levels, edges=()):
    return json.dumps({"levels": levels, "edges": [list(e) for e in edges]})


def test_bundled_pdtb_sizes():
    h = pdtb_hierarchy()
    assert h.depth == 2
    assert h.levels[0] == ("Temp", "Cont", "Comp", "Expa")
    assert len(h.levels[1]) == 11 and h.n_nodes == 15
    assert [name for name, _ in h.labels_at_level(1)] == ["Temp", "Cont", "Comp", "Expa"]
    for name in h.levels[1]:
        parent = h.levels[0][next(iter(h.parents[1][h.index_of(1, name)]))]
        assert name.startswith(parent + ".")


def test_single_label():
    h = parse_hierarchy(doc([["only"]]))
    assert h.n_nodes == 1 and h.parent_pairs() == []
    np.testing.assert_array_equal(build_adjacency(h), [[1.0]])
    assert h.is_valid_path(["only"])


def test_ambiguous_connective_at_deepest_level():
    h = parse_hierarchy(doc([["Temp", "Comp"], ["Temp.Synchrony", "Comp.Contrast"], ["while"]],
                            [("Temp.Synchrony", "Temp"), ("Comp.Contrast", "Comp"),
                             ("while", "Temp.Synchrony"), ("while", "Comp.Contrast")]))
    assert set(h.parents[2][0]) == {0, 1}
    pairs = set(h.parent_pairs())
    assert (4, 2) in pairs and (4, 3) in pairs


def test_multiple_parents_rejected_above_deepest():
    with pytest.raises(HierarchyError, match="parent"):
        parse_hierarchy(doc([["A", "B"], ["x"], ["y"]], [("x", "A"), ("x", "B"), ("y", "x")]))


@pytest.mark.parametrize("bad, fragment", [
    (doc([]), "levels"),
    (doc([["a", "a"]]), "duplicate"),
    (doc([["a"], ["b"]]), "parent"),
    (doc([["a"], ["b"]], [("b", "zz")]), "zz"),
    (doc([["a"], ["b"]], [("q", "a"), ("b", "a")]), "q"),
    (json.dumps({"levels": [["a"]], "extra": 1}), "unknown"),
])
def test_invalid_documents(bad, fragment):
    with pytest.raises(HierarchyError, match=fragment):
        parse_hierarchy(bad)


def test_malformed_json_reports_line():
    with pytest.raises(HierarchyError) as info:
        parse_hierarchy('{\n  "levels": [["a"],\n}')
    assert info.value.line == 3


def test_adjacency_root_with_two_children():
    h = parse_hierarchy(doc([["r"], ["a", "b"]], [("a", "r"), ("b", "r")]))
    np.testing.assert_array_equal(build_adjacency(h), [[1, 1, 1], [1, 1, 0], [1, 0, 1]])


def test_adjacency_chain():
    h = parse_hierarchy(doc([["r"], ["a"], ["x"]], [("a", "r"), ("x", "a")]))
    np.testing.assert_array_equal(build_adjacency(h), [[1, 1, 0], [1, 1, 1], [0, 1, 1]])


def test_normalized_adjacency_symmetric():
    h = parse_hierarchy(doc([["r"], ["a", "b"]], [("a", "r"), ("b", "r")]))
    n = normalized_adjacency(build_adjacency(h))
    np.testing.assert_allclose(n, n.T)
    assert n[0, 0] == pytest.approx(1 / 3)


def test_labels_at_level_bounds():
    h = parse_hierarchy(doc([["a", "b", "c"]]))
    assert h.labels_at_level(1) == [("a", 0), ("b", 1), ("c", 2)]
    with pytest.raises(IndexError):
        h.labels_at_level(0)
    with pytest.raises(IndexError):
        h.labels_at_level(2)


def test_is_valid_path_pdtb():
    h = pdtb_hierarchy()
    assert h.is_valid_path(("Cont", "Cont.Cause"))
    assert not h.is_valid_path(("Temp", "Cont.Cause"))
    with pytest.raises(ValueError):
        h.is_valid_path(("Cont",))


def test_edge_counts_both_conventions():
    h = pdtb_hierarchy()
    assert h.edge_counts() == {"parent_child": 11, "with_self_loops": 26}


def test_global_ids_are_level_major():
    h = pdtb_hierarchy()
    assert h.offsets == (0, 4)
    assert h.global_id(1, 0) == 4


def test_load_from_file(tmp_path):
    path = tmp_path / "h.json"
    pdtb_hierarchy().save(path)
    assert load_hierarchy(path) == pdtb_hierarchy()


@given(hierarchies())
def test_adjacency_properties(h):
    a = build_adjacency(h)
    assert a.shape == (h.n_nodes, h.n_nodes)
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 1)
    off = a - np.eye(h.n_nodes)
    pairs = set(h.parent_pairs())
    for j in range(h.n_nodes):
        for k in range(h.n_nodes):
            if j != k:
                assert off[j, k] == ((j, k) in pairs or (k, j) in pairs)
    assert off.sum() == 2 * len(pairs)


@given(hierarchies())
def test_round_trip(h):
    again = parse_hierarchy(h.dumps())
    assert again == h
    assert from_document(again.to_document()) == h


@given(hierarchies())
def test_structure_invariants(h):
    assert h.n_nodes == sum(h.sizes)
    assert all(not ps for ps in h.parents[0])
    for lv in range(1, h.depth):
        for ps in h.parents[lv]:
            assert ps and all(0 <= p < h.sizes[lv - 1] for p in ps)
            if lv < h.depth - 1:
                assert len(ps) == 1
