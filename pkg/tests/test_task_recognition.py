"""Prefix-tree fingerprints, dissimilarity, and task matching."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnapwp.errors import ConfigurationError
from cnapwp.stream import Event
from cnapwp.task_recognition import (
    PrefixTree,
    TaskBuffer,
    TaskRecord,
    build_from_buffer,
    dissimilarity,
    match_task,
)


def tree_of(*paths):
    tree = PrefixTree()
    for path in paths:
        tree.insert_case_path(tuple(path))
    return tree


def oracle_dissimilarity(new, stored):
    """Brute force: the share of new root paths missing from the stored tree."""
    new_paths = new.path_set()
    return len(new_paths - stored.path_set()) / len(new_paths)


# -- tree construction -------------------------------------------------------


def test_insert_builds_shared_prefixes():
    tree = tree_of("ab", "ac")
    assert tree.path_set() == {("a",), ("a", "b"), ("a", "c")}
    assert tree.node_count() == 3
    assert tree.event_count == 4


def test_insert_rejects_empty_path():
    with pytest.raises(ConfigurationError):
        PrefixTree().insert_case_path(())


def test_extend_case_equals_whole_path_insertion():
    incremental = PrefixTree()
    for case, act in [("c1", "a"), ("c2", "a"), ("c1", "b"), ("c2", "c"), ("c1", "d")]:
        incremental.extend_case(case, act)
    whole = tree_of("abd", "ac")
    assert incremental.path_set() == whole.path_set()
    assert incremental.node_count() == whole.node_count()
    assert incremental.event_count == whole.event_count


def test_empty_tree_properties():
    tree = PrefixTree()
    assert tree.is_empty
    assert tree.node_count() == 0
    assert tree.path_set() == frozenset()


def test_to_dict_carries_frequencies():
    tree = tree_of("ab", "ab", "ac")
    dumped = tree.to_dict()
    assert dumped["event_count"] == 6
    root_children = {n["activity"]: n for n in dumped["paths"]}
    assert root_children["a"]["frequency"] == 3
    grand = {n["activity"]: n for n in root_children["a"]["children"]}
    assert grand["b"]["frequency"] == 2
    assert grand["c"]["frequency"] == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text(st.sampled_from("abcd"), min_size=1, max_size=6), min_size=1, max_size=8))
def test_path_set_equals_all_prefixes(paths):
    tree = tree_of(*paths)
    expected = {tuple(p[:k]) for p in paths for k in range(1, len(p) + 1)}
    assert tree.path_set() == frozenset(expected)
    assert tree.node_count() == len(expected)


# -- dissimilarity -------------------------------------------------------------


def test_dissimilarity_half_missing():
    new = tree_of("ab", "acd")  # paths: a, ab, ac, acd
    stored = tree_of("ab")  # paths: a, ab
    assert dissimilarity(new, stored) == 0.5


def test_dissimilarity_identity_is_zero():
    tree = tree_of("abc", "abd", "ae")
    assert dissimilarity(tree, tree) == 0.0


def test_dissimilarity_disjoint_alphabets_is_one():
    assert dissimilarity(tree_of("abc"), tree_of("xyz")) == 1.0


def test_dissimilarity_is_asymmetric():
    big = tree_of("ab", "ac")
    small = tree_of("ab")
    assert dissimilarity(big, small) == pytest.approx(1 / 3)
    assert dissimilarity(small, big) == 0.0


def test_dissimilarity_empty_new_tree_raises():
    with pytest.raises(ConfigurationError):
        dissimilarity(PrefixTree(), tree_of("a"))


@settings(max_examples=100, deadline=None)
@given(
    new_paths=st.lists(st.text(st.sampled_from("abcde"), min_size=1, max_size=6), min_size=1, max_size=8),
    stored_paths=st.lists(st.text(st.sampled_from("abcde"), min_size=1, max_size=6), max_size=8),
)
def test_dissimilarity_matches_path_set_oracle(new_paths, stored_paths):
    new = tree_of(*new_paths)
    stored = tree_of(*stored_paths) if stored_paths else PrefixTree()
    assert dissimilarity(new, stored) == oracle_dissimilarity(new, stored)


# -- buffers ---------------------------------------------------------------------


def test_buffer_fills_and_rejects_overflow():
    buffer = TaskBuffer(2)
    assert not buffer.is_full
    buffer.add(Event("c", "a"))
    buffer.add(Event("c", "b"))
    assert buffer.is_full
    with pytest.raises(ConfigurationError):
        buffer.add(Event("c", "c"))


def test_buffer_capacity_validation():
    with pytest.raises(ConfigurationError):
        TaskBuffer(0)


def test_build_from_buffer_requires_full():
    buffer = TaskBuffer(3)
    buffer.add(Event("c", "a"))
    with pytest.raises(ConfigurationError):
        build_from_buffer(buffer)


def test_build_from_buffer_groups_by_case():
    buffer = TaskBuffer(5)
    for case, act in [("c1", "a"), ("c2", "x"), ("c1", "b"), ("c2", "y"), ("c1", "c")]:
        buffer.add(Event(case, act))
    tree = build_from_buffer(buffer)
    assert tree.path_set() == tree_of("abc", "xy").path_set()


# -- matching --------------------------------------------------------------------


def test_match_returns_best_below_threshold():
    store = [
        TaskRecord(1, tree_of("ab", "ac")),
        TaskRecord(2, tree_of("xy")),
    ]
    new = tree_of("ab", "ac", "ad")  # vs task 1: missing only ad -> 0.25
    assert match_task(new, store, threshold=0.5) == 1


def test_match_rejects_when_all_above_threshold():
    store = [TaskRecord(1, tree_of("pq"))]
    assert match_task(tree_of("ab"), store, threshold=0.5) is None


def test_match_breaks_ties_toward_the_first_record():
    twin_a = TaskRecord(1, tree_of("ab"))
    twin_b = TaskRecord(2, tree_of("ab"))
    assert match_task(tree_of("ab"), [twin_a, twin_b], threshold=0.5) == 1
    assert match_task(tree_of("ab"), [twin_b, twin_a], threshold=0.5) == 2


def test_match_empty_store_returns_none():
    assert match_task(tree_of("a"), [], threshold=0.5) is None


def test_match_counts_empty_stored_tree_as_fully_dissimilar():
    store = [TaskRecord(1, PrefixTree())]
    assert match_task(tree_of("a"), store, threshold=1.0) is None


def test_match_threshold_validation():
    with pytest.raises(ConfigurationError):
        match_task(tree_of("a"), [], threshold=0.0)
    with pytest.raises(ConfigurationError):
        match_task(tree_of("a"), [], threshold=1.1)


def test_match_threshold_is_exclusive():
    store = [TaskRecord(1, tree_of("ab"))]
    new = tree_of("ab", "cd", "ef")  # dissimilarity 4/6 = 2/3 against task 1
    assert match_task(new, store, threshold=2 / 3) is None
    assert match_task(new, store, threshold=2 / 3 + 1e-9) == 1
