"""Trees, profiles, oracle fallbacks, and game-definition loading."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from hiergames.core import (
    ActionProfile,
    FunctionOracle,
    GameTree,
    as_profile,
    build_tree,
    check_game,
    load_game,
    project,
    rng_from,
    slice_action,
)
from hiergames.errors import (
    EmptyLevel,
    InvalidParams,
    MalformedTree,
    UnknownPlayer,
)

# ----------------------------------------------------------------------
# Tree construction
# ----------------------------------------------------------------------


def test_build_tree_even_split():
    tree = build_tree((1, 2, 4))
    assert tree.n_players == 7
    assert tree.parent.tolist() == [-1, 0, 0, 1, 1, 2, 2]
    assert tree.children_of(1) == (3, 4)
    assert tree.children_of(2) == (5, 6)


def test_build_tree_uneven_split_gives_extra_children_to_first_parents():
    tree = build_tree((1, 2, 5))
    assert tree.children_of(1) == (3, 4, 5)
    assert tree.children_of(2) == (6, 7)


def test_build_tree_two_states_five_counties_each():
    tree = build_tree((1, 2, 10))
    assert all(len(tree.children_of(s)) == 5 for s in (1, 2))


def test_build_tree_rejects_level_thinner_than_parents():
    with pytest.raises(MalformedTree):
        build_tree((1, 3, 2))


def test_tree_rejects_empty_inputs():
    with pytest.raises(MalformedTree):
        build_tree(())
    with pytest.raises(EmptyLevel):
        build_tree((1, 0, 2))


def test_explicit_parents_validated():
    GameTree((2, 2), [None, None, 0, 1])  # None doubles as -1
    with pytest.raises(MalformedTree):
        GameTree((1, 1), [0, 0])  # root with a parent
    with pytest.raises(MalformedTree):
        GameTree((1, 1), [-1])  # wrong length
    with pytest.raises(MalformedTree):
        GameTree((1, 1), [-1, 7])  # parent out of range
    with pytest.raises(MalformedTree):
        GameTree((2, 2), [-1, -1, 0, 3])  # parent on the wrong level
    with pytest.raises(MalformedTree):
        GameTree((1, 2, 2), [-1, 0, 0, 1, 1])  # player 2 has no children


def test_level_and_subtree_queries():
    tree = build_tree((1, 2, 4))
    assert tree.level_of(0) == 1
    assert tree.level_of(6) == 3
    assert list(tree.players_at_level(2)) == [1, 2]
    assert list(tree.leaf_ids) == [3, 4, 5, 6]
    assert not tree.is_leaf(1)
    assert tree.is_leaf(5)
    assert tree.parent_of(0) is None
    assert tree.parent_of(4) == 1
    assert tree.descendants_of(0) == (1, 2, 3, 4, 5, 6)
    assert tree.descendants_of(2) == (5, 6)
    assert tree.subtree_leaf_ids(0) == (3, 4, 5, 6)
    assert tree.subtree_leaf_ids(1) == (3, 4)
    assert tree.subtree_leaf_ids(6) == (6,)


def test_unknown_players_and_levels_raise():
    tree = build_tree((1, 2))
    for bad in (-1, 3):
        with pytest.raises(UnknownPlayer):
            tree.check_player(bad)
    with pytest.raises(UnknownPlayer):
        tree.players_at_level(0)
    with pytest.raises(UnknownPlayer):
        tree.players_at_level(3)


def test_action_layout():
    tree = build_tree((1, 1), action_dims=(2, 3))
    assert tree.n_dims == 5
    assert tree.offsets.tolist() == [0, 2, 5]
    assert tree.slice_of(1) == slice(2, 5)
    assert tree.dim_of(0) == 2
    assert tree.layout == {0: (0, 2), 1: (2, 3)}


def test_bad_action_dims_rejected():
    with pytest.raises(InvalidParams):
        build_tree((1, 1), action_dims=0)
    with pytest.raises(InvalidParams):
        build_tree((1, 1), action_dims=(1,))


def test_bounds_forms():
    tree = build_tree((1, 2), bounds=(0.0, 1.0))
    assert tree.is_bounded
    assert_array_equal(tree.lower, np.zeros(3))
    assert_array_equal(tree.upper, np.ones(3))

    tree = build_tree((1, 1), bounds=[None, (-2.0, 2.0)])
    assert tree.lower.tolist() == [-np.inf, -2.0]
    assert tree.upper.tolist() == [np.inf, 2.0]

    assert not build_tree((1, 1)).is_bounded
    with pytest.raises(InvalidParams):
        build_tree((1, 1), bounds=[(1.0, 0.0), None])
    with pytest.raises(InvalidParams):
        build_tree((1, 1), bounds=[(0.0, 1.0)])


def test_dependency_sets_are_own_parent_and_leaves():
    tree = build_tree((1, 2, 2))
    assert tree.dependency_set(0) == frozenset({0, 3, 4})
    assert tree.dependency_set(1) == frozenset({0, 1, 3, 4})
    assert tree.dependency_set(3) == frozenset({1, 3, 4})


# ----------------------------------------------------------------------
# Profiles and projection
# ----------------------------------------------------------------------


def test_profile_get_is_view_set_is_copy():
    tree = build_tree((1, 1), action_dims=(2, 1))
    p = ActionProfile.zeros(tree)
    p.get(0)[1] = 5.0
    assert p.flat.tolist() == [0.0, 5.0, 0.0]
    src = np.array([7.0])
    p.set(1, src)
    src[0] = -1.0
    assert p.flat[2] == 7.0
    assert slice_action(p, 0).base is p.flat


def test_profile_shape_validation():
    tree = build_tree((1, 1))
    with pytest.raises(InvalidParams):
        ActionProfile(tree, np.zeros(3))
    p = ActionProfile.zeros(tree)
    with pytest.raises(InvalidParams):
        p.set(0, [1.0, 2.0])


def test_profile_copy_and_array_protocol():
    tree = build_tree((1, 1))
    p = ActionProfile(tree, [1.0, 2.0])
    q = p.copy()
    q.flat[0] = 9.0
    assert p.flat[0] == 1.0
    assert_array_equal(np.asarray(p), [1.0, 2.0])
    assert np.asarray(p, dtype=np.float32).dtype == np.float32


def test_as_profile_coercion():
    tree = build_tree((1, 1))
    p = ActionProfile.zeros(tree)
    assert as_profile(tree, p) is p
    q = as_profile(tree, [1.0, 2.0])
    assert isinstance(q, ActionProfile)
    other = build_tree((1, 2))
    with pytest.raises(InvalidParams):
        as_profile(other, p)


def test_project_clamps_and_copies():
    tree = build_tree((1, 1), bounds=(0.0, 1.0))
    p = ActionProfile(tree, [-1.0, 2.0])
    q = project(p)
    assert q.flat.tolist() == [0.0, 1.0]
    assert p.flat.tolist() == [-1.0, 2.0]
    arr = project(np.array([-1.0, 0.5]), tree)
    assert arr.tolist() == [0.0, 0.5]
    with pytest.raises(InvalidParams):
        project(np.zeros(2))


def test_project_passes_unbounded_through_as_copy():
    tree = build_tree((1, 1))
    x = np.array([3.0, -9.0])
    out = project(x, tree)
    assert_array_equal(out, x)
    assert out is not x


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_project_is_idempotent_and_feasible(coords):
    tree = build_tree((1, 2), bounds=(-1.0, 3.0))
    once = project(np.asarray(coords), tree)
    assert np.all(once >= tree.lower) and np.all(once <= tree.upper)
    assert_array_equal(project(once, tree), once)


# ----------------------------------------------------------------------
# Oracles: finite-difference fallbacks and validation
# ----------------------------------------------------------------------


def _quadratic_pair():
    tree = build_tree((1, 1))
    oracle = FunctionOracle(
        tree,
        [
            lambda p: -((p.get(0)[0] - 1.0) ** 2) + p.get(0)[0] * p.get(1)[0],
            lambda p: -((p.get(1)[0] + 2.0) ** 2) + 0.5 * p.get(0)[0] * p.get(1)[0],
        ],
    )
    return tree, oracle


def test_fd_gradients_match_analytic_on_quadratics():
    tree, oracle = _quadratic_pair()
    p = ActionProfile(tree, [0.3, -1.2])
    x0, x1 = p.flat
    assert_allclose(oracle.grad(0, 0, p), [-2 * (x0 - 1) + x1], atol=1e-8)
    assert_allclose(oracle.grad(0, 1, p), [x0], atol=1e-8)
    assert_allclose(oracle.grad(1, 1, p), [-2 * (x1 + 2) + 0.5 * x0], atol=1e-8)


def test_fd_hessian_blocks_and_transpose_rule():
    tree, oracle = _quadratic_pair()
    p = ActionProfile(tree, [0.3, -1.2])
    assert_allclose(oracle.hess(0, 0, 0, p), [[-2.0]], atol=1e-6)
    assert_allclose(oracle.hess(0, 0, 1, p), [[1.0]], atol=1e-6)
    # hess(i, b, a) is the exact transpose of the canonical pair, bit for bit.
    assert_array_equal(oracle.hess(1, 1, 0, p), oracle.hess(1, 0, 1, p).T)


def test_fd_transpose_rule_on_nonsquare_blocks():
    tree = build_tree((1, 1), action_dims=(2, 1))
    oracle = FunctionOracle(
        tree,
        [
            lambda p: p.get(0)[0] * p.get(1)[0] + 3.0 * p.get(0)[1] * p.get(1)[0],
            lambda p: -p.get(1)[0] ** 2,
        ],
    )
    p = ActionProfile(tree, [0.5, -0.5, 2.0])
    block = oracle.hess(0, 0, 1, p)
    assert block.shape == (2, 1)
    assert_allclose(block, [[1.0], [3.0]], atol=1e-6)
    assert_array_equal(oracle.hess(0, 1, 0, p), block.T)


def test_value_batch_and_leaf_gradient_consistency():
    tree = build_tree((1, 2))
    oracle = FunctionOracle(
        tree,
        [
            lambda p: p.get(1)[0] ** 2 - p.get(2)[0],
            lambda p: -((p.get(1)[0] - p.get(0)[0]) ** 2),
            lambda p: -((p.get(2)[0] + p.get(0)[0]) ** 2),
        ],
    )
    p = ActionProfile(tree, [0.1, 0.2, 0.3])
    cands = np.array([[0.2], [1.0], [-1.0]])
    batch = oracle.value_batch(1, p, cands)
    assert batch.shape == (3,)
    assert batch[0] == oracle.value(1, p)
    assert p.flat[1] == 0.2  # evaluation never mutates the profile
    stacked = oracle.leaf_gradient(0, p)
    assert_allclose(
        stacked, np.concatenate([oracle.grad(0, 1, p), oracle.grad(0, 2, p)])
    )


def test_function_oracle_validation():
    tree = build_tree((1, 1))
    with pytest.raises(InvalidParams):
        FunctionOracle(tree, [lambda p: 0.0])
    oracle = FunctionOracle(tree, {1: lambda p: 1.0, 0: lambda p: 2.0})
    assert oracle.value(0, ActionProfile.zeros(tree)) == 2.0


def test_check_game_validation():
    tree, oracle = _quadratic_pair()
    assert check_game((tree, oracle)) == (tree, oracle)
    with pytest.raises(InvalidParams):
        check_game((tree,))
    with pytest.raises(InvalidParams):
        check_game((tree, "oracle"))
    with pytest.raises(InvalidParams):
        check_game((oracle, tree))


def test_rng_from_normalization():
    gen = np.random.default_rng(1)
    assert rng_from(gen) is gen
    a = rng_from(3).uniform(size=4)
    b = rng_from(3).uniform(size=4)
    assert_array_equal(a, b)
    rng_from(np.random.SeedSequence(5)).uniform()


# ----------------------------------------------------------------------
# Game-definition loading
# ----------------------------------------------------------------------


def test_load_game_accepts_dict_string_and_path(tmp_path):
    spec = {"game_kind": "p111"}
    for source in (spec, json.dumps(spec)):
        tree, _ = load_game(source)
        assert tree.n_players == 3
    path = tmp_path / "game.json"
    path.write_text(json.dumps(spec))
    tree, _ = load_game(path)
    assert tree.n_players == 3
    tree, _ = load_game(str(path))
    assert tree.n_players == 3


def test_load_game_rejects_bad_sources(tmp_path):
    with pytest.raises(InvalidParams):
        load_game(str(tmp_path / "missing.json"))
    with pytest.raises(InvalidParams):
        load_game("{not valid json")
    with pytest.raises(InvalidParams):
        load_game({"params": {}})  # no game_kind
    with pytest.raises(InvalidParams):
        load_game(42)
    bad = tmp_path / "list.json"
    bad.write_text("[1, 2]")
    with pytest.raises(InvalidParams):
        load_game(bad)
