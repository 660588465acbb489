"""One-shot gradient fields: reference values, structure, and dynamics."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hiergames.core import ActionProfile, FunctionOracle, build_tree
from hiergames.dbi import SolverConfig, field_function
from hiergames.errors import InvalidParams
from hiergames.fields import (
    FIELD_KINDS,
    FieldDynamics,
    field_co,
    field_ham,
    field_jacobian,
    field_sim,
    field_sym,
    iterate_field,
    make_field,
)
from hiergames.games import make_p111, make_polynomial


def _bilinear_zero_sum():
    tree = build_tree((1, 1))
    return make_polynomial(tree, [[(1, {0: 1, 1: 1})], [(-1, {0: 1, 1: 1})]])


def _single_concave():
    tree = build_tree((1,))
    return tree, FunctionOracle(tree, [lambda p: -(p.get(0)[0] ** 2)])


# ----------------------------------------------------------------------
# Reference values
# ----------------------------------------------------------------------


def test_sym_on_bilinear_zero_sum():
    # G = (1, -1) at (1, 1); the antisymmetric correction rotates it to (2, 0).
    game = _bilinear_zero_sum()
    assert_allclose(field_sym(game, [1.0, 1.0]), [2.0, 0.0], atol=1e-8)


def test_ham_and_co_on_single_concave_player():
    game = _single_concave()
    # G = -2x, J = [[-2]]: HAM = -2 J^T G = -8 at x = 1, CO = G + 0.1 * HAM.
    # The Jacobian comes from finite differences, so allow ~1e-5 relative.
    assert_allclose(field_ham(game, [1.0]), [-8.0], rtol=1e-5)
    assert_allclose(field_co(game, [1.0]), [-2.8], rtol=1e-5)
    assert_allclose(field_co(game, [1.0], gamma=0.05), [-2.4], rtol=1e-5)


def test_sim_stacks_own_partials():
    game = make_p111()
    tree, oracle = game
    x = np.array([0.3, -0.6, 1.1])
    p = ActionProfile(tree, x)
    want = np.concatenate([oracle.grad(i, i, p) for i in range(3)])
    assert_allclose(field_sim(game, x), want, atol=1e-12)


def test_sym_reduces_to_sim_on_a_potential_game():
    # Identical utilities give a symmetric SIM Jacobian, hence zero correction.
    tree = build_tree((1, 1))
    pot = lambda p: -((p.get(0)[0] - p.get(1)[0]) ** 2) - p.get(0)[0] ** 2 - p.get(1)[0] ** 2
    game = (tree, FunctionOracle(tree, [pot, pot]))
    x = np.array([0.7, -0.3])
    assert_allclose(field_sym(game, x), field_sim(game, x), atol=1e-6)
    assert_allclose(field_sym(game, x, aligned=True), field_sim(game, x), atol=1e-6)


def test_aligned_sym_flips_sign_at_most():
    game = make_p111()
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=3)
        G = field_sim(game, x)
        corr = field_sym(game, x) - G
        aln = field_sym(game, x, aligned=True)
        candidates = [G + corr, G - corr]
        assert any(np.allclose(aln, c, atol=1e-10) for c in candidates)


def test_ham_is_a_descent_direction_for_the_field_norm():
    game = make_p111()
    rng = np.random.default_rng(1)
    sq = lambda x: float(np.dot(field_sim(game, x), field_sim(game, x)))
    for _ in range(100):
        x = rng.uniform(-2.0, 2.0, size=3)
        H = field_ham(game, x)
        t = 1e-7 / max(1.0, float(np.linalg.norm(H)))
        assert sq(x + t * H) <= sq(x) + 1e-6


# ----------------------------------------------------------------------
# Field Jacobians
# ----------------------------------------------------------------------


def test_field_jacobian_defaults_to_sim():
    game = _single_concave()
    assert_allclose(field_jacobian(game, [0.4]), [[-2.0]], rtol=1e-7)


def test_field_jacobian_of_hierarchical_field():
    # Leader u0 = -(x-1)^2 - y^2 over follower u1 = -(y-x)^2: the stacked
    # hierarchical field is (-2x + 2 - 2y, 2x - 2y).
    tree = build_tree((1, 1))
    terms = [
        [(-1, {0: 2}), (2, {0: 1}), (-1, {1: 2})],
        [(-1, {1: 2}), (2, {0: 1, 1: 1}), (-1, {0: 2})],
    ]
    game = make_polynomial(tree, terms)
    J = field_jacobian(game, [0.3, -0.2], field=field_function(game))
    assert_allclose(J, [[-2.0, -2.0], [2.0, -2.0]], atol=1e-7)


def test_profile_shape_validated():
    game = _bilinear_zero_sum()
    with pytest.raises(InvalidParams):
        field_sim(game, [1.0, 2.0, 3.0])


# ----------------------------------------------------------------------
# Closures and iterated dynamics
# ----------------------------------------------------------------------


def test_make_field_matches_one_shot_evaluations():
    game = make_p111()
    x = np.array([0.2, 0.4, -0.9])
    one_shot = {
        "sim": field_sim(game, x),
        "sym": field_sym(game, x),
        "sym_aln": field_sym(game, x, aligned=True),
        "ham": field_ham(game, x),
        "co": field_co(game, x),
    }
    for kind in FIELD_KINDS:
        f, tree = make_field(game, kind)
        assert tree is game[0]
        assert_allclose(f(x), one_shot[kind], atol=1e-12)
    with pytest.raises(InvalidParams):
        make_field(game, "newton")


def test_iterate_field_converges_and_records_per_player_norms():
    game = _bilinear_zero_sum()
    # SIM circles the origin on this game; CO's correction term damps the
    # rotation (iteration matrix eigenvalues -2*gamma +/- i), so it settles.
    config = SolverConfig(alpha=0.05, init=[1.0, 1.0], grad_tol=1e-6, max_iters=50_000)
    trace = iterate_field(game, "co", config)
    assert trace.converged
    assert_allclose(trace.final, [0.0, 0.0], atol=1e-5)
    assert trace.entries[0].player_grad_norms.shape == (2,)


def test_iterate_field_is_deterministic_under_seed():
    game = make_p111()
    config = SolverConfig(alpha=1e-3, seed=5, max_iters=100)
    a = iterate_field(game, "co", config)
    b = iterate_field(game, "co", config)
    assert_array_equal(a.final, b.final)


def test_field_dynamics_wrapper():
    game = _single_concave()
    dyn = FieldDynamics(kind="ham", alpha=0.05, init=[1.0], grad_tol=1e-8)
    dyn.fit(game)
    assert dyn.converged_
    assert abs(dyn.trace_.final[0]) < 1e-4
    assert dyn.get_params()["kind"] == "ham"
