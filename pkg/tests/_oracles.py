"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles, without
reusing the package's derivative or search machinery:

* :class:`QuadraticOracle` / :func:`make_random_quadratic` — games with
  exactly representable payoffs ``u_i = ½ xᵀ Q_i x + b_iᵀ x`` restricted
  to each player's dependency variables.  Their first-order conditions
  are linear, so induced responses can be re-solved *exactly*.
* :func:`resolve_below` — the cascade the hierarchical total gradient
  differentiates: perturb a player, re-solve each descendant's own
  first-order condition level by level against a per-level snapshot
  (parent updated, siblings and leaves at entering values).
* :func:`total_grad_reference` — central difference of the re-solved
  composition (exact for quadratics up to roundoff).
* :func:`chain_response_product` — closed-form leaf-response Jacobian for
  single-child chains: the product of per-level local responses.
* :func:`brute_force_spe` — exhaustive grid backward induction for small
  games whose siblings do not interact.
"""

from __future__ import annotations

import numpy as np

from hiergames.core import ActionProfile, GameTree, UtilityOracle, build_tree, check_game


class QuadraticOracle(UtilityOracle):
    """Payoffs ``u_i(x) = ½ xᵀ Q_i x + b_iᵀ x`` with exact derivatives.

    ``Q_i`` is symmetric and supported only on the player's dependency
    dimensions; the own-action block is negative definite so every
    first-order condition has a unique solution.
    """

    def __init__(self, tree: GameTree, Q: list[np.ndarray], b: list[np.ndarray]):
        super().__init__(tree)
        self.Q = [np.asarray(q, dtype=float) for q in Q]
        self.b = [np.asarray(v, dtype=float) for v in b]

    def value_batch(self, i, profile, candidates):
        tree = self.tree
        sl = tree.slice_of(i)
        candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        out = np.empty(candidates.shape[0])
        x = profile.flat.copy()
        for k, cand in enumerate(candidates):
            x[sl] = cand
            out[k] = 0.5 * float(x @ self.Q[i] @ x) + float(self.b[i] @ x)
        return out

    def grad(self, i, wrt, profile):
        sl = self.tree.slice_of(wrt)
        return (self.Q[i] @ profile.flat + self.b[i])[sl].copy()

    def hess(self, i, a, b, profile):
        sa, sb = self.tree.slice_of(a), self.tree.slice_of(b)
        return self.Q[i][sa, sb].copy()


def make_random_quadratic(level_sizes, seed=0, action_dims=1,
                          coupling=0.5, curvature=1.0):
    """Random quadratic game with negative-definite own blocks.

    Off-own couplings are scaled by ``coupling`` (keep it modest so the
    re-solve cascades stay well conditioned); own blocks are
    ``-(R Rᵀ + curvature·I)``.
    """
    rng = np.random.default_rng(seed)
    tree = build_tree(level_sizes, action_dims=action_dims)
    n = tree.n_dims
    Q, b = [], []
    for i in range(tree.n_players):
        dep_dims = np.zeros(n, dtype=bool)
        for pid in tree.dependency_set(i):
            dep_dims[tree.slice_of(pid)] = True
        M = coupling * rng.standard_normal((n, n))
        M = 0.5 * (M + M.T)
        M[~dep_dims, :] = 0.0
        M[:, ~dep_dims] = 0.0
        sl = tree.slice_of(i)
        d = sl.stop - sl.start
        R = rng.standard_normal((d, d))
        M[sl, sl] = -(R @ R.T + curvature * np.eye(d))
        vec = rng.standard_normal(n)
        vec[~dep_dims] = 0.0
        Q.append(M)
        b.append(vec)
    return tree, QuadraticOracle(tree, Q, b)


def resolve_below(tree: GameTree, oracle: QuadraticOracle, x: np.ndarray,
                  i: int) -> np.ndarray:
    """Re-solve every descendant's own first-order condition below ``i``.

    Level by level from ``i``'s children down; within a level every player
    solves against the same snapshot (its parent already moved, everything
    else at the values it entered the level with).
    """
    x = np.asarray(x, dtype=float).copy()
    frontier = list(tree.children_of(i))
    while frontier:
        snapshot = x.copy()
        nxt = []
        for j in frontier:
            sl = tree.slice_of(j)
            Q, b = oracle.Q[j], oracle.b[j]
            own = Q[sl, sl]
            rhs = (Q[sl] @ snapshot + b[sl]) - own @ snapshot[sl]
            x[sl] = np.linalg.solve(own, -rhs)
            nxt.extend(tree.children_of(j))
        frontier = nxt
    return x


def descend_manifold(tree: GameTree, oracle: QuadraticOracle, x: np.ndarray,
                     i: int) -> np.ndarray:
    """Project ``x`` onto the joint stationarity manifold below ``i``.

    Solves every descendant's own first-order condition *simultaneously*
    (one linear system over all descendant dimensions, everything else
    frozen).  On the result, :func:`resolve_below` is the identity, which
    makes it the natural base point for differentiating the re-solved
    composition: the cascade's value and the entering profile coincide.
    """
    x = np.asarray(x, dtype=float).copy()
    desc = list(tree.descendants_of(i))
    if not desc:
        return x
    rows = []
    rhs = []
    z_dims = np.zeros(tree.n_dims, dtype=bool)
    for j in desc:
        z_dims[tree.slice_of(j)] = True
    for j in desc:
        sl = tree.slice_of(j)
        rows.append(oracle.Q[j][sl])
        rhs.append(oracle.b[j][sl])
    A = np.vstack(rows)
    c = np.concatenate(rhs)
    frozen = A[:, ~z_dims] @ x[~z_dims]
    x[z_dims] = np.linalg.solve(A[:, z_dims], -(frozen + c))
    return x


def total_grad_reference(tree: GameTree, oracle: QuadraticOracle,
                         x: np.ndarray, i: int, h: float = 1e-5) -> np.ndarray:
    """Central difference of ``u_i`` along own-coordinate perturbations with
    the subtree re-solved by :func:`resolve_below` (exact for quadratics).

    Meaningful as a check of the hierarchical total gradient only at base
    points where the cascade is the identity (see :func:`descend_manifold`);
    elsewhere the two differ by where the payoff derivatives are taken."""
    sl = tree.slice_of(i)
    out = np.empty(sl.stop - sl.start)
    for k in range(sl.stop - sl.start):
        vals = {}
        for sign in (+1.0, -1.0):
            y = np.asarray(x, dtype=float).copy()
            y[sl.start + k] += sign * h
            y = resolve_below(tree, oracle, y, i)
            vals[sign] = 0.5 * float(y @ oracle.Q[i] @ y) + float(oracle.b[i] @ y)
        out[k] = (vals[+1.0] - vals[-1.0]) / (2.0 * h)
    return out


def chain_response_product(tree: GameTree, oracle: QuadraticOracle) -> np.ndarray:
    """``D_{x_root} x_leaf`` for a single-child chain, as an explicit product
    of ``-H_own⁻¹ H_(own,parent)`` factors from the leaf up."""
    path = [0]
    while not tree.is_leaf(path[-1]):
        children = list(tree.children_of(path[-1]))
        assert len(children) == 1, "chain_response_product needs a pure chain"
        path.append(children[0])
    prod = None
    for parent, child in zip(path, path[1:]):
        sc, sp = tree.slice_of(child), tree.slice_of(parent)
        Q = oracle.Q[child]
        step = -np.linalg.solve(Q[sc, sc], Q[sc, sp])
        prod = step if prod is None else step @ prod
    return prod


def brute_force_spe(game, grid) -> np.ndarray:
    """Exhaustive grid backward induction (first maximum wins ties).

    Valid only for games whose same-parent siblings do not affect each
    other's payoffs, so descendants can be settled child by child.
    """
    tree, oracle = check_game(game)

    def settle(j: int, x: np.ndarray) -> tuple[float, np.ndarray]:
        best_u = -np.inf
        best_x = None
        for cand in grid.for_player(j):
            y = x.copy()
            y[tree.slice_of(j)] = cand
            for c in tree.children_of(j):
                _, y = settle(c, y)
            u = oracle.value(j, ActionProfile(tree, y))
            if u > best_u:
                best_u, best_x = u, y
        return best_u, best_x

    _, x = settle(0, np.zeros(tree.n_dims))
    return x
