"""Hierarchical interdependent-security games.

Leaf players are defenders choosing a security investment ``x in [0, 1]``.
An attacker (nature) strikes defender ``j`` with probability ``a_j``, drawn
from a logit response to the investment profile:

    a = softmax(attack_sharpness * (1 - x_L)),

so lightly defended targets are attacked more often.  A direct attack on
``j`` succeeds with probability ``1 / (1 + x_j)``; a successful hit on ``j``
cascades to defender ``m`` with probability ``q[j, m]``.  Defender ``m``'s
base payoff is its survival probability less a linear investment cost:

    u_m = a_m * x_m / (1 + x_m)
          + sum_{j != m} a_j * (1 - q[j, m] / ((1 + x_j) * (1 + x_m)))
          - investment_cost * x_m.

The hierarchy overlays sector players and a root that recommend investment
levels: each non-leaf player's base payoff is the sum of its member
defenders' ``u_m`` (the root counts everyone), and every non-root player
``i`` pays ``(x_i - x_parent)**2`` for deviating from its parent, weighted
by ``kappa_i`` against ``1 - kappa_i`` on the base payoff (the root takes
raw welfare).

First derivatives are analytic (the softmax Jacobian has the usual
``-sharpness * a_k * (delta_kn - a_n)`` form); Hessian blocks fall back to
central differences of those analytic gradients.
"""

from __future__ import annotations

import numpy as np

from ..core import GameTree, UtilityOracle, build_tree
from ..errors import InvalidParams, InvalidWeights

__all__ = ["SecurityOracle", "make_security"]


class SecurityOracle(UtilityOracle):
    """Analytic-gradient oracle for the interdependent-security payoff.

    Args:
        tree: player tree; scalar actions, leaves are the defenders.
        kappa: per-player compliance weights in ``[0, 1)`` (root ignored).
        interdependence: cascade probability — a scalar or an
            ``(n_leaves, n_leaves)`` matrix ``q`` with entries in ``[0, 1]``
            (the diagonal is unused).
        investment_cost: per-unit cost of security investment.
        attack_sharpness: logit temperature of the attack distribution.
    """

    def __init__(
        self,
        tree: GameTree,
        kappa,
        interdependence=0.5,
        investment_cost: float = 0.2,
        attack_sharpness: float = 5.0,
    ):
        super().__init__(tree)
        if tree.n_levels < 2:
            raise InvalidParams("security games need at least two levels")
        if any(tree.dim_of(i) != 1 for i in range(tree.n_players)):
            raise InvalidParams("security games use scalar actions")
        n = len(tree.leaf_ids)
        self._leaf0 = tree.leaf_ids[0]
        self._leaf_lo = tree.slice_of(self._leaf0).start

        q = np.asarray(interdependence, dtype=float)
        if q.ndim == 0:
            q = np.full((n, n), float(q))
        if q.shape != (n, n) or np.any(q < 0) or np.any(q > 1):
            raise InvalidParams(
                f"interdependence must be a probability or an ({n}, {n}) "
                "matrix of probabilities"
            )
        if attack_sharpness <= 0:
            raise InvalidParams("attack_sharpness must be positive")

        m = tree.n_players
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (m,)).copy()
        if np.any(kappa < 0) or np.any(kappa[1:] >= 1):
            raise InvalidWeights("kappa must lie in [0, 1) for non-root players")
        kappa[0] = 0.0

        self._q = q
        self._kappa = kappa
        self._scale = np.where(np.arange(m) == 0, 1.0, 1.0 - kappa)
        self._cost = float(investment_cost)
        self._sharp = float(attack_sharpness)
        member = np.zeros((m, n))
        for i in range(m):
            idx = (
                [i - self._leaf0]
                if tree.is_leaf(i)
                else [d - self._leaf0 for d in tree.subtree_leaf_ids(i)]
            )
            member[i, idx] = 1.0
        self._member = member

    # -- attack distribution ----------------------------------------------------

    def _softmax_rows(self, XL):
        """Attack distribution per row of leaf profiles ``XL`` (K, n)."""
        z = self._sharp * (1.0 - XL)
        z = z - np.max(z, axis=-1, keepdims=True)
        e = np.exp(z)
        return e / np.sum(e, axis=-1, keepdims=True)

    # -- values ---------------------------------------------------------------

    def _member_payoff_rows(self, XL, ind):
        """Rows of total member base payoff at leaf profiles ``XL`` (K, n).

        With ``w = 1/(1+x)`` and the attack probabilities summing to one,
        defender m's payoff collapses to
        ``a_m x_m w_m + 1 - a_m - w_m * sum_j a_j q[j,m] w_j - cost * x_m``
        (the ``j = m`` cascade term is excluded by zeroing q's diagonal).
        """
        A = self._softmax_rows(XL)
        W = 1.0 / (1.0 + XL)
        q = np.where(np.eye(self._q.shape[0], dtype=bool), 0.0, self._q)
        # incoming[k, m] = sum_j a_j q[j, m] w_j
        incoming = np.sum((A * W)[:, :, None] * q[None, :, :], axis=1)
        u = A * XL * W + 1.0 - A - W * incoming - self._cost * XL
        return np.sum(ind[None, :] * u, axis=-1)

    def value_batch(self, i, profile, candidates):
        tree = self._tree
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))[:, 0]
        x = profile.flat
        xL = x[self._leaf_lo :]
        pa = tree.parent_of(i)
        ind = self._member[i]
        if tree.is_leaf(i):
            XL = np.repeat(xL[None, :], cand.shape[0], axis=0)
            XL[:, i - self._leaf0] = cand
            base = self._scale[i] * self._member_payoff_rows(XL, ind)
            nc = (cand - x[tree.slice_of(pa).start]) ** 2
            return base - self._kappa[i] * nc
        base = self._scale[i] * float(self._member_payoff_rows(xL[None, :], ind)[0])
        if pa is None:
            return np.full(cand.shape[0], base)
        nc = (cand - x[tree.slice_of(pa).start]) ** 2
        return base - self._kappa[i] * nc

    # -- derivatives ----------------------------------------------------------

    def _base_leaf_grad(self, i, xL):
        """d(sum of member base payoffs)/d(leaf actions), shape (n,)."""
        ind = self._member[i]
        lam = self._sharp
        a = self._softmax_rows(xL[None, :])[0]
        w = 1.0 / (1.0 + xL)
        s = xL * w
        q = np.where(np.eye(self._q.shape[0], dtype=bool), 0.0, self._q)
        aw = a * w
        # incoming[m] = sum_j a_j q[j, m] w_j and its action derivatives:
        # d incoming[m] / dx_n
        #   = sum_j (da_j/dx_n) q[j, m] w_j - a_n q[n, m] w_n**2
        #   = -lam * a_n * (q[n, m] w_n - incoming[m]) - a_n q[n, m] w_n**2.
        incoming = np.sum(aw[:, None] * q, axis=0)
        # Σ_m ind_m u_m with u_m = a_m s_m + 1 - a_m - w_m incoming[m] - c x_m.
        # Softmax derivative da_m/dx_n = -lam a_m (δ_mn - a_n).
        coef = ind * (s - 1.0)  # payoff term linear in a_m
        softmax_part = -lam * a * (coef - float(np.sum(a * coef)))
        own_part = ind * (a * w**2 - self._cost)
        w_ind = ind * w
        # -Σ_m ind_m w_m d(incoming[m])/dx_n, expanded with the softmax rule.
        cascade_out = lam * a * (
            np.sum(w_ind[None, :] * q * w[:, None], axis=1)
            - float(np.sum(w_ind * incoming))
        ) + a * w**2 * np.sum(w_ind[None, :] * q, axis=1)
        cascade_own = ind * w**2 * incoming
        return softmax_part + own_part + cascade_own + cascade_out

    def grad(self, i, wrt, profile):
        tree = self._tree
        if wrt not in tree.dependency_set(i):
            return np.zeros(1)
        x = profile.flat
        g = 0.0
        if tree.is_leaf(wrt):
            xL = x[self._leaf_lo :]
            g += self._scale[i] * self._base_leaf_grad(i, xL)[wrt - self._leaf0]
        pa = tree.parent_of(i)
        if pa is not None and wrt in (i, pa):
            gap = 2.0 * self._kappa[i] * (
                x[tree.slice_of(i).start] - x[tree.slice_of(pa).start]
            )
            g += gap if wrt == pa else -gap
        return np.array([g])

    def leaf_gradient(self, i, profile):
        tree = self._tree
        x = profile.flat
        xL = x[self._leaf_lo :]
        g = self._scale[i] * self._base_leaf_grad(i, xL)
        pa = tree.parent_of(i)
        if pa is not None and tree.is_leaf(i):
            g[i - self._leaf0] -= 2.0 * self._kappa[i] * (
                x[tree.slice_of(i).start] - x[tree.slice_of(pa).start]
            )
        return g


def make_security(
    kappa=0.5,
    interdependence=0.5,
    investment_cost: float = 0.2,
    attack_sharpness: float = 5.0,
    level_sizes=(1, 3, 6),
):
    """Build a hierarchical security game ``(tree, oracle)``.

    The default shape is one root over three sectors over six defenders
    (two per sector), with actions bounded to ``[0, 1]``.

    Args:
        kappa: compliance weight for non-root players (scalar or per-player).
        interdependence, investment_cost, attack_sharpness: payoff
            parameters, see :class:`SecurityOracle`.
        level_sizes: alternative tree shape; leaves are the defenders.
    """
    tree = build_tree(level_sizes, bounds=(0.0, 1.0))
    return tree, SecurityOracle(
        tree,
        kappa,
        interdependence=interdependence,
        investment_cost=investment_cost,
        attack_sharpness=attack_sharpness,
    )
