"""Hierarchical epidemic-policy games.

Players sit on a 2- or 3-level tree (e.g. a national government over states,
optionally over counties).  Every action is a scalar *contact factor* in
``[0, 1]``: the fraction of normal social contact a jurisdiction permits.
Only leaf actions are implemented; upper levels issue recommendations and
penalize deviation.

Each leaf ``a`` has a fixed population ``N_a``, of which ``I_a`` individuals
are infected before any intervention.  A transport matrix ``R`` gives the
proportion of jurisdiction ``a'``'s population active inside jurisdiction
``a``, so scaling actions down reduces mixing multiplicatively.  The cost of
a leaf splits into three parts:

* infection cost — expected fraction of its susceptible population newly
  infected through contact with active infected visitors,
  ``mu * M * x_a * (N_a - I_a) / N_a**2 * sum_{a'} R[a,a'] * I_{a'} * x_{a'}``,
  where ``M`` is the mean number of contacts and ``mu`` the per-contact
  transmission probability;
* lockdown cost — the forgone activity ``1 - x_a``;
* non-compliance cost — ``(x_a - x_parent)**2``.

A non-leaf player aggregates the infection and lockdown costs of its leaf
descendants weighted by population share (the per-child population averages
telescope down the tree), and adds its own non-compliance penalty; the root
has no parent and therefore no compliance term.  Player ``i`` mixes the
parts with weights ``kappa_i`` (infection), ``eta_i`` (lockdown) and
``1 - kappa_i - eta_i`` (non-compliance), and its payoff is the negative
total cost.

All derivatives are analytic; candidate batches evaluate with elementwise
kernels whose reduction order does not depend on the batch size, so a grid
search that includes the current action reproduces its payoff bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..core import ActionProfile, GameTree, UtilityOracle, build_tree, rng_from
from ..errors import InvalidParams, InvalidWeights

__all__ = [
    "EpidemicOracle",
    "make_epidemic",
    "EPIDEMIC_BENCHMARK_SHAPES",
]

# The four tree shapes used by the regret benchmarks, with their grid
# resolutions and best-response round budgets (see tests/CLI).
EPIDEMIC_BENCHMARK_SHAPES = {
    (1, 20): {"grid_points": 101, "rounds": 100},
    (1, 50): {"grid_points": 101, "rounds": 100},
    (1, 2, 4): {"grid_points": 11, "rounds": 20},
    (1, 2, 10): {"grid_points": 11, "rounds": 20},
}

# Default cost weights by level, keyed by tree depth.  Exact-shape entries
# override the depth defaults (the (1,2,4) benchmark weighs county lockdown
# costs more heavily than the (1,2,10) one).
_KAPPA_BY_DEPTH = {2: {1: 0.2, 2: 0.5}, 3: {1: 0.8, 2: 0.5, 3: 0.5}}
_ETA_BY_DEPTH = {2: {2: 0.2}, 3: {2: 0.2, 3: 0.2}}
_ETA_BY_SHAPE = {(1, 2, 4): {2: 0.2, 3: 0.3}}


class EpidemicOracle(UtilityOracle):
    """Analytic oracle for the epidemic-policy cost model.

    Args:
        tree: player tree; scalar actions, at least two levels.
        populations: per-leaf population sizes ``N_a``, positive.
        initial_infected: per-leaf pre-intervention infected counts ``I_a``
            with ``0 < I_a < N_a``.
        kappa: per-player infection-cost weights (length ``n_players``).
        eta: per-player lockdown-cost weights.  Weights must be nonnegative
            with ``kappa + eta <= 1``; the root, having no compliance cost,
            must satisfy ``kappa + eta == 1`` exactly.
        transport: ``(n_leaves, n_leaves)`` nonnegative mixing matrix; by
            default every entry is ``1 / n_leaves`` (uniform mixing).
        contact_rate: mean number of contacts ``M`` per susceptible.
        infection_prob: per-contact transmission probability ``mu``.
    """

    def __init__(
        self,
        tree: GameTree,
        populations,
        initial_infected,
        kappa,
        eta,
        transport=None,
        contact_rate: float = 20.0,
        infection_prob: float = 0.3,
    ):
        super().__init__(tree)
        if tree.n_levels < 2:
            raise InvalidParams("epidemic games need at least two levels")
        if any(tree.dim_of(i) != 1 for i in range(tree.n_players)):
            raise InvalidParams("epidemic games use scalar actions")

        n = len(tree.leaf_ids)
        self._leaf0 = tree.leaf_ids[0]
        self._leaf_lo = tree.slice_of(self._leaf0).start

        pop = np.asarray(populations, dtype=float)
        inf0 = np.asarray(initial_infected, dtype=float)
        if pop.shape != (n,) or inf0.shape != (n,):
            raise InvalidParams(
                f"populations and initial_infected must have shape ({n},)"
            )
        if np.any(pop <= 0):
            raise InvalidParams("populations must be positive")
        if np.any(inf0 <= 0) or np.any(inf0 >= pop):
            raise InvalidParams(
                "initial infected counts must lie strictly between 0 and the "
                "population"
            )
        if transport is None:
            transport = np.full((n, n), 1.0 / n)
        else:
            transport = np.asarray(transport, dtype=float)
            if transport.shape != (n, n) or np.any(transport < 0):
                raise InvalidParams(
                    f"transport must be a nonnegative ({n}, {n}) matrix"
                )
        if not 0.0 < infection_prob < 1.0:
            raise InvalidParams("infection_prob must lie in (0, 1)")
        if contact_rate <= 0:
            raise InvalidParams("contact_rate must be positive")

        kappa = np.asarray(kappa, dtype=float)
        eta = np.asarray(eta, dtype=float)
        m = tree.n_players
        if kappa.shape != (m,) or eta.shape != (m,):
            raise InvalidWeights(f"kappa and eta must have shape ({m},)")
        if np.any(kappa < 0) or np.any(eta < 0):
            raise InvalidWeights("cost weights must be nonnegative")
        if np.any(kappa + eta > 1.0 + 1e-12):
            raise InvalidWeights("kappa + eta must not exceed 1")
        if abs(kappa[0] + eta[0] - 1.0) > 1e-12:
            raise InvalidWeights(
                "the root has no compliance cost, so its kappa + eta must "
                "equal 1"
            )

        self._pop = pop
        self._inf0 = inf0
        self._kappa = kappa
        self._eta = eta
        self._nu = 1.0 - kappa - eta
        self._contact_rate = float(contact_rate)
        self._infection_prob = float(infection_prob)
        # Susceptibility factor of each leaf: infections per unit of
        # (own action) x (incoming infected activity).
        self._K = contact_rate * infection_prob * (pop - inf0) / pop**2
        # P[a, a'] is the pre-intervention infected activity a' sends to a.
        self._P = transport * inf0[None, :]
        # omega[i] weights leaf costs into player i's aggregate: an indicator
        # for a leaf, population shares over leaf descendants otherwise.
        omega = np.zeros((m, n))
        for i in range(m):
            if tree.is_leaf(i):
                omega[i, i - self._leaf0] = 1.0
            else:
                desc = tree.subtree_leaf_ids(i)
                idx = [d - self._leaf0 for d in desc]
                omega[i, idx] = pop[idx] / pop[idx].sum()
        self._omega = omega

    # -- values ---------------------------------------------------------------

    def value_batch(self, i, profile, candidates):
        tree = self._tree
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))
        x = profile.flat
        xL = x[self._leaf_lo :]
        w = self._omega[i]
        pa = tree.parent_of(i)
        if tree.is_leaf(i):
            XL = np.repeat(xL[None, :], cand.shape[0], axis=0)
            XL[:, i - self._leaf0] = cand[:, 0]
            incoming = np.sum(self._P[None, :, :] * XL[:, None, :], axis=-1)
            c_inf = np.sum(w[None, :] * (self._K[None, :] * XL * incoming), axis=-1)
            c_dec = np.sum(w[None, :] * (1.0 - XL), axis=-1)
            c_nc = (cand[:, 0] - x[tree.slice_of(pa).start]) ** 2
            cost = self._kappa[i] * c_inf + self._eta[i] * c_dec + self._nu[i] * c_nc
            return -cost
        incoming = np.sum(self._P * xL[None, :], axis=-1)
        c_inf = np.sum(w * (self._K * xL * incoming), axis=-1)
        c_dec = np.sum(w * (1.0 - xL), axis=-1)
        base = self._kappa[i] * c_inf + self._eta[i] * c_dec
        if pa is None:
            return np.full(cand.shape[0], -base)
        c_nc = (cand[:, 0] - x[tree.slice_of(pa).start]) ** 2
        return -(base + self._nu[i] * c_nc)

    # -- derivatives ----------------------------------------------------------

    def _infection_grad_at(self, i, m, xL):
        """d(infection cost of player i)/d(leaf m's action)."""
        w = self._omega[i]
        incoming_m = float(np.sum(self._P[m] * xL))
        return w[m] * self._K[m] * incoming_m + float(
            np.sum(w * self._K * xL * self._P[:, m])
        )

    def grad(self, i, wrt, profile):
        tree = self._tree
        if wrt not in tree.dependency_set(i):
            return np.zeros(1)
        x = profile.flat
        g = 0.0
        if tree.is_leaf(wrt):
            xL = x[self._leaf_lo :]
            m = wrt - self._leaf0
            g -= self._kappa[i] * self._infection_grad_at(i, m, xL)
            g += self._eta[i] * self._omega[i, m]
        pa = tree.parent_of(i)
        if pa is not None and wrt in (i, pa):
            gap = 2.0 * self._nu[i] * (x[tree.slice_of(i).start] - x[tree.slice_of(pa).start])
            g += gap if wrt == pa else -gap
        return np.array([g])

    def hess(self, i, a, b, profile):
        tree = self._tree
        dep = tree.dependency_set(i)
        if a not in dep or b not in dep:
            return np.zeros((1, 1))
        h = 0.0
        if tree.is_leaf(a) and tree.is_leaf(b):
            w = self._omega[i]
            am, bm = a - self._leaf0, b - self._leaf0
            h -= self._kappa[i] * (
                w[am] * self._K[am] * self._P[am, bm]
                + w[bm] * self._K[bm] * self._P[bm, am]
            )
        pa = tree.parent_of(i)
        if pa is not None and {a, b} <= {i, pa}:
            h += 2.0 * self._nu[i] * (1.0 if a != b else -1.0)
        return np.array([[h]])

    def leaf_gradient(self, i, profile):
        tree = self._tree
        x = profile.flat
        xL = x[self._leaf_lo :]
        w = self._omega[i]
        incoming = np.sum(self._P * xL[None, :], axis=-1)
        weighted = w * self._K * xL
        g = -self._kappa[i] * (
            w * self._K * incoming + np.sum(self._P * weighted[:, None], axis=0)
        ) + self._eta[i] * w
        pa = tree.parent_of(i)
        if pa is not None and tree.is_leaf(i):
            g[i - self._leaf0] -= 2.0 * self._nu[i] * (
                x[tree.slice_of(i).start] - x[tree.slice_of(pa).start]
            )
        return g


def _weights_per_player(spec, tree: GameTree, by_level, name):
    """Normalize a weight spec to a per-player array.

    ``spec`` may be ``None`` (use ``by_level``), a scalar (every level), a
    ``{level: value}`` mapping, or a full per-player sequence.
    """
    m = tree.n_players
    if spec is None:
        spec = by_level
    if np.isscalar(spec):
        spec = {lvl: float(spec) for lvl in range(1, tree.n_levels + 1)}
    if isinstance(spec, dict):
        out = np.full(m, np.nan)
        for i in range(m):
            lvl = tree.level_of(i)
            if lvl in spec:
                out[i] = spec[lvl]
        return out
    out = np.asarray(spec, dtype=float)
    if out.shape != (m,):
        raise InvalidWeights(
            f"{name} must be a scalar, a level mapping, or {m} per-player values"
        )
    return out


def make_epidemic(
    level_sizes,
    seed=0,
    kappa=None,
    eta=None,
    populations=None,
    initial_infected=None,
    initial_infected_fraction: float = 0.01,
    transport=None,
    contact_rate: float = 20.0,
    infection_prob: float = 0.3,
    population_range=(1e4, 1e6),
    parent_assignment=None,
):
    """Build an epidemic-policy game ``(tree, oracle)``.

    Args:
        level_sizes: players per level, e.g. ``(1, 2, 10)``; leaves carry the
            populations.  Actions are scalars bounded to ``[0, 1]``.
        seed: RNG seed for the default populations, drawn uniformly from
            ``population_range`` (unused if ``populations`` is given).
        kappa, eta: cost weights — a scalar, a ``{level: value}`` mapping, or
            per-player sequences.  Defaults depend on the tree depth (and,
            for ``eta``, on the exact benchmark shape); the root's ``eta``
            is filled in as ``1 - kappa_root`` when not specified.
        populations: explicit per-leaf populations (overrides the draw).
        initial_infected: explicit per-leaf infected counts; by default
            ``initial_infected_fraction`` of each population.
        transport, contact_rate, infection_prob: epidemic parameters, see
            :class:`EpidemicOracle`.
        parent_assignment: explicit child->parent map per level; leaves are
            split evenly among their level's parents by default.
    """
    level_sizes = tuple(int(s) for s in level_sizes)
    depth = len(level_sizes)
    if depth not in _KAPPA_BY_DEPTH:
        raise InvalidParams("epidemic games are defined for 2 or 3 levels")
    tree = build_tree(
        level_sizes, parent_assignment, action_dims=1, bounds=(0.0, 1.0)
    )
    rng = rng_from(seed)
    n = len(tree.leaf_ids)
    if populations is None:
        populations = rng.uniform(*population_range, size=n)
    if initial_infected is None:
        if not 0.0 < initial_infected_fraction < 1.0:
            raise InvalidParams("initial_infected_fraction must lie in (0, 1)")
        initial_infected = initial_infected_fraction * np.asarray(
            populations, dtype=float
        )

    eta_default = _ETA_BY_SHAPE.get(level_sizes, _ETA_BY_DEPTH[depth])
    kappa_arr = _weights_per_player(kappa, tree, _KAPPA_BY_DEPTH[depth], "kappa")
    if np.isscalar(eta):
        # A scalar eta describes the recommendation levels; the root's share
        # is forced by kappa below.
        eta = {lvl: float(eta) for lvl in range(2, depth + 1)}
    eta_arr = _weights_per_player(eta, tree, eta_default, "eta")
    if np.isnan(kappa_arr).any():
        raise InvalidWeights("kappa is missing a value for some level")
    if np.isnan(eta_arr[0]):
        eta_arr[0] = 1.0 - kappa_arr[0]
    if np.isnan(eta_arr).any():
        raise InvalidWeights("eta is missing a value for some non-root level")

    oracle = EpidemicOracle(
        tree,
        populations,
        initial_infected,
        kappa_arr,
        eta_arr,
        transport=transport,
        contact_rate=contact_rate,
        infection_prob=infection_prob,
    )
    return tree, oracle
