"""One-shot gradient fields that ignore the hierarchy.

These are the standard simultaneous-play update rules evaluated on the same
games as the level-sweep solver; all of them read only first-order partials
(plus a finite-difference Jacobian of the stacked field where required):

    SIM      G = (∇_{x_1}u_1, ..., ∇_{x_n}u_n)
    SYM      G + G A,  A = (J - Jᵀ)/2,  J the Jacobian of SIM
    SYM_ALN  G + ζ G A with ζ = sign((1/2d)(H·G)(H·(G A)) + 0.1), H the HAM field
    HAM      -∇‖G‖² = -2 Jᵀ G
    CO       G + γ (-2 Jᵀ G), γ = 0.1

Row-vector convention throughout: the correction ``G A`` multiplies the field
from the left.  ``iterate_field`` runs projected ascent on any of these with
the same trace/termination machinery as the hierarchical solver.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import ActionProfile, check_game
from .dbi import ParamsMixin, SolverConfig, Trace, _iterate
from .errors import InvalidParams

__all__ = [
    "FIELD_KINDS",
    "field_sim",
    "field_jacobian",
    "field_sym",
    "field_ham",
    "field_co",
    "make_field",
    "iterate_field",
    "FieldDynamics",
]

FIELD_KINDS = ("sim", "sym", "sym_aln", "ham", "co")

DEFAULT_GAMMA = 0.1
JAC_FD_STEP = 1e-5


def _sim_closure(game) -> tuple[Callable[[np.ndarray], np.ndarray], object]:
    tree, oracle = check_game(game)
    work = ActionProfile(tree, np.zeros(tree.n_dims))
    slices = [tree.slice_of(i) for i in range(tree.n_players)]

    def sim(x: np.ndarray) -> np.ndarray:
        work.flat[:] = x
        out = np.empty(tree.n_dims)
        for i, sl in enumerate(slices):
            out[sl] = oracle.grad(i, i, work)
        return out

    return sim, tree


def _fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                 rel_step: float) -> np.ndarray:
    """Central-difference Jacobian of ``f`` with per-coordinate step
    ``rel_step * max(1, |x_k|)``."""
    n = x.shape[0]
    cols = []
    for k in range(n):
        h = rel_step * max(1.0, abs(x[k]))
        xp = x.copy()
        xp[k] += h
        xm = x.copy()
        xm[k] -= h
        cols.append((f(xp) - f(xm)) / (2.0 * h))
    return np.stack(cols, axis=1)


# ======================================================================
# Public one-shot evaluations
# ======================================================================

def _flat(game, profile) -> np.ndarray:
    tree, _ = check_game(game)
    if isinstance(profile, ActionProfile):
        return profile.flat
    x = np.asarray(profile, dtype=float)
    if x.shape != (tree.n_dims,):
        raise InvalidParams(f"profile has shape {x.shape}, want ({tree.n_dims},)")
    return x


def field_sim(game, profile) -> np.ndarray:
    """Stacked per-player own gradients at ``profile``."""
    sim, _ = _sim_closure(game)
    return sim(_flat(game, profile))


def field_jacobian(game, profile, field: Callable[[np.ndarray], np.ndarray] | None = None,
                   rel_step: float = JAC_FD_STEP) -> np.ndarray:
    """Finite-difference Jacobian of an update field (default: SIM).

    Args:
        field: optional flat-vector field closure to differentiate instead of
            the simultaneous field (e.g. the hierarchical one).
        rel_step: relative central-difference step.
    """
    x = _flat(game, profile)
    if field is None:
        field, _ = _sim_closure(game)
    return _fd_jacobian(field, x, rel_step)


def field_ham(game, profile) -> np.ndarray:
    """Steepest-descent field on ‖SIM‖²: ``-2 Jᵀ G``."""
    sim, _ = _sim_closure(game)
    x = _flat(game, profile)
    G = sim(x)
    J = _fd_jacobian(sim, x, JAC_FD_STEP)
    return -2.0 * (J.T @ G)


def field_co(game, profile, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """SIM corrected toward the ‖G‖² descent direction."""
    sim, _ = _sim_closure(game)
    x = _flat(game, profile)
    G = sim(x)
    J = _fd_jacobian(sim, x, JAC_FD_STEP)
    return G + gamma * (-2.0 * (J.T @ G))


def field_sym(game, profile, aligned: bool = False) -> np.ndarray:
    """Antisymmetric-correction field ``G + G A`` (optionally sign-aligned).

    With ``aligned`` the correction is multiplied by
    ``ζ = sign((1/2d)(H Gᵀ)(H (G A)ᵀ) + 0.1)`` where ``H = -2 Jᵀ G`` and ``d``
    is the total action dimension.
    """
    sim, tree = _sim_closure(game)
    x = _flat(game, profile)
    G = sim(x)
    J = _fd_jacobian(sim, x, JAC_FD_STEP)
    A = 0.5 * (J - J.T)
    corr = G @ A
    if not aligned:
        return G + corr
    H = -2.0 * (J.T @ G)
    zeta = np.sign(float(H @ G) * float(H @ corr) / (2.0 * tree.n_dims) + 0.1)
    return G + zeta * corr


def make_field(game, kind: str, gamma: float = DEFAULT_GAMMA):
    """Closure ``x -> field(x)`` for one of :data:`FIELD_KINDS`."""
    if kind not in FIELD_KINDS:
        raise InvalidParams(f"unknown field kind {kind!r}, pick from {FIELD_KINDS}")
    sim, tree = _sim_closure(game)

    if kind == "sim":
        return sim, tree

    def f(x: np.ndarray) -> np.ndarray:
        G = sim(x)
        J = _fd_jacobian(sim, x, JAC_FD_STEP)
        if kind == "ham":
            return -2.0 * (J.T @ G)
        if kind == "co":
            return G + gamma * (-2.0 * (J.T @ G))
        A = 0.5 * (J - J.T)
        corr = G @ A
        if kind == "sym":
            return G + corr
        H = -2.0 * (J.T @ G)
        zeta = np.sign(float(H @ G) * float(H @ corr) / (2.0 * tree.n_dims) + 0.1)
        return G + zeta * corr

    return f, tree


# ======================================================================
# Iterated dynamics
# ======================================================================

def iterate_field(game, kind: str, config: SolverConfig,
                  gamma: float = DEFAULT_GAMMA) -> Trace:
    """Projected ascent along one of the one-shot fields.

    Termination, thinning, and the :class:`~hiergames.dbi.Trace` format match
    the hierarchical solver; the per-player norms recorded in the trace are
    the per-player blocks of the active field.
    """
    f, tree = make_field(game, kind, gamma)
    slices = [tree.slice_of(i) for i in range(tree.n_players)]

    def field_and_norms(profile: ActionProfile):
        vec = f(profile.flat)
        norms = np.array(
            [float(np.sqrt(np.dot(vec[sl], vec[sl]))) for sl in slices]
        )
        return vec, norms

    return _iterate(field_and_norms, tree, config)


class FieldDynamics(ParamsMixin):
    """Estimator-style front end to :func:`iterate_field`."""

    def __init__(self, kind="sim", alpha=1e-3, max_iters=10_000, grad_tol=1e-3,
                 seed=0, init="random", record_every=None, gamma=DEFAULT_GAMMA):
        self.kind = kind
        self.alpha = alpha
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed
        self.init = init
        self.record_every = record_every
        self.gamma = gamma

    def fit(self, game):
        config = SolverConfig(
            alpha=self.alpha,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
            init=self.init,
            record_every=self.record_every,
        )
        trace = iterate_field(game, self.kind, config, gamma=self.gamma)
        self.trace_ = trace
        self.converged_ = trace.converged
        self.reason_ = trace.reason
        self.n_iter_ = trace.n_iters
        return self
