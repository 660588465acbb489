"""Level-sweep hierarchical gradient solver.

Each iteration evaluates every derivative at the entering profile (a Jacobi
sweep, leaves first): leaves back-propagate identity Jacobians, inner players
compose their children's leaf Jacobians with local response Jacobians, and
every player takes one ascent step along its hierarchical total gradient.
The box projection is applied once after the full sweep.

The iteration loop is shared with the one-shot gradient fields: it records a
thinned :class:`Trace`, declares convergence when the stacked-field norm
drops below ``grad_tol``, and stops early on divergence, on a singular
follower Hessian, or when the profile stops moving (boundary-pinned optima
never drive the raw gradient to zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from .core import ActionProfile, GameTree, UtilityOracle, check_game, rng_from
from .diff import _leaf_blocks, _local_response
from .errors import InvalidParams, SingularHessian

__all__ = [
    "SolverConfig",
    "Trace",
    "TraceEntry",
    "dbi_field",
    "field_function",
    "dbi_step",
    "dbi_solve",
    "DBISolver",
]


# ======================================================================
# Configuration and traces
# ======================================================================

@dataclass
class SolverConfig:
    """Knobs for the iterated-field solvers.

    Attributes:
        alpha: step size.
        max_iters: iteration budget.
        grad_tol: convergence threshold on the Euclidean norm of the stacked
            update field.
        seed: rng seed for random initialization.
        init: ``"random"`` (uniform over the box, or over ``[-1, 1]`` per
            unbounded coordinate) or an explicit flat vector / profile.
        record_every: trace thinning stride; ``None`` keeps at most ~10k
            evenly spaced entries plus the final one.
        stagnation_tol / stagnation_window: stop when the max coordinate
            displacement stays below the tolerance for this many consecutive
            iterations.
        divergence_norm: abort when any coordinate exceeds this magnitude.
    """

    alpha: float
    max_iters: int = 10_000
    grad_tol: float = 1e-3
    seed: int | None = 0
    init: object = "random"
    record_every: int | None = None
    stagnation_tol: float = 1e-12
    stagnation_window: int = 100
    divergence_norm: float = 1e8

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParams(f"alpha must be positive, got {self.alpha}")
        if int(self.max_iters) < 1:
            raise InvalidParams(f"max_iters must be >= 1, got {self.max_iters}")
        self.max_iters = int(self.max_iters)
        if not self.grad_tol > 0:
            raise InvalidParams(f"grad_tol must be positive, got {self.grad_tol}")
        if self.record_every is not None and int(self.record_every) < 1:
            raise InvalidParams("record_every must be >= 1")

    def stride(self) -> int:
        if self.record_every is not None:
            return int(self.record_every)
        return max(1, self.max_iters // 10_000)


@dataclass
class TraceEntry:
    iteration: int
    profile: np.ndarray
    player_grad_norms: np.ndarray
    field_norm: float


@dataclass
class Trace:
    """Thinned iterate history of one solver run.

    ``reason`` is one of ``grad_tol``, ``max_iters``, ``stagnation``,
    ``diverged``, ``singular_hessian``; ``converged`` is true only for
    ``grad_tol``.  Every entry's norms are evaluated at that entry's profile.
    """

    entries: list[TraceEntry] = dataclass_field(default_factory=list)
    converged: bool = False
    reason: str = "max_iters"
    final: np.ndarray | None = None
    n_iters: int = 0

    @property
    def iterations(self) -> np.ndarray:
        return np.array([e.iteration for e in self.entries], dtype=int)

    @property
    def field_norms(self) -> np.ndarray:
        return np.array([e.field_norm for e in self.entries])

    @property
    def profiles(self) -> np.ndarray:
        return np.stack([e.profile for e in self.entries])


# ======================================================================
# The update field
# ======================================================================

class _SweepPlan:
    """Precomputed traversal order for fast repeated field evaluation."""

    def __init__(self, tree: GameTree, oracle: UtilityOracle):
        self.tree = tree
        self.oracle = oracle
        self.bottom_up = [
            list(tree.players_at_level(l)) for l in range(tree.n_levels, 0, -1)
        ]
        self.eyes = {l: np.eye(tree.dim_of(l)) for l in tree.leaf_ids}
        # Slices of each leaf inside the stacked leaf-gradient vector.
        self.leaf_stack: dict[int, slice] = {}
        row = 0
        for l in tree.leaf_ids:
            d = tree.dim_of(l)
            self.leaf_stack[l] = slice(row, row + d)
            row += d
        self.vector_leaf_grad = (
            type(oracle).leaf_gradient is not UtilityOracle.leaf_gradient
        )

    def field(self, profile: ActionProfile):
        """Stacked total gradients plus per-player norms at ``profile``."""
        tree, oracle = self.tree, self.oracle
        out = np.empty(tree.n_dims)
        norms = np.empty(tree.n_players)
        blocks: dict[int, dict[int, np.ndarray]] = {}
        for level_players in self.bottom_up:
            for i in level_players:
                if tree.is_leaf(i):
                    blocks[i] = {i: self.eyes[i]}
                    g = oracle.grad(i, i, profile)
                else:
                    bl: dict[int, np.ndarray] = {}
                    for j in tree.children[i]:
                        R = _local_response(oracle, tree, j, profile)
                        for leaf, B in blocks[j].items():
                            bl[leaf] = B @ R
                    blocks[i] = bl
                    g = oracle.grad(i, i, profile)
                    if self.vector_leaf_grad and len(bl) > 2:
                        lg = oracle.leaf_gradient(i, profile)
                        for leaf, B in bl.items():
                            g = g + lg[self.leaf_stack[leaf]] @ B
                    else:
                        for leaf, B in bl.items():
                            g = g + oracle.grad(i, leaf, profile) @ B
                sl = tree.slice_of(i)
                out[sl] = g
                norms[i] = float(np.sqrt(np.dot(g, g)))
        return out, norms


def dbi_field(game, profile) -> np.ndarray:
    """The stacked hierarchical-total-gradient field at ``profile``."""
    tree, oracle = check_game(game)
    if not isinstance(profile, ActionProfile):
        profile = ActionProfile(tree, profile)
    vec, _ = _SweepPlan(tree, oracle).field(profile)
    return vec


def field_function(game) -> Callable[[np.ndarray], np.ndarray]:
    """Closure mapping a flat profile to the update field (plan reused)."""
    tree, oracle = check_game(game)
    plan = _SweepPlan(tree, oracle)
    work = ActionProfile(tree, np.zeros(tree.n_dims))

    def f(x: np.ndarray) -> np.ndarray:
        work.flat[:] = x
        vec, _ = plan.field(work)
        return vec

    return f


# ======================================================================
# Stepping and solving
# ======================================================================

def _initial_profile(tree: GameTree, config: SolverConfig) -> np.ndarray:
    init = config.init
    if isinstance(init, str):
        if init != "random":
            raise InvalidParams(f"unknown init {init!r}")
        rng = rng_from(config.seed)
        lo = np.where(np.isfinite(tree.lower), tree.lower, -1.0)
        hi = np.where(np.isfinite(tree.upper), tree.upper, 1.0)
        return rng.uniform(lo, hi)
    if isinstance(init, ActionProfile):
        init = init.flat
    x = np.asarray(init, dtype=float).reshape(-1).copy()
    if x.shape != (tree.n_dims,):
        raise InvalidParams(
            f"explicit init has shape {x.shape}, tree wants ({tree.n_dims},)"
        )
    if tree.is_bounded:
        x = np.clip(x, tree.lower, tree.upper)
    return x


def dbi_step(profile, game, config) -> tuple[ActionProfile, np.ndarray]:
    """One Jacobi sweep from ``profile``: returns the projected successor and
    the update field evaluated at the entering profile."""
    tree, oracle = check_game(game)
    if not isinstance(profile, ActionProfile):
        profile = ActionProfile(tree, profile)
    alpha = config.alpha if isinstance(config, SolverConfig) else float(config)
    vec, _ = _SweepPlan(tree, oracle).field(profile)
    x = profile.flat + alpha * vec
    if tree.is_bounded:
        x = np.clip(x, tree.lower, tree.upper)
    return ActionProfile(tree, x), vec


def _iterate(field_and_norms, tree: GameTree, config: SolverConfig,
             x0: np.ndarray | None = None) -> Trace:
    """Shared projected-ascent loop used by this solver and the one-shot
    fields; ``field_and_norms(profile) -> (vector, per-player norms)``."""
    x = _initial_profile(tree, config) if x0 is None else x0.copy()
    work = ActionProfile(tree, x.copy())
    stride = config.stride()
    trace = Trace()
    clip = tree.is_bounded

    def push(t, xs, norms, fnorm):
        trace.entries.append(TraceEntry(t, xs.copy(), norms.copy(), float(fnorm)))

    t = 0
    stagnant = 0
    reason = "max_iters"
    converged = False
    try:
        vec, norms = field_and_norms(work)
        while True:
            fnorm = float(np.sqrt(np.dot(vec, vec)))
            if t % stride == 0:
                push(t, x, norms, fnorm)
            if not np.isfinite(fnorm) or np.max(np.abs(x)) > config.divergence_norm:
                reason = "diverged"
                break
            if fnorm < config.grad_tol:
                reason = "grad_tol"
                converged = True
                break
            if t >= config.max_iters:
                reason = "max_iters"
                break
            x_new = x + config.alpha * vec
            if clip:
                x_new = np.clip(x_new, tree.lower, tree.upper)
            if float(np.max(np.abs(x_new - x))) < config.stagnation_tol:
                stagnant += 1
            else:
                stagnant = 0
            x = x_new
            t += 1
            work.flat[:] = x
            vec, norms = field_and_norms(work)
            if stagnant >= config.stagnation_window:
                fnorm = float(np.sqrt(np.dot(vec, vec)))
                reason = "stagnation"
                break
        if trace.entries and trace.entries[-1].iteration != t and np.isfinite(fnorm):
            push(t, x, norms, fnorm)
    except SingularHessian:
        reason = "singular_hessian"
        converged = False
    trace.converged = converged
    trace.reason = reason
    trace.final = x.copy()
    trace.n_iters = t
    return trace


def dbi_solve(game, config: SolverConfig) -> Trace:
    """Run the level-sweep solver to convergence or budget.

    Args:
        game: ``(tree, oracle)`` pair.
        config: see :class:`SolverConfig`.

    Returns:
        :class:`Trace` with thinned iterates; ``converged`` means the stacked
        total-gradient norm fell below ``config.grad_tol``.
    """
    tree, oracle = check_game(game)
    plan = _SweepPlan(tree, oracle)
    return _iterate(plan.field, tree, config)


# ======================================================================
# Estimator-style wrapper
# ======================================================================

class ParamsMixin:
    """get_params/set_params over the constructor signature."""

    @classmethod
    def _param_names(cls):
        import inspect

        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise InvalidParams(
                    f"invalid parameter {name!r} for {type(self).__name__}"
                )
            setattr(self, name, value)
        return self


class DBISolver(ParamsMixin):
    """Estimator-style front end to :func:`dbi_solve`.

    Parameters mirror :class:`SolverConfig`; fitted attributes are
    ``trace_``, ``final_profile_``, ``converged_``, ``reason_``, ``n_iter_``.
    """

    def __init__(self, alpha=1e-3, max_iters=10_000, grad_tol=1e-3, seed=0,
                 init="random", record_every=None):
        self.alpha = alpha
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.seed = seed
        self.init = init
        self.record_every = record_every

    def _config(self) -> SolverConfig:
        return SolverConfig(
            alpha=self.alpha,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
            init=self.init,
            record_every=self.record_every,
        )

    def fit(self, game):
        tree, _oracle = check_game(game)
        trace = dbi_solve(game, self._config())
        self.trace_ = trace
        self.final_profile_ = ActionProfile(tree, trace.final.copy())
        self.converged_ = trace.converged
        self.reason_ = trace.reason
        self.n_iter_ = trace.n_iters
        return self

    def predict(self, game=None) -> np.ndarray:
        """Final profile of the fitted run (flat)."""
        if not hasattr(self, "trace_"):
            raise InvalidParams("call fit() before predict()")
        return self.trace_.final.copy()
