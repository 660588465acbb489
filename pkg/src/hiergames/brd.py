"""Grid best-response solving and regret evaluation on player trees.

A profile's quality is measured by how much any single player could gain by
deviating.  For a player with subordinates, "deviating" means picking a new
action *and letting its subtree settle again*: the payoff of a candidate
action is evaluated at a re-equilibrated profile of the subgame below it,
computed by recursive rounds of level-wise best response over a finite grid
of actions.  This module implements that recursion three ways up:

* :func:`search` — one player's best grid deviation against a profile;
* :func:`compute_eps` — the per-player and worst-case deviation gains of a
  profile (its approximation error as a hierarchical equilibrium);
* :func:`brd_solve` — the same recursion used as a solver, by best-responding
  the root inside a virtual super-root game.

The candidate set of every search is the player's current action followed by
its grid, so the "stay put" payoff is the first batch entry and ties break
toward not moving.  Utilities are evaluated through the oracle's batch
pipeline, whose per-row reductions are batch-size independent; a leaf's
deviation gain is therefore exactly nonnegative.  When a round among leaf
players measures an exact-zero gain, every leaf kept its action bitwise and
no randomness was consumed, so all later rounds would repeat it verbatim —
those solves terminate early unconditionally.  Rounds over non-leaf players
carry no such guarantee (each re-equilibration draws fresh randomizations),
so they run their full budget unless zero-stopping is opted into.

:func:`local_regret` is the gradient-based counterpart used for smooth
unconstrained games: each player's gain is measured by restarting the
hierarchical-gradient dynamics with everything outside the player's subtree
frozen.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .core import ActionProfile, GameTree, check_game, rng_from
from .dbi import ParamsMixin, SolverConfig, _iterate, _SweepPlan
from .errors import InvalidParams

__all__ = [
    "Grid",
    "BRDConfig",
    "BRDResult",
    "RegretReport",
    "SearchOutcome",
    "search",
    "compute_eps",
    "brd_solve",
    "local_regret",
    "BRDSolver",
]


class Grid:
    """Finite candidate actions per player, uniform over the action box.

    Args:
        tree: the player tree.
        n_points: grid points per coordinate (e.g. 11 for steps of 0.1 over
            ``[0, 1]``); exclusive with ``spacing``.
        spacing: distance between adjacent points per coordinate; the box
            width must be an integer multiple of it.
        box: ``(lo, hi)`` fallback for coordinates whose tree bounds are
            infinite (a grid needs a bounded box; games with unbounded
            actions must supply one).

    Players with multi-dimensional actions get the cartesian product of
    their per-coordinate grids.
    """

    def __init__(self, tree: GameTree, n_points=None, spacing=None, box=None):
        if (n_points is None) == (spacing is None):
            raise InvalidParams("specify exactly one of n_points / spacing")
        lo = tree.lower.copy()
        hi = tree.upper.copy()
        if box is not None:
            blo, bhi = float(box[0]), float(box[1])
            if not blo < bhi:
                raise InvalidParams(f"empty grid box {box!r}")
            lo = np.where(np.isfinite(lo), lo, blo)
            hi = np.where(np.isfinite(hi), hi, bhi)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidParams(
                "the action space is unbounded; pass box=(lo, hi) to place "
                "the grid"
            )
        if np.any(lo >= hi):
            raise InvalidParams("grid needs a nondegenerate box on every axis")

        self.tree = tree
        axes = []
        for k in range(tree.n_dims):
            if n_points is not None:
                n = int(n_points)
                if n < 2:
                    raise InvalidParams("n_points must be at least 2")
            else:
                width = hi[k] - lo[k]
                steps = width / float(spacing)
                n = int(round(steps)) + 1
                if n < 2 or abs(steps - round(steps)) > 1e-9:
                    raise InvalidParams(
                        f"spacing {spacing} does not divide the box "
                        f"[{lo[k]}, {hi[k]}]"
                    )
            axes.append(np.linspace(lo[k], hi[k], n))
        self._points: list[np.ndarray] = []
        for i in range(tree.n_players):
            sl = tree.slice_of(i)
            own_axes = axes[sl.start : sl.stop]
            rows = np.array(list(itertools.product(*own_axes)))
            self._points.append(rows)

    def for_player(self, i: int) -> np.ndarray:
        """Candidate actions of player ``i``, shape ``(K_i, d_i)``."""
        return self._points[i]

    def random_action(self, i: int, rng: np.random.Generator) -> np.ndarray:
        """A uniformly drawn grid action for player ``i``."""
        rows = self._points[i]
        return rows[int(rng.integers(rows.shape[0]))]


@dataclass
class BRDConfig:
    """Knobs of the best-response recursion.

    Args:
        rounds: best-response rounds per subgame solve (every level).
        seed: seed for the child re-randomization draws.
        stop_on_zero_eps: also stop solves over *non-leaf* children early on
            an exact-zero round gain.  Off by default: such a round proves
            nothing (the next round re-randomizes the subgames below and may
            measure differently), whereas a zero round among leaf children is
            a bitwise fixed point and always terminates the solve regardless
            of this flag.
    """

    rounds: int = 20
    seed: int = 0
    stop_on_zero_eps: bool = False

    def __post_init__(self):
        if int(self.rounds) < 1:
            raise InvalidParams("rounds must be positive")
        self.rounds = int(self.rounds)


@dataclass
class SearchOutcome:
    """Best grid deviation of one player against a fixed profile.

    ``best_profile`` is the full flat profile after the deviation and the
    re-equilibration below it; ``current_u`` / ``current_eps`` come from
    re-equilibrating the *unchanged* action (the first candidate), which is
    what round gains are measured against.
    """

    player: int
    best_action: np.ndarray
    best_u: float
    best_profile: np.ndarray
    current_u: float
    current_eps: float


@dataclass
class BRDResult:
    """Outcome of a best-response solve.

    ``eps`` is the smallest measured round gain and ``profile`` the profile
    it was measured at; ``history`` holds ``(round, eps, wall_seconds)`` per
    top-level round.
    """

    profile: np.ndarray
    eps: float
    rounds: int
    history: list[tuple[int, float, float]] = dataclass_field(default_factory=list)


@dataclass
class RegretReport:
    """Per-player deviation gains of a profile.

    ``global_regret`` is the worst gain over all players.  Entries of leaf
    players are exactly nonnegative; an upper player's entry compares its
    best re-equilibrated deviation against its raw payoff and may come out
    negative when the profile already sits above its re-equilibrated value.
    """

    per_player: np.ndarray

    @property
    def global_regret(self) -> float:
        return float(np.max(self.per_player))


class _Session:
    """One solve/evaluation run: game + grid + config + a shared generator."""

    def __init__(self, game, grid: Grid, config: BRDConfig):
        self.tree, self.oracle = check_game(game)
        if grid.tree.n_dims != self.tree.n_dims:
            raise InvalidParams("grid was built for a different tree")
        self.grid = grid
        self.config = config
        self.rng = rng_from(config.seed)

    # -- the mutual recursion ----------------------------------------------

    def search(self, profile: ActionProfile, i: int) -> SearchOutcome:
        """Best deviation of player ``i`` with its subtree re-equilibrated."""
        tree = self.tree
        current = profile.get(i).copy()
        cands = np.vstack([current[None, :], self.grid.for_player(i)])
        if tree.is_leaf(i):
            u = self.oracle.value_batch(i, profile, cands)
            k = int(np.argmax(u))
            best = profile.flat.copy()
            best[tree.slice_of(i)] = cands[k]
            return SearchOutcome(
                player=i,
                best_action=cands[k].copy(),
                best_u=float(u[k]),
                best_profile=best,
                current_u=float(u[0]),
                current_eps=0.0,
            )
        best_u = -np.inf
        best_k = 0
        best_profile = None
        current_u = np.nan
        current_eps = 0.0
        work = profile.copy()
        for k, cand in enumerate(cands):
            work.flat[:] = profile.flat
            work.set(i, cand)
            u_k, eps_k, x_k = self.re_eq(work, i)
            if k == 0:
                current_u, current_eps = u_k, eps_k
            if u_k > best_u:
                best_u, best_k, best_profile = u_k, k, x_k
        return SearchOutcome(
            player=i,
            best_action=cands[best_k].copy(),
            best_u=best_u,
            best_profile=best_profile,
            current_u=current_u,
            current_eps=current_eps,
        )

    def re_eq(self, profile: ActionProfile, i: int):
        """Settle the subgame below ``i``; returns ``(u_i, eps, flat profile)``.

        A leaf has nothing below it: its payoff is returned as-is with zero
        error, and the profile is untouched.
        """
        tree = self.tree
        if tree.is_leaf(i):
            return self.oracle.value(i, profile), 0.0, profile.flat.copy()
        x_star, eps, _ = self.solve_below(i, profile)
        settled = ActionProfile(tree, x_star)
        return self.oracle.value(i, settled), eps, x_star

    def solve_below(self, parent, profile: ActionProfile, record=None):
        """Rounds of level-wise best response among ``parent``'s children.

        ``parent=None`` plays a virtual super-root whose only child is the
        root, which makes the recursion solve the whole game.  Children are
        first re-randomized onto the grid; each round then measures every
        child's deviation gain against the entering profile and replaces the
        child-and-descendants dimensions with its re-equilibrated best.  The
        result is the entering profile of the round with the smallest
        measured gain, ties to the earliest.
        """
        tree = self.tree
        children = [0] if parent is None else list(tree.children[parent])
        leaves_only = all(tree.is_leaf(j) for j in children)
        x = profile.copy()
        for j in children:
            x.set(j, self.grid.random_action(j, self.rng))

        best_eps = np.inf
        best_x = x.flat.copy()
        rounds_run = 0
        t0 = time.perf_counter()
        work = x.copy()
        for t in range(self.config.rounds):
            round_eps = 0.0
            replacements = []
            for j in children:
                if tree.is_leaf(j):
                    # A leaf re-equilibrates to itself, so its stay-put payoff
                    # is exactly the first entry of the search batch.
                    out = self.search(x, j)
                    u_cur, eps_des = out.current_u, 0.0
                else:
                    # Re-equilibrate the unchanged action independently of the
                    # candidate search: both draw fresh randomizations, which
                    # keeps the measured gain an honest sample rather than a
                    # self-comparison.
                    work.flat[:] = x.flat
                    u_cur, eps_des, _ = self.re_eq(work, j)
                    out = self.search(x, j)
                eps_j = max(eps_des, out.best_u - u_cur)
                round_eps = max(round_eps, eps_j)
                replacements.append((j, out.best_profile))
            rounds_run = t + 1
            if round_eps < best_eps:
                best_eps = round_eps
                best_x = x.flat.copy()
            if record is not None:
                record.append((t, float(round_eps), time.perf_counter() - t0))
            for j, src in replacements:
                sl = tree.slice_of(j)
                x.flat[sl] = src[sl]
                for d in tree.descendants_of(j):
                    sl = tree.slice_of(d)
                    x.flat[sl] = src[sl]
            if round_eps == 0.0 and (leaves_only or self.config.stop_on_zero_eps):
                # Among leaf children a zero round is exact: every search tied
                # toward staying put, the profile is bitwise unchanged, and no
                # randomness was drawn, so every further round is an identical
                # no-op.  With non-leaf children the same signal is only
                # heuristic and must be opted into.
                break
        return best_x, float(best_eps), rounds_run


def search(game, profile, i, grid: Grid, config: BRDConfig | None = None) -> SearchOutcome:
    """Best grid deviation of player ``i`` against ``profile``.

    The candidate set is the current action plus the player's grid; for a
    non-leaf player every candidate is scored on its re-equilibrated
    subtree profile (see :class:`BRDConfig` for the recursion knobs).
    """
    session = _Session(game, grid, config or BRDConfig())
    profile = _as_profile(session.tree, profile)
    return session.search(profile, session.tree.check_player(i))


def compute_eps(game, profile, grid: Grid, config: BRDConfig | None = None) -> RegretReport:
    """Deviation gains of every player at ``profile``.

    Player ``i``'s entry is its best re-equilibrated grid deviation payoff
    minus its payoff at ``profile``.  The report's ``global_regret`` is the
    exact maximum over players and is nonnegative: each leaf's own payoff is
    the first entry of the very batch its deviations are scored in.
    """
    session = _Session(game, grid, config or BRDConfig())
    tree = session.tree
    profile = _as_profile(tree, profile)
    eps = np.empty(tree.n_players)
    for i in range(tree.n_players):
        out = session.search(profile, i)
        eps[i] = out.best_u - session.oracle.value(i, profile)
    return RegretReport(per_player=eps)


def brd_solve(game, grid: Grid, config: BRDConfig | None = None) -> BRDResult:
    """Solve the whole game by best response from a virtual super-root.

    The root is treated as the single child of a fictitious player, so it
    best-responds over its own grid like everyone below it.  Returns the
    entering profile of the top-level round that measured the smallest
    deviation gain, with per-round ``(round, eps, wall_seconds)`` history.
    """
    config = config or BRDConfig()
    session = _Session(game, grid, config)
    tree = session.tree
    start = ActionProfile(tree, np.zeros(tree.n_dims))
    for i in range(tree.n_players):
        start.set(i, grid.random_action(i, session.rng))
    history: list[tuple[int, float, float]] = []
    x, eps, rounds = session.solve_below(None, start, record=history)
    return BRDResult(profile=x, eps=eps, rounds=rounds, history=history)


def local_regret(game, profile, config: SolverConfig) -> RegretReport:
    """Gradient-based deviation gains for smooth games.

    For each player, restart the hierarchical-gradient dynamics from
    ``profile`` with every dimension outside the player's subtree frozen,
    and measure the player's payoff improvement at the profile it settles
    on (a failed or harmful restart counts as zero gain — staying put is
    always available).
    """
    tree, oracle = check_game(game)
    profile = _as_profile(tree, profile)
    plan = _SweepPlan(tree, oracle)
    gains = np.empty(tree.n_players)
    for i in range(tree.n_players):
        moving = np.zeros(tree.n_dims, dtype=bool)
        moving[tree.slice_of(i)] = True
        for d in tree.descendants_of(i):
            moving[tree.slice_of(d)] = True
        frozen_players = np.array(
            [p != i and p not in tree.descendants_of(i) for p in range(tree.n_players)]
        )

        def masked(work, _m=moving, _fp=frozen_players):
            vec, norms = plan.field(work)
            vec = np.where(_m, vec, 0.0)
            norms = np.where(_fp, 0.0, norms)
            return vec, norms

        trace = _iterate(masked, tree, config, x0=profile.flat)
        base = oracle.value(i, profile)
        settled = oracle.value(i, ActionProfile(tree, trace.final))
        gains[i] = max(settled - base, 0.0)
    return RegretReport(per_player=gains)


def _as_profile(tree: GameTree, profile) -> ActionProfile:
    if isinstance(profile, ActionProfile):
        return profile
    return ActionProfile(tree, np.asarray(profile, dtype=float))


class BRDSolver(ParamsMixin):
    """Estimator-style front end to :func:`brd_solve`.

    Parameters mirror :class:`BRDConfig` plus the grid resolution; fitted
    attributes are ``result_``, ``final_profile_``, ``eps_`` and
    ``history_``.
    """

    def __init__(self, n_points=None, spacing=None, box=None, rounds=20,
                 seed=0, stop_on_zero_eps=False):
        self.n_points = n_points
        self.spacing = spacing
        self.box = box
        self.rounds = rounds
        self.seed = seed
        self.stop_on_zero_eps = stop_on_zero_eps

    def fit(self, game):
        tree, _oracle = check_game(game)
        grid = Grid(tree, n_points=self.n_points, spacing=self.spacing,
                    box=self.box)
        config = BRDConfig(rounds=self.rounds, seed=self.seed,
                           stop_on_zero_eps=self.stop_on_zero_eps)
        result = brd_solve(game, grid, config)
        self.result_ = result
        self.final_profile_ = ActionProfile(tree, result.profile.copy())
        self.eps_ = result.eps
        self.history_ = list(result.history)
        return self

    def predict(self, game=None) -> np.ndarray:
        """Final profile of the fitted run (flat)."""
        if not hasattr(self, "result_"):
            raise InvalidParams("call fit() before predict()")
        return self.result_.profile.copy()
