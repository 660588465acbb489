"""Core structures for games on player trees.

A structured hierarchical game places one player per node of a rooted tree
with ``L`` levels (root level is 1, leaves are level ``L``).  Each player
``i`` owns a real action block ``x_i`` of dimension ``d_i``; a joint profile
is the concatenation of all blocks in breadth-first player order.  Utilities
follow the structural restriction that ``u_i`` may depend only on the
player's own action, its parent's action, and the full vector of leaf
actions — this is what makes level-wise reasoning well defined, and it is
enforced where utilities are built symbolically.

This module provides the tree (:class:`GameTree`), the flat profile wrapper
(:class:`ActionProfile`), the oracle interface every game implements
(:class:`UtilityOracle`), box projection, and a JSON game-definition loader.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    EmptyLevel,
    InvalidParams,
    MalformedTree,
    UnknownPlayer,
)

PlayerId = int

# Relative step for the central finite-difference fallbacks: h = FD_REL_STEP *
# max(1, |x_k|) per coordinate.
FD_REL_STEP = 1e-5


# ======================================================================
# Player tree
# ======================================================================

class GameTree:
    """Rooted player tree with stable breadth-first integer ids.

    Ids are assigned level by level (root level first), in the order players
    appear inside each level, so id 0 is the first level-1 player and the
    leaves occupy the last ``level_sizes[-1]`` ids.  The flat action layout
    follows the same order.

    Args:
        level_sizes: number of players per level, root level first.
        parents: parent id for every player (-1 or None for level-1 players).
        action_dims: per-player action dimension (int or sequence).
        bounds: ``None`` for unbounded, a single ``(lo, hi)`` applied to all
            coordinates, or a per-player sequence of ``(lo, hi)`` / ``None``.
    """

    def __init__(self, level_sizes, parents, action_dims=1, bounds=None):
        level_sizes = [int(s) for s in level_sizes]
        if not level_sizes:
            raise MalformedTree("tree needs at least one level")
        if any(s <= 0 for s in level_sizes):
            raise EmptyLevel(f"every level needs at least one player: {level_sizes}")
        self.level_sizes = tuple(level_sizes)
        self.n_levels = len(level_sizes)
        self.n_players = sum(level_sizes)

        # level_of[i] is 1-based to match the usual statement of the model.
        self.level_of_player = np.repeat(
            np.arange(1, self.n_levels + 1), level_sizes
        ).astype(int)
        self._level_start = np.concatenate(([0], np.cumsum(level_sizes))).astype(int)

        parents = [(-1 if p is None else int(p)) for p in parents]
        if len(parents) != self.n_players:
            raise MalformedTree(
                f"parents has length {len(parents)}, expected {self.n_players}"
            )
        self.parent = np.asarray(parents, dtype=int)
        self.children: list[list[int]] = [[] for _ in range(self.n_players)]
        for i in range(self.n_players):
            lvl = self.level_of_player[i]
            if lvl == 1:
                if self.parent[i] != -1:
                    raise MalformedTree(f"level-1 player {i} must have parent -1")
                continue
            p = self.parent[i]
            if not (0 <= p < self.n_players):
                raise MalformedTree(f"player {i} has out-of-range parent {p}")
            if self.level_of_player[p] != lvl - 1:
                raise MalformedTree(
                    f"player {i} (level {lvl}) has parent {p} at level "
                    f"{self.level_of_player[p]}, expected level {lvl - 1}"
                )
            self.children[p].append(i)
        for i in range(self.n_players):
            if self.level_of_player[i] < self.n_levels and not self.children[i]:
                raise MalformedTree(f"non-leaf player {i} has no children")

        if np.isscalar(action_dims):
            dims = np.full(self.n_players, int(action_dims), dtype=int)
        else:
            dims = np.asarray([int(d) for d in action_dims], dtype=int)
        if dims.shape != (self.n_players,) or np.any(dims < 1):
            raise InvalidParams(f"bad action_dims: {action_dims!r}")
        self.action_dims = dims
        self.offsets = np.concatenate(([0], np.cumsum(dims))).astype(int)
        self.n_dims = int(self.offsets[-1])

        # Flat per-coordinate box (±inf when unbounded).
        lo = np.full(self.n_dims, -np.inf)
        hi = np.full(self.n_dims, np.inf)
        if bounds is not None:
            per_player = bounds
            if (
                isinstance(bounds, (tuple, list))
                and len(bounds) == 2
                and np.isscalar(bounds[0])
            ):
                per_player = [bounds] * self.n_players
            if len(per_player) != self.n_players:
                raise InvalidParams(f"bad bounds: {bounds!r}")
            for i, b in enumerate(per_player):
                if b is None:
                    continue
                blo, bhi = float(b[0]), float(b[1])
                if not blo <= bhi:
                    raise InvalidParams(f"empty interval for player {i}: {b!r}")
                lo[self.offsets[i]:self.offsets[i + 1]] = blo
                hi[self.offsets[i]:self.offsets[i + 1]] = bhi
        self.lower = lo
        self.upper = hi
        self.is_bounded = bool(np.any(np.isfinite(lo)) or np.any(np.isfinite(hi)))

        # Descendant closure, precomputed once (used by back-propagation,
        # restricted dynamics and the search over subgames).
        self._descendants: list[tuple[int, ...]] = [() for _ in range(self.n_players)]
        for i in reversed(range(self.n_players)):
            acc: list[int] = []
            for c in self.children[i]:
                acc.append(c)
                acc.extend(self._descendants[c])
            self._descendants[i] = tuple(sorted(acc))

    # -- structural queries -------------------------------------------------

    def check_player(self, i: PlayerId) -> int:
        i = int(i)
        if not 0 <= i < self.n_players:
            raise UnknownPlayer(i)
        return i

    def level_of(self, i: PlayerId) -> int:
        return int(self.level_of_player[self.check_player(i)])

    def players_at_level(self, level: int) -> range:
        if not 1 <= level <= self.n_levels:
            raise UnknownPlayer(f"level {level}")
        return range(self._level_start[level - 1], self._level_start[level])

    def parent_of(self, i: PlayerId) -> int | None:
        p = int(self.parent[self.check_player(i)])
        return None if p < 0 else p

    def children_of(self, i: PlayerId) -> tuple[int, ...]:
        return tuple(self.children[self.check_player(i)])

    def descendants_of(self, i: PlayerId) -> tuple[int, ...]:
        """Strict descendants of ``i`` (excluding ``i``), ascending ids."""
        return self._descendants[self.check_player(i)]

    def is_leaf(self, i: PlayerId) -> bool:
        return self.level_of(i) == self.n_levels

    @property
    def leaf_ids(self) -> range:
        return self.players_at_level(self.n_levels)

    def subtree_leaf_ids(self, i: PlayerId) -> tuple[int, ...]:
        i = self.check_player(i)
        if self.is_leaf(i):
            return (i,)
        return tuple(j for j in self._descendants[i] if self.is_leaf(j))

    # -- layout ---------------------------------------------------------------

    def dim_of(self, i: PlayerId) -> int:
        return int(self.action_dims[self.check_player(i)])

    def slice_of(self, i: PlayerId) -> slice:
        i = self.check_player(i)
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    @property
    def layout(self) -> dict[int, tuple[int, int]]:
        """Player id -> (offset, length) into the flat profile."""
        return {
            i: (int(self.offsets[i]), int(self.action_dims[i]))
            for i in range(self.n_players)
        }

    def dependency_set(self, i: PlayerId) -> frozenset[int]:
        """Players whose actions ``u_i`` may reference: own, parent, leaves."""
        i = self.check_player(i)
        dep = {i} | set(self.leaf_ids)
        p = self.parent_of(i)
        if p is not None:
            dep.add(p)
        return frozenset(dep)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"GameTree(levels={self.level_sizes}, dims={self.n_dims})"


def build_tree(level_sizes, parent_assignment=None, action_dims=1, bounds=None) -> GameTree:
    """Construct a :class:`GameTree`, defaulting to an even parent split.

    When ``parent_assignment`` is ``None``, players at each level are divided
    as evenly as possible among the players one level up (the first
    ``n_children % n_parents`` parents get one extra child); this matches how
    the shipped game families describe their shapes, e.g. ``(1, 2, 10)``
    giving five counties per state.

    Args:
        level_sizes: per-level player counts, root level first.
        parent_assignment: full parent list (``-1``/``None`` for level-1
            players), or ``None`` for the even split.
        action_dims: int or per-player sequence.
        bounds: see :class:`GameTree`.
    """
    level_sizes = [int(s) for s in level_sizes]
    if any(s <= 0 for s in level_sizes):
        raise EmptyLevel(f"every level needs at least one player: {level_sizes}")
    if parent_assignment is None:
        parents: list[int] = []
        start = 0
        for lvl, size in enumerate(level_sizes):
            if lvl == 0:
                parents.extend([-1] * size)
                start = 0
                continue
            n_parents = level_sizes[lvl - 1]
            base, extra = divmod(size, n_parents)
            if base == 0:
                raise MalformedTree(
                    f"level {lvl + 1} has fewer players ({size}) than parents"
                    f" ({n_parents})"
                )
            for k in range(n_parents):
                count = base + (1 if k < extra else 0)
                parents.extend([start + k] * count)
            start += n_parents
        parent_assignment = parents
    return GameTree(level_sizes, parent_assignment, action_dims, bounds)


# ======================================================================
# Action profiles
# ======================================================================

class ActionProfile:
    """Flat joint action vector plus the tree that defines its layout.

    ``get`` returns a live view into the flat storage, so in-place writes on
    the view update the profile; ``set`` copies values in.
    """

    __slots__ = ("tree", "flat")

    def __init__(self, tree: GameTree, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (tree.n_dims,):
            raise InvalidParams(
                f"profile has shape {flat.shape}, tree wants ({tree.n_dims},)"
            )
        self.tree = tree
        self.flat = flat

    @classmethod
    def zeros(cls, tree: GameTree) -> "ActionProfile":
        return cls(tree, np.zeros(tree.n_dims))

    @property
    def layout(self) -> dict[int, tuple[int, int]]:
        return self.tree.layout

    def get(self, i: PlayerId) -> np.ndarray:
        return self.flat[self.tree.slice_of(i)]

    def set(self, i: PlayerId, value) -> None:
        sl = self.tree.slice_of(i)
        value = np.asarray(value, dtype=float).reshape(-1)
        if value.shape[0] != sl.stop - sl.start:
            raise InvalidParams(
                f"player {i} takes {sl.stop - sl.start} dims, got {value.shape[0]}"
            )
        self.flat[sl] = value

    def copy(self) -> "ActionProfile":
        return ActionProfile(self.tree, self.flat.copy())

    def __array__(self, dtype=None):
        return self.flat if dtype is None else self.flat.astype(dtype)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"ActionProfile({np.array2string(self.flat, precision=4)})"


def slice_action(profile: ActionProfile, i: PlayerId) -> np.ndarray:
    """View of player ``i``'s action block inside ``profile`` (writable)."""
    return profile.get(i)


def as_profile(game_or_tree, profile) -> ActionProfile:
    """Coerce an array or profile to an :class:`ActionProfile` on this tree."""
    tree = game_or_tree[0] if isinstance(game_or_tree, tuple) else game_or_tree
    if isinstance(profile, ActionProfile):
        if profile.tree is not tree and profile.tree.n_dims != tree.n_dims:
            raise InvalidParams("profile belongs to an incompatible tree")
        return profile
    return ActionProfile(tree, profile)


def project(profile, tree: GameTree | None = None):
    """Clamp every bounded coordinate to its interval (idempotent).

    Accepts an :class:`ActionProfile` (returning a new profile) or a flat
    array with an explicit ``tree`` (returning an array).  Unbounded
    coordinates pass through unchanged.
    """
    if isinstance(profile, ActionProfile):
        tree = profile.tree
        if not tree.is_bounded:
            return profile.copy()
        return ActionProfile(tree, np.clip(profile.flat, tree.lower, tree.upper))
    if tree is None:
        raise InvalidParams("project() on a flat array needs the tree")
    arr = np.asarray(profile, dtype=float)
    if not tree.is_bounded:
        return arr.copy()
    return np.clip(arr, tree.lower, tree.upper)


# ======================================================================
# Utility oracles
# ======================================================================

class UtilityOracle:
    """Interface every game implements: payoffs and their derivatives.

    Built-in games implement :meth:`value_batch` as the primitive (a batch of
    candidate own-actions evaluated against one fixed profile) and inherit
    ``value`` as the single-candidate batch.  Keeping one evaluation pipeline
    makes grid-search regrets exactly non-negative: the payoff of the current
    action is bit-for-bit the batch entry of the current action.

    Derivative methods default to central finite differences with step
    ``h = 1e-5 * max(1, |x_k|)`` per coordinate, so a custom game only has to
    provide values; built-ins override with analytic forms.
    """

    def __init__(self, tree: GameTree):
        self._tree = tree

    @property
    def tree(self) -> GameTree:
        return self._tree

    def dependency_set(self, i: PlayerId) -> frozenset[int]:
        return self._tree.dependency_set(i)

    # -- values ---------------------------------------------------------------

    def value_batch(self, i: PlayerId, profile: ActionProfile, candidates) -> np.ndarray:
        """Payoffs of player ``i`` when its own action is replaced by each row
        of ``candidates`` (shape ``(K, d_i)``), all other actions fixed."""
        raise NotImplementedError

    def value(self, i: PlayerId, profile: ActionProfile) -> float:
        own = profile.get(i).reshape(1, -1)
        return float(self.value_batch(i, profile, own)[0])

    # -- derivatives ----------------------------------------------------------

    def grad(self, i: PlayerId, wrt: PlayerId, profile: ActionProfile) -> np.ndarray:
        """Partial gradient ``∂u_i/∂x_wrt`` at ``profile``, shape ``(d_wrt,)``."""
        return self._fd_grad(i, wrt, profile)

    def hess(self, i: PlayerId, a: PlayerId, b: PlayerId, profile: ActionProfile) -> np.ndarray:
        """Partial Hessian block ``∂²u_i/∂x_a ∂x_b``, shape ``(d_a, d_b)``.

        The default differentiates :meth:`grad` centrally, computing only the
        canonically ordered pair ``a <= b`` so that ``hess(i, b, a)`` is the
        exact transpose of ``hess(i, a, b)``.
        """
        if a > b:
            return self.hess(i, b, a, profile).T.copy()
        return self._fd_hess(i, a, b, profile)

    def leaf_gradient(self, i: PlayerId, profile: ActionProfile) -> np.ndarray:
        """``∇_{x_L} u_i`` flattened over all leaves in id order.

        Games whose leaf couplings vectorize override this; the default loops
        :meth:`grad` per leaf.
        """
        return np.concatenate(
            [self.grad(i, leaf, profile) for leaf in self._tree.leaf_ids]
        )

    # -- finite-difference fallbacks -------------------------------------------

    def _fd_grad(self, i, wrt, profile):
        tree = self._tree
        sl = tree.slice_of(wrt)
        x = profile.flat
        out = np.empty(sl.stop - sl.start)
        work = ActionProfile(tree, x.copy())
        for k in range(sl.stop - sl.start):
            idx = sl.start + k
            h = FD_REL_STEP * max(1.0, abs(x[idx]))
            work.flat[idx] = x[idx] + h
            up = self.value(i, work)
            work.flat[idx] = x[idx] - h
            down = self.value(i, work)
            work.flat[idx] = x[idx]
            out[k] = (up - down) / (2.0 * h)
        return out

    def _fd_hess(self, i, a, b, profile):
        tree = self._tree
        sb = tree.slice_of(b)
        x = profile.flat
        cols = []
        work = ActionProfile(tree, x.copy())
        for k in range(sb.stop - sb.start):
            idx = sb.start + k
            h = FD_REL_STEP * max(1.0, abs(x[idx]))
            work.flat[idx] = x[idx] + h
            up = self.grad(i, a, work)
            work.flat[idx] = x[idx] - h
            down = self.grad(i, a, work)
            work.flat[idx] = x[idx]
            cols.append((up - down) / (2.0 * h))
        return np.stack(cols, axis=1)


class FunctionOracle(UtilityOracle):
    """Oracle built from plain Python payoff callables.

    Args:
        tree: the player tree.
        values: per-player callables ``f_i(profile) -> float`` (sequence or
            dict keyed by player id).

    Derivatives fall back to finite differences.  ``value_batch`` loops the
    scalar callable, so batched and scalar evaluation share one code path.
    """

    def __init__(self, tree: GameTree, values):
        super().__init__(tree)
        if isinstance(values, dict):
            values = [values[i] for i in range(tree.n_players)]
        values = list(values)
        if len(values) != tree.n_players:
            raise InvalidParams(
                f"need {tree.n_players} payoff functions, got {len(values)}"
            )
        self._values: list[Callable[[ActionProfile], float]] = values

    def value_batch(self, i, profile, candidates):
        candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        work = profile.copy()
        out = np.empty(candidates.shape[0])
        for k, cand in enumerate(candidates):
            work.set(i, cand)
            out[k] = float(self._values[i](work))
        return out


Game = tuple


def check_game(game) -> tuple[GameTree, UtilityOracle]:
    """Validate a ``(tree, oracle)`` pair and return it."""
    try:
        tree, oracle = game
    except (TypeError, ValueError) as exc:
        raise InvalidParams(f"a game is a (tree, oracle) pair, got {game!r}") from exc
    if not isinstance(tree, GameTree) or not isinstance(oracle, UtilityOracle):
        raise InvalidParams(
            f"a game is a (GameTree, UtilityOracle) pair, got "
            f"({type(tree).__name__}, {type(oracle).__name__})"
        )
    return tree, oracle


def rng_from(seed) -> np.random.Generator:
    """Normalize ``None`` / int / Generator to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ======================================================================
# Game-definition files
# ======================================================================

def load_game(source) -> tuple[GameTree, UtilityOracle]:
    """Build a game from a JSON definition (path, JSON string, or dict).

    The definition carries ``game_kind`` plus kind-specific ``params``;
    polynomial games may additionally specify the tree explicitly through
    ``levels`` / ``parents`` / ``action_dims`` / ``bounds``.  See the README
    for the full schema and the list of built-in kinds.
    """
    from . import games as _games  # deferred: games imports core

    if isinstance(source, (str, Path)):
        text = str(source)
        if not text.lstrip().startswith("{"):
            path = Path(text)
            if not path.exists():
                raise InvalidParams(f"game definition file not found: {text}")
            text = path.read_text()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParams(f"not a JSON game definition: {source!r}") from exc
    elif isinstance(source, dict):
        spec = source
    else:
        raise InvalidParams(f"cannot load a game from {type(source).__name__}")
    if not isinstance(spec, dict) or "game_kind" not in spec:
        raise InvalidParams("game definition must be an object with 'game_kind'")
    return _games.from_definition(spec)
