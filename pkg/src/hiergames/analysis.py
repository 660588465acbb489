"""Stability classification of stationary profiles and a random-game census.

A stationary profile of the hierarchical-gradient field is locally
attracting exactly when the field Jacobian there has eigenvalues with
strictly negative real parts; the same spectrum yields the largest stable
step size and the per-step contraction factor of the discrete dynamics.
A separate second-order test asks whether a stationary profile is a local
equilibrium in the game sense — every player's *total* own-action Hessian
(through its subtree's induced response) negative definite — rather than
merely a rest point of the dynamics.  The two properties are independent:
an attractor of the dynamics need not be an equilibrium, and vice versa.

On box-constrained games both tests work on the projected dynamics:
coordinates pinned at a bound are dropped from the Jacobian and the
Hessian blocks, and the stationarity precondition zeroes field components
that point out of the box.

:func:`measure_properties` runs both tests over a census of random
polynomial games, locating candidate rest points by multi-start damped
Newton on the field, and reports how often an attractor exists and how
often one is also a local equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ActionProfile, GameTree, check_game
from .dbi import field_function
from .diff import total_hessian
from .errors import InvalidParams, NotLasp, NotStationary, SingularHessian
from .fields import _fd_jacobian
from .games.polynomial import make_random_polynomial

__all__ = [
    "StabilityReport",
    "LspeReport",
    "PropertyStudy",
    "classify_lasp",
    "max_stable_lr",
    "check_lspe",
    "measure_properties",
]

#: Relative step of the field-Jacobian central differences.  The field
#: already contains Hessian solves, so its Jacobian is a third-derivative
#: object; analytic forms are out of scope and a slightly smaller step than
#: the oracle-level default balances truncation against cancellation.
JAC_FD_STEP = 1e-6

#: Real-part band inside which an eigenvalue counts as neither stable nor
#: unstable, to keep classifications from flapping near zero.
CLASSIFY_TOL = 1e-6

#: Default bound on the projected field norm below which a profile counts
#: as stationary (matches the solver's convergence threshold).
STATIONARITY_TOL = 1e-3

#: A coordinate this close to a finite bound counts as pinned.
BOUNDARY_TOL = 1e-9

_NEG_DEF = "negative_definite"
_NOT_NEG_DEF = "not_negative_definite"
_INDETERMINATE = "indeterminate"


@dataclass
class StabilityReport:
    """Local behaviour of the gradient dynamics at a stationary profile.

    ``eigenvalues`` is the spectrum of the field Jacobian restricted to
    unpinned coordinates.  ``classification`` is ``"LASP"`` (locally
    asymptotically stable point: every real part below ``-tol``),
    ``"unstable"`` (some real part above ``+tol``) or ``"marginal"``.
    ``lr_bound`` is the supremum of step sizes for which the discrete
    update contracts locally, ``min_i -2 Re(λ_i)/|λ_i|²`` (``nan`` unless
    the point is a LASP); ``contraction`` is ``1 - max_i |1 + α λ_i|`` for
    the step size the report was computed with (``nan`` when none was
    given).  ``is_lspe`` and ``hessian_flags`` carry the second-order
    equilibrium test of :func:`check_lspe`.
    """

    eigenvalues: np.ndarray
    classification: str
    lr_bound: float
    contraction: float
    is_lspe: bool
    hessian_flags: list[str]


@dataclass
class LspeReport:
    """Second-order local-equilibrium test at a stationary profile.

    ``per_player[i]`` is ``"negative_definite"`` when player ``i``'s total
    own-action Hessian is negative definite on its unpinned coordinates,
    ``"not_negative_definite"`` when some eigenvalue is clearly positive,
    and ``"indeterminate"`` when the largest eigenvalue sits inside the
    tolerance band (a degenerate maximum such as ``u = -x⁴`` at ``0``).
    ``is_lspe`` requires a clear pass from every player, so degenerate
    cases report ``False`` with ``indeterminate`` raised.
    """

    is_lspe: bool
    per_player: list[str]
    indeterminate: bool


class PropertyStudy(NamedTuple):
    """Census percentages: instances with an attractor, and among those,
    instances whose attractor is also a local equilibrium."""

    pct_lasp: float
    pct_lspe: float


# ======================================================================
# Shared plumbing
# ======================================================================

def _pinned_mask(tree: GameTree, x: np.ndarray) -> np.ndarray:
    """Coordinates sitting on a finite bound (within :data:`BOUNDARY_TOL`)."""
    return (x - tree.lower <= BOUNDARY_TOL) | (tree.upper - x <= BOUNDARY_TOL)


def _projected_residual(tree: GameTree, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Field with outward-pointing components at pinned coordinates zeroed.

    A profile is stationary for the projected ascent dynamics when this
    residual vanishes: interior coordinates need a zero field, pinned ones
    only need the field to push out of the box.
    """
    r = g.copy()
    at_lo = x - tree.lower <= BOUNDARY_TOL
    at_hi = tree.upper - x <= BOUNDARY_TOL
    r[at_lo & (g < 0.0)] = 0.0
    r[at_hi & (g > 0.0)] = 0.0
    return r


def _require_stationary(tree, x, g, stationarity_tol):
    resid = float(np.linalg.norm(_projected_residual(tree, x, g)))
    if not resid < stationarity_tol:
        raise NotStationary(
            f"projected field norm {resid:.3e} is not below the stationarity "
            f"tolerance {stationarity_tol:.1e}"
        )


def _hessian_flags(game, profile: ActionProfile, tol: float) -> list[str]:
    """Per-player definiteness of the total own-action Hessian.

    Pinned coordinates are excluded from each player's block; a player
    whose every coordinate is pinned has nothing left to test and counts
    as a (vacuous) pass.
    """
    tree, _oracle = check_game(game)
    free = ~_pinned_mask(tree, profile.flat)
    flags = []
    for i in range(tree.n_players):
        sl = tree.slice_of(i)
        keep = np.flatnonzero(free[sl])
        if keep.size == 0:
            flags.append(_NEG_DEF)
            continue
        H = total_hessian(i, game, profile)
        H = 0.5 * (H + H.T)
        w = np.linalg.eigvalsh(H[np.ix_(keep, keep)])
        top = float(np.max(w))
        if top < -tol:
            flags.append(_NEG_DEF)
        elif top > tol:
            flags.append(_NOT_NEG_DEF)
        else:
            flags.append(_INDETERMINATE)
    return flags


def _as_profile(tree, profile) -> ActionProfile:
    if isinstance(profile, ActionProfile):
        return profile
    return ActionProfile(tree, np.asarray(profile, dtype=float))


# ======================================================================
# Point classification
# ======================================================================

def classify_lasp(game, profile, tol: float = CLASSIFY_TOL, *,
                  alpha: float | None = None,
                  stationarity_tol: float = STATIONARITY_TOL) -> StabilityReport:
    """Classify a stationary profile by the spectrum of the field Jacobian.

    The Jacobian of the hierarchical-gradient field is taken by central
    differences (relative step :data:`JAC_FD_STEP`) and restricted to
    coordinates not pinned at a bound.  The point is a LASP when every
    eigenvalue's real part is below ``-tol``, unstable when any exceeds
    ``+tol``, marginal otherwise.  ``alpha``, when given, fills the
    report's per-step ``contraction`` factor ``1 - max_i |1 + α λ_i|``.

    Raises:
        NotStationary: the projected field norm at ``profile`` is not
            below ``stationarity_tol``.
        SingularHessian: a follower's own-block Hessian is singular, so
            the field is undefined near ``profile``.
    """
    tree, _oracle = check_game(game)
    profile = _as_profile(tree, profile)
    x = profile.flat.copy()
    f = field_function(game)
    _require_stationary(tree, x, f(x), stationarity_tol)

    free = np.flatnonzero(~_pinned_mask(tree, x))
    J = _fd_jacobian(f, x, JAC_FD_STEP)[np.ix_(free, free)]
    eig = np.linalg.eigvals(J)

    if eig.size == 0 or bool(np.all(eig.real < -tol)):
        classification = "LASP"
    elif bool(np.any(eig.real > tol)):
        classification = "unstable"
    else:
        classification = "marginal"

    if classification == "LASP":
        lr_bound = max_stable_lr(eig) if eig.size else np.inf
    else:
        lr_bound = float("nan")
    if alpha is None:
        contraction = float("nan")
    else:
        rho = float(np.max(np.abs(1.0 + alpha * eig))) if eig.size else 0.0
        contraction = 1.0 - rho

    flags = _hessian_flags(game, profile, tol)
    return StabilityReport(
        eigenvalues=eig,
        classification=classification,
        lr_bound=lr_bound,
        contraction=contraction,
        is_lspe=all(fl == _NEG_DEF for fl in flags),
        hessian_flags=flags,
    )


def max_stable_lr(eigenvalues) -> float:
    """Largest step size below which the linearized update contracts.

    For a spectrum ``{λ_i}`` with negative real parts, the update
    ``x ← x + α G(x)`` contracts locally for every
    ``α < min_i -2 Re(λ_i)/|λ_i|²``; this returns that minimum (ties in
    the underlying ratio resolve to the smaller, conservative bound by
    construction).

    Raises:
        NotLasp: some eigenvalue has a nonnegative real part.
        InvalidParams: the spectrum is empty.
    """
    eig = np.atleast_1d(np.asarray(eigenvalues, dtype=complex))
    if eig.size == 0:
        raise InvalidParams("max_stable_lr needs at least one eigenvalue")
    if np.any(eig.real >= 0.0):
        raise NotLasp(
            "step-size bound undefined: an eigenvalue has nonnegative real part"
        )
    return float(np.min(-2.0 * eig.real / np.abs(eig) ** 2))


def check_lspe(game, profile, tol: float = CLASSIFY_TOL, *,
               stationarity_tol: float = STATIONARITY_TOL) -> LspeReport:
    """Second-order test: is the stationary profile a local equilibrium?

    Every player's total own-action Hessian — the curvature of its payoff
    along its own action with the subtree's induced response folded in —
    must be negative definite on the player's unpinned coordinates.

    Raises:
        NotStationary: the projected field norm at ``profile`` is not
            below ``stationarity_tol``.
    """
    tree, _oracle = check_game(game)
    profile = _as_profile(tree, profile)
    x = profile.flat.copy()
    _require_stationary(tree, x, field_function(game)(x), stationarity_tol)
    flags = _hessian_flags(game, profile, tol)
    return LspeReport(
        is_lspe=all(fl == _NEG_DEF for fl in flags),
        per_player=flags,
        indeterminate=any(fl == _INDETERMINATE for fl in flags),
    )


# ======================================================================
# Random-game census
# ======================================================================

def _newton_root(f, x0: np.ndarray, *, g_tol: float = 1e-9,
                 max_steps: int = 80) -> np.ndarray | None:
    """Damped Newton iteration toward a root of ``f``; ``None`` on failure.

    Steps solve the central-difference Jacobian against the field and
    halve until the field norm decreases; singular Jacobians, non-finite
    values and stalls give up rather than raise.
    """
    x = np.asarray(x0, dtype=float).copy()
    try:
        g = f(x)
    except SingularHessian:
        return None
    gn = float(np.linalg.norm(g))
    if not np.isfinite(gn):
        return None
    for _ in range(max_steps):
        if gn < g_tol:
            return x
        try:
            J = _fd_jacobian(f, x, JAC_FD_STEP)
        except SingularHessian:
            return None
        if not np.all(np.isfinite(J)):
            return None
        try:
            d = np.linalg.solve(J, g)
        except np.linalg.LinAlgError:
            return None
        step = 1.0
        while True:
            try:
                g_new = f(x - step * d)
            except SingularHessian:
                g_new = None
            if g_new is not None and np.all(np.isfinite(g_new)):
                gn_new = float(np.linalg.norm(g_new))
                if gn_new < gn:
                    break
            step *= 0.5
            if step < 2.0 ** -20:
                return None
        x = x - step * d
        g, gn = g_new, gn_new
    return x if gn < g_tol else None


def measure_properties(game_class, n_instances: int, seed=0, *,
                       coeff_bound=1, starts: int = 32,
                       box: tuple[float, float] = (-5.0, 5.0),
                       max_degree: int = 4) -> PropertyStudy:
    """Attractor/equilibrium frequencies over a class of random games.

    ``game_class`` is either a hierarchy shape — each instance then draws
    a random polynomial game of that shape with integer coefficients in
    ``[-coeff_bound, coeff_bound]`` (``inf`` for continuous coefficients)
    — or a callable ``seed -> game`` for custom families.  Per instance,
    stationary points of the gradient field are hunted with ``starts``
    damped-Newton runs seeded uniformly in ``box`` per dimension,
    deduplicated at radius ``1e-4``.  An instance counts toward
    ``pct_lasp`` when any stationary point found is locally
    asymptotically stable, and toward ``pct_lspe`` (a percentage *of the
    LASP instances*) when such a point also passes :func:`check_lspe`.

    Instances are seeded independently by index from ``seed``, so results
    do not depend on evaluation order.  Instances where no stationary
    point is found — or where classification fails numerically — count as
    attractor-free rather than raising.  With zero LASP instances,
    ``pct_lspe`` is ``nan``.
    """
    n_instances = int(n_instances)
    if n_instances < 1:
        raise InvalidParams("n_instances must be positive")
    if not int(starts) >= 1:
        raise InvalidParams("starts must be positive")
    lo, hi = float(box[0]), float(box[1])
    if not lo < hi:
        raise InvalidParams(f"empty start box {box!r}")
    if callable(game_class):
        make_instance = game_class
    else:
        def make_instance(game_seed, _shape=tuple(game_class)):
            return make_random_polynomial(_shape, coeff_bound=coeff_bound,
                                          seed=game_seed, max_degree=max_degree)

    n_lasp = 0
    n_lspe = 0
    for inst_seq in np.random.SeedSequence(seed).spawn(n_instances):
        game_seq, start_seq = inst_seq.spawn(2)
        game = make_instance(game_seq)
        tree, _oracle = check_game(game)
        f = field_function(game)
        rng = np.random.default_rng(start_seq)
        x0s = rng.uniform(lo, hi, size=(int(starts), tree.n_dims))

        roots: list[np.ndarray] = []
        for x0 in x0s:
            root = _newton_root(f, x0)
            if root is None:
                continue
            if all(np.linalg.norm(root - r) > 1e-4 for r in roots):
                roots.append(root)

        found_lasp = False
        found_lspe = False
        for root in roots:
            try:
                J = _fd_jacobian(f, root, JAC_FD_STEP)
                eig = np.linalg.eigvals(J)
                if not bool(np.all(eig.real < -CLASSIFY_TOL)):
                    continue
                found_lasp = True
                if not found_lspe and check_lspe(game, root).is_lspe:
                    found_lspe = True
            except (SingularHessian, np.linalg.LinAlgError):
                continue
        n_lasp += found_lasp
        n_lspe += found_lspe

    pct_lasp = 100.0 * n_lasp / n_instances
    pct_lspe = 100.0 * n_lspe / n_lasp if n_lasp else float("nan")
    return PropertyStudy(pct_lasp=pct_lasp, pct_lspe=pct_lspe)
