"""Polynomial-utility games on player trees.

Utilities are sums of monomials over the flat action coordinates, compiled
once into exact term lists for values, gradients, and Hessian blocks — no
finite differencing.  This backs the three fixed benchmark instances used
throughout the test-suite (two scalar chains and one 3-d-action chain, each
with a verified locally stable equilibrium) and the random degree-≤4 game
classes used for the stability census.

Terms are written ``(coeff, powers)`` with ``powers`` mapping player id to an
exponent (scalar actions) or a per-coordinate exponent tuple.  A term may
only reference players in the owner's dependency set (own, parent, leaves);
anything else raises :class:`~hiergames.errors.DependencyViolation`.
"""

from __future__ import annotations

import itertools

import numpy as np

from ..core import ActionProfile, GameTree, UtilityOracle, build_tree, rng_from
from ..errors import DependencyViolation, InvalidParams

__all__ = [
    "PolynomialOracle",
    "make_polynomial",
    "make_p111",
    "make_p112",
    "make_p111_3d",
    "make_random_polynomial",
    "P111_ALPHA",
    "P111_LSPE",
    "P112_ALPHA",
    "P112_LSPE",
    "P111_3D_ALPHA",
    "P111_3D_LSPE",
]

# Reference points of the fixed instances and the step sizes at which the
# hierarchical-gradient dynamics is meant to reach them.  The first two are
# verified equilibria (the dynamics reaches them and check_lspe certifies
# them); the p111_3d reference point is *not* a stationary point of the
# instance's utilities as shipped — the acceptance suite exercises it
# faithfully and reports the mismatch (tests/test_acceptance.py).
P111_ALPHA = 1e-5
P111_LSPE = np.array([-0.34, 1.85, -1.08])
P112_ALPHA = 4e-6
P112_LSPE = np.array([4.70, -2.13, 10.27, 9.93])  # order: root, mid, leaf y, leaf z
P111_3D_ALPHA = 1e-5
P111_3D_LSPE = np.array([-0.39] * 3 + [0.29] * 3 + [-0.58] * 3)


def _eval_terms(terms, x) -> float:
    """Evaluate a compiled term list at flat coordinates ``x`` (a list)."""
    tot = 0.0
    for c, pairs in terms:
        p = c
        for v, e in pairs:
            xv = x[v]
            if e == 1:
                p *= xv
            elif e == 2:
                p *= xv * xv
            else:
                p *= xv**e
        tot += p
    return tot


def _diff_terms(terms, v):
    """Differentiate a compiled term list w.r.t. flat coordinate ``v``."""
    out = []
    for c, pairs in terms:
        for idx, (var, e) in enumerate(pairs):
            if var != v:
                continue
            rest = pairs[:idx] + pairs[idx + 1 :]
            if e > 1:
                rest = rest + ((var, e - 1),)
            out.append((c * e, tuple(sorted(rest))))
            break
    return out


class PolynomialOracle(UtilityOracle):
    """Exact oracle for per-player monomial utilities.

    Args:
        tree: player tree.
        terms: per-player term lists, ``terms[i]`` a sequence of
            ``(coeff, {player: exponent(s)})``.
    """

    def __init__(self, tree: GameTree, terms):
        super().__init__(tree)
        if isinstance(terms, dict):
            terms = [terms.get(i, []) for i in range(tree.n_players)]
        terms = list(terms)
        if len(terms) != tree.n_players:
            raise InvalidParams(
                f"need term lists for {tree.n_players} players, got {len(terms)}"
            )

        self._val_terms: list[list[tuple[float, tuple]]] = []
        for i, player_terms in enumerate(terms):
            dep = tree.dependency_set(i)
            compiled = []
            for coeff, powers in player_terms:
                pairs = []
                for pid, exps in powers.items():
                    pid = int(pid)
                    if pid not in dep:
                        raise DependencyViolation(
                            f"u_{i} references player {pid}, outside its "
                            f"dependency set {sorted(dep)}"
                        )
                    if np.isscalar(exps):
                        exps = (exps,) + (0,) * (tree.dim_of(pid) - 1)
                    exps = tuple(int(e) for e in exps)
                    if len(exps) != tree.dim_of(pid) or any(e < 0 for e in exps):
                        raise InvalidParams(
                            f"bad exponents {exps} for player {pid} in u_{i}"
                        )
                    off = tree.offsets[pid]
                    pairs.extend((off + k, e) for k, e in enumerate(exps) if e > 0)
                compiled.append((float(coeff), tuple(sorted(pairs))))
            self._val_terms.append(compiled)

        # Compile first and second derivatives for every dependency pair up
        # front; the step loops only ever look these up.
        self._grad_terms: dict[tuple[int, int], list] = {}
        self._hess_terms: dict[tuple[int, int, int], list] = {}
        for i in range(tree.n_players):
            dep = sorted(tree.dependency_set(i))
            per_coord: dict[int, list] = {}
            for a in dep:
                sl = tree.slice_of(a)
                coord_lists = [
                    _diff_terms(self._val_terms[i], v) for v in range(sl.start, sl.stop)
                ]
                per_coord[a] = coord_lists
                self._grad_terms[(i, a)] = coord_lists
            for a in dep:
                for b in dep:
                    if a > b:
                        continue
                    slb = tree.slice_of(b)
                    block = [
                        [
                            _diff_terms(ta, v)
                            for v in range(slb.start, slb.stop)
                        ]
                        for ta in per_coord[a]
                    ]
                    self._hess_terms[(i, a, b)] = block

        # Batch layout: (coeff, own local (k, e) pairs, other (v, e) pairs).
        self._batch_terms = []
        for i in range(tree.n_players):
            off = tree.offsets[i]
            d = tree.dim_of(i)
            split = []
            for c, pairs in self._val_terms[i]:
                own = tuple((v - off, e) for v, e in pairs if off <= v < off + d)
                other = tuple((v, e) for v, e in pairs if not off <= v < off + d)
                split.append((c, own, other))
            self._batch_terms.append(split)

    # -- values ---------------------------------------------------------------

    def value_batch(self, i, profile, candidates):
        i = self._tree.check_player(i)
        candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        if candidates.shape[1] != self._tree.dim_of(i):
            raise InvalidParams(
                f"candidates for player {i} need width {self._tree.dim_of(i)}"
            )
        x = profile.flat.tolist()
        out = np.zeros(candidates.shape[0])
        for c, own, other in self._batch_terms[i]:
            base = c
            for v, e in other:
                base *= x[v] if e == 1 else x[v] ** e
            if own:
                vec = np.full(candidates.shape[0], base)
                for k, e in own:
                    col = candidates[:, k]
                    vec = vec * (col if e == 1 else col**e)
                out += vec
            else:
                out += base
        return out

    # -- derivatives ----------------------------------------------------------

    def grad(self, i, wrt, profile):
        coord_lists = self._grad_terms.get((i, wrt))
        if coord_lists is None:
            return np.zeros(self._tree.dim_of(wrt))
        x = profile.flat.tolist()
        return np.array([_eval_terms(t, x) for t in coord_lists])

    def hess(self, i, a, b, profile):
        if a > b:
            return self.hess(i, b, a, profile).T.copy()
        block = self._hess_terms.get((i, a, b))
        if block is None:
            return np.zeros((self._tree.dim_of(a), self._tree.dim_of(b)))
        x = profile.flat.tolist()
        return np.array([[_eval_terms(t, x) for t in row] for row in block])


def make_polynomial(tree: GameTree, terms):
    """Validate ``terms`` against ``tree`` and return the game pair."""
    return tree, PolynomialOracle(tree, terms)


# ======================================================================
# Fixed benchmark instances
# ======================================================================

def make_p111():
    """Three-player scalar chain; root 0 (x), mid 1 (y), leaf 2 (z).

    u0 = -7x^2 + 9xz + x - z
    u1 = -2y^2 - 4yz - 10x^2 + 2xz - 3z^2 + 4y + 7x - 8z - 8xyz
    u2 = -10z^2 - 9yz + 9y^2 - 5z - 2y
    """
    tree = build_tree([1, 1, 1])
    terms = [
        [(-7, {0: 2}), (9, {0: 1, 2: 1}), (1, {0: 1}), (-1, {2: 1})],
        [
            (-2, {1: 2}),
            (-4, {1: 1, 2: 1}),
            (-10, {0: 2}),
            (2, {0: 1, 2: 1}),
            (-3, {2: 2}),
            (4, {1: 1}),
            (7, {0: 1}),
            (-8, {2: 1}),
            (-8, {0: 1, 1: 1, 2: 1}),
        ],
        [(-10, {2: 2}), (-9, {1: 1, 2: 1}), (9, {1: 2}), (-5, {2: 1}), (-2, {1: 1})],
    ]
    return make_polynomial(tree, terms)


def make_p112():
    """Four-player tree (1-1-2); root 0 (x), mid 1 (w), leaves 2 (y), 3 (z).

    u0 = -2x^2 - 3xy + y^2 + 5x + 7y + 3xz - 10yz + 5xyz - 6z
    u1 = 2w^2 - wx - 3wy - 5x^2 + 9xy + 2y^2 + 3w + 5x - 4y + 5z^2 + 8wz
         + 7xz - 9yz - 10z
    u2 = -5y^2 - 8yz + z^2 + 8y - 9z - 2wy - 4wz - w^2 - 8wyz - 2w
    u3 = -10z^2 - 2yz + 5y^2 - 7z - 6y - 3wz - 8wy - 10wyz + 5w
    """
    tree = build_tree([1, 1, 2])
    terms = [
        [
            (-2, {0: 2}),
            (-3, {0: 1, 2: 1}),
            (1, {2: 2}),
            (5, {0: 1}),
            (7, {2: 1}),
            (3, {0: 1, 3: 1}),
            (-10, {2: 1, 3: 1}),
            (5, {0: 1, 2: 1, 3: 1}),
            (-6, {3: 1}),
        ],
        [
            (2, {1: 2}),
            (-1, {1: 1, 0: 1}),
            (-3, {1: 1, 2: 1}),
            (-5, {0: 2}),
            (9, {0: 1, 2: 1}),
            (2, {2: 2}),
            (3, {1: 1}),
            (5, {0: 1}),
            (-4, {2: 1}),
            (5, {3: 2}),
            (8, {1: 1, 3: 1}),
            (7, {0: 1, 3: 1}),
            (-9, {2: 1, 3: 1}),
            (-10, {3: 1}),
        ],
        [
            (-5, {2: 2}),
            (-8, {2: 1, 3: 1}),
            (1, {3: 2}),
            (8, {2: 1}),
            (-9, {3: 1}),
            (-2, {1: 1, 2: 1}),
            (-4, {1: 1, 3: 1}),
            (-1, {1: 2}),
            (-8, {1: 1, 2: 1, 3: 1}),
            (-2, {1: 1}),
        ],
        [
            (-10, {3: 2}),
            (-2, {2: 1, 3: 1}),
            (5, {2: 2}),
            (-7, {3: 1}),
            (-6, {2: 1}),
            (-3, {1: 1, 3: 1}),
            (-8, {1: 1, 2: 1}),
            (-10, {1: 1, 2: 1, 3: 1}),
            (5, {1: 1}),
        ],
    ]
    return make_polynomial(tree, terms)


def _e(k: int, e: int, d: int = 3) -> tuple:
    out = [0] * d
    out[k] = e
    return tuple(out)


def _sum_sq(pid, coeff, d=3):
    return [(coeff, {pid: _e(k, 2, d)}) for k in range(d)]


def _lin(pid, coeff, d=3):
    return [(coeff, {pid: _e(k, 1, d)}) for k in range(d)]


def _prod_sums(coeff, pids, d=3):
    """coeff * prod_p (sum_k x_{p,k}) expanded into d^len(pids) monomials."""
    out = []
    for ks in itertools.product(range(d), repeat=len(pids)):
        powers: dict[int, list] = {}
        for pid, k in zip(pids, ks):
            exps = powers.setdefault(pid, [0] * d)
            exps[k] += 1
        out.append((coeff, {p: tuple(v) for p, v in powers.items()}))
    return out


def make_p111_3d():
    """Three-player chain with 3-d actions; sums below run over coordinates.

    u0 = -7 Σx_k^2 + 9 (Σx_k)(Σz_k) + Σx_k - Σz_k
    u1 = -2 Σy_k^2 - 4 (Σy_k)(Σz_k) - 10 (Σx_k)(Σz_k) + 2 Σx_k^2 - 3 Σz_k^2
         + 4 (Σx_k)(Σy_k)(Σz_k) + 7 Σx_k - 8 Σy_k - 8 Σz_k
    u2 = -10 Σz_k^2 - 9 (Σy_k)(Σz_k) + 9 Σy_k^2 - 5 Σy_k - 2 Σz_k
    """
    tree = build_tree([1, 1, 1], action_dims=3)
    u0 = _sum_sq(0, -7) + _prod_sums(9, (0, 2)) + _lin(0, 1) + _lin(2, -1)
    u1 = (
        _sum_sq(1, -2)
        + _prod_sums(-4, (1, 2))
        + _prod_sums(-10, (0, 2))
        + _sum_sq(0, 2)
        + _sum_sq(2, -3)
        + _prod_sums(4, (0, 1, 2))
        + _lin(0, 7)
        + _lin(1, -8)
        + _lin(2, -8)
    )
    u2 = _sum_sq(2, -10) + _prod_sums(-9, (1, 2)) + _sum_sq(1, 9) + _lin(1, -5) + _lin(2, -2)
    return make_polynomial(tree, [u0, u1, u2])


# ======================================================================
# Random degree-<=4 game classes
# ======================================================================

def make_random_polynomial(level_sizes, coeff_bound=1, seed=0, action_dims=1, max_degree=4):
    """Random game: each utility is a degree-``max_degree`` polynomial over
    the player's dependency variables.

    Coefficients are integers drawn uniformly from ``[-coeff_bound,
    coeff_bound]``; ``coeff_bound=np.inf`` switches to continuous uniform
    ``[-1, 1]``.  Monomials are enumerated deterministically (ascending flat
    variable ids, lexicographic exponents), so a seed pins the instance.
    """
    tree = build_tree(level_sizes, action_dims=action_dims)
    rng = rng_from(seed)
    discrete = np.isfinite(coeff_bound)
    if discrete:
        c = int(coeff_bound)
        if c < 0:
            raise InvalidParams(f"coeff_bound must be >= 0 or inf, got {coeff_bound}")

    terms = []
    for i in range(tree.n_players):
        dep_vars = []
        for pid in sorted(tree.dependency_set(i)):
            sl = tree.slice_of(pid)
            dep_vars.extend((pid, k) for k in range(sl.stop - sl.start))
        player_terms = []
        for total in range(max_degree + 1):
            for combo in itertools.combinations_with_replacement(dep_vars, total):
                coeff = (
                    float(rng.integers(-c, c + 1))
                    if discrete
                    else float(rng.uniform(-1.0, 1.0))
                )
                if coeff == 0.0:
                    continue
                powers: dict[int, list] = {}
                for pid, k in combo:
                    exps = powers.setdefault(pid, [0] * tree.dim_of(pid))
                    exps[k] += 1
                player_terms.append(
                    (coeff, {p: tuple(v) for p, v in powers.items()})
                )
        terms.append(player_terms)
    return make_polynomial(tree, terms)
