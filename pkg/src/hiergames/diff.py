"""Implicit differentiation through the follower hierarchy.

A non-root player ``j`` with parent ``i`` responds to its parent through the
stationarity of its own utility; differentiating that first-order condition
gives the local response Jacobian

    D_{x_i} φ_j = -(∇²_{x_j,x_j} u_j)^{-1} ∇²_{x_j,x_i} u_j ,

computed here with a linear solve (never an explicit inverse).  Chaining the
local responses bottom-up yields, for every player, the Jacobian of the leaf
profile with respect to that player's action:

    D_{x_i} Φ = Σ_{j ∈ Chd(i)} (D_{x_j} Φ) (D_{x_i} φ_j) ,

with the identity at the leaves.  The hierarchical total gradient follows the
row-vector convention

    D_{x_i} u_i = ∇_{x_i} u_i + (∇_{x_L} u_i) (D_{x_i} Φ) ,

and the hierarchical total Hessian is the derivative of the total gradient
along the coupled directions in which descendants track the player via their
local responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ActionProfile, GameTree, UtilityOracle, check_game
from .errors import InvalidParams, SingularHessian

# A follower Hessian whose condition estimate exceeds this is treated as a
# violation of the invertibility assumption.
COND_LIMIT = 1e12

# Relative step for the coupled central differences in total_hessian.
HESS_FD_STEP = 1e-5


# ======================================================================
# Local response
# ======================================================================

def _local_response(oracle: UtilityOracle, tree: GameTree, j: int,
                    profile: ActionProfile) -> np.ndarray:
    """D_{x_pa} φ_j as a (d_j, d_pa) array; raises SingularHessian."""
    pa = tree.parent_of(j)
    H = oracle.hess(j, j, j, profile)
    C = oracle.hess(j, j, pa, profile)
    if H.shape == (1, 1):
        h = H[0, 0]
        # cond() of a scalar is identically 1; the meaningful scalar analogue
        # of near-singularity is |H| vanishing against the coupling scale.
        if h == 0.0 or abs(h) * COND_LIMIT < max(1.0, float(np.max(np.abs(C)))):
            raise SingularHessian(
                f"player {j}: own Hessian {h:.3e} is singular at working precision"
            )
        return C / (-h)
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularHessian(
            f"player {j}: own Hessian condition estimate {cond:.3e} exceeds "
            f"{COND_LIMIT:.0e}"
        )
    try:
        sol = np.linalg.solve(H, C)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - cond catches first
        raise SingularHessian(f"player {j}: own Hessian is singular") from exc
    return -sol


def local_response_jacobian(j: int, game, profile) -> np.ndarray:
    """Follower ``j``'s response Jacobian w.r.t. its parent's action.

    Args:
        j: a non-root player id.
        game: ``(tree, oracle)`` pair.
        profile: evaluation point.

    Returns:
        ``(d_j, d_parent)`` array ``-(∇²_{jj} u_j)^{-1} ∇²_{j,pa} u_j``.
    """
    tree, oracle = check_game(game)
    profile = _as_profile(tree, profile)
    if tree.parent_of(j) is None:
        raise InvalidParams(f"player {j} has no parent, hence no local response")
    return _local_response(oracle, tree, j, profile)


def _as_profile(tree, profile):
    if isinstance(profile, ActionProfile):
        return profile
    return ActionProfile(tree, profile)


# ======================================================================
# Leaf-profile Jacobians (back-propagation)
# ======================================================================

@dataclass
class LeafJacobian:
    """Jacobian of the full leaf profile w.r.t. one player's action.

    ``blocks`` maps leaf id to its ``(d_leaf, d_owner)`` block; leaves outside
    the owner's subtree are identically zero and not stored.  ``matrix``
    assembles the dense ``(total leaf dims, d_owner)`` array in leaf-id order.
    """

    owner: int
    tree: GameTree
    blocks: dict[int, np.ndarray]

    @property
    def matrix(self) -> np.ndarray:
        tree = self.tree
        leaf_ids = list(tree.leaf_ids)
        total = sum(tree.dim_of(l) for l in leaf_ids)
        out = np.zeros((total, tree.dim_of(self.owner)))
        row = 0
        for l in leaf_ids:
            d = tree.dim_of(l)
            if l in self.blocks:
                out[row:row + d] = self.blocks[l]
            row += d
        return out


def _leaf_blocks(oracle, tree, i, profile, child_blocks=None):
    """Blocks of D_{x_i} Φ; ``child_blocks`` maps child id -> its blocks."""
    if tree.is_leaf(i):
        return {i: np.eye(tree.dim_of(i))}
    blocks: dict[int, np.ndarray] = {}
    for j in tree.children_of(i):
        R = _local_response(oracle, tree, j, profile)
        cb = (
            child_blocks[j]
            if child_blocks is not None
            else _leaf_blocks(oracle, tree, j, profile)
        )
        for leaf, B in cb.items():
            blocks[leaf] = B @ R
    return blocks


def backprop_leaf_jacobian(i: int, game, profile, child_jacobians=None) -> LeafJacobian:
    """Jacobian of the leaf profile w.r.t. ``x_i``, chained bottom-up.

    For a leaf this is the identity on its own block.  For an inner player it
    sums, over children ``j``, the child's leaf Jacobian composed with the
    local response ``D_{x_i} φ_j``; children's subtrees are disjoint so the
    sum never collides row-wise.

    Args:
        child_jacobians: optional dict ``j -> LeafJacobian`` to reuse
            already-computed child results (as the level sweep does).
    """
    tree, oracle = check_game(game)
    profile = _as_profile(tree, profile)
    tree.check_player(i)
    cb = None
    if child_jacobians is not None:
        cb = {j: lj.blocks for j, lj in child_jacobians.items()}
        missing = set(tree.children_of(i)) - set(cb)
        if missing:
            raise InvalidParams(f"missing child Jacobians for {sorted(missing)}")
    return LeafJacobian(i, tree, _leaf_blocks(oracle, tree, i, profile, cb))


# ======================================================================
# Total derivatives
# ======================================================================

@dataclass
class TotalGradient:
    """Hierarchical total gradient split into its two terms."""

    player: int
    own: np.ndarray        # ∇_{x_i} u_i
    coupling: np.ndarray   # (∇_{x_L} u_i) (D_{x_i} Φ), zero for leaves

    @property
    def total(self) -> np.ndarray:
        return self.own + self.coupling


def _total_grad(oracle, tree, i, profile, blocks):
    """Total gradient of player ``i`` given its leaf blocks (dict form)."""
    own = oracle.grad(i, i, profile)
    if tree.is_leaf(i):
        return own
    g = own.copy()
    for leaf, B in blocks.items():
        g += oracle.grad(i, leaf, profile) @ B
    return g


def total_grad(i: int, game, profile, leaf_jacobian: LeafJacobian | None = None,
               return_parts: bool = False):
    """Hierarchical total gradient ``D_{x_i} u_i`` at ``profile``.

    Leaves have no followers, so their total gradient is the plain partial;
    inner players add the leaf coupling term routed through ``D_{x_i} Φ``.

    Args:
        leaf_jacobian: optional precomputed :class:`LeafJacobian` for ``i``
            (ignored for leaves, recomputed when omitted).
        return_parts: return a :class:`TotalGradient` instead of the array.
    """
    tree, oracle = check_game(game)
    profile = _as_profile(tree, profile)
    tree.check_player(i)
    own = oracle.grad(i, i, profile)
    if tree.is_leaf(i):
        coupling = np.zeros_like(own)
    else:
        blocks = (
            leaf_jacobian.blocks
            if leaf_jacobian is not None
            else _leaf_blocks(oracle, tree, i, profile)
        )
        coupling = np.zeros_like(own)
        for leaf, B in blocks.items():
            coupling += oracle.grad(i, leaf, profile) @ B
    if return_parts:
        return TotalGradient(i, own, coupling)
    return own + coupling


def _response_chains(oracle, tree, i, profile):
    """D_{x_i} x_d for every strict descendant d, via path-chained responses."""
    chains: dict[int, np.ndarray] = {}
    for j in tree.children_of(i):
        chains[j] = _local_response(oracle, tree, j, profile)
    for d in tree.descendants_of(i):
        if d in chains:
            continue
        pa = tree.parent_of(d)
        chains[d] = _local_response(oracle, tree, d, profile) @ chains[pa]
    return chains


def total_hessian(i: int, game, profile) -> np.ndarray:
    """Hierarchical total Hessian ``D²_{x_i,x_i} u_i``, shape ``(d_i, d_i)``.

    For leaves this is the exact own-block partial Hessian.  For inner
    players it differentiates the total gradient centrally along coupled
    directions: perturbing ``x_i[k]`` by ``±h`` while every descendant is
    shifted by its chained local-response Jacobian times ``±h e_k``, which
    realizes the sum ``∇_{x_i}(Du_i) + Σ_d ∇_{x_d}(Du_i) D_{x_i} x_d``.  The
    result is symmetric up to finite-difference error; symmetrize before
    eigenvalue work.
    """
    tree, oracle = check_game(game)
    profile = _as_profile(tree, profile)
    tree.check_player(i)
    if tree.is_leaf(i):
        return oracle.hess(i, i, i, profile)

    chains = _response_chains(oracle, tree, i, profile)
    sl = tree.slice_of(i)
    d_i = sl.stop - sl.start
    base = profile.flat
    cols = []
    for k in range(d_i):
        h = HESS_FD_STEP * max(1.0, abs(base[sl.start + k]))
        shifted = {}
        for sign in (+1.0, -1.0):
            x = base.copy()
            x[sl.start + k] += sign * h
            for d, R in chains.items():
                sd = tree.slice_of(d)
                x[sd.start:sd.stop] += sign * h * R[:, k]
            p = ActionProfile(tree, x)
            shifted[sign] = _total_grad(
                oracle, tree, i, p, _leaf_blocks(oracle, tree, i, p)
            )
        cols.append((shifted[+1.0] - shifted[-1.0]) / (2.0 * h))
    return np.stack(cols, axis=1)
