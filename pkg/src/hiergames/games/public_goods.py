"""Hierarchical networked public-goods games.

Individuals sit on a friendship network and choose an investment
``x in [0, 1]`` in a shared good.  An individual ``m`` with neighbours ``n``
(edge weights ``g[m, n]``) enjoys

    u_m(x) = baseline + benefit * x_m + x_m * sum_n g[m, n] * x_n
             - (investment_cost / 2) * x_m**2,

i.e. a linear private benefit, a complementarity bonus with neighbours'
investments, and a quadratic effort cost.  The hierarchy overlays group
leaders and a root on top of the individuals: each non-leaf player's base
payoff is the *sum* of its member individuals' ``u_m`` (the root counts
everyone), upper levels recommend investment levels, and every non-root
player ``i`` pays a compliance penalty ``(x_i - x_parent)**2``.  With weight
``kappa_i`` on that penalty the total payoff is

    U_i = (1 - kappa_i) * sum_{m in members(i)} u_m - kappa_i * (x_i - x_pa)**2

for non-root players, and plain social welfare ``sum_m u_m`` for the root.

The shipped instance is Zachary's karate-club network (34 members, 78
friendships) split into its two documented factions, giving a
``(1, 2, 34)`` tree.  All derivatives are analytic.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..core import GameTree, UtilityOracle, build_tree
from ..errors import BadNetworkFile, BadPartition, InvalidParams, InvalidWeights

__all__ = [
    "PublicGoodsOracle",
    "make_public_goods",
    "load_edge_list",
    "load_partition",
]

_DATA = resources.files(__package__) / "data"


def load_edge_list(source=None):
    """Read a whitespace ``<u> <v>`` edge list (1-indexed, ``#`` comments).

    Returns the symmetric 0/1 adjacency matrix over nodes ``1..max_id``.
    ``source`` is a path or file-like object; the default is the bundled
    karate-club network.
    """
    if source is None:
        text = (_DATA / "karate_club.edges").read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise BadNetworkFile(f"cannot read edge list {source!r}: {exc}") from exc
    edges = []
    n = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BadNetworkFile(f"line {lineno}: expected '<u> <v>', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise BadNetworkFile(f"line {lineno}: non-integer node id") from exc
        if u < 1 or v < 1 or u == v:
            raise BadNetworkFile(f"line {lineno}: bad edge ({u}, {v})")
        edges.append((u, v))
        n = max(n, u, v)
    if not edges:
        raise BadNetworkFile("edge list is empty")
    adj = np.zeros((n, n))
    for u, v in edges:
        adj[u - 1, v - 1] = adj[v - 1, u - 1] = 1.0
    return adj


def load_partition(source=None, n_nodes=None):
    """Read a ``<node> <group>`` partition file (both 1-indexed).

    Returns a 0-indexed group id per node.  Groups must be numbered
    ``1..n_groups`` with every group nonempty and every node assigned.
    """
    if source is None:
        text = (_DATA / "karate_club_factions.txt").read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source) as fh:
                text = fh.read()
        except OSError as exc:
            raise BadPartition(f"cannot read partition {source!r}: {exc}") from exc
    assigned: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BadPartition(f"line {lineno}: expected '<node> <group>', got {line!r}")
        try:
            node, group = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise BadPartition(f"line {lineno}: non-integer entry") from exc
        if node < 1 or group < 1:
            raise BadPartition(f"line {lineno}: ids must be positive")
        if node in assigned:
            raise BadPartition(f"line {lineno}: node {node} assigned twice")
        assigned[node] = group - 1
    if not assigned:
        raise BadPartition("partition file is empty")
    n = max(assigned) if n_nodes is None else int(n_nodes)
    missing = sorted(set(range(1, n + 1)) - set(assigned))
    if missing or max(assigned) > n:
        raise BadPartition(
            f"partition must cover nodes 1..{n}; missing {missing}, "
            f"max seen {max(assigned)}"
        )
    groups = np.array([assigned[v] for v in range(1, n + 1)], dtype=int)
    n_groups = groups.max() + 1
    empty = sorted(set(range(n_groups)) - set(groups.tolist()))
    if empty:
        raise BadPartition(f"groups {[g + 1 for g in empty]} are empty")
    return groups


class PublicGoodsOracle(UtilityOracle):
    """Analytic oracle for the hierarchical public-goods payoff.

    Args:
        tree: player tree; scalar actions, leaves are the networked
            individuals.
        adjacency: symmetric nonnegative ``(n_leaves, n_leaves)`` influence
            matrix with zero diagonal.
        kappa: per-player compliance weights in ``[0, 1)`` (the root's entry
            is ignored — it has no parent).
        benefit, investment_cost, baseline: scalars or per-leaf arrays; the
            effort cost must be positive so best responses are finite.
    """

    def __init__(
        self,
        tree: GameTree,
        adjacency,
        kappa,
        benefit=1.0,
        investment_cost=6.0,
        baseline=0.0,
    ):
        super().__init__(tree)
        if tree.n_levels < 2:
            raise InvalidParams("public-goods games need at least two levels")
        if any(tree.dim_of(i) != 1 for i in range(tree.n_players)):
            raise InvalidParams("public-goods games use scalar actions")
        n = len(tree.leaf_ids)
        self._leaf0 = tree.leaf_ids[0]
        self._leaf_lo = tree.slice_of(self._leaf0).start

        adj = np.asarray(adjacency, dtype=float)
        if adj.shape != (n, n):
            raise InvalidParams(f"adjacency must have shape ({n}, {n})")
        if np.any(adj < 0) or not np.array_equal(adj, adj.T):
            raise InvalidParams("adjacency must be symmetric and nonnegative")
        if np.any(np.diag(adj) != 0):
            raise InvalidParams("adjacency must have a zero diagonal")

        m = tree.n_players
        kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (m,)).copy()
        if np.any(kappa < 0) or np.any(kappa[1:] >= 1):
            raise InvalidWeights("kappa must lie in [0, 1) for non-root players")
        kappa[0] = 0.0

        self._adj = adj
        self._kappa = kappa
        # Non-root payoffs are scaled by 1 - kappa; the root counts raw welfare.
        self._scale = np.where(np.arange(m) == 0, 1.0, 1.0 - kappa)
        self._a = np.broadcast_to(np.asarray(baseline, dtype=float), (n,)).copy()
        self._b = np.broadcast_to(np.asarray(benefit, dtype=float), (n,)).copy()
        self._c = np.broadcast_to(np.asarray(investment_cost, dtype=float), (n,)).copy()
        if np.any(self._c <= 0):
            raise InvalidParams("investment_cost must be positive")
        # member[i] marks the leaf individuals whose base payoff player i sums.
        member = np.zeros((m, n))
        for i in range(m):
            idx = (
                [i - self._leaf0]
                if tree.is_leaf(i)
                else [d - self._leaf0 for d in tree.subtree_leaf_ids(i)]
            )
            member[i, idx] = 1.0
        self._member = member

    # -- values ---------------------------------------------------------------

    def _member_payoff(self, i, xL):
        """Sum of base payoffs u_m over player i's members at leaf actions xL."""
        ind = self._member[i]
        social = np.sum(self._adj * xL[None, :], axis=-1)
        u = self._a + self._b * xL + xL * social - 0.5 * self._c * xL**2
        return float(np.sum(ind * u))

    def value_batch(self, i, profile, candidates):
        tree = self._tree
        cand = np.atleast_2d(np.asarray(candidates, dtype=float))[:, 0]
        x = profile.flat
        xL = x[self._leaf_lo :]
        pa = tree.parent_of(i)
        if tree.is_leaf(i):
            m = i - self._leaf0
            # Own investment never multiplies itself (zero diagonal), so the
            # neighbour field at m is constant across candidates.
            social_m = float(np.sum(self._adj[m] * xL))
            u_m = (
                self._a[m]
                + self._b[m] * cand
                + cand * social_m
                - 0.5 * self._c[m] * cand**2
            )
            nc = (cand - x[tree.slice_of(pa).start]) ** 2
            return self._scale[i] * u_m - self._kappa[i] * nc
        base = self._scale[i] * self._member_payoff(i, xL)
        if pa is None:
            return np.full(cand.shape[0], base)
        nc = (cand - x[tree.slice_of(pa).start]) ** 2
        return base - self._kappa[i] * nc

    # -- derivatives ----------------------------------------------------------

    def grad(self, i, wrt, profile):
        tree = self._tree
        if wrt not in tree.dependency_set(i):
            return np.zeros(1)
        x = profile.flat
        g = 0.0
        if tree.is_leaf(wrt):
            xL = x[self._leaf_lo :]
            ind = self._member[i]
            n = wrt - self._leaf0
            g += self._scale[i] * (
                ind[n]
                * (
                    self._b[n]
                    + float(np.sum(self._adj[n] * xL))
                    - self._c[n] * xL[n]
                )
                + float(np.sum(self._adj[:, n] * ind * xL))
            )
        pa = tree.parent_of(i)
        if pa is not None and wrt in (i, pa):
            gap = 2.0 * self._kappa[i] * (
                x[tree.slice_of(i).start] - x[tree.slice_of(pa).start]
            )
            g += gap if wrt == pa else -gap
        return np.array([g])

    def hess(self, i, a, b, profile):
        tree = self._tree
        dep = tree.dependency_set(i)
        if a not in dep or b not in dep:
            return np.zeros((1, 1))
        h = 0.0
        if tree.is_leaf(a) and tree.is_leaf(b):
            ind = self._member[i]
            am, bm = a - self._leaf0, b - self._leaf0
            if am == bm:
                h += -self._scale[i] * self._c[am] * ind[am]
            else:
                h += self._scale[i] * self._adj[am, bm] * (ind[am] + ind[bm])
        pa = tree.parent_of(i)
        if pa is not None and {a, b} <= {i, pa}:
            h += 2.0 * self._kappa[i] * (1.0 if a != b else -1.0)
        return np.array([[h]])

    def leaf_gradient(self, i, profile):
        tree = self._tree
        x = profile.flat
        xL = x[self._leaf_lo :]
        ind = self._member[i]
        social = np.sum(self._adj * xL[None, :], axis=-1)
        g = self._scale[i] * (
            ind * (self._b + social - self._c * xL)
            + np.sum(self._adj * (ind * xL)[:, None], axis=0)
        )
        pa = tree.parent_of(i)
        if pa is not None and tree.is_leaf(i):
            g[i - self._leaf0] -= 2.0 * self._kappa[i] * (
                x[tree.slice_of(i).start] - x[tree.slice_of(pa).start]
            )
        return g


def make_public_goods(
    kappa=0.5,
    benefit=1.0,
    investment_cost=6.0,
    baseline=0.0,
    network=None,
    partition=None,
):
    """Build a hierarchical public-goods game ``(tree, oracle)``.

    With the default ``network``/``partition`` this is the karate-club
    instance: one root, the two factions as mid-level players, and the 34
    members as leaves (a ``(1, 2, 34)`` tree).  Custom games pass an edge
    list and a group file (paths or file-like objects); the tree is always
    root -> groups -> individuals with actions bounded to ``[0, 1]``.

    Args:
        kappa: compliance weight for non-root players (scalar or per-player).
        benefit, investment_cost, baseline: base-payoff coefficients.
        network: edge-list source, see :func:`load_edge_list`.
        partition: group-file source, see :func:`load_partition`.
    """
    adj = load_edge_list(network)
    n = adj.shape[0]
    groups = load_partition(partition, n_nodes=n)
    n_groups = int(groups.max()) + 1
    parents = [-1] + [0] * n_groups + [1 + int(g) for g in groups]
    tree = build_tree(
        (1, n_groups, n), parent_assignment=parents, bounds=(0.0, 1.0)
    )
    return tree, PublicGoodsOracle(
        tree,
        adj,
        kappa,
        benefit=benefit,
        investment_cost=investment_cost,
        baseline=baseline,
    )
