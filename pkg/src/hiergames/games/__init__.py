"""Built-in game families and the game-definition dispatcher.

Every family exposes a ``make_*`` constructor returning a ``(tree, oracle)``
pair; :func:`from_definition` builds the same games from a JSON-style dict
(see :func:`hiergames.core.load_game` for accepted sources).
"""

from __future__ import annotations

from ..core import build_tree
from ..errors import InvalidParams
from .epidemic import EPIDEMIC_BENCHMARK_SHAPES, EpidemicOracle, make_epidemic
from .polynomial import (
    P111_3D_ALPHA,
    P111_3D_LSPE,
    P111_ALPHA,
    P111_LSPE,
    P112_ALPHA,
    P112_LSPE,
    PolynomialOracle,
    make_p111,
    make_p111_3d,
    make_p112,
    make_polynomial,
    make_random_polynomial,
)
from .public_goods import (
    PublicGoodsOracle,
    load_edge_list,
    load_partition,
    make_public_goods,
)
from .security import SecurityOracle, make_security

__all__ = [
    "from_definition",
    "GAME_KINDS",
    # polynomial
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
    # applications
    "EpidemicOracle",
    "make_epidemic",
    "EPIDEMIC_BENCHMARK_SHAPES",
    "PublicGoodsOracle",
    "make_public_goods",
    "load_edge_list",
    "load_partition",
    "SecurityOracle",
    "make_security",
]


def _make_polynomial_from(params):
    levels = params.pop("levels", None)
    terms = params.pop("terms", None)
    if levels is None or terms is None:
        raise InvalidParams("polynomial definitions need 'levels' and 'terms'")
    tree = build_tree(
        levels,
        params.pop("parents", None),
        action_dims=params.pop("action_dims", 1),
        bounds=params.pop("bounds", None),
    )
    if params:
        raise InvalidParams(f"unknown polynomial keys: {sorted(params)}")
    compiled = [
        [(float(c), powers) for c, powers in player_terms] for player_terms in terms
    ]
    return make_polynomial(tree, compiled)


_FIXED = {
    "p111": make_p111,
    "p112": make_p112,
    "p111_3d": make_p111_3d,
}

_PARAMETRIC = {
    "polynomial": _make_polynomial_from,
    "random_polynomial": lambda p: make_random_polynomial(**p),
    "epidemic": lambda p: make_epidemic(**p),
    "public_goods": lambda p: make_public_goods(**p),
    "security": lambda p: make_security(**p),
}

GAME_KINDS = tuple(sorted(_FIXED) + sorted(_PARAMETRIC))


def from_definition(spec: dict):
    """Build a game from a definition dict: ``{"game_kind": ..., "params": {...}}``.

    Fixed benchmark kinds take no parameters; parametric kinds forward
    ``params`` to their ``make_*`` constructor (see each family's docs).
    """
    spec = dict(spec)
    kind = spec.pop("game_kind", None)
    params = spec.pop("params", None) or {}
    if spec:
        raise InvalidParams(f"unknown definition keys: {sorted(spec)}")
    if not isinstance(params, dict):
        raise InvalidParams("'params' must be an object")
    if kind in _FIXED:
        if params:
            raise InvalidParams(f"game kind {kind!r} takes no params")
        return _FIXED[kind]()
    if kind in _PARAMETRIC:
        try:
            return _PARAMETRIC[kind](dict(params))
        except TypeError as exc:
            raise InvalidParams(f"bad params for {kind!r}: {exc}") from exc
    raise InvalidParams(
        f"unknown game_kind {kind!r}; available: {', '.join(GAME_KINDS)}"
    )
