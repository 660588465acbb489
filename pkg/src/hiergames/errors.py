"""Exception types raised across the package.

Every error raised by this package derives from :class:`HierGameError`, so
callers can catch one type at an API boundary.  The leaf classes are split by
failure mode rather than by module: tree construction, numerical
preconditions, and input-file problems.
"""


class HierGameError(Exception):
    """Base class for all errors raised by hiergames."""


class MalformedTree(HierGameError):
    """Player tree violates structural requirements (bad parent level, cycles,
    orphaned players, inconsistent sizes)."""


class EmptyLevel(MalformedTree):
    """A level of the player tree contains no players."""


class UnknownPlayer(HierGameError, KeyError):
    """A player id is outside the tree."""


class DependencyViolation(HierGameError):
    """A utility definition references a variable outside the player's
    dependency set (own action, parent action, leaf actions)."""


class SingularHessian(HierGameError):
    """A follower's own-action Hessian is numerically singular, so the local
    response Jacobian is undefined (condition estimate above 1e12)."""


class NotStationary(HierGameError):
    """A stability query was made at a profile whose gradient field norm is
    above the stationarity tolerance."""


class NotLasp(HierGameError):
    """A learning-rate bound was requested for a spectrum that is not strictly
    stable (some eigenvalue real part is >= 0)."""


class InvalidWeights(HierGameError):
    """Cost-weight parameters are outside their admissible simplex."""


class InvalidParams(HierGameError, ValueError):
    """A configuration or constructor parameter is out of range or of the
    wrong shape."""


class BadNetworkFile(HierGameError):
    """An edge-list network file could not be parsed."""


class BadPartition(HierGameError):
    """A faction/partition file is inconsistent with the node set."""


class ConfigError(HierGameError):
    """Command-line or game-definition configuration is invalid."""
