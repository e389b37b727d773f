"""Exception hierarchy shared by all modules."""


class GreedyTreeError(Exception):
    """Base class for errors raised by this package."""


class InvalidSpecError(GreedyTreeError, ValueError):
    """A distribution, target or config specification violates its contract."""


class ArityMismatchError(GreedyTreeError, ValueError):
    pass


class ConflictingRestrictionError(InvalidSpecError):
    """A restriction assigns the same variable twice."""


class UnsupportedTargetError(GreedyTreeError):
    """No exact oracle applies and brute force would exceed the size cap."""


class InfiniteSmoothnessError(GreedyTreeError, ValueError):
    """The impurity function has no finite smoothness bound on the requested range."""


class InfeasibleEpsilonError(GreedyTreeError, ValueError):
    """No integral free-address count fits the requested epsilon band."""


class SearchFailedError(GreedyTreeError, LookupError):
    """A randomized search exhausted its trial budget.

    This never certifies that no solution exists.
    """

    def __init__(self, message, trials=0):
        super().__init__(message)
        self.trials = trials
