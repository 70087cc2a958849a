"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""

    def __init__(self, expected, actual, context=""):
        self.expected = expected
        self.actual = actual
        msg = f"dimension mismatch: expected {expected}, got {actual}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class SingularReducedStateError(ValueError):
    """A reduced state is (numerically) rank deficient, so no inverse filter exists."""


class PostSelectionImpossibleError(ValueError):
    """The post-selected branch has vanishing probability."""


class RankDeficiencyError(ValueError):
    """An observable set does not have the rank the operation requires."""

    def __init__(self, rank, required, msg=None):
        self.rank = rank
        self.required = required
        super().__init__(msg or f"observable set has rank {rank}, required {required}")


class CounterexampleSearchError(RuntimeError):
    """The counterexample search exhausted its strategies."""

    def __init__(self, msg, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(msg)


class ReconstructionError(RuntimeError):
    """All reconstruction restarts failed to produce a feasible candidate."""

    def __init__(self, msg, best_residual=float("inf")):
        self.best_residual = best_residual
        super().__init__(msg)


class ExtensionInequalityError(ValueError):
    """A counterexample-family parameter choice violates a required inequality."""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("inequalities violated: " + "; ".join(self.failed))
