"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class SingularSmallMatrix(ArithmeticError):
    """A small dense system has a (numerically) zero pivot.

    In the block methods this is the breakdown signal.
    """

    def __init__(self, pivot, scale):
        self.pivot = pivot
        self.scale = scale
        super().__init__(f"pivot magnitude {pivot:.3e} below threshold (scale {scale:.3e})")


class ZeroPivot(ArithmeticError):
    def __init__(self, row, value=0.0):
        self.row = row
        self.value = value
        super().__init__(f"zero pivot in incomplete factorization at row {row} (|u_ii| = {abs(value):.3e})")


class ParseError(ValueError):
    def __init__(self, line, reason, path=None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:" if path is not None else "line "
        super().__init__(f"{where}{line}: {reason}")


class UnsupportedField(ValueError):
    """Matrix Market header names a field or symmetry we cannot read."""


class UnknownMethod(KeyError):
    def __str__(self):
        return f"unsupported method: {self.args[0]!r}"


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")
