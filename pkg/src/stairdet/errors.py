class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NumericError(ArithmeticError):
    """A numeric precondition failed (zero pivot, non-PD matrix, CG breakdown).

    ``index`` carries the offending 0-based position when one is known.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index
