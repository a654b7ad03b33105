"""Error types separating bad inputs from numerical failure."""


class NumericalError(RuntimeError):
    """Raised when an estimate cannot be produced from valid inputs
    (ill-conditioning, positivity violations, degenerate designs)."""


class PositivityError(NumericalError):
    """Zero exposure probability under the declared randomization."""
