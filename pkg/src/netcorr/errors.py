"""Exception types shared across the package."""


class DegenerateDataError(ValueError):
    """Data or weights for which a statistic is undefined.

    Examples are a constant outcome, a single observed category, or a weight
    matrix without any positive off-diagonal entry.
    """
