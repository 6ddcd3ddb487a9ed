"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Shapes of lattices, flows or parameter matrices do not match."""


class BudgetExceeded(RuntimeError):
    """An enumeration or counting loop would exceed its configured budget."""


class ConfigError(ValueError):
    """A configuration document failed schema or range validation.

    ``key`` is the dotted key path of the offending entry (``vartheta[0]``,
    ``trunc.c``, ...) when one can be named.
    """

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
