"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ContractViolationError(RuntimeError):
    """Internal state disagrees with a documented contract."""


class DegenerateGeometryError(ValueError):
    """A geometric operation has no well-defined result (e.g. zero depth)."""
