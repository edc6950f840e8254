"""Exception types raised across the package."""


class MCFError(Exception):
    """Base class for all errors raised by mcflab."""


class InvalidArgument(MCFError, ValueError):
    pass


class OutOfDomainError(MCFError, IndexError):
    """A stencil was requested at a node without a full neighbourhood."""


class StabilityError(MCFError, RuntimeError):
    """Explicit time step exceeds the stability bound of the scheme."""


class NestingViolation(MCFError, ValueError):
    """Sub-level sets of a family are not nested at some frame."""

    def __init__(self, s_low, s_high, t, count):
        self.s_low, self.s_high, self.t, self.count = s_low, s_high, t, count
        super().__init__(
            f"Omega_{s_low:g}({t:g}) is not contained in Omega_{s_high:g}({t:g}): "
            f"{count} nodes violate the nesting"
        )


class ConstructionError(MCFError, ValueError):
    """A requested test function cannot be built for the given set."""


class InsufficientData(MCFError, ValueError):
    pass
