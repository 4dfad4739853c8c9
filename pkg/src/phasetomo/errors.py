"""Exception hierarchy shared by all modules."""


class PhaseTomoError(Exception):
    """Base class; the CLI maps any subclass to a nonzero exit code."""


class InputError(PhaseTomoError, ValueError):
    """Malformed or inconsistent input data."""


class GridError(PhaseTomoError, ValueError):
    """A spatial or phase-space grid cannot represent the requested object."""


class NonEncirclingError(PhaseTomoError):
    """The orbit at this energy does not enclose the trap center."""


class PerturbationTooStrongError(PhaseTomoError):
    """A perturbative construction fails to converge or leaves its validity range."""


class ExtrapolationError(PhaseTomoError, ValueError):
    """Evaluation requested outside the tabulated domain."""


class RefinementError(PhaseTomoError):
    """Numerical discretization is too coarse for the requested accuracy."""


class BoundaryBreachError(PhaseTomoError):
    """Wave-packet probability reached the edge of the simulation box."""
