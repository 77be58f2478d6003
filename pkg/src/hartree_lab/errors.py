"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all errors raised by hartree_lab."""


class StructuralError(LabError, ValueError):
    """Array shapes, spaces or grids do not fit together."""


class ResolutionError(LabError, ValueError):
    """A kernel, state or integrand is not resolved by the grid."""


class UnsupportedPotential(LabError, ValueError):
    """The potential has no finite moment norms (e.g. Coulomb)."""


class UnsupportedObservable(LabError, ValueError):
    """The observable has no closed-form Fourier reduction."""


class ArityError(LabError, ValueError):
    """Requested particle number is incompatible with the state."""


class PauliBoundError(LabError, ValueError):
    """One-particle density matrix violates 0 <= gamma <= 1/N."""


class ShellError(LabError, ValueError):
    """A momentum or lattice shell does not hold the requested count."""


class StepSizeError(LabError, RuntimeError):
    """Time step too large: instability or CFL violation."""


class CapacityError(LabError, MemoryError):
    """Grid would exceed the memory budget."""


class StencilError(LabError, ValueError):
    """Too few time samples for a finite-difference stencil."""


class PreconditionError(LabError, ValueError):
    """A lemma's hypothesis is not satisfied by the supplied state."""


class WindowError(LabError, ValueError):
    """Requested times lie outside the admissible window."""


class EnvelopeUndefined(LabError, ValueError):
    """kappa_t >= 1, so the geometric envelope is not defined."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BoundInapplicable(LabError, ValueError):
    """Tail bound requested although kappa_t >= 1."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DomainError(LabError, ValueError):
    """Input outside the domain of a fit (e.g. nonpositive data)."""


class ConfigError(LabError, ValueError):
    """Experiment configuration failed validation."""
