"""Exception hierarchy shared by all modules."""


class CPBoundsError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteMoment(CPBoundsError):
    """An interarrival family/parameter combination has an infinite moment."""


class GNotMonotone(CPBoundsError):
    """A user-supplied memory-loss function violates the monotone-envelope
    requirement (its exponentially rescaled version must be nondecreasing)."""


class SigmaInvalid(CPBoundsError):
    """A user-supplied memory-loss function exceeds the maximal admissible one."""


class Inapplicable(CPBoundsError):
    """The memoryless construction carries zero mass (c0 = 0), so no bound
    can be produced for this distribution/rate combination."""


class AllInapplicable(CPBoundsError):
    """Every rate in an optimization grid leads to c0 = 0."""


class ZeroC0(CPBoundsError):
    """A compound Poisson spec was requested with reset mass c0 = 0."""


class NotNormalized(CPBoundsError):
    """A probability vector does not sum to 1 within tolerance."""


class NotIrreducible(CPBoundsError):
    """The embedded mark chain of a model is not irreducible."""


class BUnreachable(CPBoundsError):
    """The counted subset cannot be reached from some state."""


class InfeasibleMu(CPBoundsError):
    """The reset-mark distribution mu is incompatible with the per-state
    memory-loss masses: mu(s') * c0(s) > P(s, s') for the listed pairs."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"infeasible reset-mark distribution at pairs {self.pairs}")


class WindowExceedsHorizon(CPBoundsError):
    """A counting window extends beyond the simulated horizon."""


class ModeMismatch(CPBoundsError):
    """Continuous/lattice modes of the inputs do not agree, or an operation
    requires the other mode."""


class SingularSystem(CPBoundsError):
    """The cycle-functional linear system is numerically singular.  Cannot
    occur for irreducible models with some c0(s) > 0; reported defensively."""


class ConfigError(CPBoundsError):
    """A run configuration failed schema validation."""
