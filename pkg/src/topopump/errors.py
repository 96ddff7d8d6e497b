"""Exception hierarchy.

Three branches matter for the CLI exit codes: configuration problems,
physics guards (the requested run is outside the regime where the
observables are meaningful), and numerical failures (an integrator or
reduction violated a tolerance it promised to keep).
"""


class PumpError(Exception):
    """Base class for all package errors."""


class ConfigError(PumpError):
    """Malformed or ambiguous run configuration."""


class ValidationError(PumpError):
    """An input violated a structural precondition (e.g. non-Hermitian matrix)."""


class PhysicsGuardError(PumpError):
    """The run hit a guarded physical regime; results would be meaningless."""


class GapClosedError(PhysicsGuardError):
    """Band gap closes somewhere on the sampled (k, t) torus."""


class DegenerateBandError(PhysicsGuardError):
    """Adjacent bands touch on the grid; single-band tracking undefined."""


class IllConditionedLoopError(PhysicsGuardError):
    """A Wilson-loop link overlap is numerically zero."""


class RefineGridError(PhysicsGuardError):
    """A plaquette link is too small; the discretization is too coarse."""


class WraparoundError(PhysicsGuardError):
    """Significant probability weight at the unwrapping window edges."""


class NoPeakError(PhysicsGuardError):
    """Distribution is nearly uniform; peak position is meaningless."""


class GaugeError(PhysicsGuardError):
    """Gauge discontinuity detected in a stored spinor field."""


class DegenerateGroundStateError(PhysicsGuardError):
    """Zero-temperature state requested but the many-body ground state is degenerate."""


class NumericsError(PumpError):
    """A numerical tolerance (unitarity, trace, positivity) was violated."""


class UnitarityError(NumericsError):
    """Propagator unitarity defect exceeded tolerance."""


class TraceDriftError(NumericsError):
    """Trace of an evolved state drifted beyond tolerance."""
