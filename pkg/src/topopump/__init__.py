"""Quantized pumping of a single auxiliary particle driven by a thermal Rice-Mele chain.

The package covers three transport channels for a cyclically driven two-band
chain: the bare single-particle Thouless pump, the mean-field channel where
the particle rides the thermal covariance matrix of the chain, and the exact
coupled dynamics including fluctuations, together with the topological
invariants (Zak phase, plaquette Chern number) that fix the quantized
displacement.
"""

from .errors import (
    ConfigError,
    DegenerateBandError,
    DegenerateGroundStateError,
    GapClosedError,
    GaugeError,
    IllConditionedLoopError,
    NoPeakError,
    NumericsError,
    PhysicsGuardError,
    PumpError,
    RefineGridError,
    TraceDriftError,
    UnitarityError,
    ValidationError,
    WraparoundError,
)
from .evolve import PropagatorConfig, propagate
from .fock import FockOperatorSet, build_fock_ops
from .model import (
    BlochSampler,
    MomentumGrid,
    PumpSchedule,
    constant_schedule,
    fig2_schedule,
    fig3_schedule,
    min_gap,
    rmm_bloch,
    rmm_sampler,
)
from .oracle import brute_force_rho_aux
from .pump_full import (
    AuxDensityMatrix,
    JointBlockResult,
    JointBlockSeries,
    assemble_rho_aux,
    full_dynamics_series,
    gk_Gk,
    joint_generator,
    offset_subtract_peak,
    rho_to_position,
    subtract_background,
)
from .pump_single import (
    PositionDistribution,
    SpinorField,
    TransportRecord,
    com_dispersion,
    com_series,
    dispersion_terms,
    evolve_field,
    init_wannier,
    position_distribution,
    transport_series,
)
from .spectral import (
    GaugedEigensystem,
    SmoothBandField,
    chern_number,
    eigh_gauged,
    nonadiabatic_norm,
    smooth_band,
    zak_phase,
)
from .thermal import (
    ThermalParams,
    covariance,
    fermi_factor,
    insulator_fock_state,
    meanfield_h,
    meanfield_sampler,
    sector_state_builder,
    thermal_fock_state,
)

__version__ = "0.1.0"
