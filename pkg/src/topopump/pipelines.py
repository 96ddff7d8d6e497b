"""Run drivers for the four simulation pipelines.

Everything here is pure computation over in-memory data; serialization and
exit-code policy live in the CLI module. Temperatures and couplings are
dimensionless multiples of the cycle's minimum band gap, resolved once per
run so the two published schedules share one convention.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .evolve import PropagatorConfig
from .model import MomentumGrid, fig2_schedule, fig3_schedule, min_gap, rmm_sampler
from .pump_full import (
    assemble_rho_aux,
    full_dynamics_series,
    offset_subtract_peak,
    rho_to_position,
)
from .pump_single import (
    com_series,
    init_wannier,
    evolve_field,
    position_distribution,
    transport_series,
)
from .spectral import chern_number
from .thermal import ThermalParams, meanfield_sampler

__all__ = [
    "RunResult",
    "output_grid",
    "tau_for_temperature",
    "band_pump_run",
    "full_pump_run",
    "chern_pair",
]


@dataclass
class RunResult:
    """Distribution series plus per-time observables of one pipeline run."""

    times: np.ndarray
    dists: list
    records: list  # TransportRecord per time (A/B = nan for density-matrix runs)
    peak_shift: list
    offset: list
    r_sub: list
    extras: dict


def output_grid(tau, n_output):
    """n_output + 1 uniformly spaced times covering one cycle, t = 0 included."""
    return np.linspace(0.0, tau, n_output + 1)


def tau_for_temperature(tau_ref, beta_ref, beta, delta_gap):
    """Scale the cycle time so the flattened-band adiabaticity matches a reference.

    The auxiliary gap is proportional to tanh(beta * delta_gap / 4) at its
    minimum over the cycle, so matching gap * tau across temperatures means
    tau(T) = tau_ref * tanh(beta_ref * gap / 4) / tanh(beta * gap / 4).
    """
    x_ref = np.tanh(beta_ref * delta_gap / 4.0)
    x = np.tanh(beta * delta_gap / 4.0)
    return float(tau_ref * x_ref / x)


def make_schedule(variant, tau, omega0=1.0):
    if variant == "fig2":
        return fig2_schedule(omega0, tau)
    if variant == "fig3":
        return fig3_schedule(tau)
    raise ValueError(f"unknown schedule variant {variant!r}")


def band_pump_run(sampler, grid, band, n0, cfg, times):
    """Pump a Wannier state of ``sampler``'s own band structure over ``times``.

    Used for both the bare single-particle pump and the mean-field channel
    (pass the mean-field sampler). Returns a RunResult with field-based
    observables, including the A/B split of the spread.
    """
    field = init_wannier(sampler, grid, band, n0, t=times[0])
    fields = [field]
    for i in range(1, len(times)):
        n_steps = cfg.steps_for(times[i] - times[i - 1], sampler.tau)
        field = evolve_field(
            field, sampler.eval, times[i - 1], times[i], cfg, n_steps=n_steps
        )
        fields.append(field)
    records = transport_series(fields, times, n0)
    dists = [position_distribution(f) for f in fields]
    peaks, offsets, rsubs = [], [], []
    for d in dists:
        ps, off, rs = offset_subtract_peak(d, dists[0])
        peaks.append(ps)
        offsets.append(off)
        rsubs.append(rs)
    return RunResult(
        times=np.asarray(times, dtype=float),
        dists=dists,
        records=records,
        peak_shift=peaks,
        offset=offsets,
        r_sub=rsubs,
        extras={"gauge_fingerprint": fields[0].gauge_fingerprint},
    )


@dataclass(frozen=True)
class FullRecord:
    t: float
    R: float
    Var: float
    A: float
    B: float


def full_pump_run(system, schedule, tp, eta, grid, band, n0, cfg, times,
                  init_state="meanfield", offset_estimator="min",
                  ensemble="insulator"):
    """Exact coupled dynamics of the auxiliary particle, reduced per output time.

    The particle starts in the lowest Wannier state of the mean-field
    band structure (or of the system's, with ``init_state='system'``); the
    chain starts in the per-momentum thermal state of the initial
    Hamiltonian. The default ``ensemble='insulator'`` holds one fermion per
    momentum (half filling without number fluctuations); the empty and
    doubly-occupied sectors of the grand-canonical mixture leave the particle
    frozen and wash the transported peak out at temperatures near the gap.
    """
    if eta * schedule.tau < 5.0:
        warnings.warn(
            f"eta*tau = {eta * schedule.tau:.2f} < 5: coupled pump far from adiabatic",
            stacklevel=2,
        )
    mf = meanfield_sampler(system, tp, eta)
    init_sampler = mf if init_state == "meanfield" else system
    field0 = init_wannier(init_sampler, grid, band, n0, t=times[0])
    series = full_dynamics_series(system, schedule, tp, eta, field0, cfg, times,
                                  ensemble=ensemble)
    amps = np.linalg.norm(field0.psi, axis=1) / np.sqrt(grid.L)

    dists, rhos = [], []
    for i in range(len(times)):
        aux = assemble_rho_aux(series.g[i], series.G[i], amps)
        rhos.append(aux)
        dists.append(rho_to_position(aux))
    moments = com_series(dists, n0)
    records = [
        FullRecord(t=float(t), R=r, Var=var, A=float("nan"), B=float("nan"))
        for t, (r, var) in zip(times, moments)
    ]
    peaks, offsets, rsubs = [], [], []
    for d in dists:
        ps, off, rs = offset_subtract_peak(d, dists[0], estimator=offset_estimator)
        peaks.append(ps)
        offsets.append(off)
        rsubs.append(rs)
    return RunResult(
        times=np.asarray(times, dtype=float),
        dists=dists,
        records=records,
        peak_shift=peaks,
        offset=offsets,
        r_sub=rsubs,
        extras={
            "gauge_fingerprint": field0.gauge_fingerprint,
            "init_state": init_state,
            "ensemble": ensemble,
            "rhos": rhos,
            "gG": series,
        },
    )


def chern_pair(schedule, tp, eta, band=0, Nk=64, Nt=64):
    """Chern numbers of the system band and of the induced mean-field band."""
    system = rmm_sampler(schedule)
    c_sys = chern_number(system, schedule, band, Nk=Nk, Nt=Nt)
    c_mf = chern_number(meanfield_sampler(system, tp, eta), schedule, band, Nk=Nk, Nt=Nt)
    return c_sys, c_mf


def resolve_units(schedule, eta_over_gap, t_over_gap=None, beta=None, mu_c=0.0):
    """Resolve dimensionless (eta, T) specifications against the cycle's gap."""
    sampler = rmm_sampler(schedule)
    gap = min_gap(schedule, sampler)
    eta = eta_over_gap * gap
    if beta is None:
        if t_over_gap is None:
            raise ValueError("need t_over_gap or beta")
        beta = np.inf if t_over_gap == 0.0 else 1.0 / (t_over_gap * gap)
    tp = ThermalParams(beta=beta, mu_c=mu_c)
    return sampler, gap, eta, tp


def default_propagator(tau, steps_per_cycle=4096, max_dt=0.25):
    """Propagator sized so steps stay fine in absolute time for long cycles."""
    steps = max(int(steps_per_cycle), int(np.ceil(tau / max_dt)))
    return PropagatorConfig(steps_per_cycle=steps)
