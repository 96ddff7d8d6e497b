"""Rice-Mele Bloch Hamiltonians, pump schedules, and the momentum grid.

Conventions: hbar = 1, lattice constant a = 1. Momenta live on the grid
k_j = 2*pi*j/L (j = 0..L-1), reported in [-pi, pi). All Bloch matrices are
p x p Hermitian; evaluation is vectorized over k (a leading k-axis in the
input produces a leading k-axis in the output).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GapClosedError

__all__ = [
    "MomentumGrid",
    "PumpSchedule",
    "BlochSampler",
    "rmm_bloch",
    "fig2_schedule",
    "fig3_schedule",
    "constant_schedule",
    "rmm_sampler",
    "min_gap",
]


def rmm_bloch(k, t1, t2, delta):
    """Rice-Mele Bloch matrix [[delta, -t1 - t2*e^{-ik}], [-t1 - t2*e^{ik}, -delta]].

    ``k`` may be a scalar or an array; the result has shape k.shape + (2, 2).
    """
    k = np.asarray(k, dtype=float)
    off = -t1 - t2 * np.exp(-1j * k)
    h = np.empty(k.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = delta
    h[..., 0, 1] = off
    h[..., 1, 0] = np.conj(off)
    h[..., 1, 1] = -delta
    return h


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform Brillouin-zone grid of L unit cells, k_j = 2*pi*j/L in [-pi, pi)."""

    L: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("momentum grid needs L >= 2")

    @property
    def k(self):
        """Grid momenta in transform order j = 0..L-1, mapped into [-pi, pi)."""
        k = 2.0 * np.pi * np.arange(self.L) / self.L
        return np.where(k >= np.pi, k - 2.0 * np.pi, k)

    @property
    def dk(self):
        return 2.0 * np.pi / self.L


@dataclass(frozen=True)
class PumpSchedule:
    """Cyclic parameter schedule t -> (t1, t2, delta) with period tau.

    ``variant`` tags the two published cycles ("fig2", "fig3") or "custom".
    """

    tau: float
    params: Callable[[float], tuple]
    variant: str = "custom"
    meta: dict = field(default_factory=dict)

    def at(self, t):
        """Instantaneous (t1, t2, delta); strict range check t in [0, tau]."""
        if not 0.0 <= t <= self.tau:
            raise ValueError(f"schedule time {t} outside [0, {self.tau}]")
        return self.params(t)

    def at_wrapped(self, t):
        """Parameters at t mod tau (cyclic continuation)."""
        return self.params(float(np.mod(t, self.tau)))


def fig2_schedule(omega0, tau):
    """Cycle with hoppings -(omega0/4)(1 +/- cos(2 pi t/tau)) and offset (omega0/2) sin."""

    def params(t):
        w = 2.0 * np.pi * t / tau
        t1 = -(omega0 / 4.0) * (1.0 + np.cos(w))
        t2 = -(omega0 / 4.0) * (1.0 - np.cos(w))
        delta = (omega0 / 2.0) * np.sin(w)
        return (t1, t2, delta)

    return PumpSchedule(tau=tau, params=params, variant="fig2", meta={"omega0": omega0})


def fig3_schedule(tau):
    """Cycle with hoppings (1 +/- cos(2 pi t/tau)) and offset -2 sin(2 pi t/tau)."""

    def params(t):
        w = 2.0 * np.pi * t / tau
        return (1.0 + np.cos(w), 1.0 - np.cos(w), -2.0 * np.sin(w))

    return PumpSchedule(tau=tau, params=params, variant="fig3")


def constant_schedule(t1, t2, delta, tau=1.0):
    """Time-independent schedule (useful for guards, snapshots, and tests)."""
    return PumpSchedule(tau=tau, params=lambda t: (t1, t2, delta), variant="custom",
                        meta={"t1": t1, "t2": t2, "delta": delta})


@dataclass(frozen=True)
class BlochSampler:
    """A p-band Bloch Hamiltonian field (k, t) -> p x p Hermitian matrix.

    ``eval`` accepts scalar or array k and any real t; the time argument is
    wrapped into one cycle, so eval(k, t + tau) == eval(k, t).
    """

    p: int
    tau: float
    eval: Callable

    def grid_eval(self, grid, t):
        """Stack of Bloch matrices over a MomentumGrid, shape (L, p, p)."""
        return self.eval(grid.k, t)


def rmm_sampler(schedule):
    """Rice-Mele BlochSampler driven by a PumpSchedule."""

    def _eval(k, t):
        t1, t2, delta = schedule.at_wrapped(t)
        return rmm_bloch(k, t1, t2, delta)

    return BlochSampler(p=2, tau=schedule.tau, eval=_eval)


def min_gap(schedule, sampler, Nk=128, Nt=128, closed_tol=1e-9):
    """Minimum splitting between the two middle bands over the sampled (k, t) torus.

    The value sets the energy unit in which couplings and temperatures are
    quoted. Raises GapClosedError (naming the offending point) if the minimum
    falls below ``closed_tol``.
    """
    if Nk < 8 or Nt < 8:
        raise ValueError("min_gap needs Nk, Nt >= 8")
    ks = -np.pi + 2.0 * np.pi * np.arange(Nk) / Nk
    ts = schedule.tau * np.arange(Nt) / Nt
    lo = sampler.p // 2 - 1 if sampler.p % 2 == 0 else sampler.p // 2
    best = np.inf
    best_pt = (ks[0], ts[0])
    for t in ts:
        w = np.linalg.eigvalsh(sampler.eval(ks, t))
        gaps = w[:, lo + 1] - w[:, lo]
        i = int(np.argmin(gaps))
        if gaps[i] < best:
            best = float(gaps[i])
            best_pt = (float(ks[i]), float(t))
    if best < closed_tol:
        raise GapClosedError(
            f"band gap closes at (k, t) = ({best_pt[0]:.6f}, {best_pt[1]:.6f}): gap = {best:.3e}"
        )
    return best
