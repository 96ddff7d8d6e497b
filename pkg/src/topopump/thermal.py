"""Thermal two-point functions, the induced mean-field Hamiltonian, and
the exact thermal state on a single momentum sector's Fock space.

The central object is the covariance matrix m with entries
m[mu, nu] = <cdag_mu c_nu> evaluated in the grand-canonical state of a
Bloch matrix h. Spectrally, m = (sum_b f_b u_b u_b^dag)^T with Fermi
factors f_b = 1/(1 + exp(beta (eps_b - mu_c))); the transpose realizes the
index order of the two-point function. The matrix seen by the auxiliary
particle is eta * m, so its band structure follows h^T with the dispersion
compressed by the Fermi factors ("band flattening").
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateGroundStateError
from .spectral import eigh_gauged

__all__ = [
    "ThermalParams",
    "fermi_factor",
    "covariance",
    "meanfield_h",
    "meanfield_sampler",
    "thermal_fock_state",
    "insulator_fock_state",
    "sector_state_builder",
]


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature (beta = inf is the zero-temperature limit) and chemical potential."""

    beta: float
    mu_c: float = 0.0

    def __post_init__(self):
        if not self.beta >= 0.0:
            raise ValueError("beta must be >= 0")

    @staticmethod
    def from_temperature(T, mu_c=0.0):
        return ThermalParams(beta=np.inf if T == 0.0 else 1.0 / T, mu_c=mu_c)


def fermi_factor(eps, tp):
    """Occupation 1/(1 + e^{beta (eps - mu_c)}), stable for all beta including inf."""
    eps = np.asarray(eps, dtype=float)
    if np.isinf(tp.beta):
        return np.where(eps < tp.mu_c, 1.0, np.where(eps > tp.mu_c, 0.0, 0.5))
    return expit(-tp.beta * (eps - tp.mu_c))


def covariance(h, tp):
    """Covariance matrix m[mu, nu] = <cdag_mu c_nu> of the thermal state of h.

    Computed spectrally (Fermi factors on the eigenvalues), which is exact at
    beta = inf and stable at large beta. Accepts a stack (..., p, p).
    """
    es = eigh_gauged(h)
    f = fermi_factor(es.energies, tp)
    v = es.states
    m = (v * f[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return np.swapaxes(m, -1, -2)


def meanfield_h(m, eta):
    """Single-particle matrix eta * m governing the auxiliary particle."""
    return eta * np.asarray(m)


def meanfield_sampler(sampler, tp, eta):
    """BlochSampler for the auxiliary particle: eta * covariance of the instantaneous h."""
    from .model import BlochSampler

    def _eval(k, t):
        return meanfield_h(covariance(sampler.eval(k, t), tp), eta)

    return BlochSampler(p=sampler.p, tau=sampler.tau, eval=_eval)


def thermal_fock_state(h, tp, ops):
    """Density matrix exp(-beta K)/Z on the Fock space of one momentum sector.

    K = sum_{mu nu} (h - mu_c)_{mu nu} cdag_mu c_nu built from ``ops``. At
    beta = inf the ground-state projector is returned; a degenerate many-body
    ground state raises DegenerateGroundStateError.
    """
    h = np.asarray(h)
    k_op = np.einsum("mn,mnab->ab", h - tp.mu_c * np.eye(ops.p), ops.bilinears)
    return _gibbs(k_op, tp.beta)


def _gibbs(k_op, beta):
    w, v = np.linalg.eigh(k_op)
    if np.isinf(beta):
        ground = w - w[0] < 1e-10
        if ground.sum() > 1:
            raise DegenerateGroundStateError(
                f"{int(ground.sum())}-fold degenerate many-body ground state at beta = inf"
            )
        weights = ground.astype(float)
    else:
        weights = np.exp(-beta * (w - w[0]))
    weights /= weights.sum()
    return (v * weights[None, :]) @ np.conj(v.T)


def insulator_fock_state(h, tp, ops):
    """Thermal state of one momentum sector restricted to single occupation.

    Same Gibbs weights as thermal_fock_state, projected onto the subspace with
    exactly one fermion in the sector and renormalized. This is the
    half-filled-insulator ensemble: the chain holds one fermion per momentum,
    thermally distributed over the two bands, with no particle-number
    fluctuations feeding the auxiliary coupling.
    """
    h = np.asarray(h)
    k_op = np.einsum("mn,mnab->ab", h - tp.mu_c * np.eye(ops.p), ops.bilinears)
    n_tot = np.einsum("mmab->ab", ops.bilinears)
    sector = np.abs(np.diag(n_tot).real - 1.0) < 1e-12
    idx = np.flatnonzero(sector)
    block = _gibbs(k_op[np.ix_(idx, idx)], tp.beta)
    rho = np.zeros_like(k_op)
    rho[np.ix_(idx, idx)] = block
    return rho


def sector_state_builder(ensemble):
    """Resolve an ensemble tag to the per-momentum state constructor."""
    if ensemble == "grand":
        return thermal_fock_state
    if ensemble == "insulator":
        return insulator_fock_state
    raise ValueError(f"unknown ensemble {ensemble!r}")
