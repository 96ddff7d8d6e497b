"""Exact reduced dynamics of one auxiliary particle coupled to the thermal chain.

The coupling is diagonal in momentum and the thermal state factorizes over
momentum sectors, so the auxiliary particle's amplitude at momentum k only
entangles with that sector. With W_k the joint (Fock x spinor) propagator,
V_k the sector's free propagator, rho_k the sector's thermal state, and
A_mu(t) = <mu| W_k(t) |phi0_k> the conditional Fock-space blocks, the reduced
density matrix of the particle is assembled from

    g_k,mu  = Tr[A_mu rho_k V_k^dag]          (coherence vector)
    G_k,mn  = Tr[A_m  rho_k A_n^dag]          (diagonal block)

as rho[(k,mu),(k',nu)] = C_k conj(C_k') g_k,mu conj(g_k',nu) for k != k' and
|C_k|^2 G_k on the diagonal. This reduces the cost to O(L) propagations of
(2^p p)-dimensional matrices and is checked verbatim against the brute-force
reference in the oracle module.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, TraceDriftError, ValidationError
from .evolve import expm_herm, step_midpoints
from .fock import build_fock_ops
from .pump_single import PositionDistribution, com_dispersion
from .errors import NoPeakError
from .thermal import sector_state_builder

__all__ = [
    "JointBlockResult",
    "JointBlockSeries",
    "AuxDensityMatrix",
    "joint_generator",
    "gk_Gk",
    "full_dynamics_series",
    "assemble_rho_aux",
    "rho_to_position",
    "subtract_background",
    "offset_subtract_peak",
]


@dataclass(frozen=True)
class JointBlockResult:
    """g and G series for one momentum: g (T, p), G (T, p, p)."""

    k: float
    times: np.ndarray
    g: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class JointBlockSeries:
    """g and G series for the whole grid: g (T, L, p), G (T, L, p, p)."""

    k: np.ndarray
    times: np.ndarray
    g: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class AuxDensityMatrix:
    """Auxiliary-particle density matrix in the (k, mu) basis, shape (L*p, L*p)."""

    rho: np.ndarray
    L: int
    p: int

    def blocks(self):
        return self.rho.reshape(self.L, self.p, self.L, self.p)

    def position_matrix(self):
        """Density matrix conjugated into the (n, mu) basis."""
        f = np.exp(2j * np.pi * np.outer(np.arange(self.L), np.arange(self.L)) / self.L)
        f /= np.sqrt(self.L)
        r4 = self.blocks()
        pos4 = np.einsum("nj,jakb,mk->namb", f, r4, np.conj(f))
        return pos4.reshape(self.L * self.p, self.L * self.p)


def joint_generator(h_k, eta, ops):
    """Hermitian generator on Fock(p) x spinor(p) for one momentum sector.

    H = sum_{mn} h_mn cdag_m c_n (x) 1  +  eta sum_{mn} cdag_m c_n (x) E_mn,
    with E_mn the matrix units acting on the auxiliary spinor slot.
    """
    p = ops.p
    dim = ops.dim
    hsys = np.einsum("mn,mnab->ab", np.asarray(h_k), ops.bilinears)
    joint = np.einsum("ab,cd->acbd", hsys, np.eye(p)).reshape(dim * p, dim * p)
    coupling = np.transpose(ops.bilinears, (2, 0, 3, 1)).reshape(dim * p, dim * p)
    return joint + eta * coupling


def _sys_generator_stack(h_stack, ops):
    return np.einsum("kmn,mnab->kab", h_stack, ops.bilinears)


def _joint_generator_stack(h_stack, eta, ops, eye_p, coupling):
    hsys = _sys_generator_stack(h_stack, ops)
    dim = ops.dim
    p = ops.p
    joint = np.einsum("kab,cd->kacbd", hsys, eye_p).reshape(-1, dim * p, dim * p)
    return hsys, joint + eta * coupling


def full_dynamics_series(sampler, schedule, tp, eta, field0, cfg, output_times,
                         ensemble="grand"):
    """g/G series for every grid momentum of an initial SpinorField.

    ``field0.psi`` carries the full initial amplitudes C_k * phi0_k (with the
    grid normalization sum_j |psi_j|^2 = L); the per-sector spinors used for
    the conditional blocks are psi_j normalized per momentum. ``ensemble``
    picks the chain's initial per-momentum state: the full grand-canonical
    Fock mixture ("grand") or the single-occupation insulator sector
    ("insulator").
    """
    k = field0.k
    L = k.shape[0]
    p = sampler.p
    ops = build_fock_ops(p)
    dim = ops.dim
    eye_p = np.eye(p)
    coupling = np.transpose(ops.bilinears, (2, 0, 3, 1)).reshape(dim * p, dim * p)

    norms = np.linalg.norm(field0.psi, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError("initial field has a vanishing momentum amplitude")
    phi0 = field0.psi / norms[:, None]

    build_state = sector_state_builder(ensemble)
    h0 = sampler.eval(k, output_times[0])
    rho = np.stack([build_state(h0[j], tp, ops) for j in range(L)])

    w = np.broadcast_to(np.eye(dim * p), (L, dim * p, dim * p)).copy().astype(complex)
    v = np.broadcast_to(np.eye(dim), (L, dim, dim)).copy().astype(complex)

    times = np.asarray(output_times, dtype=float)
    g_out = np.empty((len(times), L, p), dtype=complex)
    G_out = np.empty((len(times), L, p, p), dtype=complex)

    def record(i):
        wr = w.reshape(L, dim, p, dim, p)
        a = np.einsum("kambn,kn->kmab", wr, phi0)
        g = np.einsum("kmab,kbc,kac->km", a, rho, np.conj(v))
        G = np.einsum("kmab,kbc,knac->kmn", a, rho, np.conj(a))
        drift = np.abs(np.einsum("kmm->k", G).real - 1.0).max()
        if drift > 1e-9:
            raise TraceDriftError(f"Tr G drift {drift:.3e} at t={times[i]}")
        g_out[i] = g
        G_out[i] = G

    record(0)
    for i in range(1, len(times)):
        t0, t1 = times[i - 1], times[i]
        n_steps = cfg.steps_for(t1 - t0, schedule.tau)
        mids, dt = step_midpoints(t0, t1, n_steps)
        for tm in mids:
            hsys, joint = _joint_generator_stack(sampler.eval(k, tm), eta, ops, eye_p, coupling)
            w = expm_herm(joint, scale=-dt) @ w
            v = expm_herm(hsys, scale=-dt) @ v
        record(i)

    defect = np.abs(np.conj(np.swapaxes(w, -1, -2)) @ w - np.eye(dim * p)).max()
    if defect > cfg.unitarity_tol:
        raise NumericsError(f"joint propagator unitarity defect {defect:.3e}")
    return JointBlockSeries(k=k.copy(), times=times, g=g_out, G=G_out)


def gk_Gk(k, sampler, schedule, tp, eta, phi0_k, cfg, output_times, ensemble="grand"):
    """g/G series for a single momentum and a normalized initial spinor phi0_k."""
    phi0 = np.asarray(phi0_k, dtype=complex)
    if abs(np.linalg.norm(phi0) - 1.0) > 1e-10:
        raise ValidationError("phi0_k must be normalized")
    from .pump_single import SpinorField

    field = SpinorField(psi=phi0[None, :], k=np.atleast_1d(np.asarray(k, dtype=float)))
    series = full_dynamics_series(sampler, schedule, tp, eta, field, cfg, output_times,
                                  ensemble=ensemble)
    return JointBlockResult(k=float(k), times=series.times, g=series.g[:, 0], G=series.G[:, 0])


def assemble_rho_aux(g, G, C):
    """Auxiliary density matrix from per-momentum blocks and amplitudes C_k.

    Off-diagonal momentum blocks are C_k conj(C_k') g_k g_k'^dag; diagonal
    blocks are |C_k|^2 G_k. Requires sum_k |C_k|^2 = 1.
    """
    g = np.asarray(g)
    G = np.asarray(G)
    C = np.asarray(C, dtype=complex)
    L, p = g.shape
    if abs(np.sum(np.abs(C) ** 2) - 1.0) > 1e-8:
        raise ValidationError("amplitudes C_k must satisfy sum |C_k|^2 = 1")
    cg = C[:, None] * g
    rho4 = np.einsum("km,ln->kmln", cg, np.conj(cg))
    idx = np.arange(L)
    rho4[idx, :, idx, :] = (np.abs(C) ** 2)[:, None, None] * G
    rho = rho4.reshape(L * p, L * p)
    herm = np.abs(rho - np.conj(rho.T)).max()
    if herm > 1e-11:
        raise NumericsError(f"assembled rho not Hermitian: defect {herm:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-10:
        raise TraceDriftError(f"assembled rho trace {tr} deviates from 1")
    wmin = float(np.linalg.eigvalsh(rho).min())
    if wmin < -1e-9:
        raise NumericsError(f"assembled rho has negative eigenvalue {wmin:.3e}")
    return AuxDensityMatrix(rho=rho, L=L, p=p)


def rho_to_position(aux):
    """Cell-resolved probabilities P_n = sum_mu <n,mu| rho |n,mu>."""
    f = np.exp(2j * np.pi * np.outer(np.arange(aux.L), np.arange(aux.L)) / aux.L)
    f /= np.sqrt(aux.L)
    r4 = aux.blocks()
    block = np.einsum("nj,jakb,nk->nab", f, r4, np.conj(f))
    per_site = np.diagonal(block, axis1=1, axis2=2).real.copy()
    return PositionDistribution(p_cell=per_site.sum(axis=1), per_site=per_site)


def _background_offset(p, estimator):
    if estimator == "min":
        return float(p.min())
    if estimator == "median":
        return float(np.median(p))
    raise ValueError(f"unknown offset estimator {estimator!r}")


def _subtract(p, estimator):
    off = _background_offset(p, estimator)
    denom = 1.0 - p.shape[0] * off
    if denom < 0.1:
        raise NoPeakError("distribution is nearly uniform; no meaningful peak")
    return (p - off) / denom, off


def subtract_background(dist, estimator="min"):
    """Homogeneous-background-subtracted, renormalized copy of a distribution."""
    p, off = _subtract(dist.p_cell, estimator)
    n_orb = dist.per_site.shape[1]
    return PositionDistribution(p_cell=p, per_site=np.repeat(p[:, None], n_orb, axis=1) / n_orb), off


def offset_subtract_peak(dist, dist0, estimator="min"):
    """Peak shift, background offset, and offset-subtracted COM shift.

    Both distributions are reduced by their own homogeneous background
    (default estimator: the minimum) and renormalized; the peak shift is the
    argmax displacement unwrapped on the ring, and R_sub is the COM of the
    subtracted distribution relative to the subtracted initial one.
    """
    p1, off1 = _subtract(dist.p_cell, estimator)
    p0, _ = _subtract(dist0.p_cell, estimator)
    L = p1.shape[0]
    peak1 = int(np.argmax(p1))
    peak0 = int(np.argmax(p0))
    half = (L - 1) // 2
    peak_shift = (peak1 - peak0 + half) % L - half
    d1 = PositionDistribution(p_cell=p1, per_site=np.zeros((L, 1)))
    d0 = PositionDistribution(p_cell=p0, per_site=np.zeros((L, 1)))
    r1, _ = com_dispersion(d1, peak1)
    r0, _ = com_dispersion(d0, peak0)
    r_sub = peak_shift + (r1 - r0)
    return peak_shift, off1, float(r_sub)
