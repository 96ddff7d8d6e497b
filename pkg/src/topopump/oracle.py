"""Brute-force reference dynamics on tiny lattices.

Evolves the full (system Fock space) x (auxiliary particle) density matrix
with a global Jordan-Wigner representation and traces out the system. No
factorization is assumed anywhere, so this module arbitrates the per-momentum
algorithm in pump_full and every sign/ordering decision. Dense matrices
throughout; dimension is capped at 2^(L*p) * L*p <= 384.
"""

import numpy as np

from .errors import NumericsError, TraceDriftError
from .evolve import expm_herm, step_midpoints
from .fock import _jw_annihilation, build_fock_ops
from .pump_full import AuxDensityMatrix
from .thermal import _gibbs, sector_state_builder

__all__ = ["brute_force_rho_aux"]

DIM_CAP = 384


def _global_jw(n_modes, order):
    """Annihilation operators for n_modes with mode M at chain position order[M]."""
    return [_jw_annihilation(order[m] + 1, n_modes) for m in range(n_modes)]


def brute_force_rho_aux(sampler, schedule, grid, tp, eta, phi0_field, cfg,
                        output_times, mode_order=None, ensemble="grand"):
    """Series of auxiliary density matrices from the unfactorized joint dynamics.

    ``phi0_field`` is a SpinorField with the grid normalization (the
    single-particle amplitudes are psi / sqrt(L)). ``mode_order`` permutes the
    global Jordan-Wigner chain (testing hook; the reduced state must not
    depend on it).
    """
    L = grid.L
    p = sampler.p
    n_modes = L * p
    dim_sys = 2 ** n_modes
    dim_aux = L * p
    if dim_sys * dim_aux > DIM_CAP:
        raise ValueError(f"joint dimension {dim_sys * dim_aux} exceeds cap {DIM_CAP}")
    order = list(range(n_modes)) if mode_order is None else list(mode_order)
    if sorted(order) != list(range(n_modes)):
        raise ValueError("mode_order must be a permutation of the modes")

    c = _global_jw(n_modes, order)
    bil = np.empty((L, p, p, dim_sys, dim_sys), dtype=complex)
    for j in range(L):
        for mu in range(p):
            for nu in range(p):
                bil[j, mu, nu] = np.conj(c[j * p + mu].T) @ c[j * p + nu]

    # coupling: same-momentum system bilinears tied to the matching aux block
    coupling = np.zeros((dim_sys, dim_aux, dim_sys, dim_aux), dtype=complex)
    for j in range(L):
        coupling[:, j * p:(j + 1) * p, :, j * p:(j + 1) * p] = \
            np.einsum("mnab->ambn", bil[j])
    coupling = coupling.reshape(dim_sys * dim_aux, dim_sys * dim_aux)

    # initial thermal state of the chain at the initial time
    h0 = sampler.eval(grid.k, output_times[0])
    if mode_order is None:
        ops = build_fock_ops(p)
        build_state = sector_state_builder(ensemble)
        rho_js = [build_state(h0[j], tp, ops) for j in range(L)]
        rho_sys = rho_js[-1]
        for j in range(L - 2, -1, -1):
            rho_sys = np.kron(rho_sys, rho_js[j])
    else:
        # permuted-ordering path: build the Gibbs state from the global
        # bilinears; per-momentum number projectors commute with everything
        k_op = np.einsum("jmn,jmnab->ab", h0 - tp.mu_c * np.eye(p)[None], bil)
        rho_sys = _gibbs(k_op, tp.beta)
        if ensemble == "insulator":
            for j in range(L):
                n_j = np.einsum("mmab->ab", bil[j])
                keep = np.abs(np.diag(n_j).real - 1.0) < 1e-12
                rho_sys = keep[:, None] * rho_sys * keep[None, :]
            rho_sys /= np.trace(rho_sys).real
        elif ensemble != "grand":
            raise ValueError(f"unknown ensemble {ensemble!r}")

    amp = phi0_field.psi.reshape(-1) / np.sqrt(L)
    rho = np.kron(rho_sys, np.outer(amp, np.conj(amp)))

    eye_aux = np.eye(dim_aux)
    times = np.asarray(output_times, dtype=float)
    out = []

    def reduce_and_check(t):
        r4 = rho.reshape(dim_sys, dim_aux, dim_sys, dim_aux)
        rho_aux = np.einsum("sasb->ab", r4)
        tr = np.trace(rho_aux).real
        if abs(tr - 1.0) > 1e-9:
            raise TraceDriftError(f"joint trace drift {abs(tr - 1.0):.3e} at t={t}")
        herm = np.abs(rho_aux - np.conj(rho_aux.T)).max()
        if herm > 1e-10:
            raise NumericsError(f"reduced state not Hermitian at t={t}: {herm:.3e}")
        wmin = float(np.linalg.eigvalsh(rho_aux).min())
        if wmin < -1e-10:
            raise NumericsError(f"reduced state has eigenvalue {wmin:.3e} at t={t}")
        out.append(AuxDensityMatrix(rho=rho_aux, L=L, p=p))

    reduce_and_check(times[0])
    u_total = np.eye(dim_sys * dim_aux, dtype=complex)
    for i in range(1, len(times)):
        n_steps = cfg.steps_for(times[i] - times[i - 1], schedule.tau)
        mids, dt = step_midpoints(times[i - 1], times[i], n_steps)
        for tm in mids:
            h = sampler.eval(grid.k, tm)
            hs = np.einsum("jmn,jmnab->ab", h, bil)
            joint = np.kron(hs, eye_aux) + eta * coupling
            u = expm_herm(joint, scale=-dt)
            rho = u @ rho @ np.conj(u.T)
            u_total = u @ u_total
        reduce_and_check(times[i])

    defect = np.abs(np.conj(u_total.T) @ u_total - np.eye(dim_sys * dim_aux)).max()
    if defect > cfg.unitarity_tol:
        raise NumericsError(f"joint propagator unitarity defect {defect:.3e}")
    return out
