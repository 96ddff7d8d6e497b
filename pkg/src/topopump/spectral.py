"""Gauged eigensystems, smooth band fields, Zak phase, and Chern numbers.

Gauge fixing: each eigenvector is rephased so its largest-modulus component
(ties broken by lowest index) is real and positive. Wilson loops make the
Zak phase and the plaquette Chern number gauge invariant regardless.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateBandError,
    IllConditionedLoopError,
    RefineGridError,
    ValidationError,
)

__all__ = [
    "GaugedEigensystem",
    "SmoothBandField",
    "eigh_gauged",
    "smooth_band",
    "zak_phase",
    "chern_number",
    "nonadiabatic_norm",
]

HERM_TOL = 1e-10
LINK_TOL = 1e-8
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class GaugedEigensystem:
    """Ascending eigenvalues and gauge-fixed orthonormal eigenvectors (columns)."""

    energies: np.ndarray
    states: np.ndarray


def _fix_gauge(states):
    """Rephase eigenvector columns: largest-modulus entry real positive.

    ``states`` has shape (..., p, p) with eigenvectors in the last-but-one
    axis (columns). Ties in the modulus are broken towards the lowest index.
    """
    mags = np.abs(states)
    # tolerate float noise when two components tie in modulus
    top = mags.max(axis=-2, keepdims=True)
    idx = np.argmax(mags >= top - 1e-12, axis=-2)
    anchor = np.take_along_axis(states, idx[..., None, :], axis=-2)[..., 0, :]
    phase = np.where(np.abs(anchor) == 0.0, 1.0, anchor / np.abs(anchor))
    return states * np.conj(phase)[..., None, :]


def eigh_gauged(h):
    """Eigendecomposition of a Hermitian matrix with deterministic gauge.

    Accepts (p, p) or a stack (..., p, p). Raises ValidationError when the
    Hermiticity defect exceeds 1e-10.
    """
    h = np.asarray(h)
    defect = np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max()
    if defect > HERM_TOL:
        raise ValidationError(f"matrix is not Hermitian: defect {defect:.3e}")
    w, v = np.linalg.eigh(h)
    return GaugedEigensystem(energies=w, states=_fix_gauge(v))


def _band_states(sampler, grid, t, band, gap_tol=DEGENERACY_TOL):
    """Gauge-fixed spinors of one band on the grid, with adjacency gap check."""
    es = eigh_gauged(sampler.grid_eval(grid, t))
    w = es.energies
    p = w.shape[-1]
    if not 0 <= band < p:
        raise ValueError(f"band index {band} outside [0, {p})")
    for nb in (band - 1, band + 1):
        if 0 <= nb < p:
            gap = np.abs(w[:, nb] - w[:, band]).min()
            if gap <= gap_tol:
                raise DegenerateBandError(
                    f"bands {band} and {nb} separated by only {gap:.3e} on the grid at t={t}"
                )
    return es.states[:, :, band]


@dataclass(frozen=True)
class SmoothBandField:
    """One band's spinors on the grid in the twisted parallel-transport gauge.

    All L link overlaps <phi_j|phi_{j+1}> carry the same small phase, so the
    field closes periodically around the Brillouin zone and the residual
    Zak phase is spread uniformly across links.
    """

    band: int
    t: float
    spinors: np.ndarray  # (L, p)
    k: np.ndarray  # (L,)


def smooth_band(sampler, grid, t, band):
    """Parallel-transport gauge along k with the closing phase twisted out evenly."""
    u = _band_states(sampler, grid, t, band)
    L = u.shape[0]
    phi = u.copy()
    for j in range(L - 1):
        ov = np.vdot(phi[j], phi[j + 1])
        if np.abs(ov) < LINK_TOL:
            raise IllConditionedLoopError(f"vanishing link overlap at j={j}")
        phi[j + 1] *= np.conj(ov) / np.abs(ov)
    closing = np.vdot(phi[L - 1], phi[0])
    if np.abs(closing) < LINK_TOL:
        raise IllConditionedLoopError("vanishing closing link overlap")
    theta = np.angle(closing)
    phi *= np.exp(1j * theta * np.arange(L) / L)[:, None]
    return SmoothBandField(band=band, t=float(t), spinors=phi, k=grid.k.copy())


def zak_phase(field):
    """Zak phase -arg of the Wilson loop over the closed momentum ring, in (-pi, pi]."""
    phi = field.spinors
    links = np.einsum("jp,jp->j", np.conj(phi), np.roll(phi, -1, axis=0))
    if np.abs(links).min() < LINK_TOL:
        raise IllConditionedLoopError("vanishing link overlap in Wilson loop")
    # accumulate the arg link by link to avoid product under/overflow
    zak = -np.angle(np.prod(links / np.abs(links)))
    if zak <= -np.pi:
        zak += 2.0 * np.pi
    return float(zak)


def chern_number(sampler, schedule, band, Nk=64, Nt=64):
    """Plaquette (lattice field-strength) Chern number of one band on the (k, t) torus.

    The plaquette loop is oriented (k, then t), which makes the result equal
    the center-of-mass displacement per cycle of an adiabatically pumped,
    momentum-uniform superposition of that band. Exactly integer by
    construction of the arg sum.
    """
    ks = -np.pi + 2.0 * np.pi * np.arange(Nk) / Nk
    ts = schedule.tau * np.arange(Nt) / Nt
    p = sampler.p
    u = np.empty((Nt, Nk, p), dtype=complex)
    for m, t in enumerate(ts):
        es = eigh_gauged(sampler.eval(ks, t))
        w = es.energies
        for nb in (band - 1, band + 1):
            if 0 <= nb < p:
                if np.abs(w[:, nb] - w[:, band]).min() <= DEGENERACY_TOL:
                    raise DegenerateBandError(
                        f"bands touch on the torus at t={t}; Chern number undefined"
                    )
        u[m] = es.states[:, :, band]

    u_k = np.roll(u, -1, axis=1)  # u(k+dk, t)
    u_t = np.roll(u, -1, axis=0)  # u(k, t+dt)
    u_kt = np.roll(u_k, -1, axis=0)  # u(k+dk, t+dt)
    l1 = np.einsum("mkp,mkp->mk", np.conj(u), u_k)
    l2 = np.einsum("mkp,mkp->mk", np.conj(u_k), u_kt)
    l3 = np.einsum("mkp,mkp->mk", np.conj(u_kt), u_t)
    l4 = np.einsum("mkp,mkp->mk", np.conj(u_t), u)
    for l in (l1, l2, l3, l4):
        if np.abs(l).min() < LINK_TOL:
            raise RefineGridError("vanishing plaquette link; refine Nk/Nt")
    flux = np.angle(l1 * l2 * l3 * l4)
    c = flux.sum() / (2.0 * np.pi)
    if abs(c - round(c)) >= 1e-12:
        raise RefineGridError(f"plaquette sum {c} is not integer; refine Nk/Nt")
    return int(round(c))


def nonadiabatic_norm(sampler, schedule, k, t, dt=None):
    """Spectral norm of (d_t r) r^{-1}, r the gauge-fixed diagonalizing frame.

    Central finite difference in t with step ``dt`` (default tau/1024); the
    quantity scales as 1/tau and diagnoses how adiabatic a cycle time is.
    """
    if dt is None:
        dt = schedule.tau / 1024.0
    frames = []
    for s in (t - dt, t, t + dt):
        es = eigh_gauged(sampler.eval(k, s))
        w = es.energies
        if np.diff(w).min() <= DEGENERACY_TOL:
            raise DegenerateBandError(f"degenerate bands at (k={k}, t={s})")
        frames.append(es.states)
    rdot = (frames[2] - frames[0]) / (2.0 * dt)
    m = rdot @ np.conj(frames[1].T)
    return float(np.linalg.norm(m, 2))
