"""Acceptance suite: one test per criterion, printed as a checklist.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion. Expensive runs are shared through module-scoped fixtures; the
whole module completes in a few minutes on a laptop.
"""

import math
import time
import warnings

import numpy as np
import pytest

from topopump import (
    MomentumGrid,
    PropagatorConfig,
    SpinorField,
    ThermalParams,
    assemble_rho_aux,
    brute_force_rho_aux,
    chern_number,
    constant_schedule,
    covariance,
    fig2_schedule,
    fig3_schedule,
    full_dynamics_series,
    meanfield_h,
    meanfield_sampler,
    propagate,
    rmm_sampler,
    smooth_band,
    subtract_background,
    zak_phase,
)
from topopump.pipelines import (
    band_pump_run,
    full_pump_run,
    output_grid,
    tau_for_temperature,
)
from topopump.pump_single import com_dispersion

GAP_FIG3 = 4.0
ETA = 0.01 * GAP_FIG3

def report(line):
    print(line, flush=True)


# ----------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def fig2_runs():
    out = {}
    for omega0_tau in (100.0, 20.0):
        sched = fig2_schedule(1.0, omega0_tau)
        samp = rmm_sampler(sched)
        grid = MomentumGrid(32)
        cfg = PropagatorConfig(steps_per_cycle=4096)
        times = output_grid(sched.tau, 8)
        t0 = time.perf_counter()
        res = band_pump_run(samp, grid, 0, 0, cfg, times)
        elapsed = time.perf_counter() - t0
        c = chern_number(samp, sched, 0)
        out[omega0_tau] = (res, c, elapsed)
    return out


@pytest.fixture(scope="module")
def meanfield_sweep():
    tau_ref, t_ref = 1600.0, 0.1
    beta_ref = 1.0 / (t_ref * GAP_FIG3)
    runs = []
    for t_over in (0.1, 0.5, 1.0, 2.0, 4.0):
        beta = 1.0 / (t_over * GAP_FIG3)
        tau = tau_for_temperature(tau_ref, beta_ref, beta, GAP_FIG3)
        sched = fig3_schedule(tau)
        samp = rmm_sampler(sched)
        tp = ThermalParams(beta=beta)
        mf = meanfield_sampler(samp, tp, ETA)
        steps = max(4096, int(np.ceil(tau / 0.25)))
        cfg = PropagatorConfig(steps_per_cycle=steps)
        res = band_pump_run(mf, MomentumGrid(32), 0, 0, cfg, output_grid(tau, 4))
        c_mf = chern_number(mf, sched, 0)
        runs.append((t_over, res, c_mf, tau))
    return runs


@pytest.fixture(scope="module")
def full_runs():
    tau = 12.0 * math.pi / ETA
    sched = fig3_schedule(tau)
    samp = rmm_sampler(sched)
    cfg = PropagatorConfig(steps_per_cycle=4096)
    times = output_grid(tau, 4)
    out = {}
    for t_over in (1.0, 2.0, 4.0):
        tp = ThermalParams(beta=1.0 / (t_over * GAP_FIG3))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = full_pump_run(samp, sched, tp, ETA, MomentumGrid(32), 0, 0,
                                cfg, times, ensemble="insulator")
        c_mf = chern_number(meanfield_sampler(samp, tp, ETA), sched, 0)
        out[t_over] = (res, c_mf, tau)
    return out


@pytest.fixture(scope="module")
def decomposition_runs():
    tau = 1600.0
    sched = fig3_schedule(tau)
    samp = rmm_sampler(sched)
    tp = ThermalParams(beta=1.0 / (0.1 * GAP_FIG3))
    mf = meanfield_sampler(samp, tp, ETA)
    cfg = PropagatorConfig(steps_per_cycle=6400)
    out = {}
    for L in (32, 64):
        res = band_pump_run(mf, MomentumGrid(L), 0, 0, cfg, output_grid(tau, 2))
        out[L] = res.records[-1]
    return out


# ----------------------------------------------------------------- criteria

def test_criterion_01_adiabatic_quantization(fig2_runs):
    res, c, elapsed = fig2_runs[100.0]
    err = abs(res.records[-1].R - c)
    assert abs(c) == 1
    assert err <= 0.01
    assert elapsed < 10.0
    report(f"ACCEPTANCE 1: PASS |R(tau) - C| = {err:.2e} (C = {c}), runtime {elapsed:.1f}s")


def test_criterion_02_adiabaticity_tradeoff(fig2_runs):
    res100, c, _ = fig2_runs[100.0]
    res20, c20, _ = fig2_runs[20.0]
    err100 = abs(res100.records[-1].R - c)
    err20 = abs(res20.records[-1].R - c20)
    var100 = res100.records[-1].Var
    var20 = res20.records[-1].Var
    assert err20 >= 5.0 * err100
    assert var20 < var100
    report(
        f"ACCEPTANCE 2: PASS err(20)/err(100) = {err20 / err100:.1f} (>=5), "
        f"Var(20) = {var20:.2f} < Var(100) = {var100:.2f}"
    )


def test_criterion_03_meanfield_quantization_all_T(meanfield_sweep):
    errs = []
    variances = []
    for t_over, res, c_mf, tau in meanfield_sweep:
        err = abs(res.records[-1].R - c_mf)
        assert abs(c_mf) == 1
        assert err <= 0.01, f"T/gap = {t_over}: |R - C| = {err:.3e}"
        errs.append(err)
        variances.append(res.records[-1].Var)
    assert all(a < b for a, b in zip(variances, variances[1:]))
    report(
        f"ACCEPTANCE 3: PASS max|R - C_mf| = {max(errs):.2e} over T/gap in "
        f"{{0.1..4}}, Var strictly increasing {['%.3f' % v for v in variances]}"
    )


def test_criterion_04_meanfield_identity():
    rng = np.random.default_rng(7)
    sched = fig3_schedule(100.0)
    samp = rmm_sampler(sched)
    worst = 0.0
    for _ in range(200):
        k = rng.uniform(-np.pi, np.pi)
        t = rng.uniform(0.0, sched.tau)
        beta = rng.uniform(0.05, 5.0)
        h = samp.eval(k, t)
        eps = np.linalg.eigvalsh(h)[1]
        hmf = meanfield_h(covariance(h, ThermalParams(beta=beta)), ETA)
        ref = ETA / 2 * np.eye(2) - ETA / (2 * eps) * np.tanh(beta * eps / 2) * h.T
        worst = max(worst, float(np.abs(hmf - ref).max()))
    assert worst <= 1e-11
    report(f"ACCEPTANCE 4: PASS mean-field identity max deviation {worst:.2e} (200 samples)")


def test_criterion_05_factorization_oracle():
    rng = np.random.default_rng(20240801)
    cfg = PropagatorConfig(steps_per_cycle=64)
    etas = [0.0, 0.05, 0.3]
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(10):
        L = (2, 3)[i % 2]
        grid = MomentumGrid(L)
        t1, t2, delta = rng.uniform(-2.0, 2.0, size=3)
        sched = constant_schedule(float(t1), float(t2), float(delta), tau=5.0)
        samp = rmm_sampler(sched)
        beta = float(rng.uniform(0.2, 5.0))
        eta = etas[i % 3]
        tp = ThermalParams(beta=beta)
        psi = rng.normal(size=(L, 2)) + 1j * rng.normal(size=(L, 2))
        psi /= np.linalg.norm(psi, axis=1)[:, None]
        field = SpinorField(psi=psi, k=grid.k)
        times = np.linspace(0.0, 5.0, 8)
        series = full_dynamics_series(samp, sched, tp, eta, field, cfg, times)
        amps = np.linalg.norm(field.psi, axis=1) / np.sqrt(L)
        bf = brute_force_rho_aux(samp, sched, grid, tp, eta, field, cfg, times)
        dev = max(
            float(np.abs(assemble_rho_aux(series.g[j], series.G[j], amps).rho - bf[j].rho).max())
            for j in range(8)
        )
        worst = max(worst, dev)
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-8
    assert elapsed < 60.0
    report(f"ACCEPTANCE 5: PASS factorization max deviation {worst:.2e} "
           f"(10 cases, 8 output times), runtime {elapsed:.1f}s")


def test_criterion_06_full_dynamics_quantization(full_runs):
    worst = 0.0
    for t_over, (res, c_mf, tau) in full_runs.items():
        assert res.peak_shift[-1] == c_mf, f"T/gap = {t_over}: peak {res.peak_shift[-1]} != {c_mf}"
        err = abs(res.r_sub[-1] - c_mf)
        assert err <= 0.02, f"T/gap = {t_over}: |R_sub - C| = {err:.3e}"
        worst = max(worst, err)
    report(f"ACCEPTANCE 6: PASS peak shift = C_mf exactly, max|R_sub - C_mf| = {worst:.2e} "
           f"for T/gap in {{1,2,4}}")


def test_criterion_07_full_vs_meanfield_spread(full_runs):
    res, c_mf, tau = full_runs[2.0]
    sub, _ = subtract_background(res.dists[-1])
    peak = int(np.argmax(sub.p_cell))
    _, var_sub = com_dispersion(sub, peak)
    sched = fig3_schedule(tau)
    samp = rmm_sampler(sched)
    tp = ThermalParams(beta=1.0 / (2.0 * GAP_FIG3))
    cfg = PropagatorConfig(steps_per_cycle=4096)
    mres = band_pump_run(meanfield_sampler(samp, tp, ETA), MomentumGrid(32),
                         0, 0, cfg, output_grid(tau, 2))
    var_mf = mres.records[-1].Var
    assert var_sub < var_mf
    report(f"ACCEPTANCE 7: PASS Var_sub(full) = {var_sub:.3f} < Var(mean-field) = "
           f"{var_mf:.3f} at T = 2*gap, identical (tau, eta)")


def test_criterion_08_peak_weight_saturation(full_runs):
    weights = {}
    for t_over in (2.0, 4.0):
        res, _, _ = full_runs[t_over]
        p = res.dists[-1].p_cell
        peak = int(np.argmax(subtract_background(res.dists[-1])[0].p_cell))
        weights[t_over] = p[(peak - 1) % 32] + p[peak] + p[(peak + 1) % 32]
    drop = (weights[2.0] - weights[4.0]) / weights[2.0]
    assert drop < 0.20
    report(f"ACCEPTANCE 8: PASS peak+neighbors weight drop T=2->4 is {100 * drop:.1f}% (< 20%)")


def test_criterion_09_decomposition_identity(decomposition_runs):
    rec32 = decomposition_runs[32]
    rec64 = decomposition_runs[64]
    resid32 = abs(rec32.Var - (rec32.A + rec32.B))
    resid64 = abs(rec64.Var - (rec64.A + rec64.B))
    assert resid32 <= 2e-2
    assert rec32.A >= -1e-10 and rec32.B >= -1e-10
    assert rec64.A >= -1e-10 and rec64.B >= -1e-10
    ratio = resid32 / resid64
    assert 2.5 <= ratio <= 6.0  # ~4x shrink per L doubling
    report(f"ACCEPTANCE 9: PASS |Var-(A+B)| = {resid32:.2e} at L=32, "
           f"shrinks {ratio:.2f}x at L=64")


def test_criterion_10_structural_suite(fig2_runs, meanfield_sweep, full_runs):
    # normalization: mean-field channel at 1e-12, density-matrix channel at 1e-10
    for _, res, _, _ in meanfield_sweep:
        for d in res.dists:
            assert abs(d.p_cell.sum() - 1.0) <= 1e-12
    for res, _, _ in fig2_runs.values():
        for d in res.dists:
            assert abs(d.p_cell.sum() - 1.0) <= 1e-12
    for res, _, _ in full_runs.values():
        for d in res.dists:
            assert abs(d.p_cell.sum() - 1.0) <= 1e-10
        for aux in res.extras["rhos"]:
            assert np.abs(aux.rho - aux.rho.conj().T).max() <= 1e-11
            assert abs(np.trace(aux.rho).real - 1.0) <= 1e-10
            assert np.linalg.eigvalsh(aux.rho).min() >= -1e-9

    # propagator unitarity at the acceptance tolerance
    sched = fig2_schedule(1.0, 20.0)
    samp = rmm_sampler(sched)
    cfg = PropagatorConfig(steps_per_cycle=4096)
    u = propagate(lambda t: samp.eval(0.3, t), 0.0, 20.0, cfg)
    assert np.abs(u.conj().T @ u - np.eye(2)).max() <= 1e-9

    # Chern integrality is enforced by construction (int return); stability:
    s3 = fig3_schedule(10.0)
    assert isinstance(chern_number(rmm_sampler(s3), s3, 0), int)

    # Zak gauge invariance under random re-phasing
    grid = MomentumGrid(64)
    fld = smooth_band(rmm_sampler(s3), grid, 2.0, 0)
    rng = np.random.default_rng(17)
    rephased = fld.spinors * np.exp(1j * rng.uniform(0, 2 * np.pi, 64))[:, None]
    z0 = zak_phase(fld)
    z1 = zak_phase(type(fld)(band=0, t=2.0, spinors=rephased, k=fld.k))
    assert abs(z0 - z1) <= 1e-10
    report("ACCEPTANCE 10: PASS structural suite (normalization, rho_aux sanity, "
           "unitarity, Chern integrality, Zak gauge invariance)")
