import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from topopump.cli import main


def write_cfg(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return str(p)


SINGLE = {
    "schema_version": 1,
    "pipeline": "single",
    "schedule": {"variant": "fig2", "omega0": 1.0, "omega0_tau": 30.0},
    "L": 16,
    "n_output_times": 4,
    "steps_per_cycle": 512,
}


def test_single_run_artifacts(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", SINGLE)
    out = tmp_path / "run"
    assert main(["run", cfg, "--out", str(out)]) == 0
    pn = (out / "series_pn.csv").read_text().splitlines()
    assert pn[0] == "t,n,P_n"
    assert len(pn) == 1 + 16 * 5  # header + L rows per output time
    obs = (out / "series_obs.csv").read_text().splitlines()
    assert obs[0] == "t,R,Var,A,B,peak,offset,R_sub"
    assert len(obs) == 1 + 5
    meta = json.loads((out / "meta.json").read_text())
    assert meta["schema_version"] == 1
    assert meta["chern_system"] in (-1, 1)
    assert isinstance(meta["gauge_fingerprint"], str)
    # distribution rows sum to one per time slice
    rows = [line.split(",") for line in pn[1:]]
    t0 = rows[0][0]
    total = sum(float(r[2]) for r in rows if r[0] == t0)
    assert np.isclose(total, 1.0, atol=1e-12)


def test_byte_identical_reruns(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", SINGLE)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(out1)]) == 0
    assert main(["run", cfg, "--out", str(out2)]) == 0
    for name in ("series_pn.csv", "series_obs.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_regenerable_from_meta(tmp_path):
    cfg = write_cfg(tmp_path, "c.json", SINGLE)
    out1 = tmp_path / "a"
    assert main(["run", cfg, "--out", str(out1)]) == 0
    meta = json.loads((out1 / "meta.json").read_text())
    cfg2 = write_cfg(tmp_path, "c2.json", meta["resolved_config"])
    out2 = tmp_path / "b"
    assert main(["run", cfg2, "--out", str(out2)]) == 0
    assert (out1 / "series_pn.csv").read_bytes() == (out2 / "series_pn.csv").read_bytes()


def test_exit_codes(tmp_path):
    # 1: ambiguous key
    bad = dict(SINGLE)
    bad["eta"] = 0.1
    assert main(["run", write_cfg(tmp_path, "amb.json", bad), "--out", str(tmp_path / "x")]) == 1
    # 1: unknown key
    bad = dict(SINGLE)
    bad["bogus"] = 1
    assert main(["run", write_cfg(tmp_path, "unk.json", bad), "--out", str(tmp_path / "x")]) == 1
    # 1: wrong schema version
    bad = dict(SINGLE)
    bad["schema_version"] = 99
    assert main(["run", write_cfg(tmp_path, "ver.json", bad), "--out", str(tmp_path / "x")]) == 1
    # 1: fig2 must take omega0_tau, not tau
    bad = dict(SINGLE)
    bad["schedule"] = {"variant": "fig2", "tau": 10.0}
    assert main(["run", write_cfg(tmp_path, "tau.json", bad), "--out", str(tmp_path / "x")]) == 1
    # 2: gap-closed custom schedule
    guard = {
        "schema_version": 1,
        "pipeline": "single",
        "schedule": {"variant": "custom", "tau": 1.0, "t1": 1.0, "t2": 1.0, "delta": 0.0},
    }
    assert main(["run", write_cfg(tmp_path, "g.json", guard), "--out", str(tmp_path / "x")]) == 2
    # 1: missing config file
    assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 1


def test_meanfield_sweep_with_convergence(tmp_path):
    cfg = {
        "schema_version": 1,
        "pipeline": "meanfield",
        "schedule": {"variant": "fig3", "tau": 60.0},
        "L": 8,
        "n_output_times": 2,
        "steps_per_cycle": 256,
        "eta_over_gap": 0.01,
        "T_over_gap": [0.1, 0.5],
        "tau_scaling": "tanh",
    }
    out = tmp_path / "mf"
    assert main(["run", write_cfg(tmp_path, "mf.json", cfg), "--out", str(out),
                 "--check-convergence"]) == 0
    top = json.loads((out / "meta.json").read_text())
    assert top["sweep_points"] == ["T_over_gap_0.1", "T_over_gap_0.5"]
    m1 = json.loads((out / "T_over_gap_0.5" / "meta.json").read_text())
    assert m1["tau"] > 60.0  # tanh scaling stretched the cycle
    assert "convergence" in m1 and m1["convergence"]["steps_doubled"] == 512
    assert m1["chern_meanfield"] in (-1, 1)


def test_full_pipeline_warns_below_adiabatic_guard(tmp_path):
    cfg = {
        "schema_version": 1,
        "pipeline": "full",
        "schedule": {"variant": "fig3", "tau": 20.0},
        "L": 4,
        "n_output_times": 2,
        "steps_per_cycle": 128,
        "eta_over_gap": 0.01,
        "T_over_gap": 1.0,
        "ensemble": "insulator",
    }
    out = tmp_path / "full"
    assert main(["run", write_cfg(tmp_path, "f.json", cfg), "--out", str(out)]) == 0
    meta = json.loads((out / "T_over_gap_1" / "meta.json").read_text())
    assert any("eta*tau" in w for w in meta["warnings"])
    assert meta["ensemble"] == "insulator"
    obs = (out / "T_over_gap_1" / "series_obs.csv").read_text().splitlines()
    assert obs[1].split(",")[3] == "nan"  # A column not defined for density-matrix runs


def test_chern_subcommand(tmp_path):
    cfg = {
        "schema_version": 1,
        "pipeline": "chern",
        "schedule": {"variant": "fig3", "tau": 10.0},
        "eta_over_gap": 0.01,
        "T_over_gap": [0.5, 2.0],
    }
    out = tmp_path / "ch"
    assert main(["chern", write_cfg(tmp_path, "ch.json", cfg), "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert abs(meta["chern_system"]) == 1
    assert all(abs(e["chern_meanfield"]) == 1 for e in meta["sweep"])


def test_oracle_check_subcommand(tmp_path):
    cfg = {
        "schema_version": 1,
        "pipeline": "oracle-check",
        "cases": 2,
        "seed": 99,
        "steps_per_cycle": 64,
    }
    out = tmp_path / "oc"
    assert main(["run", write_cfg(tmp_path, "oc.json", cfg), "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["passed"] and meta["max_deviation"] <= 1e-8
    assert meta["seed"] == 99


def test_console_entrypoint():
    proc = subprocess.run(
        [sys.executable, "-m", "topopump.cli", "run", "/nonexistent.json"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert "config error" in proc.stderr
