import json

import numpy as np
import pytest

from nschb import driver
from nschb.config import DECOUPLED_CH, GALERKIN, SimConfig
from nschb.errors import InvariantViolation, NonConvergenceError
from nschb.fields import Grid, MACVectorField, ScalarField
from nschb.state import SimState


def _cfg(**sections):
    base = SimConfig().with_updates(grid={"nx": 12, "ny": 12}, time={"dt": 1e-3, "t_end": 1e-2},
                                    initial={"velocity_amplitude": 0.3})
    return base.with_updates(**sections)


def test_zero_data_stays_zero():
    res = driver.run(_cfg(initial={"preset": "zero"}))
    s = res.state
    for f in (s.phi, s.mu, s.theta, s.p):
        assert not np.any(f.values)
    assert s.u.max_abs() == 0.0 and res.violations() == []


def test_full_run_keeps_invariants():
    res = driver.run(_cfg())
    r = res.report
    assert r.mass_drift <= driver.MASS_TOL and r.theta_max_excess <= driver.THETA_TOL
    assert 0 < r.min_separation < 1 and r.steps == 11
    assert res.state.t == pytest.approx(1e-2)
    driver.check_state(res.state)


def test_decoupled_run_counts_no_energy_increase():
    cfg = _cfg(mode=DECOUPLED_CH, initial={"preset": "spinodal", "phi_amplitude": 0.1, "seed": 2},
               time={"dt": 1e-2, "t_end": 0.3})
    res = driver.run(cfg)
    assert res.report.energy_violations == 0 and res.violations() == []
    assert res.state.u.max_abs() == 0.0 and not np.any(res.state.theta.values)


def test_galerkin_run_writes_modes(tmp_path):
    cfg = _cfg(mode=GALERKIN, galerkin={"m": 4}, time={"dt": 1e-3, "t_end": 5e-3})
    res = driver.run(cfg, tmp_path)
    assert not np.any(res.state.p.values)
    rows = (tmp_path / "modes.csv").read_text().splitlines()
    assert rows[0] == "step,t,g1,g2,g3,g4" and len(rows) == 7


@pytest.mark.parametrize("preset", ["strong_data", "weak_data", "spinodal"])
def test_initial_presets_are_admissible(preset):
    s = driver.initial_state(_cfg(initial={"preset": preset, "phi_amplitude": 0.5}))
    driver.check_state(s)


def test_output_files(tmp_path):
    cfg = _cfg(time={"dt": 1e-3, "t_end": 4e-3, "snapshot_interval": 2, "report_interval": 2})
    driver.run(cfg, tmp_path)
    for name in ("energy.csv", "invariants.csv", "run.json"):
        assert (tmp_path / name).exists()
    assert sorted(p.name for p in (tmp_path / "snapshots").iterdir()) == [
        "step_0000000", "step_0000002", "step_0000004"]
    for name in driver.SNAPSHOT_FIELDS:
        assert (tmp_path / "final" / f"{name}.csv").exists()
    inv = (tmp_path / "invariants.csv").read_text().splitlines()
    assert inv[0].split(",") == list(driver.INVARIANT_COLUMNS) and len(inv) == 4
    assert (tmp_path / "energy.csv").read_text().splitlines()[0].split(",") == list(driver.ENERGY_COLUMNS)
    manifest = json.loads((tmp_path / "run.json").read_text())
    assert manifest["summary"]["violations"] == [] and manifest["config"]["grid"]["nx"] == 12
    assert set(manifest["versions"]) == {"nschb", "numpy", "python"}


def test_runs_are_deterministic(tmp_path):
    cfg = _cfg(initial={"preset": "weak_data", "phi_amplitude": 2.0, "seed": 5})
    driver.run(cfg, tmp_path / "a")
    driver.run(cfg, tmp_path / "b")
    for name in ["energy.csv", "invariants.csv"] + [f"final/{f}.csv" for f in driver.SNAPSHOT_FIELDS]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_restart_matches_straight_run(tmp_path):
    cfg = _cfg(time={"dt": 1e-3, "t_end": 1e-2})
    straight = driver.run(cfg).state
    half = driver.run(cfg.with_updates(time={"t_end": 5e-3}), tmp_path / "half")
    resumed = driver.run(cfg, state=driver.read_snapshot(tmp_path / "half" / "final"), start_step=5).state
    assert half.state.t == pytest.approx(5e-3) and resumed.t == pytest.approx(1e-2)
    assert np.max(np.abs(resumed.u.ux - straight.u.ux)) <= 1e-10
    for name in ("phi", "mu", "theta", "p"):
        assert np.max(np.abs(getattr(resumed, name).values - getattr(straight, name).values)) <= 1e-10


def test_snapshot_round_trip_is_exact(tmp_path):
    s = driver.initial_state(_cfg())
    back = driver.read_snapshot(driver.write_snapshot(tmp_path, s))
    assert back.t == s.t and np.array_equal(back.u.ux, s.u.ux) and np.array_equal(back.phi.values, s.phi.values)
    assert back.theta.bc == "dirichlet"


def test_snapshot_write_rejects_invalid_states(tmp_path):
    g = Grid(6, 6)
    s = SimState.zeros(g)
    with pytest.raises(InvariantViolation):
        driver.write_snapshot(tmp_path, s.replace(phi=ScalarField(g, np.ones(g.shape))))
    ux = np.zeros(g.xface_shape)
    ux[3, 3] = 1.0
    with pytest.raises(InvariantViolation):
        driver.write_snapshot(tmp_path, s.replace(u=MACVectorField(g, ux, np.zeros(g.yface_shape))))
    driver.write_snapshot(tmp_path / "raw", s.replace(phi=ScalarField(g, np.ones(g.shape))), check=False)


def test_run_rejects_state_on_other_grid():
    with pytest.raises(ValueError):
        driver.run(_cfg(), state=SimState.zeros(Grid(8, 8)))


def test_step_error_keeps_last_good_state(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = driver.ch_step

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise NonConvergenceError("forced", 1.0, 5)
        return real(*args, **kw)

    monkeypatch.setattr(driver, "ch_step", flaky)
    with pytest.raises(driver.StepError) as info:
        driver.run(_cfg(), tmp_path)
    assert info.value.step == 3 and info.value.state.t == pytest.approx(2e-3)
    assert driver.read_snapshot(tmp_path / "last_good").t == pytest.approx(2e-3)


def test_convergence_needs_three_doubling_levels():
    with pytest.raises(ValueError):
        driver.convergence_study(_cfg(), [8, 16])
    with pytest.raises(ValueError):
        driver.convergence_study(_cfg(), [8, 12, 16])
    with pytest.raises(ValueError):
        driver.convergence_study(_cfg(), [8, 16, 32], "pressure")


def test_heat_convergence_table(tmp_path, monkeypatch):
    monkeypatch.setenv("NSCHB_THREADS", "1")
    cfg = _cfg(time={"dt": 1e-4, "t_end": 1e-3})
    table = driver.convergence_study(cfg, [8, 16, 32], "heat")
    assert table.levels == (8, 16, 32) and all(o > 1.8 for o in table.orders)
    driver.write_order_table(tmp_path / "o.csv", table)
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines[0] == "level,error,order" and lines[1].endswith(",")


def test_zero_perturbation_gives_zero_lambda(monkeypatch):
    monkeypatch.setenv("NSCHB_THREADS", "1")
    res = driver.perturbation_experiment(_cfg(), 0.0, t_end=3e-3)
    assert all(v == 0.0 for v in res.lam) and len(res.times) == 4
    assert np.isnan(res.amplification)
    with pytest.raises(ValueError):
        driver.perturbation_experiment(_cfg(), -1.0)


def test_max_workers(monkeypatch):
    monkeypatch.setenv("NSCHB_THREADS", "3")
    assert driver.max_workers() == 3
    monkeypatch.setenv("NSCHB_THREADS", "0")
    assert driver.max_workers() == 1
    monkeypatch.setenv("NSCHB_THREADS", "many")
    with pytest.raises(ValueError):
        driver.max_workers()
    monkeypatch.delenv("NSCHB_THREADS")
    assert driver.max_workers() >= 1


def test_summarize_refreshes_manifest(tmp_path):
    driver.run(_cfg(time={"dt": 1e-3, "t_end": 3e-3}), tmp_path)
    summary = driver.summarize(tmp_path)
    assert summary["steps"] == 3 and summary["violations"] == []
    assert json.loads((tmp_path / "run.json").read_text())["summary"] == summary
