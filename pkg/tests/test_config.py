import pytest

from nschb.config import DECOUPLED_CH, FULL, GALERKIN, SimConfig
from nschb.elliptic import SolverConfig
from nschb.fields import Grid


def test_defaults_are_valid():
    c = SimConfig()
    assert c.mode == FULL and c.grid_obj() == Grid(32, 32)
    assert c.n_steps == 100
    assert c.solver_config() == SolverConfig(1e-10, 500, "cg")
    assert c.potential_params().alpha == 1.0


def test_empty_toml_gives_defaults(tmp_path):
    (tmp_path / "c.toml").write_text("")
    assert SimConfig.from_toml(tmp_path / "c.toml") == SimConfig()


def test_toml_sections(tmp_path):
    (tmp_path / "c.toml").write_text(
        'mode = "decoupled_ch"\n'
        "[grid]\nnx = 16\nny = 8\nlx = 2.0\n"
        "[time]\ndt = 0.01\nt_end = 0.5\n"
        "[potential]\nA = 0.5\nB = 3.0\n"
        '[initial]\npreset = "spinodal"\nphi_amplitude = 0.05\nseed = 4\n'
    )
    c = SimConfig.from_toml(tmp_path / "c.toml")
    assert c.mode == DECOUPLED_CH and c.grid_obj() == Grid(16, 8, 2.0, 1.0)
    assert c.n_steps == 50 and c.potential.B == 3.0 and c.initial.seed == 4


def test_dict_round_trip():
    c = SimConfig().with_updates(grid={"nx": 12}, time={"dt": 0.02}, mode=GALERKIN)
    assert SimConfig.from_dict(c.to_dict()) == c


@pytest.mark.parametrize("data", [
    {"grid": {"nz": 4}},
    {"turbulence": {}},
    {"solvers": {"precision": 1}},
])
def test_unknown_keys_rejected(data):
    with pytest.raises(ValueError, match="unknown"):
        SimConfig.from_dict(data)


@pytest.mark.parametrize("sections", [
    {"mode": "les"},
    {"time": {"dt": 0.0}},
    {"time": {"dt": 0.1, "t_end": 0.01}},
    {"initial": {"preset": "vortex"}},
    {"initial": {"phi_amplitude": 1.0}},
    {"initial": {"phi_mean": -1.0}},
    {"grid": {"nx": 2}},
    {"potential": {"A": 3.0}},
    {"coefficients": {"nu_amp": 2.0}},
    {"solvers": {"method": "gauss_seidel"}},
])
def test_validation_errors(sections):
    with pytest.raises(ValueError):
        SimConfig.from_dict(sections)


def test_with_updates_leaves_original():
    c = SimConfig()
    d = c.with_updates(grid={"nx": 64})
    assert c.grid.nx == 32 and d.grid.nx == 64 and d.grid.ny == 32


def test_galerkin_mode_enables_section():
    assert SimConfig(mode=GALERKIN).galerkin.enabled
    assert not SimConfig().galerkin.enabled
