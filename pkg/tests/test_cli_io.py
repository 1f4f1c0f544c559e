import json
import math

import meshio
import numpy as np
import pytest

from morphoelastic import cli
from morphoelastic import config as cfgmod
from morphoelastic.growth import ConvolutionKernel, GrowthRate, MorphoProblem, TimeGrid, run_morpho
from morphoelastic.hyperelastic import EnergyDensity
from morphoelastic.io import CSV_HEADER, emit_csv, emit_state_vtk, emit_vtk, read_csv
from morphoelastic.mesh import unit_cube
from morphoelastic.study import REPORT_SCHEMA, cauchy_difference, convergence_study

DEFAULTS = """\
mesh.n = 4
mesh.dirichlet = x0
mesh.neumann = x1
energy.a = 1.0
energy.b = 6.0
energy.s = 2.0
energy.p = 4.0
growth.alpha0 = 0.0
growth.alpha1 = 0.5
growth.alpha2 = 0.5
growth.alpha3 = 0.0
growth.rho = 1.0
growth.radius = 0.4
growth.t_rel = 0.5
growth.g0 = 1.0
load.f = 0.0, 0.0, 0.0
load.g = 0.0, 0.0, 0.0
load.ramp = 0.0
time.T = 1.0
time.N = 32
solver.gtol = 1e-08
solver.max_iter = 5000
nutrient.nu = 0.1
nutrient.h = 0.0
nutrient.hc = 0.0
nutrient.xc = 0.5, 0.5, 0.5
nutrient.mu_D = 1.0
nutrient.mu0 = 1.0
nutrient.order = previous
control.basis = const, time
control.lo = 0.0, 0.0
control.hi = 1.0, 1.0
control.method = grid
control.points = 3
control.budget = 50
control.beta1 = 1.0
control.beta2 = 0.0
control.beta3 = 0.0
control.target_scale = 1.0
control.order = current
output.dir = out
output.levels = 4
seed = 0
"""


def test_minimal_config_dumps_documented_defaults():
    cfg = cfgmod.parse_text("# nothing but a comment\n\n")
    assert cfgmod.dump(cfg) == DEFAULTS
    assert cfgmod.dump(cfgmod.parse_text(DEFAULTS)) == DEFAULTS


def test_config_values_and_round_trip():
    cfg = cfgmod.parse_text("growth.alpha0 = 0.1\nload.g = 0 0 -0.5  # trailing\ncontrol.basis = const, x\nseed = 7\n")
    assert cfg.growth.alpha0 == 0.1 and cfg.load.g == (0.0, 0.0, -0.5)
    assert cfg.control.basis == ("const", "x") and cfg.seed == 7


def test_tau_guard_names_threshold():
    with pytest.raises(cfgmod.ConfigError, match=r"tau\* = \(log 2\)"):
        cfgmod.parse_text("time.N = 1\n")
    with pytest.raises(cfgmod.ConfigError, match="tau"):
        cfgmod.parse_text("time.N = 2\ngrowth.rho = 1.5\n")


def test_unknown_key_and_line_numbers():
    with pytest.raises(cfgmod.ConfigError) as err:
        cfgmod.parse_text("mesh.n = 3\ngrowth.beta = 1\n")
    assert "growth.beta" in str(err.value) and "line 2" in str(err.value)
    with pytest.raises(cfgmod.ConfigError, match="line 1"):
        cfgmod.parse_text("mesh.n 3\n")
    with pytest.raises(cfgmod.ConfigError, match="line 1"):
        cfgmod.parse_text("mesh.n = three\n")
    with pytest.raises(cfgmod.ConfigError, match="unknown key"):
        cfgmod.parse_text("seed.x = 1\n")


@pytest.mark.parametrize("text,mode,needle", [
    ("energy.p = 3\n", "simulate", "p > 3"),
    ("mesh.n = 1\n", "simulate", "n >= 2"),
    ("nutrient.nu = 0\n", "simulate-coupled", "nu > 0"),
    ("control.basis = const, wobble\n", "control", "wobble"),
    ("output.levels = 1\n", "convergence-study", "levels"),
])
def test_validation_errors(text, mode, needle):
    with pytest.raises(cfgmod.ConfigError, match=needle):
        cfgmod.parse_text(text, mode)
    cfgmod.parse_text(text, None)


def test_nu_only_checked_in_coupled_mode():
    cfgmod.parse_text("nutrient.nu = 0\n", "simulate")


@pytest.fixture(scope="module")
def small_traj():
    mesh = unit_cube(2)
    p = MorphoProblem(mesh, EnergyDensity(), GrowthRate(alpha0=0.2), ConvolutionKernel.default(), TimeGrid(1.0, 3))
    return run_morpho(p)


def test_csv_header_and_round_trip(tmp_path, small_traj):
    path = emit_csv(small_traj, tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "i,t,energy,min_detG,max_normG,max_step_rate,min_mu,max_mu"
    assert len(lines) == 4
    rows = read_csv(path)
    assert [r["i"] for r in rows] == [1, 2, 3]
    for got, want in zip(rows, small_traj.diagnostics()[1:]):
        for k in CSV_HEADER:
            if isinstance(want[k], float) and math.isnan(want[k]):
                assert math.isnan(got[k])
            else:
                assert got[k] == want[k]


def test_csv_single_step_has_two_lines(tmp_path):
    mesh = unit_cube(2)
    p = MorphoProblem(mesh, EnergyDensity(), GrowthRate(), ConvolutionKernel.default(), TimeGrid(0.5, 1))
    assert len(emit_csv(run_morpho(p), tmp_path / "one.csv").read_text().splitlines()) == 2


def test_vtk_identity_state_reads_back(tmp_path):
    n = 3
    mesh = unit_cube(n)
    G = np.tile(np.eye(3), (mesh.n_tets, 1, 1))
    nutrient = mesh.vertices[:, 2].copy()
    path = emit_vtk(mesh, mesh.vertices, G, np.ones(mesh.n_tets), tmp_path / "id.vtk", nutrient=nutrient)
    assert path.read_text().startswith("# vtk DataFile Version 3.0\n")
    m = meshio.read(path)
    assert np.allclose(m.points, mesh.vertices)
    assert m.cells[0].type == "tetra" and len(m.cells[0].data) == 6 * n**3
    assert np.array_equal(m.cells[0].data, mesh.tets)
    assert np.all(np.ravel(m.cell_data["detG"][0]) == 1.0)
    assert np.array_equal(np.asarray(m.cell_data["G"][0]).reshape(-1, 3, 3), G)
    assert np.array_equal(np.ravel(m.point_data["nutrient"]), nutrient)


def test_state_vtk_without_nutrient(tmp_path, small_traj):
    path = emit_state_vtk(small_traj, 3, tmp_path / "s.vtk")
    m = meshio.read(path)
    assert "nutrient" not in m.point_data
    assert np.allclose(m.points, small_traj.y[3])
    assert np.array_equal(np.ravel(m.cell_data["detG"][0]), small_traj.detG[3])


def make(N, alpha0=0.3, alpha1=0.0, alpha2=0.0):
    return MorphoProblem(unit_cube(2), EnergyDensity(), GrowthRate(alpha0=alpha0, alpha1=alpha1, alpha2=alpha2),
                         ConvolutionKernel.default(), TimeGrid(1.0, N))


def test_study_constant_rate_is_exact():
    report = convergence_study(lambda N: make(N), 2, 3)
    assert max(report["errors"]) <= 1e-13
    assert report["N"] == [2, 4, 8]


def test_study_schema_stable():
    a = convergence_study(lambda N: make(N, 0.1, 0.5, 0.5), 2, 2)
    b = convergence_study(lambda N: make(N, 0.1, 0.5, 0.5), 2, 2)
    assert a["schema"] == REPORT_SCHEMA and sorted(a) == sorted(b)
    assert a["errors"] == b["errors"]
    with pytest.raises(ValueError):
        convergence_study(lambda N: make(N), 2, 1)
    with pytest.raises(ValueError):
        cauchy_difference(run_morpho(make(3)), run_morpho(make(4)))


def write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_cli_simulate(tmp_path, capsys):
    cfg = write(tmp_path, "mesh.n = 2\ntime.N = 3\n")
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
    assert (out / "trajectory.csv").exists() and (out / "state_final.vtk").exists()
    assert "seed = 5" in (out / "config.txt").read_text()
    first = (out / "trajectory.csv").read_bytes()
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "trajectory.csv").read_bytes() == first


def test_cli_coupled_and_control(tmp_path):
    cfg = write(tmp_path, "mesh.n = 2\ntime.N = 3\ngrowth.alpha3 = 0.5\nnutrient.hc = 1.0\ncontrol.points = 2\n")
    assert cli.main(["simulate-coupled", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    m = meshio.read(tmp_path / "c" / "state_final.vtk")
    assert "nutrient" in m.point_data
    assert cli.main(["control", "--config", cfg, "--out", str(tmp_path / "k"), "--threads", "2"]) == 0
    lines = (tmp_path / "k" / "control.csv").read_text().splitlines()
    assert lines[0] == "candidate,const,time,J_volume,J_tracking,J_control,J" and len(lines) == 5


def test_cli_convergence_study(tmp_path):
    cfg = write(tmp_path, "mesh.n = 2\ntime.N = 2\noutput.levels = 2\n")
    assert cli.main(["convergence-study", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    report = json.loads((tmp_path / "s" / "convergence.json").read_text())
    assert report["schema"] == REPORT_SCHEMA and len(report["errors"]) == 1


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["simulate", "--config", write(tmp_path, "time.N = 1\n")]) == 2
    assert "tau*" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = write(tmp_path, "mesh.n = 2\ntime.N = 2\nsolver.max_iter = 1\ngrowth.alpha0 = 0.3\n")
    assert cli.main(["simulate", "--config", bad, "--out", str(tmp_path / "f")]) == 3
    assert cli.main(["selftest", "--seed", "11"]) == 0
