import subprocess
import sys

import pytest

from shrinkflow.cli import OUTPUT_ENV, Scenario, main


def run(argv):
    """Exit code of ``main``, treating argparse's SystemExit like a return."""
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def test_exterior_circle(capsys):
    assert run(["exterior", "--shape", "circle:1", "--n", "64"]) == 0
    out = capsys.readouterr().out
    assert "Cap              1" in out


def test_exterior_ellipse(capsys):
    assert run(["exterior", "--shape", "ellipse:2,1"]) == 0
    assert "Cap              1.5" in capsys.readouterr().out


def test_bad_shape_exits_2(capsys):
    assert run(["exterior", "--shape", "ellipse:1,2"]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_sweep_exits_2():
    assert run(["sweep", "banana"]) == 2


def test_verify_list(capsys):
    assert run(["verify", "--list"]) == 0
    out = capsys.readouterr().out
    assert "lamb" in out and "skew-symmetry" in out


def test_verify_subset_passes_and_tightened_fails(capsys):
    assert run(["verify", "--only", "zeta-dual", "m-dagger"]) == 0
    assert capsys.readouterr().out.count("PASS") == 2
    assert run(["verify", "--only", "lamb", "--tol-scale", "1e-12"]) == 4
    assert run(["verify", "--only", "nonsense"]) == 2


def test_operators(capsys):
    code = run(["operators", "--body", "ellipse:1,0.5", "--q0", "0.3,0.1,0.2", "--p0",
                "0.1,0.2,0.3", "--n-body", "32", "--n-outer", "96"])
    assert code == 0
    out = capsys.readouterr().out
    assert "M (genuine + added)" in out and "energy" in out


def test_simulate_writes_csv(tmp_path, capsys):
    code = run(["simulate", "--q0", "0,0.1,0", "--p0", "0,0,0.1", "--dt", "0.05",
                "--t-final", "0.2", "--n-body", "32", "--n-outer", "96", "--out",
                str(tmp_path)])
    assert code == 0
    assert (tmp_path / "trajectory.csv").exists()
    assert "time-reached" in capsys.readouterr().out


def test_simulate_collision_reported(tmp_path, capsys):
    code = run(["simulate", "--q0", "0,0.3,0", "--p0", "0,2,0", "--gamma", "0", "--dt", "0.01",
                "--t-final", "2", "--delta-stop", "0.15", "--n-body", "64", "--n-outer",
                "256", "--out", str(tmp_path)])
    assert code == 0
    assert "collision-guard" in capsys.readouterr().out


def test_simulate_point_vortex_limit(tmp_path, capsys):
    code = run(["simulate", "--limit", "point-vortex", "--q0", "0,0.5,0", "--t-final", "1",
                "--dt", "0.01", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "point-vortex.csv").read_text().splitlines()
    assert lines[1] == "t,h1,h2,l1,l2,energy"
    assert len(lines) == 2 + 101


def test_toml_scenario_and_env_output(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "s.toml"
    cfg.write_text(
        '[body]\nshape = "circle:1"\nn = 32\n[outer]\nshape = "circle:1"\nn = 96\n'
        "[dynamics]\nq0 = [0.0, 0.1, 0.0]\np0 = [0.0, 0.0, 0.1]\ndt = 0.05\nt_final = 0.1\n"
    )
    out = tmp_path / "envout"
    monkeypatch.setenv(OUTPUT_ENV, str(out))
    assert run(["simulate", "--config", str(cfg)]) == 0
    assert (out / "trajectory.csv").exists()


def test_toml_unknown_section(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[colour]\nx = 1\n")
    assert run(["simulate", "--config", str(cfg)]) == 2


def test_scenario_vector_validation():
    with pytest.raises(Exception):
        Scenario(q0=(1.0, 2.0)).vector("q0")


def test_sweep_capacity_writes_csv(tmp_path):
    code = run(["sweep", "capacity", "--body", "star:1|2,0.15,0;3,0.1,0.05", "--grid",
                "0.2,0.1,0.05", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "sweep-capacity.csv").exists()


def test_simulation_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        run(["simulate", "--body", "star:1|2,0.15,0", "--outer", "ellipse:1.2,0.9", "--q0",
             "0.2,0.1,0", "--p0", "0.3,0.2,0.1", "--dt", "0.05", "--t-final", "0.2",
             "--n-body", "32", "--n-outer", "96", "--out", str(d)])
        outs.append((d / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "shrinkflow", "exterior", "--shape", "circle:2",
                          "--n", "32"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "Cap              2" in res.stdout
