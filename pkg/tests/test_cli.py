import json

import pytest

from tracerfriction import cli


def _run(tmp_path, sub, config=None, quick=True, name="out"):
    out = tmp_path / name
    argv = [sub, "--out", str(out)]
    if quick:
        argv.append("--quick")
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = cli.main(argv)
    return code, out


def test_interval_manifest(tmp_path):
    code, out = _run(tmp_path, "interval")
    assert code == 0
    doc = json.loads((out / "interval.json").read_text())
    assert 0.64 <= doc["results"]["I_sup"] <= 0.68
    assert 0.15 < doc["results"]["delta_star"] < 0.17
    assert doc["config"]["interval"]["resolution"] == 1e-3
    assert (out / "interval_omega.csv").exists()


def test_interval_deterministic(tmp_path):
    _, a = _run(tmp_path, "interval", name="a")
    _, b = _run(tmp_path, "interval", name="b")
    for f in ("interval.json", "interval_omega.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_ballistic_simulation(tmp_path):
    code, out = _run(tmp_path, "simulate", {"coupling": {"nu": 0.0}})
    assert code == 0
    rows = (out / "simulate_trajectory.csv").read_text().splitlines()
    header = rows[0].split(",")
    iz = header.index("P3")
    assert len({r.split(",")[iz] for r in rows[1:]}) == 1


@pytest.mark.parametrize(
    "config, field",
    [
        ({"coupling": {"nu": -1.0}}, "coupling.nu"),
        ({"linear": {"step": 0.2}}, "linear.step"),
        ({"linear": {"window": [100.0, 200.0]}}, "linear.window"),
        ({"simulate": {"P0": [1.0, 2.0]}}, "simulate.P0"),
        ({"potential": {"shape": "box"}}, "potential.shape"),
    ],
)
def test_invalid_config_exit_2(tmp_path, capsys, config, field):
    code, _ = _run(tmp_path, "linear" if "linear" in config else "simulate", config)
    assert code == 2
    assert field in capsys.readouterr().err


def test_failed_claim_exit_3(tmp_path, capsys):
    # a horizon too short for the late-time exponent band
    cfg = {"linear": {"horizon": 40.0, "step": 0.05, "window": [4.0, 40.0]}}
    code, out = _run(tmp_path, "linear", cfg)
    assert code == 3
    assert "exponent_band" in capsys.readouterr().err
    assert json.loads((out / "linear.json").read_text())["verdicts"]["exponent_band"] is False


def test_yaml_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("interval:\n  best2_points: 300\n")
    code = cli.main(["interval", "--quick", "--config", str(path), "--out", str(tmp_path / "y")])
    assert code == 0
    doc = json.loads((tmp_path / "y" / "interval.json").read_text())
    assert doc["config"]["interval"]["best2_points"] == 300
