import json
import os

import pytest

from elapsed.cli import main
from elapsed.config import config_from_dict, parse_config, serialize_config
from elapsed.errors import ConfigError
from elapsed.experiment import compare_routes, run_experiment
from elapsed.presets import load_preset, preset_dict, preset_names


@pytest.mark.parametrize("name", preset_names())
def test_preset_round_trip(name):
    cfg = load_preset(name)
    again = parse_config(serialize_config(cfg))
    assert serialize_config(again) == serialize_config(cfg)


def test_example_presets_content():
    c = load_preset("example1")
    assert (c.model.name, c.model.params, c.model.sigma) == ("sigmoid", [9.0, 3.5], 0.5)
    assert c.initial.name == "plateau_exp" and c.run.branch == 1
    c = load_preset("example3_1")
    assert c.model.name == "clamped_linear" and c.model.sigma == 1.0


def test_json_document_accepted():
    doc = preset_dict("example1")
    assert serialize_config(parse_config(json.dumps(doc))) == serialize_config(load_preset("example1"))


@pytest.mark.parametrize("patch,path", [
    ({"run": {"dt": 0.003}}, "run.dt"),
    ({"run": {"bogus": 1}}, "run.bogus"),
    ({"extra": 1}, "extra"),
    ({"run": {"route": "fly"}}, "run.route"),
    ({"run": {"ds": 0.001}}, "run.ds"),
    ({"run": {"policy": "x"}}, "run.policy"),
    ({"model": {"sigma": -1}}, "model.sigma"),
    ({"initial": {"name": "nope"}}, "initial.name"),
])
def test_config_errors_name_key_path(patch, path):
    doc = preset_dict("example1")
    for key, val in patch.items():
        if isinstance(val, dict) and isinstance(doc.get(key), dict):
            doc[key].update(val)
        else:
            doc[key] = val
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        config_from_dict(doc)


def test_cfl_checked_at_parse():
    doc = preset_dict("example4")
    doc["run"]["dt"] = 0.2
    with pytest.raises(ConfigError, match="p_hi"):
        config_from_dict(doc)


def test_malformed_yaml():
    with pytest.raises(ConfigError):
        parse_config("model: [unclosed")


def test_bundle_deterministic(tmp_path):
    cfg = load_preset("example2")
    cfg.run.T = 2.0
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(cfg, str(a))
    bundle = run_experiment(cfg, str(b))
    assert "steady_states.json" in bundle.files and "initial_activities.json" in bundle.files
    for rel in bundle.files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()
    manifest = json.loads((a / "snapshots" / "manifest.json").read_text())
    assert manifest[0]["time"] == 0.0


def test_compare_steady_data():
    rep = compare_routes(load_preset("steady_example1"))
    assert rep["max_divergence"] <= 1e-10


def test_compare_jump_times_agree():
    rep = compare_routes(load_preset("example2"))
    assert len(rep["jumps_pde"]) == len(rep["jumps_delay"]) == 1
    assert rep["max_jump_time_gap"] <= 2 * 0.5 / 200


def _cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_steady_and_branches(capsys, tmp_path):
    code, out, _ = _cli(["steady", "--preset", "example1", "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["roots"][0] == pytest.approx(0.0410, abs=5e-4)
    assert (tmp_path / "steady_states.json").exists()
    code, out, _ = _cli(["branches", "--preset", "example2"], capsys)
    assert code == 0 and len(json.loads(out)["roots"]) == 3


def test_cli_exit_codes(capsys, tmp_path):
    assert _cli(["run", "--preset", "example1", "--dt", "0.003"], capsys)[0] == 2
    assert _cli(["run", "--preset", "example3_1", "--branch", "2"], capsys)[0] == 2
    assert _cli(["steady", "--config", str(tmp_path / "missing.yaml")], capsys)[0] == 2
    doc = preset_dict("example2")
    doc["run"]["policy"] = "fixed_branch"
    path = tmp_path / "fixed.yaml"
    path.write_text(json.dumps(doc))
    code, _, err = _cli(["run", "--config", str(path)], capsys)
    assert code == 3 and "branch" in err
    bad = preset_dict("periodic_example3_1")
    bad["periodic"]["N2"] = 0.7
    path = tmp_path / "bad.yaml"
    path.write_text(json.dumps(bad))
    assert _cli(["periodic", "--config", str(path)], capsys)[0] == 2


def test_cli_verification_failure_exit_code(capsys, monkeypatch):
    import elapsed.experiment as ex
    monkeypatch.setattr(ex, "C_PRIME", 0.0)
    assert _cli(["compare", "--preset", "example1"], capsys)[0] == 4


def test_cli_run_periodic_reconstruct(capsys, tmp_path):
    code, out, _ = _cli(["run", "--preset", "example2", "--out", str(tmp_path / "r")], capsys)
    assert code == 0 and json.loads(out)["n_jumps"] == 1
    for name in ("trace.csv", "summary.json", "verification.json", "config.yaml"):
        assert (tmp_path / "r" / name).exists()
    code, out, _ = _cli(["periodic", "--preset", "periodic_example3_1",
                         "--out", str(tmp_path / "p")], capsys)
    assert code == 0 and json.loads(out)["alpha"] == pytest.approx(8 / 15)
    assert (tmp_path / "p" / "profile.csv").exists()
    code, out, _ = _cli(["reconstruct", "--preset", "periodic_example3_1"], capsys)
    assert code == 0 and json.loads(out)["pass"]


def test_cli_preset_listing(capsys):
    code, out, _ = _cli(["preset"], capsys)
    assert code == 0 and "example3_2" in out.split()
    code, out, _ = _cli(["preset", "example1", "--show"], capsys)
    assert code == 0 and "sigmoid" in out
    assert _cli(["preset", "nope"], capsys)[0] == 2
