import json
from pathlib import Path

import pytest

from varivery.cli import REGISTRY, list_experiments, main, resolve_config, run, write_csv


def write_config(tmp_path, name, parameters=None, seed=0):
    cfg = {"experiment": name, "parameters": parameters or {}, "seed": seed}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


TINY = {
    "tilde_u_check": {"n_list": [1], "t_list": [2], "n_unitaries": 1},
    "cor2_train": {"task": "parity", "n_bits": 1, "t": 2, "layer_count": 2, "dataset_size": 4, "steps": 5},
    "bp_sweep": {"n_list": [2, 3, 4], "n_x": 2, "n_theta": 8},
    "vanishing_similarity": {"feature": "basis", "n_bits": 3, "n_pairs": 16},
    "kernel_dlp": {"p": 7, "g": 3, "k_window": 1, "train_size": 6, "test_size": 4},
    "prop1_lcu": {"train_size": 2, "bp_n_x": 2, "bp_n_theta": 8, "n_equivalence_checks": 1},
    "grad_check": {"n_configs": 3},
}


class TestListExperiments:
    def test_row_count(self):
        assert len(list_experiments().strip().splitlines()) == 7

    def test_contains_anchor_rows(self):
        text = list_experiments()
        assert "cor2_train → Corollary 2" in text
        assert "prop1_lcu → Proposition 1" in text

    def test_stable_ordering(self):
        names = [line.split(" ")[0] for line in list_experiments().strip().splitlines()]
        assert names == [e.name for e in REGISTRY]

    def test_cli_list_subcommand(self, capsys):
        assert main(["list"]) == 0
        assert "kernel_dlp" in capsys.readouterr().out


class TestConfigResolution:
    def test_unknown_experiment_rejected(self, tmp_path):
        path = write_config(tmp_path, "nope")
        assert run(path, out_dir=tmp_path / "out") == 2

    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "grad_check", "bogus": 1}))
        assert run(path, out_dir=tmp_path / "out") == 2

    def test_unknown_parameter_rejected(self, tmp_path):
        path = write_config(tmp_path, "grad_check", {"n_configz": 3})
        assert run(path, out_dir=tmp_path / "out") == 2

    def test_unknown_override_rejected(self, tmp_path):
        path = write_config(tmp_path, "grad_check", TINY["grad_check"])
        assert run(path, overrides=["what=1"], out_dir=tmp_path / "out") == 2

    def test_missing_config_file(self, tmp_path):
        assert run(tmp_path / "absent.json", out_dir=tmp_path / "out") == 2

    def test_defaults_echoed_in_resolution(self):
        exp, params, seed, out = resolve_config({"experiment": "bp_sweep"})
        assert params == exp.defaults
        assert seed == 0

    def test_override_parsing_types(self):
        exp, params, _, _ = resolve_config(
            {"experiment": "bp_sweep"}, overrides=["n_x=4", "n_list=[2,3]", "family=shallow_local"]
        )
        assert params["n_x"] == 4
        assert params["n_list"] == [2, 3]
        assert params["family"] == "shallow_local"


@pytest.mark.parametrize("name", list(TINY))
def test_each_experiment_runs_and_writes_contract_files(tmp_path, name):
    path = write_config(tmp_path, name, TINY[name])
    out = tmp_path / "out"
    assert run(path, out_dir=out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["experiment"] == name
    # config echo holds every default the experiment used
    defaults = {e.name: e.defaults for e in REGISTRY}[name]
    assert set(summary["config"]["parameters"]) == set(defaults)
    assert "wall_clock_seconds" in summary
    for artifact in summary["artifacts"]:
        assert (out / artifact).exists()
    # every emitted file is listed
    emitted = {p.name for p in out.iterdir()}
    assert emitted == set(summary["artifacts"])


def test_cor2_train_writes_trace(tmp_path):
    path = write_config(tmp_path, "cor2_train", TINY["cor2_train"])
    out = tmp_path / "out"
    assert run(path, out_dir=out) == 0
    trace = (out / "trace.csv").read_text()
    header, *rows = trace.strip().split("\n")
    assert header == "step,risk,grad_inf_norm"
    assert len(rows) == TINY["cor2_train"]["steps"] + 1


def test_tilde_u_check_deviation_small(tmp_path):
    path = write_config(tmp_path, "tilde_u_check", {"n_list": [2], "t_list": [3], "n_unitaries": 2})
    out = tmp_path / "out"
    assert run(path, out_dir=out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["max_overlap_deviation"] <= 1e-9


@pytest.mark.parametrize("name", ["bp_sweep", "vanishing_similarity", "kernel_dlp"])
def test_rerun_reproduces_csv_bytes(tmp_path, name):
    path = write_config(tmp_path, name, TINY[name], seed=7)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run(path, out_dir=out_a, threads=1) == 0
    assert run(path, out_dir=out_b, threads=2) == 0
    for artifact in out_a.iterdir():
        if artifact.suffix == ".csv":
            assert artifact.read_bytes() == (out_b / artifact.name).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    path = write_config(tmp_path, "grad_check", TINY["grad_check"], seed=1)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run(path, out_dir=out_a, seed=99) == 0
    assert run(path, out_dir=out_b, seed=99) == 0
    assert (out_a / "grad_check.csv").read_bytes() == (out_b / "grad_check.csv").read_bytes()
    summary = json.loads((out_a / "summary.json").read_text())
    assert summary["config"]["seed"] == 99


def test_csv_line_endings_and_float_format(tmp_path):
    path = write_config(tmp_path, "vanishing_similarity", TINY["vanishing_similarity"])
    out = tmp_path / "out"
    assert run(path, out_dir=out) == 0
    raw = (out / "vanishing_similarity.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.endswith(b"\n")


def test_write_csv_17_digits():
    text = write_csv(["v"], [{"v": 1.0 / 3.0}])
    assert text == "v\n0.33333333333333331\n"


def test_main_run_subcommand(tmp_path, capsys):
    path = write_config(tmp_path, "grad_check", TINY["grad_check"])
    code = main(["run", "--config", str(path), "--out-dir", str(tmp_path / "o"), "--seed", "3"])
    assert code == 0


def test_validation_exit_code_via_main(tmp_path, capsys):
    path = write_config(tmp_path, "cor2_train", {"task": "nonsense"})
    code = main(["run", "--config", str(path), "--out-dir", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error=")


def test_wrongly_typed_override_is_validation_error(tmp_path, capsys):
    path = write_config(tmp_path, "cor2_train", TINY["cor2_train"])
    code = main(
        ["run", "--config", str(path), "--set", "steps=abc", "--out-dir", str(tmp_path / "o")]
    )
    assert code == 2
    assert capsys.readouterr().err.startswith("error=TypeError")
