"""Tests for configuration loading, .info files and input-file helpers."""

import json

import pytest
import yaml

from hybridzeno.helpers.config_utils import (
    CONFIG_FILENAME,
    default_config,
    load_config,
    setting,
    sim_config,
    write_config,
)
from hybridzeno.helpers.errors import ConfigError
from hybridzeno.helpers.file_info import create_info_file
from hybridzeno.helpers.scenarios import scenario_document
from hybridzeno.helpers.simulator import InvalidInitialCondition
from hybridzeno.helpers.spec_lang import SchemaError
from hybridzeno.helpers.system_files import InputFileError, parse_params, parse_vector, resolve_system


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_yaml(path, data):
    with open(path, "w") as f:
        f.write(data if isinstance(data, str) else yaml.safe_dump(data))


class TestLoadConfig:
    def test_defaults_without_file(self, workdir):
        assert load_config() == default_config()

    def test_explicit_missing_file(self, workdir):
        with pytest.raises(ConfigError):
            load_config(str(workdir / "missing.yaml"))

    def test_file_values_override_defaults(self, workdir):
        write_yaml(workdir / CONFIG_FILENAME, {"horizon": 5.0, "max_zeno": 1})
        config = load_config()
        assert config["horizon"] == 5.0
        assert config["max_zeno"] == 1
        assert config["step"] == default_config()["step"]

    def test_exponent_literals_are_numbers(self, workdir):
        write_yaml(workdir / CONFIG_FILENAME, "eq_tol: 1e-9\nevent_tol: 1e-10\n")
        config = load_config()
        assert config["eq_tol"] == 1e-9
        assert config["event_tol"] == 1e-10

    def test_empty_file(self, workdir):
        write_yaml(workdir / CONFIG_FILENAME, "")
        assert load_config() == default_config()

    @pytest.mark.parametrize("data", [
        {"unknown_setting": 1},
        {"zeno_window": 2},
        {"horizon": -1.0},
        {"workers": 0},
        {"seed": -1},
        {"jump_priority": "sometimes"},
        {"max_jumps": 1.5},
        "- a list\n- not a mapping\n",
        "horizon: [unclosed\n",
    ])
    def test_rejects(self, workdir, data):
        write_yaml(workdir / CONFIG_FILENAME, data)
        with pytest.raises(ConfigError):
            load_config()


class TestSimConfig:
    def test_flag_beats_file_beats_default(self, workdir):
        write_yaml(workdir / CONFIG_FILENAME, {"horizon": 5.0})
        config = load_config()
        assert sim_config(config, horizon=2.0).horizon == 2.0
        assert sim_config(config, horizon=None).horizon == 5.0
        assert sim_config(config).step == 1e-3

    def test_invalid_override(self):
        with pytest.raises(ConfigError):
            sim_config(default_config(), zeno_window=1)

    def test_setting(self):
        config = default_config()
        assert setting(config, "seed") == 0
        assert setting(config, "seed", 7) == 7


class TestWriteConfig:
    def test_refuses_to_overwrite(self, workdir):
        path = workdir / CONFIG_FILENAME
        write_config(path, default_config())
        assert load_config(str(path)) == default_config()
        with pytest.raises(ConfigError):
            write_config(path, default_config())


class TestInfoFile:
    def test_contents(self, tmp_path):
        target = tmp_path / "run.csv"
        create_info_file(target, 1.5, command=["hybridzeno", "simulate"])
        info = json.loads((tmp_path / "run.csv.info").read_text())
        assert info["elapsed_time_sec"] == 1.5
        assert info["command"] == ["hybridzeno", "simulate"]
        assert info["timestamp"].endswith("Z")

    def test_without_command(self, tmp_path):
        create_info_file(tmp_path / "report.json", 0.0)
        info = json.loads((tmp_path / "report.json.info").read_text())
        assert "command" not in info


class TestSystemFiles:
    def test_parse_params(self):
        assert parse_params(["lam=0.3", " g = 9.8"]) == {"lam": 0.3, "g": 9.8}
        with pytest.raises(SchemaError):
            parse_params(["lam"])
        with pytest.raises(SchemaError):
            parse_params(["lam=abc"])

    def test_parse_vector(self):
        assert parse_vector("1, 0,-2.5") == [1.0, 0.0, -2.5]
        with pytest.raises(InvalidInitialCondition):
            parse_vector("1,a")
        with pytest.raises(InvalidInitialCondition):
            parse_vector("")

    def test_exactly_one_source(self, tmp_path):
        with pytest.raises(InputFileError):
            resolve_system()
        with pytest.raises(InputFileError):
            resolve_system(system_path=str(tmp_path / "x.json"), scenario="bouncing_ball")

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(InputFileError):
            resolve_system(system_path=str(tmp_path / "missing.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(InputFileError):
            resolve_system(system_path=str(broken))

    def test_params_merge_into_file(self, tmp_path):
        path = tmp_path / "ball.json"
        path.write_text(json.dumps(scenario_document("bouncing_ball")))
        sys = resolve_system(system_path=str(path), params={"lam": 0.25})
        assert sys.params == {"lam": 0.25, "g": 9.81}
        with pytest.raises(SchemaError):
            resolve_system(system_path=str(path), params={"mu": 1.0})

    def test_scenario(self):
        assert resolve_system(scenario="example3").dim == 3
