"""Scenario loading, validation, execution, and the command-line interface."""

import copy
import json
import os

import pytest

from minitcp.cli import main
from minitcp.errors import ConfigError, CyclicDependency
from minitcp.harness import load_scenario, run_scenario, validate_scenario
from minitcp.metrics import MetricsLog

BASE = {
    "name": "unit",
    "seed": 1,
    "duration_s": 5.0,
    "hosts": ["client0", "server0"],
    "links": [
        {"label": "l0", "a": "client0", "b": "server0", "rate_mbps": 10, "delay_ms": 10}
    ],
    "flows": [
        {
            "id": "f0",
            "client": "client0",
            "server": "server0",
            "port": 5001,
            "link": "l0",
            "app": {"type": "download", "size_bytes": 40000},
        }
    ],
}


def cfg(**overrides):
    out = copy.deepcopy(BASE)
    out.update(overrides)
    return out


def test_minimal_scenario_runs_and_completes():
    res = run_scenario(cfg())
    assert res.name == "unit"
    fct = res.metrics.last("fct", conn="f0")
    assert fct is not None and 0 < fct < 5
    assert res.metrics.last("bytes_rcv", conn="f0") == 40000


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError):
        validate_scenario(cfg(nonsense=1))


def test_link_referencing_unknown_host_rejected():
    bad = cfg()
    bad["links"][0]["a"] = "ghost"
    with pytest.raises(ConfigError):
        validate_scenario(bad)


def test_duplicate_link_labels_rejected():
    bad = cfg()
    bad["links"].append(dict(bad["links"][0]))
    with pytest.raises(ConfigError):
        validate_scenario(bad)


def test_unknown_app_type_rejected():
    bad = cfg()
    bad["flows"][0]["app"]["type"] = "torrent"
    with pytest.raises(ConfigError):
        validate_scenario(bad)


def test_subflows_only_on_multipath_flows():
    bad = cfg()
    bad["flows"][0]["subflows"] = [{"link": "l0"}]
    with pytest.raises(ConfigError):
        validate_scenario(bad)


def test_object_dependency_cycle_detected():
    bad = cfg()
    bad["flows"][0]["app"] = {
        "type": "objects",
        "objects": [
            {"id": "a", "size_bytes": 100, "after": ["b"]},
            {"id": "b", "size_bytes": 100, "after": ["a"]},
        ],
    }
    with pytest.raises(CyclicDependency):
        validate_scenario(bad)


def test_object_unknown_dependency_rejected():
    bad = cfg()
    bad["flows"][0]["app"] = {
        "type": "objects",
        "objects": [{"id": "a", "size_bytes": 100, "after": ["missing"]}],
    }
    with pytest.raises(ConfigError):
        validate_scenario(bad)


def test_objects_flow_respects_dependency_order():
    scenario = cfg()
    scenario["flows"][0]["app"] = {
        "type": "objects",
        "objects": [
            {"id": "first", "size_bytes": 20000},
            {"id": "second", "size_bytes": 20000, "after": ["first"]},
        ],
    }
    res = run_scenario(scenario)
    t_first = res.metrics.series("object_fct", conn="f0.first")[0][0]
    t_second = res.metrics.series("object_fct", conn="f0.second")[0][0]
    assert t_first < t_second
    assert res.metrics.last("fct", conn="f0") is not None


def test_scenario_files_on_disk_all_validate():
    import glob

    paths = sorted(glob.glob("scenarios/*.yaml"))
    assert paths, "shipped scenario files missing"
    for path in paths:
        load_scenario(path)  # validates internally


def test_cli_run_writes_log_and_summary(tmp_path):
    path = tmp_path / "unit.yaml"
    import yaml

    path.write_text(yaml.safe_dump(cfg()))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 0
    log_path = out / "unit.metrics.log"
    MetricsLog.load(log_path)  # parses
    summary = json.loads((out / "unit.summary.json").read_text())
    assert "f0" in summary


def test_cli_config_error_exit_code(tmp_path):
    path = tmp_path / "bad.yaml"
    import yaml

    bad = cfg(nonsense=1)
    path.write_text(yaml.safe_dump(bad))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2


def test_cli_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)]) == 1


def test_cli_summarize(tmp_path, capsys):
    path = tmp_path / "unit.yaml"
    import yaml

    path.write_text(yaml.safe_dump(cfg()))
    out = tmp_path / "out"
    main(["run", str(path), "--out", str(out)])
    capsys.readouterr()
    assert main(["summarize", str(out / "unit.metrics.log")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["f0"]["bytes_rcv"]["max"] == 40000


def test_cli_sweep_runs_each_variant(tmp_path, capsys):
    path = tmp_path / "unit.yaml"
    import yaml

    path.write_text(yaml.safe_dump(cfg()))
    out = tmp_path / "out"
    assert main(["sweep", str(path), "flows.0.app.size_bytes=10000,20000", "--out", str(out)]) == 0
    logs = sorted(os.listdir(out))
    assert len([n for n in logs if n.endswith(".metrics.log")]) == 2


def test_out_dir_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("MINITCP_OUT", str(tmp_path / "envout"))
    from minitcp.cli import build_parser

    args = build_parser().parse_args(["run", "x.yaml"])
    assert args.out == str(tmp_path / "envout")
