from __future__ import annotations

import csv
import json
import math

import pytest

from app.cli import (
    EXIT_ERROR,
    EXIT_OK,
    EXIT_UNCERTIFIED,
    RunConfig,
    check_constants,
    check_inverse_gamma,
    check_partition,
    check_transform,
    check_weight_class,
    main,
    output_path,
    parse_config,
    report_all,
    status_label,
    unit_sup,
)
from app.config import get_settings
from app.errors import SpecParseError
from app.reports import read_json_report


def _summary(capsys) -> dict:
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_parse_applies_defaults_and_canonical_forms():
    config = parse_config(["norm", "--weight", "family:s=2", "--function", "gaussian:c=0.5,sigma=0.5"])
    assert config.weight_spec == "gevrey:s=2"
    assert config.function_ids == ["gaussian:sigma=0.5,c=0.5"]
    assert config.k_max == get_settings().k_max
    assert parse_config(["decay"]).function_ids == ["gevrey:mu=-1"]
    assert parse_config(["superposition"]).function_ids == ["gevrey:mu=-2"]


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "--function", "gaussian:sigma=0.5", "--q", "inf", "--k-max", "16"],
        ["constants", "--variant", "SV", "--R", "10,20", "--N", "2", "--format", "csv"],
        ["algebra", "--p1", "2", "--p2", "inf", "--weight", "family:s=3,r=1,-0.5"],
        ["superposition", "--lambdas", "0,0.5,1", "--theta", "3"],
        ["find-s", "--weight", "loglog", "--X", "50", "--h", "0.5", "--output", "out/s.json"],
    ],
)
def test_canonical_argv_round_trip(argv):
    config = parse_config(argv)
    assert parse_config(config.to_argv()) == config


def test_algebra_exponent_defaults_to_holder():
    assert parse_config(["algebra"]).p == 1.0
    assert parse_config(["algebra", "--p1", "2", "--p2", "inf"]).p == 2.0
    with pytest.raises(SpecParseError):
        parse_config(["algebra", "--p", "2"])
    with pytest.raises(SpecParseError):
        parse_config(["algebra", "--p1", "1", "--p2", "1"])


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["unknown-command"],
        ["norm", "--weight", "gevrey:s=1"],
        ["norm", "--weight", "nonsense"],
        ["norm", "--k-max", "500"],
        ["norm", "--function", "gaussian", "--function", "window"],
        ["norm", "--p", "0.5"],
        ["norm", "--grid-N", "1000"],
        ["constants", "--variant", "rv_c"],
        ["superposition", "--lambdas", "a,b"],
        ["norm", "--k-m", "4"],
    ],
)
def test_parse_errors(argv):
    with pytest.raises(SpecParseError):
        parse_config(argv)


def test_run_config_rejects_unknown_fields():
    with pytest.raises(ValueError):
        RunConfig(command="norm", bogus=1)


def test_invalid_arguments_write_nothing(tmp_path, capsys):
    target = tmp_path / "never.json"
    assert main(["norm", "--k-max", "500", "--output", str(target)]) == EXIT_ERROR
    assert not target.exists()
    assert "modspace: error" in capsys.readouterr().err


def test_constants_csv(tmp_path, capsys, ledger):
    target = tmp_path / "sv.csv"
    argv = ["constants", "--variant", "sv", "--N", "3", "--R", "20,10", "--format", "csv", "--output", str(target)]
    assert main(argv) == EXIT_OK
    with target.open() as handle:
        rows = list(csv.DictReader(handle))
    assert [float(r["R"]) for r in rows] == [10.0, 20.0]
    assert float(rows[0]["constant"]) / float(rows[1]["constant"]) == pytest.approx(8.0, rel=1e-12)
    summary = _summary(capsys)
    assert summary["status"] == "certified"
    assert summary["output"] == str(target)
    assert ledger.load(1)[0].command == "constants"


def test_validate_weight_report(tmp_path, capsys):
    target = tmp_path / "weight.json"
    assert main(["validate-weight", "--weight", "gevrey:s=2", "--probe-max", "1e5", "--output", str(target)]) == EXIT_OK
    document = read_json_report(target)
    assert document["header"]["schema_version"] == "1.0"
    assert document["header"]["command"].startswith("validate-weight --weight gevrey:s=2")
    assert document["report"]["subclass"] == "W1"
    assert {v["status"] for v in document["report"]["verdicts"].values()} == {"pass"}
    assert _summary(capsys)["subclass"] == "W1"


def test_validate_weight_flags_control(tmp_path):
    assert main(["validate-weight", "--weight", "bracket:a=1", "--output", str(tmp_path / "c.json")]) == EXIT_UNCERTIFIED


def test_norm_exit_codes(tmp_path, capsys):
    certified = tmp_path / "norm.json"
    assert main(["norm", "--k-max", "24", "--output", str(certified)]) == EXIT_OK
    assert read_json_report(certified)["report"]["certified"] is True
    assert _summary(capsys)["certified"] is True

    uncertified = tmp_path / "wide.json"
    argv = ["norm", "--function", "gaussian:sigma=0.2", "--k-max", "4", "--output", str(uncertified)]
    assert main(argv) == EXIT_UNCERTIFIED
    report = read_json_report(uncertified)["report"]
    assert report["tail_estimate"] == "Infinity"


def test_norm_csv_has_one_row_per_frequency(tmp_path):
    target = tmp_path / "norm.csv"
    assert main(["norm", "--k-max", "8", "--format", "csv", "--output", str(target)]) == EXIT_OK
    lines = target.read_text().splitlines()
    assert lines[0] == "k1,contribution"
    assert len(lines) == 1 + 17


def test_runtime_error_exits_one_and_writes_nothing(tmp_path, capsys, ledger):
    target = tmp_path / "s.json"
    assert main(["find-s", "--weight", "linear", "--output", str(target)]) == EXIT_ERROR
    assert not target.exists()
    assert _summary(capsys)["status"] == "error"
    entry = ledger.load(1)[0]
    assert entry.exit_code == EXIT_ERROR
    assert "error" in entry.summary


def test_find_s_for_gevrey(tmp_path, capsys):
    target = tmp_path / "s.json"
    assert main(["find-s", "--X", "40", "--h", "0.5", "--output", str(target)]) == EXIT_OK
    report = read_json_report(target)["report"]
    assert report["certificate"]["s"] == pytest.approx(0.585, abs=1e-9)
    assert report["recheck_violations"] == []
    assert _summary(capsys)["s"] == report["certificate"]["s"]


def test_assoc_seq_and_decay(tmp_path):
    assert main(["assoc-seq", "--p-max", "12", "--output", str(tmp_path / "seq.json")]) == EXIT_OK
    assert main(["assoc-seq", "--weight", "loglog", "--p-max", "6", "--output", str(tmp_path / "ll.json")]) == EXIT_UNCERTIFIED
    assert main(["decay", "--function", "gaussian", "--output", str(tmp_path / "decay.json")]) == EXIT_OK
    fit = read_json_report(tmp_path / "decay.json")["report"]
    assert fit["fitted_exponent"] == pytest.approx(2.0, abs=0.01)


def test_default_output_location(tmp_path):
    settings = get_settings().model_copy(update={"data_dir": tmp_path})
    config = parse_config(["constants", "--format", "csv"])
    assert output_path(config, settings) == tmp_path / "reports" / "constants.csv"


def test_status_labels():
    assert status_label(EXIT_OK) == "certified"
    assert status_label(EXIT_UNCERTIFIED) == "uncertified"
    assert status_label(EXIT_ERROR) == "error"


def test_unit_sup(gaussian):
    assert math.isclose(float(abs(unit_sup(gaussian.scaled(4.0)).values).max()), 1.0)


def test_fast_acceptance_checks():
    config = parse_config(["report-all"])
    for check in (check_partition, check_transform, check_constants, check_inverse_gamma):
        result = check(config)
        assert result.status == "pass", result


def test_weight_class_check_reports_failing_target():
    result = check_weight_class(parse_config(["report-all", "--weight", "bracket:a=1"]))
    assert result.status == "fail"
    assert "A1" in result.detail
    assert result.metrics["control_A1"] == "fail"


@pytest.mark.slow
def test_report_all_passes_and_is_deterministic():
    config = parse_config(["report-all"])
    first = report_all(config)
    assert first.errors == 0
    assert first.failed == 0, [c for c in first.checks if c.status != "pass"]
    assert first.to_payload() == report_all(config).to_payload()
