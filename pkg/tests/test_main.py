import pytest

import main
from app.models.config import default_config, dump_config
from app.services.validation_service import CheckResult, ValidationReport


@pytest.fixture(autouse=True)
def runtime_env(monkeypatch):
    monkeypatch.setenv("NCR_ISAC_WORKERS", "1")
    monkeypatch.setenv("LOG_LEVEL", "warning")


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.conf"
    path.write_text(dump_config(default_config(num_antennas=4, num_subcarriers=8, num_time_samples=4)))
    return str(path)


def _write_config(tmp_path, name, **overrides):
    path = tmp_path / name
    path.write_text(dump_config(default_config(**overrides)))
    return str(path)


def test_crb_report_shows_both_forms(capsys):
    assert main.main(["crb", "--precoder", "matched", "--alpha", "1"]) == main.EXIT_OK

    out = capsys.readouterr().out
    assert "reconciled (D=N_s)" in out
    assert "direct summation" in out
    assert "printed (D=1)" in out
    values = {line[:21].strip(): line[21:].split()[0] for line in out.splitlines()}
    assert float(values["reconciled (D=N_s)"]) == pytest.approx(float(values["direct summation"]), rel=1e-9)


def test_crb_zero_distance_is_usage_error():
    assert main.main(["crb", "--distance", "0"]) == main.EXIT_USAGE


def test_crb_single_subcarrier_is_identifiability_error(tmp_path):
    config = _write_config(tmp_path, "ns1.conf", num_subcarriers=1)
    assert main.main(["crb", "--config", config]) == main.EXIT_IDENTIFIABILITY


def test_missing_config_file_is_usage_error(tmp_path):
    assert main.main(["crb", "--config", str(tmp_path / "nope.conf")]) == main.EXIT_USAGE


def test_parser_errors_exit_with_usage_code():
    with pytest.raises(SystemExit) as info:
        main.main(["sweep", "--variable", "max_power"])
    assert info.value.code == main.EXIT_USAGE

    with pytest.raises(SystemExit) as info:
        main.main(["sweep", "--variable", "max_power", "--grid", "1e7", "--arms", "both", "--out", "x.csv"])
    assert info.value.code == main.EXIT_USAGE


def test_optimize_fixed_is_deterministic(small_config, capsys):
    args = ["optimize", "--config", small_config, "--seed", "9", "--arm", "fixed", "--fixed-alpha-db", "18.5"]

    assert main.main(args) == main.EXIT_OK
    first = capsys.readouterr().out
    assert main.main(args) == main.EXIT_OK
    assert capsys.readouterr().out == first
    assert "alpha                70.79457843841" in first


def test_optimize_writes_csv_row(small_config, tmp_path):
    out = tmp_path / "one.csv"
    assert main.main(["optimize", "--config", small_config, "--csv", str(out)]) == main.EXIT_OK
    assert len(out.read_text().splitlines()) == 2


def test_optimize_infeasible_exit_code(tmp_path):
    config = _write_config(
        tmp_path, "weak.conf", num_antennas=4, num_subcarriers=8, num_time_samples=4,
        composite_chan_var_db=-300.0,
    )
    assert main.main(["optimize", "--config", config, "--arm", "fixed"]) == main.EXIT_INFEASIBLE


def test_optimize_not_converged_exit_code(small_config, mocker):
    result = mocker.Mock(infeasible=False, converged=False, alpha=1.0, crb_d=1.0, sinr_db=2.0, power_used=1.0)
    result.w = main.uniform_precoder(main.default_config(num_antennas=4)).w
    mocker.patch("main.optimize_joint", return_value=result)

    assert main.main(["optimize", "--config", small_config]) == main.EXIT_NOT_CONVERGED


def test_sweep_writes_trials_and_aggregate(small_config, tmp_path):
    out = tmp_path / "runs" / "power.csv"
    args = [
        "sweep", "--config", small_config, "--variable", "max_power", "--grid", "1e7,2e7",
        "--trials", "2", "--arms", "joint,fixed", "--out", str(out), "--quiet",
    ]

    assert main.main(args) == main.EXIT_OK
    first = out.read_bytes()
    lines = first.decode("utf-8").splitlines()
    assert len(lines) == 1 + 2 * 2 * 2
    aggregate_lines = (tmp_path / "runs" / "power_aggregate.csv").read_text().splitlines()
    assert len(aggregate_lines) == 1 + 2 * 2

    assert main.main(args) == main.EXIT_OK
    assert out.read_bytes() == first


def test_sweep_csv_is_identical_across_runs_and_worker_counts(small_config, tmp_path):
    outputs = []
    for index, workers in enumerate(["1", "1", "4"]):
        out = tmp_path / f"run{index}" / "rcs.csv"
        args = [
            "sweep", "--config", small_config, "--variable", "rcs_var_db", "--grid", "5,10,15",
            "--trials", "4", "--seed", "31", "--workers", workers, "--out", str(out), "--quiet",
        ]
        assert main.main(args) == main.EXIT_OK
        outputs.append((out.read_bytes(), (out.parent / "rcs_aggregate.csv").read_bytes()))

    assert outputs[0] == outputs[1] == outputs[2]


def test_sweep_invalid_grid_value_is_usage_error(small_config, tmp_path):
    out = tmp_path / "bad.csv"
    args = [
        "sweep", "--config", small_config, "--variable", "max_power", "--grid=-1,1e7",
        "--trials", "1", "--out", str(out), "--quiet",
    ]
    assert main.main(args) == main.EXIT_USAGE
    assert not out.exists()


def test_sweep_rejects_unordered_grid(small_config, tmp_path):
    args = [
        "sweep", "--config", small_config, "--variable", "max_power", "--grid", "2e7,1e7,3e7",
        "--trials", "1", "--out", str(tmp_path / "x.csv"), "--quiet",
    ]
    assert main.main(args) == main.EXIT_USAGE


def test_validate_passes_with_single_trial(capsys):
    assert main.main(["validate", "--trials", "1"]) == main.EXIT_OK
    assert "PASS oracle_equivalence" in capsys.readouterr().out


def test_validate_failure_exit_code(mocker):
    failing = ValidationReport(
        checks=[CheckResult(name="fim_psd", passed=False, max_discrepancy=0.2, threshold=1e-9, cases=1)]
    )
    mocker.patch("main.run_validation", return_value=failing)

    assert main.main(["validate"]) == main.EXIT_VALIDATION


def test_validate_fault_mode(capsys):
    assert main.main(["validate", "--trials", "2", "--fault", "unit-diagonal"]) == main.EXIT_VALIDATION
    assert "FAIL fim_psd" in capsys.readouterr().out
