import csv
import json
import math

import pytest

from fitroom.fitting_room import ScenarioConfig
from fitroom.harness.calibration import CalibrationFailed, CalibrationTargets, calibrate, service_config
from fitroom.harness.cli import main
from fitroom.harness.config_io import (
    ExperimentSpec,
    NegativeWaitingTime,
    ParseError,
    ValidationError,
    load_config,
    load_reference_sample,
)
from fitroom.harness.experiment import (
    ExperimentReport,
    comparison_sample,
    replication_seeds,
    run_experiment,
    run_replications,
    synthetic_reference,
)
from fitroom.harness.report import IoError, emit_report, load_report, write_histogram_csv, write_sample_csv
from fitroom.stats_suite import Sample, describe, histogram, mann_whitney_u, variance_comparison


def _write(path, text):
    path.write_text(text)
    return path


# -- config ------------------------------------------------------------------------


def test_minimal_config_fills_defaults(tmp_path):
    spec = load_config(_write(tmp_path / "c.json", '{"scenario": {"arrival_rate": 0.5}}'))
    assert spec.replications == 100
    assert spec.alpha == 0.05
    assert spec.scenario.arrival_rate == 0.5


@pytest.mark.parametrize("text, field", [
    ('{"alpha": 1.5}', "alpha"),
    ('{"replications": 0}', "replications"),
    ('{"paradigms": ["DES", "XYZ"]}', "paradigms"),
    ('{"comparison_unit": "day"}', "comparison_unit"),
    ('{"bogus": 1}', "bogus"),
    ('{"scenario": {"help_probability": 2}}', "scenario.help_probability"),
])
def test_config_validation_names_field(tmp_path, text, field):
    with pytest.raises(ValidationError) as err:
        load_config(_write(tmp_path / "c.json", text))
    assert err.value.field == field


def test_config_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.json")
    with pytest.raises(ParseError, match="line 2"):
        load_config(_write(tmp_path / "bad.json", '{\n "alpha": }'))


def test_spec_dict_round_trip():
    spec = ExperimentSpec(replications=3, base_seed=9, paradigms=("ABS",))
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


# -- reference samples ---------------------------------------------------------------


def test_reference_sample(tmp_path):
    s = load_reference_sample(_write(tmp_path / "r.csv", "total_wait\n1.0\n2.0\n3.0\n"))
    assert len(s) == 3 and describe(s).mean == 2.0


def test_reference_sample_errors(tmp_path):
    with pytest.raises(ParseError, match="row 3"):
        load_reference_sample(_write(tmp_path / "a.csv", "total_wait\n1.0\nabc\n"))
    with pytest.raises(NegativeWaitingTime):
        load_reference_sample(_write(tmp_path / "b.csv", "total_wait\n-1.0\n"))
    with pytest.raises(ParseError):
        load_reference_sample(_write(tmp_path / "c.csv", "wait\n1.0\n"))
    with pytest.raises(ParseError):
        load_reference_sample(tmp_path / "none.csv")


# -- experiments ---------------------------------------------------------------------


def test_seeds_are_distinct_and_positional():
    seeds = replication_seeds(12, 500)
    assert len(set(seeds)) == 500
    assert seeds[:10] == replication_seeds(12, 10)


@pytest.fixture(scope="module")
def full_report():
    spec = ExperimentSpec(replications=100, workers=1)
    ref = synthetic_reference(spec.scenario, spec.base_seed)
    return spec, ref, run_experiment(spec, ref)


def test_full_experiment_shape(full_report):
    _, _, report = full_report
    assert sum(len(p.results) for p in report.paradigms.values()) == 200
    mws = [t["mann_whitney"] for t in report.validation.values()] + [report.cross_paradigm["mann_whitney"]]
    assert len(mws) == 3 and all(m is not None for m in mws)
    assert report.provenance["seeds"] == list(range(100))


def test_report_numbers_recompute_from_samples(full_report):
    spec, ref, report = full_report
    for name in spec.paradigms:
        s = report.sample(name)
        d = describe(s)
        st = report.paradigms[name].stats
        for key in ("mean", "median", "std_dev", "variance"):
            assert math.isclose(st[key], getattr(d, key), rel_tol=1e-9, abs_tol=1e-12)
        mw = mann_whitney_u(s, ref, spec.alpha)
        assert math.isclose(report.validation[name]["mann_whitney"]["p_two_sided"], mw.p_two_sided,
                            rel_tol=1e-9, abs_tol=1e-12)
        var = variance_comparison(s, ref)
        assert math.isclose(report.validation[name]["variance"]["percent_difference"],
                            var.percent_difference, rel_tol=1e-9)
        assert report.paradigms[name].histogram == [[b.start, b.end, b.count] for b in histogram(s, 1.0)]


def test_single_replication_without_reference():
    report = run_experiment(ExperimentSpec(replications=1, paradigms=("DES",)))
    assert report.validation is None and report.reference is None
    assert report.cross_paradigm is None
    assert report.paradigms["DES"].stats["n"] > 0
    assert not report.rejected


def test_reproducible_reports():
    spec = ExperimentSpec(replications=5, base_seed=3)
    a = run_experiment(spec, workers=1).to_json(include_timing=False)
    b = run_experiment(spec, workers=2).to_json(include_timing=False)
    assert a == b


def test_paradigm_order_does_not_matter():
    fwd = run_experiment(ExperimentSpec(replications=4, paradigms=("DES", "ABS")), workers=1)
    rev = run_experiment(ExperimentSpec(replications=4, paradigms=("ABS", "DES")), workers=1)
    for name in ("DES", "ABS"):
        assert fwd.paradigms[name].results == rev.paradigms[name].results


def test_replication_unit_comparison():
    results = run_replications("DES", ScenarioConfig(), [0, 1, 2], workers=1)
    s = comparison_sample(results, "replication", "per_customer_total")
    assert len(s) == 3
    assert s.values[0] == pytest.approx(results[0].mean_wait)


# -- reports ----------------------------------------------------------------------------


def test_json_round_trip(tmp_path, full_report):
    _, _, report = full_report
    path = tmp_path / "r.json"
    emit_report(report, "json", path)
    again = load_report(path)
    assert again.to_dict() == json.loads(report.to_json())
    assert again.paradigms["DES"].results == report.paradigms["DES"].results
    assert ExperimentReport.from_json(report.to_json()).to_json() == report.to_json()


def test_csv_summary_table(tmp_path, full_report):
    _, _, report = full_report
    path = tmp_path / "t.csv"
    emit_report(report, "csv", path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["model", "mean", "std_dev", "variance"]
    assert [r[0] for r in rows[1:]] == ["synthetic_reference", "DES", "ABS"]


def test_svg_histogram(tmp_path, full_report):
    _, _, report = full_report
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_report(report, "svg_histogram", a)
    emit_report(report, "svg_histogram", b)
    assert a.read_text().startswith("<?xml")
    assert a.read_text() == b.read_text()


def test_unwritable_path(tmp_path, full_report):
    _, _, report = full_report
    with pytest.raises(IoError):
        emit_report(report, "json", tmp_path / "no" / "such" / "dir" / "r.json")
    with pytest.raises(ValueError):
        emit_report(report, "xml", tmp_path / "r.xml")


def test_sample_and_histogram_csv(tmp_path):
    [r] = run_replications("DES", ScenarioConfig(), [0], keep_trace=True)
    write_sample_csv(r, tmp_path / "s.csv")
    back = load_reference_sample(tmp_path / "s.csv")
    assert back.values == pytest.approx(r.waiting_time_sample, abs=1e-6)
    write_histogram_csv(histogram(back, 1.0), tmp_path / "h.csv")
    rows = list(csv.DictReader((tmp_path / "h.csv").open()))
    assert sum(int(x["count"]) for x in rows) == len(back)


# -- calibration --------------------------------------------------------------------------


def test_calibration_infeasible_targets():
    with pytest.raises(CalibrationFailed):
        calibrate(CalibrationTargets(0.0, (0.45, 0.10, 0.45)))
    with pytest.raises(CalibrationFailed):
        calibrate(CalibrationTargets(1.68, (1.0, 0.0, 0.0)))
    with pytest.raises(CalibrationFailed):
        calibrate(CalibrationTargets(1.68, (0.5, 0.2, 0.2)))
    with pytest.raises(CalibrationFailed):
        service_config(ScenarioConfig(help_probability=0.0), (0.45, 0.10, 0.45))


def test_service_config_split():
    cfg = service_config(ScenarioConfig(), (0.45, 0.10, 0.45))
    s, p = cfg.entry_service.mean, cfg.help_probability
    shares = [s, p * cfg.help_service.mean, cfg.return_service.mean]
    total = sum(shares)
    assert [x / total for x in shares] == pytest.approx([0.45, 0.10, 0.45])


def test_calibration_gives_up_after_max_iterations():
    with pytest.raises(CalibrationFailed) as err:
        calibrate(CalibrationTargets(1.68), tolerance=1e-6, max_iterations=2, replications=5)
    assert err.value.best is not None


# -- CLI -------------------------------------------------------------------------------------


def test_cli_run_and_validate(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", json.dumps({"replications": 3, "workers": 1}))
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "r.json"),
                 "--csv", str(tmp_path / "t.csv"), "--samples", str(tmp_path / "s")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "model,mean,std_dev,variance"
    assert "DES vs ABS" in out
    assert (tmp_path / "s" / "abs_rep002.csv").exists()
    assert load_report(tmp_path / "r.json").provenance["config"]["replications"] == 3

    same = str(tmp_path / "s" / "des_rep000.csv")
    assert main(["validate", "--model-samples", same, "--reference", same]) == 0
    ref = _write(tmp_path / "ref.csv", "total_wait\n" + "\n".join(str(20 + i) for i in range(30)))
    assert main(["validate", "--model-samples", same, "--reference", str(ref)]) == 2


def test_cli_errors_exit_one(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = _write(tmp_path / "bad.json", '{"alpha": 2}')
    assert main(["run", "--config", str(bad)]) == 1
    assert "alpha" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run"])


def test_cli_calibrate_writes_scenario(tmp_path, capsys):
    out = tmp_path / "cal.json"
    assert main(["calibrate", "--reps", "20", "--tolerance", "0.1", "--out", str(out)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert abs(result["achieved_mean_wait"] - 1.68) <= 0.1
    spec = load_config(out)
    assert spec.scenario.arrival_rate == result["config"]["arrival_rate"]
