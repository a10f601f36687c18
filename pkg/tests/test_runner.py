import json

from hawkspec.persistence import read_events
from hawkspec.runner import build_parser, main, prompt_confirmation, resolve_config


def test_prompt_confirmation_yes(monkeypatch):
    monkeypatch.setattr('builtins.input', lambda _: 'y')
    assert prompt_confirmation() is True


def test_prompt_confirmation_no(monkeypatch):
    monkeypatch.setattr('builtins.input', lambda _: 'n')
    assert prompt_confirmation() is False


def test_config_precedence(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"run": {"seed": 5, "jobs": 2}}), encoding="utf-8")
    parser = build_parser()
    args = parser.parse_args(['--config', str(config_file), 'benchmark'])
    assert resolve_config(args, env={}).seed == 5
    assert resolve_config(args, env={"HAWKSPEC_SEED": "7"}).seed == 7
    assert resolve_config(args, env={"HAWKSPEC_SEED": "7"}).jobs == 2
    args = parser.parse_args(['--config', str(config_file), '--seed', '9', 'benchmark', '--n-sim', '3'])
    config = resolve_config(args, env={"HAWKSPEC_SEED": "7"})
    assert config.seed == 9 and config.n_sim == 3


def test_fixed_p_flag(tmp_path):
    args = build_parser().parse_args(['benchmark', '--p', '0.8', '--estimators', 'SLS:pthin'])
    config = resolve_config(args, env={})
    assert config.cv.p_values == (0.8,)
    assert [t.label for t in config.estimators] == ["SLS/pthin"]


def test_simulate_then_estimate(tmp_path):
    assert main(['--out', str(tmp_path), '--seed', '1', 'simulate', '--horizons', '30', '--n-sim', '2']) == 0
    events = tmp_path / "events_T30_rep0.txt"
    assert events.exists() and (tmp_path / "events_T30_rep1.txt").exists()
    assert read_events(events).window.end == 30.0

    report_path = tmp_path / "fit.json"
    code = main(['estimate', str(events), '--estimator', 'sls', '--report', str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["estimator"] == "SLS" and report["mode"] == "none"
    assert set(report["theta"]) == {"mu", "alpha", "beta"}
    assert 0 < report["theta"]["alpha"] < 1


def test_estimate_with_cross_validation_report(tmp_path):
    main(['--out', str(tmp_path), 'simulate', '--horizons', '40', '--n-sim', '1'])
    report_path = tmp_path / "fit.json"
    code = main(['estimate', str(tmp_path / "events_T40_rep0.txt"), '--estimator', 'SP', '--mode', 'pthin',
                 '--p', '0.8', '--report', str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["p_hat"] == 0.8
    assert report["cv"]["p_values"] == [0.8]
    assert len(report["cv"]["mean_errors"][0]) == 18


def test_invalid_requests_exit_with_code_2(tmp_path):
    main(['--out', str(tmp_path), 'simulate', '--horizons', '20', '--n-sim', '1'])
    events = str(tmp_path / "events_T20_rep0.txt")
    assert main(['estimate', events, '--estimator', 'ML', '--mode', 'pthin']) == 2
    assert main(['estimate', events, '--estimator', 'XYZ']) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown": {}}', encoding="utf-8")
    assert main(['--config', str(bad), 'benchmark']) == 2
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    assert main(['--out', str(blocker / "x"), 'benchmark']) == 2


def test_benchmark_with_no_estimators_exits_cleanly(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"estimators": {}, "simulation": {"n_sim": 1, "horizons": [20]}}),
                           encoding="utf-8")
    out = tmp_path / "out"
    assert main(['--config', str(config_file), '--out', str(out), 'benchmark', '--quiet']) == 0
    assert (out / "records.csv").exists()
    assert not list(out.glob("*.svg"))


def test_benchmark_and_plot(tmp_path):
    out = tmp_path / "out"
    code = main(['--out', str(out), 'benchmark', '--quiet', '--n-sim', '2', '--horizons', '30', '60',
                 '--estimators', 'SLS:none'])
    assert code == 0
    assert (out / "mse_total.svg").exists()
    for svg in out.glob("*.svg"):
        svg.unlink()
    assert main(['plot', str(out / "summary.csv")]) == 0
    assert (out / "mse_mu.svg").exists()


def test_benchmark_confirmation_can_cancel(tmp_path, monkeypatch):
    monkeypatch.setattr('builtins.input', lambda _: 'n')
    out = tmp_path / "out"
    assert main(['--out', str(out), 'benchmark', '--confirm', '--estimators', 'SLS:none']) == 0
    assert not (out / "records.csv").exists()


def test_benchmark_refuses_disallowed_cells(tmp_path):
    out = tmp_path / "out"
    assert main(['--out', str(out), 'benchmark', '--quiet', '--estimators', 'ML:pthin,SLS:none']) == 2
    assert not (out / "records.csv").exists()
