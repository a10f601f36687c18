from pathlib import Path

import pytest

from hawkspec.contrasts import ContrastKind
from hawkspec.core import DomainError
from hawkspec.planner import (
    ALLOWED_MODES,
    ConfigError,
    EstimatorTask,
    ExperimentConfig,
    PenaltyMode,
    parse_estimators,
    plan_battery,
    tasks_to_dicts,
)


def test_full_battery_follows_the_mode_table():
    tasks = plan_battery()
    assert len(tasks) == 13
    assert [t.id for t in tasks] == list(range(1, 14))
    assert tasks[0].label == "OLS/none"
    for t in tasks:
        assert t.mode in ALLOWED_MODES[t.estimator]


@pytest.mark.parametrize("kind", [ContrastKind.OLS, ContrastKind.ML])
def test_thinned_temporal_tasks_are_unconstructible(kind):
    with pytest.raises(DomainError):
        EstimatorTask(1, kind, PenaltyMode.PTHIN)


def test_parse_estimators():
    selection = parse_estimators("SLS:none+pthin, ml")
    assert selection == {ContrastKind.SLS: (PenaltyMode.NONE, PenaltyMode.PTHIN),
                         ContrastKind.ML: (PenaltyMode.NONE, PenaltyMode.LOOCV)}
    tasks = plan_battery(selection)
    assert [t.label for t in tasks] == ["ML/none", "ML/loocv", "SLS/none", "SLS/pthin"]


@pytest.mark.parametrize("text", ["XYZ", "SLS:often"])
def test_parse_estimators_rejects_unknown(text):
    with pytest.raises(ConfigError):
        parse_estimators(text)


def test_tasks_to_dicts():
    tasks = plan_battery({ContrastKind.SP: (PenaltyMode.LOOCV,)})
    assert tasks_to_dicts(tasks) == [{"id": 1, "estimator": "SP", "mode": "loocv"}]


def test_default_config():
    config = ExperimentConfig()
    assert config.theta_star == (1.0, 0.5, 2.0)
    assert config.horizons == (50.0, 100.0, 200.0, 400.0)
    assert config.burn_in == 100.0 and config.half_width == 2.0 and config.loocv_k == 4
    assert config.kappas_for(ContrastKind.ML)[0] == 2.0 ** -10
    assert config.kappas_for(ContrastKind.OLS)[-1] == 2.0 ** 10


def test_config_round_trips_through_mapping():
    config = ExperimentConfig(n_sim=3, seed=9, output_dir=Path("out"))
    assert ExperimentConfig.from_mapping(config.to_mapping()) == config


def test_config_from_mapping_sections():
    config = ExperimentConfig.from_mapping({
        "truth": {"alpha": 0.3},
        "simulation": {"horizons": [20, 40], "n_sim": 2},
        "estimators": {"sls": ["none"]},
        "pthin": {"p_values": [0.8], "kappa_values": {"log2": [-2, 1]}},
        "loocv": {"kappas": {"ML": [0.0, 1.0]}},
        "run": {"seed": 4, "jobs": 2},
    })
    assert config.true_params.alpha == 0.3 and config.true_params.mu == 1.0
    assert config.horizons == (20.0, 40.0)
    assert [t.label for t in config.estimators] == ["SLS/none"]
    assert config.cv.p_values == (0.8,)
    assert config.cv.kappa_values == (0.25, 0.5, 1.0, 2.0)
    assert config.kappas_for(ContrastKind.ML) == (0.0, 1.0)
    assert config.seed == 4 and config.jobs == 2


@pytest.mark.parametrize("data", [
    {"bogus": {}},
    {"run": {"seeds": 1}},
    {"run": []},
    {"simulation": {"n_sim": 0}},
    {"truth": {"alpha": 1.5}},
    {"estimators": {"ML": ["pthin"]}},
])
def test_bad_config_is_rejected(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(data)


def test_with_overrides_ignores_unset_values():
    config = ExperimentConfig().with_overrides(seed=None, jobs=3)
    assert config.seed == 0 and config.jobs == 3


@pytest.mark.parametrize("selection", [
    {ContrastKind.ML: (PenaltyMode.PTHIN,)},
    {ContrastKind.OLS: (PenaltyMode.NONE, PenaltyMode.PTHIN), ContrastKind.SLS: (PenaltyMode.NONE,)},
])
def test_plan_battery_refuses_disallowed_cells(selection):
    with pytest.raises(DomainError):
        plan_battery(selection)


def test_parsed_disallowed_cell_is_refused():
    with pytest.raises(DomainError):
        plan_battery(parse_estimators("ML:pthin,SLS:none"))


@pytest.mark.parametrize("horizons", [(0.25,), (50.0, 0.4)])
def test_horizons_without_fourier_frequencies_are_rejected(horizons):
    with pytest.raises(ConfigError):
        ExperimentConfig(horizons=horizons)
