import csv
import io
import json

import numpy as np
import pytest

from mixbayes.datasets import DatasetSpec
from mixbayes.harness import (
    ConfigurationError,
    ExperimentConfig,
    MethodReport,
    MetricsReport,
    mean_relative_mse,
    noise_sigma,
    relative_mse,
    run_experiment,
    table_configs,
    tune,
)


def _tiny(variant="gmm", **kw):
    if variant == "gmm":
        spec = DatasetSpec("gmm", n=16, s=2, L=3, n_train=150, n_test=30, seed=1)
    else:
        spec = DatasetSpec(variant, n=32, jumps=3, n_train=150, n_test=30, seed=1)
    base = dict(tune_size=40, solver_iters=100, dict_epochs=2, supervised_epochs=2, random_repeats=2)
    base.update(kw)
    return ExperimentConfig(spec, **base)


def test_noise_sigma_rule():
    X = np.array([[0.0, 1.0, 3.0], [1.0, 1.0, -1.0]])
    assert noise_sigma(X) == pytest.approx(0.3)
    assert noise_sigma(X, 5.0) == pytest.approx(0.15)
    with pytest.raises(ConfigurationError):
        noise_sigma(np.ones((3, 4)))


def test_relative_mse_examples():
    x = np.array([[3.0, 4.0], [1.0, 0.0]])
    np.testing.assert_allclose(relative_mse(x, x), 0.0)
    np.testing.assert_allclose(relative_mse(x, np.zeros_like(x)), 1.0)
    np.testing.assert_allclose(relative_mse(x, 2 * x), 1.0)
    assert mean_relative_mse(x[0], x[0] * 1.1) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        relative_mse(np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        relative_mse(np.ones(2), np.ones(3))


def test_tune_singleton_and_dominance():
    X = np.ones((3, 2))
    Y = X.copy()
    assert tune(lambda v, Y: Y * v, (X, Y), [0.5]).best == 0.5
    # error |1 - v| is minimized at v = 1
    res = tune(lambda v, Y: Y * v, (X, Y), [0.1, 1.0, 3.0])
    assert res.best == 1.0
    assert dict(res.scores)[1.0] == 0.0


def test_tune_ties_pick_smallest_value():
    X = np.ones((2, 2))
    assert tune(lambda v, Y: Y, (X, X), [3.0, 1.0, 2.0]).best == 1.0


def test_tune_refinement_evaluates_neighbours():
    X = np.ones((2, 2))
    res = tune(lambda v, Y: Y * (1 + (np.log10(v) - 0.3) ** 2), (X, X), [0.1, 1.0, 10.0], refine=True)
    assert len(res.scores) == 7
    assert res.best == pytest.approx(10 ** (1 / 3))


def test_tune_survives_failing_values():
    X = np.ones((2, 2))

    def recon(v, Y):
        if v > 1:
            raise FloatingPointError("diverged")
        return Y * v

    assert tune(recon, (X, X), [0.5, 2.0]).best == 0.5
    with pytest.raises(FloatingPointError):
        tune(lambda v, Y: Y * np.nan, (X, X), [1.0])


def test_config_validation():
    spec = DatasetSpec("gmm", n=8, s=2, L=2)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(spec, methods=())
    with pytest.raises(ConfigurationError):
        ExperimentConfig(spec, methods=("Z",))
    with pytest.raises(ConfigurationError):
        ExperimentConfig(spec, problem="deblurring")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(spec, lambda_grid=())
    cfg = ExperimentConfig(spec, methods=["B", "C"])
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_run_experiment_unsupervised_smoke(tmp_path):
    report = run_experiment(_tiny(methods=("B", "true")), tmp_path)
    assert report.ok
    b = report.methods["B"]
    assert len(b.per_signal_percent) == 30 and b.mean_percent > 0
    # the learned estimator cannot beat the true-parameter one by much
    assert b.mean_percent >= 0.8 * report.methods["true"].mean_percent
    for name in ("results.json", "timings.json", "summary.csv", "mse_bar.svg", "reconstructions.svg"):
        assert (tmp_path / name).exists()
    data = json.loads((tmp_path / "results.json").read_text())
    assert "timings" not in data and data["methods"]["B"]["status"] == "ok"


def test_results_json_is_deterministic(tmp_path):
    cfg = _tiny(methods=("B", "E"))
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "results.json").read_bytes() == (tmp_path / "b" / "results.json").read_bytes()


def test_random_clustering_is_worse_than_learned():
    report = run_experiment(_tiny(methods=("B", "random")))
    assert report.methods["random"].mean_percent > report.methods["B"].mean_percent
    assert len(report.methods["random"].diagnostics["repeat_means_percent"]) == 2


def test_failed_method_does_not_stop_others():
    # a dataset without a generating mixture cannot run the true-parameter estimator
    report = run_experiment(_tiny("sinusoid", methods=("true", "B")))
    assert report.methods["true"].status == "failed"
    assert report.methods["B"].status == "ok"
    assert not report.ok


def test_every_method_runs_on_tiny_problem():
    report = run_experiment(_tiny(methods=tuple("ABCDEFGHIJ")))
    failed = {k: r.diagnostics for k, r in report.methods.items() if r.status != "ok"}
    assert not failed


def test_deblurring_prior_beats_baseline():
    cfg = _tiny("sinusoid", problem="deblurring", sigma_b=1.0, methods=("B", "H"))
    report = run_experiment(cfg)
    assert report.ok
    assert report.methods["B"].mean_percent <= report.methods["H"].mean_percent


def test_summary_csv_quotes_names():
    rep = MetricsReport({}, 1.0, {"x": MethodReport("x", "a, b", "ok", 1.5, 0.1)})
    rows = list(csv.reader(io.StringIO(rep.summary_csv())))
    assert rows[1][:3] == ["x", "a, b", "ok"]
    assert float(rows[1][3]) == 1.5


def test_table_configs():
    cfgs = table_configs(3, "mini")
    assert [c.problem for c in cfgs] == ["deblurring"] * 3
    assert cfgs[0].sigma_b == 1.0
    assert cfgs[1].sigma_b == pytest.approx(30.0 * 128 / 1000)
    assert table_configs(2, "mini")[0].methods == ("exact", "B", "random")
    paper = table_configs(1, "paper")
    assert paper[0].dataset.n == 1000 and paper[2].dataset.n_components == 55
    with pytest.raises(ConfigurationError):
        table_configs(4)
    with pytest.raises(ConfigurationError):
        table_configs(1, "huge")
