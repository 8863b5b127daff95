import json
import math

import pytest

from utils.config_manager import SEED_ENV
from utils.errors import NonConvergence
from utils.experiment_manager import ExperimentManager, ld_status

SMALL_CONFIG = """\
run:
  seed: 77
  n_samples: 5000
  batch_size: 1000

experiments:
  dom:
    kind: domination
    distributions:
      - kind: exponential
        k: 1
    m_grid: [10]
    t_grid:
      relative_to_t_max: [0.5, 2]
      points: 3
  below_boundary:
    kind: ld_ratio
    distribution: {kind: weibull, alpha: 2, c_alpha: 1}
    sequence: {a: 1, p: 0.5}
    m_grid: [100, 200]
  slow_growth:
    kind: ld_poly
    distribution: {kind: pareto, gamma: 3}
    sequence: {a: 1, p: 0.5}
    m_grid: [100, 200]
"""


@pytest.fixture
def config_path(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_CONFIG)
    return path


def test_run_config(config_path, tmp_path):
    out = tmp_path / "results"
    result = ExperimentManager().run_config(config_path, output_dir=out)
    assert result["success"]
    assert result["failed"] is None
    assert result["seed"] == 77
    statuses = {r["name"]: r["status"] for r in result["experiments"]}
    assert statuses == {"dom": "passed", "below_boundary": "skipped", "slow_growth": "skipped"}

    manifest = json.loads((out / "dom.json").read_text())
    assert manifest["seed"] == 77
    assert manifest["m_grid"] == [10]
    assert manifest["failed_cells"] == 0
    assert "numpy" in manifest["versions"]
    header = (out / "dom.csv").read_text().splitlines()[0]
    assert header.startswith("distribution,m,t,p_hat")


def test_csv_is_reproducible(config_path, tmp_path):
    manager = ExperimentManager()
    manager.run_config(config_path, output_dir=tmp_path / "a")
    manager.run_config(config_path, output_dir=tmp_path / "b")
    assert (tmp_path / "a" / "dom.csv").read_bytes() == (tmp_path / "b" / "dom.csv").read_bytes()


def test_skip_reasons(config_path, tmp_path):
    result = ExperimentManager().run_config(config_path, output_dir=tmp_path)
    reasons = {r["name"]: r.get("reason", "") for r in result["experiments"]}
    assert "BelowBoundary" in reasons["below_boundary"]
    assert "sqrt(m log m)" in reasons["slow_growth"]


def test_config_error(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("experiments: {}\n")
    result = ExperimentManager().run_config(path)
    assert not result["success"]
    assert result["error"].startswith("ConfigError")


def test_numerical_error_is_reported(config_path, tmp_path, monkeypatch):
    manager = ExperimentManager()

    def fail(spec, run, out_dir):
        raise NonConvergence("quadrature stalled")

    monkeypatch.setattr(manager, "_run_domination", fail)
    result = manager.run_config(config_path, output_dir=tmp_path)
    assert not result["success"]
    assert result["failed"] == "dom"
    first = result["experiments"][0]
    assert first["status"] == "error"
    assert first["error"] == "NonConvergence: quadrature stalled"
    # later experiments still ran
    assert len(result["experiments"]) == 3


def test_sigma_grid_with_distribution_beta(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    text = SMALL_CONFIG.replace(
        "        k: 1\n    m_grid: [10]\n    t_grid:\n      relative_to_t_max: [0.5, 2]\n      points: 3\n",
        "        k: 1\n        beta: 0.5\n    m_grid: [10]\n    t_grid:\n      sigma_multiple: 0.5\n      points: 4\n")
    path = tmp_path / "sigma.yaml"
    path.write_text(text)
    out = tmp_path / "results"
    ExperimentManager().run_config(path, output_dir=out)

    manifest = json.loads((out / "dom.json").read_text())
    assert manifest["t_grid"] == {"sigma_multiple": 0.5, "t_max_multiple": 2.0, "points": 4}
    assert manifest["distributions"][0]["beta"] == 0.5
    rows = (out / "dom.csv").read_text().splitlines()[1:]
    assert len(rows) == 4


class TestLdStatus:
    def test_gate_mode_follows_the_trend(self):
        assert ld_status(True, [0.3, 0.4])
        assert not ld_status(False, [0.3, 0.28, 0.33])

    def test_report_mode_records_a_broken_trend(self):
        assert ld_status(False, [0.287, 0.272, 0.327], "report")

    @pytest.mark.parametrize("ratios", [[], [0.3, math.inf], [0.3, math.nan], [0.0]])
    def test_needs_finite_measured_ratios(self, ratios):
        assert not ld_status(True, ratios, "report")


def test_unknown_trend_mode(tmp_path, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    path = tmp_path / "bad_trend.yaml"
    path.write_text(SMALL_CONFIG.replace("    m_grid: [100, 200]\n  slow_growth:",
                                         "    m_grid: [100, 200]\n    trend: maybe\n  slow_growth:"))
    result = ExperimentManager().run_config(path, output_dir=tmp_path)
    assert not result["success"]
    assert "experiments.below_boundary.trend" in result["error"]
