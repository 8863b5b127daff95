import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError, DomainError
from .large_deviation import DeviationSequence
from .montecarlo import DEFAULT_CONFIDENCE, MonteCarloConfig, TSpan
from .tail_model import ReferenceDistribution, TailFunction, load_tabulated_csv, matched_tail

SEED_ENV = "HEAVYTAIL_SEED"
EXPERIMENT_KINDS = ("domination", "ld_ratio", "ld_poly")
C_METHODS = ("exact", "ratio", "closed")
TREND_MODES = ("gate", "report")
CSV_FLOAT_FORMAT = "%.17g"


@dataclass
class RunSettings:
    seed: int = 0
    output_dir: str = "results"
    n_samples: int = 1_000_000
    batch_size: int = 100_000
    confidence: float = DEFAULT_CONFIDENCE
    workers: int = 1
    seed_source: str = "config"

    def mc_config(self, overrides=None) -> MonteCarloConfig:
        overrides = overrides or {}
        n = int(overrides.get("n_samples", self.n_samples))
        return MonteCarloConfig(
            n_samples=n,
            seed=self.seed,
            batch_size=min(int(overrides.get("batch_size", self.batch_size)), n),
            confidence=float(overrides.get("confidence", self.confidence)),
            workers=int(overrides.get("workers", self.workers)),
        )


@dataclass
class ExperimentSpec:
    name: str
    kind: str
    params: dict
    line: int = None


@dataclass
class ExperimentConfig:
    run: RunSettings
    experiments: list = field(default_factory=list)
    source: str = None


def _line_index(node, prefix="", index=None):
    """Map dotted key paths of a composed YAML tree to 1-based line numbers."""
    if index is None:
        index = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            index[path] = key_node.start_mark.line + 1
            _line_index(value_node, path, index)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            path = f"{prefix}[{i}]"
            index[path] = item.start_mark.line + 1
            _line_index(item, path, index)
    return index


class ConfigManager:
    """Reads experiment configs and writes CSV/JSON outputs."""

    def load_experiment_config(self, config_path) -> ExperimentConfig:
        """Parse and validate an experiment YAML file.

        Raises:
            ConfigError: with the offending line and field where known.
        """
        config_path = Path(config_path)
        try:
            text = config_path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read {config_path}: {e}")

        try:
            data = yaml.safe_load(text)
            lines = _line_index(yaml.compose(text)) if data else {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(str(getattr(e, "problem", None) or e),
                              line=mark.line + 1 if mark else None)

        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping with 'run' and 'experiments'", line=1)

        run = self._parse_run(data.get("run") or {}, lines)
        experiments_raw = data.get("experiments")
        if not isinstance(experiments_raw, dict) or not experiments_raw:
            raise ConfigError("at least one experiment is required", line=lines.get("experiments"),
                              field="experiments")

        experiments = []
        for name, params in experiments_raw.items():
            path = f"experiments.{name}"
            if not isinstance(params, dict):
                raise ConfigError("experiment must be a mapping", line=lines.get(path), field=path)
            kind = params.get("kind")
            if kind not in EXPERIMENT_KINDS:
                raise ConfigError(f"kind must be one of {', '.join(EXPERIMENT_KINDS)}, got {kind!r}",
                                  line=lines.get(f"{path}.kind", lines.get(path)), field=f"{path}.kind")
            spec = ExperimentSpec(name=str(name), kind=kind, params=params, line=lines.get(path))
            self._validate_experiment(spec, lines)
            experiments.append(spec)
        return ExperimentConfig(run=run, experiments=experiments, source=str(config_path))

    def _parse_run(self, raw, lines):
        if not isinstance(raw, dict):
            raise ConfigError("'run' must be a mapping", line=lines.get("run"), field="run")
        run = RunSettings()
        for key in ("seed", "n_samples", "batch_size", "workers"):
            if key in raw:
                setattr(run, key, self._as_int(raw[key], f"run.{key}", lines))
        if "confidence" in raw:
            run.confidence = self._as_float(raw["confidence"], "run.confidence", lines)
        if "output_dir" in raw:
            run.output_dir = str(raw["output_dir"])

        env_seed = os.environ.get(SEED_ENV)
        if env_seed:
            try:
                run.seed = int(env_seed)
            except ValueError:
                raise ConfigError(f"{SEED_ENV}={env_seed!r} is not an integer", field=SEED_ENV)
            run.seed_source = SEED_ENV
        return run

    def _validate_experiment(self, spec, lines):
        prefix = f"experiments.{spec.name}"
        p = spec.params

        def need(key):
            if key not in p:
                raise ConfigError(f"missing required field '{key}'", line=spec.line, field=f"{prefix}.{key}")
            return p[key]

        m_grid = need("m_grid")
        if not isinstance(m_grid, list) or not m_grid:
            raise ConfigError("m_grid must be a non-empty list", line=lines.get(f"{prefix}.m_grid"),
                              field=f"{prefix}.m_grid")
        for i, m in enumerate(m_grid):
            self._as_int(m, f"{prefix}.m_grid[{i}]", lines)

        if spec.kind == "domination":
            dists = need("distributions")
            if not isinstance(dists, list) or not dists:
                raise ConfigError("distributions must be a non-empty list",
                                  line=lines.get(f"{prefix}.distributions"), field=f"{prefix}.distributions")
            for i, d in enumerate(dists):
                self._field_guard(lambda: self.build_distribution(d), f"{prefix}.distributions[{i}]", lines)
                if isinstance(d, dict) and "beta" in d:
                    self._check_beta(d["beta"], f"{prefix}.distributions[{i}].beta", lines)
            self._t_grid(need("t_grid"), f"{prefix}.t_grid", lines)
            method = p.get("c_method", "exact")
            if method not in C_METHODS:
                raise ConfigError(f"c_method must be one of {', '.join(C_METHODS)}",
                                  line=lines.get(f"{prefix}.c_method"), field=f"{prefix}.c_method")
        else:
            self._field_guard(lambda: self.build_distribution(need("distribution")),
                              f"{prefix}.distribution", lines)
            self._field_guard(lambda: self.build_sequence(need("sequence")), f"{prefix}.sequence", lines)
            if p.get("trend", "gate") not in TREND_MODES:
                raise ConfigError(f"trend must be one of {', '.join(TREND_MODES)}",
                                  line=lines.get(f"{prefix}.trend"), field=f"{prefix}.trend")
        if "tail" in p:
            self._field_guard(lambda: self.build_tail(p["tail"]), f"{prefix}.tail", lines)
        if "beta" in p:
            self._check_beta(p["beta"], f"{prefix}.beta", lines)

    def _check_beta(self, value, path, lines):
        beta = self._as_float(value, path, lines)
        if not 0 < beta <= 1:
            raise ConfigError("beta must lie in (0, 1]", line=lines.get(path), field=path)

    def _field_guard(self, build, path, lines):
        try:
            return build()
        except (DomainError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(str(e), line=lines.get(path), field=path)

    @staticmethod
    def _as_int(value, path, lines):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", line=lines.get(path), field=path)
        return int(value)

    @staticmethod
    def _as_float(value, path, lines):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", line=lines.get(path), field=path)
        return float(value)

    def _t_grid(self, raw, path, lines):
        """Returns (grid, relative_to_t_max); grid is a list of t values or a TSpan."""
        if isinstance(raw, list):
            return [self._as_float(v, f"{path}[{i}]", lines) for i, v in enumerate(raw)], False
        if isinstance(raw, dict) and "relative_to_t_max" in raw:
            span = raw["relative_to_t_max"]
            points = self._as_int(raw.get("points", 8), f"{path}.points", lines)
            if not (isinstance(span, list) and len(span) == 2 and 0 < span[0] < span[1]) or points < 2:
                raise ConfigError("relative_to_t_max needs [lo, hi] with 0 < lo < hi and points >= 2",
                                  line=lines.get(path), field=path)
            lo, hi = float(span[0]), float(span[1])
            return [lo * (hi / lo) ** (i / (points - 1)) for i in range(points)], True
        if isinstance(raw, dict) and "sigma_multiple" in raw:
            lo = self._as_float(raw["sigma_multiple"], f"{path}.sigma_multiple", lines)
            hi = self._as_float(raw.get("t_max_multiple", 2.0), f"{path}.t_max_multiple", lines)
            points = self._as_int(raw.get("points", 8), f"{path}.points", lines)
            if lo <= 0 or hi <= 0 or points < 2:
                raise ConfigError("sigma_multiple and t_max_multiple must be > 0 and points >= 2",
                                  line=lines.get(path), field=path)
            return TSpan(lo, hi, points), False
        raise ConfigError("t_grid must be a list, {relative_to_t_max: [lo, hi], points: n} "
                          "or {sigma_multiple: a, t_max_multiple: b, points: n}",
                          line=lines.get(path), field=path)

    def t_grid(self, spec: ExperimentSpec):
        return self._t_grid(spec.params["t_grid"], f"experiments.{spec.name}.t_grid", {})

    @staticmethod
    def build_distribution(raw) -> ReferenceDistribution:
        kind = str(raw["kind"]).lower()
        if kind == "exponential":
            return ReferenceDistribution.exponential(raw["k"])
        if kind == "weibull":
            return ReferenceDistribution.weibull(raw["alpha"], raw["c_alpha"])
        if kind == "pareto":
            return ReferenceDistribution.pareto(raw["gamma"])
        raise ValueError(f"unknown distribution kind {raw['kind']!r}")

    @staticmethod
    def build_tail(raw) -> TailFunction:
        family = str(raw["family"]).lower()
        if family in ("subexp", "subexponential"):
            return TailFunction.sub_exponential(raw["k"])
        if family in ("subweibull",):
            return TailFunction.sub_weibull(raw["alpha"], raw["c_alpha"])
        if family == "polynomial":
            return TailFunction.polynomial(raw["gamma"])
        if family == "tabulated":
            return load_tabulated_csv(raw["path"])
        raise ValueError(f"unknown tail family {raw['family']!r}")

    @staticmethod
    def build_sequence(raw) -> DeviationSequence:
        return DeviationSequence(a=float(raw["a"]), p=float(raw["p"]), q=float(raw.get("q", 0.0)))

    def tail_for(self, spec: ExperimentSpec, d: ReferenceDistribution) -> TailFunction:
        if "tail" in spec.params:
            return self.build_tail(spec.params["tail"])
        return matched_tail(d)

    def write_csv(self, frame, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        return path

    def write_json(self, data, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(to_jsonable(data), f, indent=2)
            f.write("\n")
        return path


def to_jsonable(value):
    """Replace non-finite floats with None and tuples with lists, recursively."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return to_jsonable(value.item())
    return value
