"""Experiment configuration: YAML schema, validation, and defaults.

A config file names a data mode (synthetic, classification, or realworld),
the seed range, the estimators with their candidate grids, the model
hyperparameter spaces, the evaluation policies, and output options. See
``examples/config_*.yaml`` in the repository for annotated examples.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import yaml

from .errors import ConfigError
from .models import (
    BOOSTED_TREES,
    DEFAULT_MODEL_SPACES,
    LOGISTIC,
    MODEL_FAMILIES,
    HyperparamRange,
)
from .tuning import DEFAULT_CANDIDATE_GRID

MODES = ("synthetic", "classification", "realworld")
ESTIMATOR_NAMES = ("dm", "ipw_ps", "snipw", "dr_ps", "sndr", "switch_dr", "dr_os",
                   "oracle")
MODEL_BASED_NAMES = ("dm", "dr_ps", "sndr", "switch_dr", "dr_os")
SHRINK_NAMES = ("ipw_ps", "dr_ps", "switch_dr", "dr_os")

DEFAULT_K_GRID = (1, 2, 3, 4, 5)
DEFAULT_CVAR_ALPHA = 0.7
DEFAULT_DELTA = 0.05
OUT_DIR_ENV_VAR = "OPEBENCH_OUT_DIR"


@dataclass
class EstimatorConfig:
    kind: str
    name: str
    shrink_grid: Optional[Tuple[float, ...]] = None
    k_grid: Tuple[int, ...] = DEFAULT_K_GRID
    families: Optional[Tuple[str, ...]] = None  # None => pick by reward kind


@dataclass
class PolicyConfig:
    family: str  # "logistic" | "boosted_trees" | "uniform" | "greedy"
    alpha: float
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"{self.family}_a{self.alpha:g}"


@dataclass
class OutputConfig:
    directory: Optional[str] = None  # None => $OPEBENCH_OUT_DIR, else "results"
    z_max: Optional[float] = None  # None => 99th percentile of pooled errors
    cvar_alpha: float = DEFAULT_CVAR_ALPHA
    drop_flagged: bool = False


def resolve_out_dir(explicit: Optional[str], configured: Optional[str]) -> str:
    """Output directory precedence: flag, config, environment, 'results'."""
    return explicit or configured or os.environ.get(OUT_DIR_ENV_VAR) or "results"


@dataclass
class BehaviorModelFileConfig:
    families: Tuple[str, ...] = (LOGISTIC, BOOSTED_TREES)
    calibration: Optional[str] = "temperature"
    holdout_fraction: float = 0.5
    params: Dict[str, Dict[str, float]] = field(default_factory=dict)


@dataclass
class RealworldDatasetConfig:
    name: str
    feedback_csv: str
    policy_csv: str


@dataclass
class ExperimentConfig:
    mode: str
    seeds: Tuple[int, ...]
    estimators: List[EstimatorConfig]
    outputs: OutputConfig
    sampler: str = "uniform"
    delta: float = DEFAULT_DELTA
    bootstrap_size: Optional[int] = None
    workers: int = 1
    propensities: str = "true"  # "true" | "estimated"
    behavior_model: Optional[BehaviorModelFileConfig] = None
    model_space: Dict[str, Dict[str, HyperparamRange]] = field(default_factory=dict)
    # classification / synthetic
    policies: List[PolicyConfig] = field(default_factory=list)
    behavior_policy: Optional[PolicyConfig] = None
    data: Dict = field(default_factory=dict)
    # realworld
    datasets: List[RealworldDatasetConfig] = field(default_factory=list)


def _parse_number(value, label: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity", ".inf"):
            return math.inf
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{label}: cannot parse {value!r} as a number")
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"{label}: expected a number, got {type(value).__name__}")


def _parse_range(raw: dict, label: str) -> HyperparamRange:
    if not isinstance(raw, dict):
        raise ConfigError(f"{label}: expected a mapping")
    if "choices" in raw:
        return HyperparamRange(choices=tuple(raw["choices"]))
    try:
        return HyperparamRange(
            lower=_parse_number(raw["lower"], f"{label}.lower"),
            upper=_parse_number(raw["upper"], f"{label}.upper"),
            log_scale=bool(raw.get("log", False)),
            integer=bool(raw.get("integer", False)),
        )
    except KeyError as exc:
        raise ConfigError(f"{label}: missing {exc.args[0]!r}")
    except ValueError as exc:
        raise ConfigError(f"{label}: {exc}")


def _parse_model_space(raw: dict) -> Dict[str, Dict[str, HyperparamRange]]:
    spaces = {}
    for family, params in raw.items():
        if family not in MODEL_FAMILIES:
            raise ConfigError(f"model_space: unknown family {family!r}")
        spaces[family] = {
            name: _parse_range(r, f"model_space.{family}.{name}")
            for name, r in params.items()
        }
    return spaces


def _parse_estimator(raw: dict, index: int) -> EstimatorConfig:
    if not isinstance(raw, dict) or "name" not in raw and "kind" not in raw:
        raise ConfigError(f"estimators[{index}]: expected a mapping with a name")
    kind = raw.get("kind", raw.get("name"))
    if kind not in ESTIMATOR_NAMES:
        raise ConfigError(f"estimators[{index}]: unknown estimator {kind!r}")
    name = raw.get("name", kind)
    shrink = None
    if "shrink_grid" in raw:
        grid = [
            _parse_number(v, f"estimators[{index}].shrink_grid")
            for v in raw["shrink_grid"]
        ]
        if not grid:
            raise ConfigError(f"estimators[{index}].shrink_grid is empty")
        shrink = tuple(grid)
    elif kind in SHRINK_NAMES:
        shrink = DEFAULT_CANDIDATE_GRID
    k_grid = tuple(int(k) for k in raw.get("k_grid", DEFAULT_K_GRID))
    if not k_grid or any(k < 1 for k in k_grid):
        raise ConfigError(f"estimators[{index}].k_grid must hold integers >= 1")
    families = raw.get("families")
    if families is not None and families != "auto":
        families = tuple(families)
        for f in families:
            if f not in MODEL_FAMILIES:
                raise ConfigError(f"estimators[{index}]: unknown family {f!r}")
    elif families == "auto":
        families = None
    return EstimatorConfig(
        kind=kind, name=name, shrink_grid=shrink, k_grid=k_grid, families=families
    )


def _parse_policy(raw: dict, label: str) -> PolicyConfig:
    if not isinstance(raw, dict) or "family" not in raw:
        raise ConfigError(f"{label}: expected a mapping with a family")
    family = raw["family"]
    if family not in (LOGISTIC, BOOSTED_TREES, "uniform", "greedy"):
        raise ConfigError(f"{label}: unknown policy family {family!r}")
    alpha = _parse_number(raw.get("alpha", 0.0), f"{label}.alpha")
    if not 0 <= alpha <= 1:
        raise ConfigError(f"{label}: alpha must be in [0, 1], got {alpha}")
    if family == "uniform" and alpha != 0.0:
        raise ConfigError(f"{label}: the uniform policy requires alpha = 0")
    return PolicyConfig(family=family, alpha=alpha, params=dict(raw.get("params", {})))


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment configuration."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}" if mark else ""
            raise ConfigError(f"cannot parse {path}{where}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def parse_config(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")

    seeds_raw = raw.get("seeds", {})
    if not isinstance(seeds_raw, dict) or "count" not in seeds_raw:
        raise ConfigError("seeds: expected a mapping with start and count")
    start = int(seeds_raw.get("start", 0))
    count = int(seeds_raw["count"])
    if count < 1:
        raise ConfigError(f"seeds.count must be >= 1, got {count}")
    seeds = tuple(range(start, start + count))

    estimators_raw = raw.get("estimators")
    if not estimators_raw:
        raise ConfigError("estimators: at least one estimator is required")
    estimators = [_parse_estimator(e, i) for i, e in enumerate(estimators_raw)]
    names = [e.name for e in estimators]
    if len(set(names)) != len(names):
        raise ConfigError(f"estimator names are not unique: {names}")

    out_raw = raw.get("outputs", {}) or {}
    outputs = OutputConfig(
        directory=out_raw.get("directory"),
        z_max=None
        if out_raw.get("z_max") is None
        else _parse_number(out_raw["z_max"], "outputs.z_max"),
        cvar_alpha=float(out_raw.get("cvar_alpha", DEFAULT_CVAR_ALPHA)),
        drop_flagged=bool(out_raw.get("drop_flagged", False)),
    )
    if not 0 <= outputs.cvar_alpha < 1:
        raise ConfigError(
            f"outputs.cvar_alpha must be in [0, 1), got {outputs.cvar_alpha}"
        )
    if outputs.z_max is not None and not outputs.z_max > 0:
        raise ConfigError(f"outputs.z_max must be positive, got {outputs.z_max}")

    sampler = raw.get("sampler", "uniform")
    if sampler not in ("uniform", "tuned"):
        raise ConfigError(f"sampler must be 'uniform' or 'tuned', got {sampler!r}")
    delta = float(raw.get("delta", DEFAULT_DELTA))
    if not 0 < delta <= 1:
        raise ConfigError(f"delta must be in (0, 1], got {delta}")

    propensities = raw.get("propensities", "true")
    if isinstance(propensities, bool):
        propensities = "true" if propensities else "estimated"
    if propensities not in ("true", "estimated"):
        raise ConfigError(
            f"propensities must be 'true' or 'estimated', got {propensities!r}"
        )

    behavior_model = None
    if "behavior_model" in raw and raw["behavior_model"]:
        bm = raw["behavior_model"]
        families = tuple(bm.get("families", (LOGISTIC, BOOSTED_TREES)))
        for f in families:
            if f not in MODEL_FAMILIES:
                raise ConfigError(f"behavior_model: unknown family {f!r}")
        calibration = bm.get("calibration", "temperature")
        if calibration in (None, "none", "None"):
            calibration = None
        elif calibration != "temperature":
            raise ConfigError(
                f"behavior_model.calibration must be 'none' or 'temperature', "
                f"got {calibration!r}"
            )
        behavior_model = BehaviorModelFileConfig(
            families=families,
            calibration=calibration,
            holdout_fraction=float(bm.get("holdout_fraction", 0.5)),
            params={
                fam: dict(p) for fam, p in (bm.get("params") or {}).items()
            },
        )
    if propensities == "estimated" and behavior_model is None:
        behavior_model = BehaviorModelFileConfig()

    model_space = _parse_model_space(raw.get("model_space", {}) or {})

    data = dict(raw.get("data", {}) or {})
    policies: List[PolicyConfig] = []
    behavior_policy = None
    datasets: List[RealworldDatasetConfig] = []

    if mode in ("classification", "synthetic"):
        pol_raw = raw.get("policies")
        if not pol_raw:
            raise ConfigError(f"{mode} mode requires a nonempty policies list")
        policies = [
            _parse_policy(p, f"policies[{i}]") for i, p in enumerate(pol_raw)
        ]
    if mode == "classification":
        behavior_policy = _parse_policy(
            raw.get("behavior_policy", {"family": LOGISTIC, "alpha": 0.9}),
            "behavior_policy",
        )
        if "csv" in data:
            data["csv"] = _resolve(data["csv"], base_dir)
            if not os.path.exists(data["csv"]):
                raise ConfigError(f"data.csv not found: {data['csv']}")
        elif "synthetic_task" not in data:
            raise ConfigError(
                "classification mode needs data.csv or data.synthetic_task"
            )
    if mode == "realworld":
        ds_raw = raw.get("data", {}).get("datasets") or raw.get("datasets")
        if not ds_raw or len(ds_raw) < 2:
            raise ConfigError("realworld mode requires at least two datasets")
        for i, d in enumerate(ds_raw):
            for key in ("name", "feedback_csv", "policy_csv"):
                if key not in d:
                    raise ConfigError(f"datasets[{i}]: missing {key!r}")
            fcsv = _resolve(d["feedback_csv"], base_dir)
            pcsv = _resolve(d["policy_csv"], base_dir)
            for p in (fcsv, pcsv):
                if not os.path.exists(p):
                    raise ConfigError(f"datasets[{i}]: file not found: {p}")
            datasets.append(
                RealworldDatasetConfig(
                    name=str(d["name"]), feedback_csv=fcsv, policy_csv=pcsv
                )
            )

    return ExperimentConfig(
        mode=mode,
        seeds=seeds,
        estimators=estimators,
        outputs=outputs,
        sampler=sampler,
        delta=delta,
        bootstrap_size=None
        if raw.get("bootstrap_size") is None
        else int(raw["bootstrap_size"]),
        workers=int(raw.get("workers", 1)),
        propensities=propensities,
        behavior_model=behavior_model,
        model_space=model_space,
        policies=policies,
        behavior_policy=behavior_policy,
        data=data,
        datasets=datasets,
    )


def _resolve(path: str, base_dir: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def resolved_model_spaces(
    cfg: ExperimentConfig,
) -> Dict[str, Dict[str, HyperparamRange]]:
    """Default spaces with any per-family config overrides applied."""
    spaces = {fam: dict(params) for fam, params in DEFAULT_MODEL_SPACES.items()}
    for fam, params in cfg.model_space.items():
        spaces.setdefault(fam, {}).update(params)
    return spaces
