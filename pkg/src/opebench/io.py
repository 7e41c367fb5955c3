"""Dataset ingestion and result emission.

CSV schemas:

- logged feedback: header ``f0..f{d-1},action,reward[,propensity]``.
- classification data: header ``f0..f{d-1},label``.
- candidate policy (realworld mode): header ``f-match-key,p0..p{A-1}``, one
  row per context row of every dataset, keyed ``"<dataset>:<row>"``.
- ``squared_errors.csv``: one record per (estimator, seed).
- ``summary.csv``: per-estimator scores plus columns normalized by the best
  estimator for each score.

All writers are deterministic: floats are emitted with round-trip ``repr``,
so re-ingesting ``squared_errors.csv`` reconstructs identical summaries.
"""

import csv
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .datagen import ClassificationDataset
from .errors import DataError
from .feedback import ActionDistribution, LoggedBanditFeedback, validate_feedback
from .metrics import au_cdf, cvar, mean_score, std_score
from .protocol import ResultSet, SeRecord

SQUARED_ERRORS_FILE = "squared_errors.csv"
SUMMARY_FILE = "summary.csv"


def _read_rows(path: str) -> tuple[List[str], List[List[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        return header, [row for row in reader if row]


def _feature_columns(header: Sequence[str], path: str) -> int:
    d = 0
    while d < len(header) and header[d] == f"f{d}":
        d += 1
    if d == 0:
        raise DataError(f"{path}: expected feature columns f0..f(d-1) first")
    return d


def _parse_float(value: str, path: str, row: int, col: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataError(f"{path}: row {row}, column {col}: bad value {value!r}")


def load_feedback_csv(
    path: str,
    n_actions: Optional[int] = None,
    r_max: Optional[float] = None,
    require_propensities: bool = False,
) -> LoggedBanditFeedback:
    """Load logged bandit feedback, inferring n_actions/r_max when omitted."""
    header, rows = _read_rows(path)
    d = _feature_columns(header, path)
    tail = header[d:]
    if tail[:2] != ["action", "reward"]:
        raise DataError(
            f"{path}: expected columns action,reward after features, got {tail[:2]}"
        )
    has_prop = len(tail) > 2 and tail[2] == "propensity"
    if require_propensities and not has_prop:
        raise DataError(f"{path}: propensity column required but missing")
    if not rows:
        raise DataError(f"{path}: no data rows")

    n = len(rows)
    contexts = np.empty((n, d))
    actions = np.empty(n, dtype=int)
    rewards = np.empty(n)
    props = np.empty(n) if has_prop else None
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}"
            )
        for j in range(d):
            contexts[i, j] = _parse_float(row[j], path, i + 1, f"f{j}")
        actions[i] = int(_parse_float(row[d], path, i + 1, "action"))
        rewards[i] = _parse_float(row[d + 1], path, i + 1, "reward")
        if has_prop:
            props[i] = _parse_float(row[d + 2], path, i + 1, "propensity")

    if n_actions is None:
        n_actions = int(actions.max()) + 1
    if r_max is None:
        r_max = 1.0 if rewards.max() <= 1.0 else float(rewards.max())
    fb = LoggedBanditFeedback(
        contexts=contexts,
        actions=actions,
        rewards=rewards,
        n_actions=n_actions,
        r_max=r_max,
        propensities=props,
    )
    validate_feedback(fb)
    return fb


def load_classification_csv(path: str) -> ClassificationDataset:
    """Load a labeled dataset: float features f0..f(d-1), integer label last."""
    header, rows = _read_rows(path)
    d = _feature_columns(header, path)
    if header[d:] != ["label"]:
        raise DataError(f"{path}: expected a single 'label' column after features")
    if not rows:
        raise DataError(f"{path}: no data rows")
    n = len(rows)
    features = np.empty((n, d))
    labels = np.empty(n, dtype=int)
    for i, row in enumerate(rows):
        if len(row) != d + 1:
            raise DataError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {d + 1}"
            )
        for j in range(d):
            features[i, j] = _parse_float(row[j], path, i + 1, f"f{j}")
        labels[i] = int(_parse_float(row[d], path, i + 1, "label"))
    return ClassificationDataset(
        features=features, labels=labels, n_classes=int(labels.max()) + 1
    )


def load_policy_csv(
    path: str, expected_rows: Mapping[str, int]
) -> Dict[str, ActionDistribution]:
    """Load one policy's action distributions, keyed by dataset name.

    Every dataset in `expected_rows` must be fully covered by rows keyed
    ``"<dataset>:<row_index>"``.
    """
    header, rows = _read_rows(path)
    if not header or header[0] != "f-match-key":
        raise DataError(f"{path}: first column must be f-match-key")
    n_actions = len(header) - 1
    if n_actions < 1 or any(
        header[1 + a] != f"p{a}" for a in range(n_actions)
    ):
        raise DataError(f"{path}: expected probability columns p0..p(A-1)")

    by_dataset: Dict[str, Dict[int, np.ndarray]] = {k: {} for k in expected_rows}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}"
            )
        key = row[0]
        if ":" not in key:
            raise DataError(f"{path}: row {i + 1}: malformed match key {key!r}")
        ds, _, idx_str = key.rpartition(":")
        if ds not in by_dataset:
            continue  # rows for datasets outside this run are ignored
        idx = int(idx_str)
        probs = np.array(
            [_parse_float(v, path, i + 1, f"p{a}") for a, v in enumerate(row[1:])]
        )
        by_dataset[ds][idx] = probs

    out = {}
    for ds, n in expected_rows.items():
        entries = by_dataset[ds]
        missing = [i for i in range(n) if i not in entries]
        if missing:
            raise DataError(
                f"{path}: missing distribution for {ds}:{missing[0]} "
                f"({len(missing)} rows total)"
            )
        matrix = np.stack([entries[i] for i in range(n)])
        out[ds] = ActionDistribution.from_matrix(matrix)
    return out


# ---------------------------------------------------------------------------
# Summaries and result files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryScores:
    """Distributional scores for one estimator's squared-error sample."""

    mean: float
    au_cdf: float
    cvar: float
    std: float
    n_flagged: int = 0


def pooled_z_max(results: ResultSet) -> float:
    """Default AU-CDF cutoff: 99th percentile of all finite squared errors."""
    pooled = np.concatenate(
        [results.squared_errors(name) for name in results.estimator_names()]
    )
    finite = pooled[np.isfinite(pooled)]
    if finite.size == 0:
        return 1.0
    z = float(np.percentile(finite, 99))
    return z if z > 0 else 1.0


def summarize(
    results: ResultSet,
    z_max: Optional[float] = None,
    cvar_alpha: float = 0.7,
    drop_flagged: bool = False,
) -> tuple[Dict[str, SummaryScores], float]:
    """Per-estimator summary scores; returns them with the z_max used."""
    if z_max is None:
        z_max = pooled_z_max(results)
    scores = {}
    for name in results.estimator_names():
        z = results.squared_errors(name, include_flagged=not drop_flagged)
        if z.size == 0:
            raise DataError(f"estimator {name!r} has no records left to score")
        scores[name] = SummaryScores(
            mean=mean_score(z),
            au_cdf=au_cdf(z, z_max),
            cvar=cvar(z, cvar_alpha),
            std=std_score(z),
            n_flagged=results.n_flagged(name),
        )
    return scores, z_max


def _normalize(value: float, best: float, higher_is_better: bool) -> float:
    if best == 0:
        return 1.0 if value == 0 else math.inf
    if math.isinf(best):
        # Every estimator failed (or saturated); ratios are uninformative.
        return 1.0 if math.isinf(value) else 0.0
    return value / best


def export_results(
    results: ResultSet,
    scores: Mapping[str, SummaryScores],
    out_dir: str,
) -> None:
    """Write squared_errors.csv and summary.csv into `out_dir`."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, SQUARED_ERRORS_FILE), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["estimator", "seed", "policy_id", "theta_digest", "squared_error",
             "flagged"]
        )
        for r in results.records:
            writer.writerow(
                [r.estimator, r.seed, r.policy_id, r.theta_digest,
                 repr(r.squared_error), "true" if r.flagged else "false"]
            )

    names = list(scores)
    best = {
        "mean": min(scores[n].mean for n in names),
        "au_cdf": max(scores[n].au_cdf for n in names),
        "cvar": min(scores[n].cvar for n in names),
        "std": min(scores[n].std for n in names),
    }
    with open(os.path.join(out_dir, SUMMARY_FILE), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["estimator", "mean", "au_cdf", "cvar", "std",
             "mean_rel", "au_cdf_rel", "cvar_rel", "std_rel", "n_flagged"]
        )
        for n in names:
            s = scores[n]
            writer.writerow(
                [
                    n,
                    repr(s.mean),
                    repr(s.au_cdf),
                    repr(s.cvar),
                    repr(s.std),
                    repr(_normalize(s.mean, best["mean"], False)),
                    repr(_normalize(s.au_cdf, best["au_cdf"], True)),
                    repr(_normalize(s.cvar, best["cvar"], False)),
                    repr(_normalize(s.std, best["std"], False)),
                    s.n_flagged,
                ]
            )


def load_squared_errors_csv(path: str) -> ResultSet:
    """Re-ingest an exported squared_errors.csv into a ResultSet."""
    header, rows = _read_rows(path)
    expected = ["estimator", "seed", "policy_id", "theta_digest", "squared_error",
                "flagged"]
    if header != expected:
        raise DataError(f"{path}: unexpected header {header}")
    records = []
    for i, row in enumerate(rows):
        if len(row) != len(expected):
            raise DataError(f"{path}: row {i + 1} has {len(row)} fields")
        records.append(
            SeRecord(
                estimator=row[0],
                seed=int(row[1]),
                policy_id=row[2],
                theta_digest=row[3],
                squared_error=float(row[4]),
                flagged=row[5] == "true",
            )
        )
    if not records:
        raise DataError(f"{path}: no records")
    return ResultSet(records=records)
