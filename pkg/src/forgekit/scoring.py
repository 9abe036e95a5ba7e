"""Rubric scoring and benchmark aggregation.

Scores have two independent axes. Accuracy is the mean of per-criterion
credits, where each criterion awards full (1.0), partial (0.5), or no
credit; methodology is a weighted average of 0-10 stage scores. The
combined score is the plain mean of the two axes.

Rubrics are data, not code: a rubric file declares criteria (kind plus
parameters) and weighted methodology stages, and a results file supplies
the observed values, judged verdicts, and stage scores. Judged criteria
consume externally supplied verdicts; this engine never invents one.

Aggregation follows the benchmark tables: arithmetic mean, sample (n-1)
standard deviation, and relative change in percent between tool-reuse and
zero-shot (negative = faster/cheaper).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .errors import ForgekitError

logger = logging.getLogger(__name__)

CRITERION_KINDS = (
    "tolerance_band",
    "exact_match",
    "mad_threshold",
    "range_check",
    "relative_error_band",
    "judged",
)

WEIGHT_SUM_TOLERANCE = 1e-9

RADAR_LO, RADAR_HI = 0.1, 0.9


class ScoringError(ForgekitError):
    pass


class TypeMismatchError(ScoringError):
    pass


class MissingVerdictError(ScoringError):
    pass


class WeightSumError(ScoringError):
    pass


class ZeroBaselineError(ScoringError):
    pass


@dataclass(frozen=True)
class Criterion:
    id: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in CRITERION_KINDS:
            raise ScoringError(f"{self.id}: unknown criterion kind {self.kind!r}")
        p = self.params
        if self.kind in ("tolerance_band", "relative_error_band"):
            full = p["full_tol"] if self.kind == "tolerance_band" else p["full_rel"]
            partial = p["partial_tol"] if self.kind == "tolerance_band" else p["partial_rel"]
            if full > partial:
                raise ScoringError(f"{self.id}: full threshold exceeds partial threshold")
            if self.kind == "relative_error_band" and p["ref"] == 0:
                raise ScoringError(f"{self.id}: relative band needs a nonzero reference")
        elif self.kind == "mad_threshold":
            if p["full_mad"] > p["partial_mad"]:
                raise ScoringError(f"{self.id}: full threshold exceeds partial threshold")
            if not p["refs"]:
                raise ScoringError(f"{self.id}: refs must be nonempty")
        elif self.kind == "range_check":
            if p["lo"] > p["hi"]:
                raise ScoringError(f"{self.id}: lo exceeds hi")


@dataclass(frozen=True)
class MethodologyStage:
    id: str
    description: str
    weight: float
    score: float = 0.0  # 0-10, supplied by the results file

    def __post_init__(self) -> None:
        if not 0 < self.weight <= 1:
            raise ScoringError(f"{self.id}: weight must be in (0, 1]")
        if not 0 <= self.score <= 10:
            raise ScoringError(f"{self.id}: stage score must be in [0, 10]")


@dataclass(frozen=True)
class RubricScore:
    accuracy: float
    methodology: float
    combined: float


@dataclass
class RunMetrics:
    task_id: str
    run_index: int
    time_minutes: float
    cost_usd: float
    iterations: int
    score: RubricScore


def _require_number(c: Criterion, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeMismatchError(f"{c.id}: expected a number, got {type(value).__name__}")
    return float(value)


def score_criterion(c: Criterion, observed: Any, verdicts: Optional[Mapping[str, bool]] = None) -> float:
    """Credit for one criterion: 1.0, 0.5, or 0.0.

    A missing observed value scores zero: a required quantity that was never
    produced cannot earn credit. Band kinds are monotone in the deviation.
    """
    if observed is None and c.kind != "judged":
        return 0.0
    p = c.params
    if c.kind == "tolerance_band":
        dev = abs(_require_number(c, observed) - p["ref"])
        return 1.0 if dev <= p["full_tol"] else 0.5 if dev <= p["partial_tol"] else 0.0
    if c.kind == "relative_error_band":
        dev = abs(_require_number(c, observed) - p["ref"]) / abs(p["ref"])
        return 1.0 if dev <= p["full_rel"] else 0.5 if dev <= p["partial_rel"] else 0.0
    if c.kind == "exact_match":
        if not isinstance(observed, str):
            raise TypeMismatchError(f"{c.id}: expected a string, got {type(observed).__name__}")
        ref = p["ref"]
        if p.get("case_sensitive", True):
            return 1.0 if observed == ref else 0.0
        return 1.0 if observed.lower() == ref.lower() else 0.0
    if c.kind == "mad_threshold":
        if not isinstance(observed, Sequence) or isinstance(observed, str):
            raise TypeMismatchError(f"{c.id}: expected a list of numbers")
        refs = p["refs"]
        if len(observed) != len(refs):
            raise TypeMismatchError(f"{c.id}: expected {len(refs)} values, got {len(observed)}")
        mad = sum(abs(float(o) - float(r)) for o, r in zip(observed, refs)) / len(refs)
        return 1.0 if mad <= p["full_mad"] else 0.5 if mad <= p["partial_mad"] else 0.0
    if c.kind == "range_check":
        v = _require_number(c, observed)
        return 1.0 if p["lo"] <= v <= p["hi"] else 0.0
    if c.kind == "judged":
        source = p.get("source", c.id)
        if verdicts is None or source not in verdicts:
            raise MissingVerdictError(f"{c.id}: no verdict supplied for {source!r}")
        return 1.0 if verdicts[source] else 0.0
    raise ScoringError(f"unreachable kind {c.kind!r}")


def score_accuracy(
    criteria: Sequence[Criterion],
    observed: Mapping[str, Any],
    verdicts: Optional[Mapping[str, bool]] = None,
) -> float:
    """Mean per-criterion credit, partial credits included."""
    if not criteria:
        raise ScoringError("criteria must be nonempty")
    total = sum(score_criterion(c, observed.get(c.id), verdicts) for c in criteria)
    return total / len(criteria)


def score_methodology(stages: Sequence[MethodologyStage]) -> float:
    """Weighted average of 0-10 stage scores, as a fraction of 10."""
    weight_sum = sum(s.weight for s in stages)
    if abs(weight_sum - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise WeightSumError(f"stage weights sum to {weight_sum}, expected 1")
    return sum(s.weight * (s.score / 10.0) for s in stages)


def combined(accuracy: float, methodology: float) -> float:
    """Mean of the two axis scores."""
    for v in (accuracy, methodology):
        if not 0 <= v <= 1:
            raise ScoringError(f"axis score out of [0, 1]: {v}")
    return (accuracy + methodology) / 2.0


def load_rubric(document: Union[str, Path, Mapping]) -> tuple[list[Criterion], list[MethodologyStage]]:
    """Parse a rubric file: criteria plus weighted methodology stages."""
    if isinstance(document, (str, Path)):
        document = json.loads(Path(document).read_text(encoding="utf-8"))
    criteria = [
        Criterion(id=c["id"], kind=c["kind"], params={k: v for k, v in c.items() if k not in ("id", "kind")})
        for c in document.get("criteria", [])
    ]
    stages = [
        MethodologyStage(
            id=str(s.get("id", i + 1)),
            description=s.get("description", ""),
            weight=float(s["weight"]),
        )
        for i, s in enumerate(document.get("methodology", []))
    ]
    return criteria, stages


def score_results(
    rubric: Union[str, Path, Mapping],
    results: Union[str, Path, Mapping],
) -> RubricScore:
    """Score one run's results file against a rubric file.

    Results shape: ``{"observed": {criterion_id: value}, "verdicts":
    {source_id: bool}, "stage_scores": {stage_id: 0-10}}``. A criterion with
    no observed value (or no verdict) scores zero with a warning.
    """
    criteria, stages = load_rubric(rubric)
    if isinstance(results, (str, Path)):
        results = json.loads(Path(results).read_text(encoding="utf-8"))
    observed = results.get("observed", {})
    verdicts = results.get("verdicts", {})
    stage_scores = results.get("stage_scores", {})

    total = 0.0
    for c in criteria:
        try:
            total += score_criterion(c, observed.get(c.id), verdicts)
        except MissingVerdictError:
            logger.warning("criterion %s: no verdict supplied; scoring 0", c.id)
    accuracy = total / len(criteria) if criteria else 0.0

    scored_stages = []
    for s in stages:
        if s.id not in stage_scores:
            logger.warning("stage %s: no score supplied; scoring 0", s.id)
        scored_stages.append(
            MethodologyStage(
                id=s.id,
                description=s.description,
                weight=s.weight,
                score=float(stage_scores.get(s.id, 0.0)),
            )
        )
    methodology = score_methodology(scored_stages) if scored_stages else 0.0
    return RubricScore(accuracy=accuracy, methodology=methodology, combined=combined(accuracy, methodology))


def aggregate(values: Sequence[float]) -> tuple[float, Optional[float]]:
    """Arithmetic mean and sample (n-1) standard deviation; std is None for n=1."""
    if not values:
        raise ScoringError("cannot aggregate an empty group")
    if len(values) == 1:
        return float(values[0]), None
    return statistics.mean(values), statistics.stdev(values)


def aggregate_groups(
    runs: Sequence[RunMetrics], key=lambda r: r.task_id
) -> dict[Any, dict[str, tuple[float, Optional[float]]]]:
    """Group runs and aggregate each metric within each group."""
    groups: dict[Any, list[RunMetrics]] = {}
    for r in runs:
        groups.setdefault(key(r), []).append(r)
    out = {}
    for k, members in groups.items():
        out[k] = {
            "time": aggregate([m.time_minutes for m in members]),
            "cost": aggregate([m.cost_usd for m in members]),
            "iterations": aggregate([float(m.iterations) for m in members]),
            "score": aggregate([m.score.combined for m in members]),
        }
    return out


def delta_pct(tr: float, zs: float) -> float:
    """Relative change of tool-reuse vs zero-shot, in percent."""
    if zs == 0:
        raise ZeroBaselineError("zero-shot baseline is zero")
    return 100.0 * (tr - zs) / zs


def normalize_radar(
    values: Mapping[str, Mapping[str, float]],
    lower_is_better: Sequence[str] = ("time", "cost"),
) -> dict[str, dict[str, float]]:
    """Min-max rescale each axis independently into [0.1, 0.9].

    Lower-is-better axes are inverted before scaling so a larger display
    value always means better. A degenerate axis (all values equal) maps
    everything to the midpoint with a warning.
    """
    out: dict[str, dict[str, float]] = {}
    for axis, points in values.items():
        vals = list(points.values())
        lo, hi = min(vals), max(vals)
        if lo == hi:
            logger.warning("radar axis %r is degenerate; mapping all points to 0.5", axis)
            out[axis] = {k: 0.5 for k in points}
            continue
        invert = axis in lower_is_better
        span = hi - lo
        out[axis] = {
            k: RADAR_LO + (RADAR_HI - RADAR_LO) * (((hi - v) if invert else (v - lo)) / span)
            for k, v in points.items()
        }
    return out


@dataclass
class TableRow:
    """One benchmark table row: a model's per-mode time/cost/score numbers."""

    model: str
    time: dict[str, float] = field(default_factory=dict)  # mode -> minutes
    cost: dict[str, float] = field(default_factory=dict)  # mode -> USD
    score: dict[str, float] = field(default_factory=dict)  # mode -> percent


_METRIC_ORDER = ("time", "cost", "score")
_MODE_ORDER = ("zs", "tr", "delta", "eo")


def _fmt(metric: str, mode: str, value: Optional[float]) -> str:
    if value is None:
        return ""
    if mode == "delta":
        return f"{value:+.1f}%"
    if metric == "cost":
        return f"{value:.2f}"
    return f"{value:.1f}"


def _row_cells(row: TableRow) -> list[str]:
    cells = [row.model]
    for metric in _METRIC_ORDER:
        group: Mapping[str, float] = getattr(row, metric)
        for mode in _MODE_ORDER:
            if mode == "delta":
                if "zs" in group and "tr" in group and group["zs"] != 0:
                    cells.append(_fmt(metric, mode, delta_pct(group["tr"], group["zs"])))
                else:
                    cells.append("")
            else:
                cells.append(_fmt(metric, mode, group.get(mode)))
    return cells


_HEADER = ["Model"] + [
    f"{metric.capitalize()} {mode.upper() if mode != 'delta' else 'Δ%'}"
    for metric in _METRIC_ORDER
    for mode in _MODE_ORDER
]


def emit_tables(rows: Sequence[TableRow], format: str = "markdown") -> str:
    """Render benchmark rows deterministically as markdown or CSV.

    Column order is fixed (time, cost, score groups each as ZS/TR/Δ%/EO);
    numeric strings are identical across formats.
    """
    all_cells = [_row_cells(r) for r in rows]
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(_HEADER)
        writer.writerows(all_cells)
        return buf.getvalue()
    if format != "markdown":
        raise ScoringError(f"unknown table format: {format!r}")
    lines = ["| " + " | ".join(_HEADER) + " |", "|" + "---|" * len(_HEADER)]
    for cells in all_cells:
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_radar_csv(normalized: Mapping[str, Mapping[str, float]]) -> str:
    """Radar data as CSV: axis, point, value (sorted, 6 decimal places)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["axis", "point", "value"])
    for axis in sorted(normalized):
        for point in sorted(normalized[axis]):
            writer.writerow([axis, point, f"{normalized[axis][point]:.6f}"])
    return buf.getvalue()
