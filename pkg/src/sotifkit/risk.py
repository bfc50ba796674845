"""Residual risk quantification and acceptance checking.

Risk is a function of severity and occurrence, R = f(S, O).  f is kept
abstract in the underlying safety argument, so this module ships a fixed,
documented 4x4 matrix with a monotonicity contract (risk never decreases
along either axis, an S0 hazard is always negligible, and the S3/O4
corner is high):

    ==========  ====  ====  ======  ======
    severity      O1    O2      O3      O4
    ==========  ====  ====  ======  ======
    S0           neg   neg    neg     neg
    S1           neg   neg    low     low
    S2           neg   low    medium  medium
    S3           low   medium high    high
    ==========  ====  ====  ======  ======

Occurrence data (expected encounters of a condition per operating hour)
is always an input file, never computed here: exposure statistics are a
real-world data-availability problem, and this tool's job is propagation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Mapping, Sequence

from .analysis import (
    HAZARD_COLLISION,
    HAZARD_FALSE_ACTIVATION,
    AnalysisRow,
    Severity,
)
from .errors import (
    IncompleteAnalysisError,
    IncompleteOccurrenceError,
    InvalidComparisonError,
    ParameterError,
)
from .simulator import SweepStats

__all__ = [
    "OccurrenceClass",
    "RiskLevel",
    "OccurrenceSpec",
    "OccurrenceBins",
    "RiskResult",
    "AcceptanceCriteria",
    "Violation",
    "AcceptanceVerdict",
    "risk_level",
    "occurrence_class",
    "hazard_rate",
    "hours_to_hazard",
    "acceptance_check",
    "evaluate_residual_risk",
    "load_occurrences",
    "load_criteria",
    "write_risk_csv",
    "write_risk_json",
    "RISK_CSV_HEADER",
]


class OccurrenceClass(IntEnum):
    O1 = 1
    O2 = 2
    O3 = 3
    O4 = 4


class RiskLevel(IntEnum):
    NEGLIGIBLE = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.lower()


_NEG, _LOW, _MED, _HIGH = RiskLevel
# Rows: S0..S3; columns: O1..O4.
RISK_MATRIX: tuple[tuple[RiskLevel, ...], ...] = (
    (_NEG, _NEG, _NEG, _NEG),
    (_NEG, _NEG, _LOW, _LOW),
    (_NEG, _LOW, _MED, _MED),
    (_LOW, _MED, _HIGH, _HIGH),
)


def risk_level(s: Severity, o: OccurrenceClass) -> RiskLevel:
    """Look up R = f(S, O) in the shipped matrix."""
    return RISK_MATRIX[int(s)][int(o) - 1]


@dataclass(frozen=True)
class OccurrenceSpec:
    """Expected encounters of one triggering condition per operating hour."""

    leaf_id: str
    exposure_rate: float
    source: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.exposure_rate) or self.exposure_rate < 0:
            raise ParameterError(
                f"exposure_rate must be finite and >= 0, got {self.exposure_rate}"
            )


@dataclass(frozen=True)
class OccurrenceBins:
    """Rate boundaries for binning exposure into O1..O4.

    Defaults are shipped assumptions, not established data: >= o4 per hour
    is O4, >= o3 is O3, >= o2 is O2, anything rarer is O1.
    """

    o4: float = 1e-1
    o3: float = 1e-3
    o2: float = 1e-5

    def __post_init__(self) -> None:
        if not 0 < self.o2 < self.o3 < self.o4:
            raise ParameterError(
                f"need 0 < o2 < o3 < o4, got {self.o2}, {self.o3}, {self.o4}"
            )


def occurrence_class(
    exposure_rate: float, bins: OccurrenceBins | None = None
) -> OccurrenceClass:
    if bins is None:
        bins = OccurrenceBins()
    if exposure_rate >= bins.o4:
        return OccurrenceClass.O4
    if exposure_rate >= bins.o3:
        return OccurrenceClass.O3
    if exposure_rate >= bins.o2:
        return OccurrenceClass.O2
    return OccurrenceClass.O1


def hazard_rate(occ: OccurrenceSpec, conditional_hazard_prob: float) -> float:
    """Hazards per operating hour: exposure times P(hazard | condition)."""
    if not 0.0 <= conditional_hazard_prob <= 1.0:
        raise ParameterError(
            f"conditional_hazard_prob must be in [0, 1], got {conditional_hazard_prob}"
        )
    return occ.exposure_rate * conditional_hazard_prob


def hours_to_hazard(rate_per_hour: float) -> float:
    """1/rate; unbounded (infinity) when the rate is zero."""
    if rate_per_hour < 0:
        raise ParameterError(f"rate must be >= 0, got {rate_per_hour}")
    return math.inf if rate_per_hour == 0.0 else 1.0 / rate_per_hour


@dataclass(frozen=True)
class RiskResult:
    """Quantified residual risk of one (scenario, hazard) pair.

    hazard_id is None for scenarios whose sweep exhibited no hazard; they
    still appear in the risk table as negligible with unbounded hours.
    """

    scenario_id: str
    hazard_id: str | None
    severity: Severity
    occurrence_class: OccurrenceClass
    risk_level: RiskLevel
    hazard_rate_per_hour: float
    hours_to_hazard: float
    km_to_hazard: float


@dataclass(frozen=True)
class AcceptanceCriteria:
    """Release thresholds for scenario KPIs relative to the nominal run."""

    max_final_gap_degradation: float
    max_collision_rate: float
    max_false_activation_rate: float
    min_ttc_at_trigger: float

    def __post_init__(self) -> None:
        for name in (
            "max_final_gap_degradation",
            "max_collision_rate",
            "max_false_activation_rate",
            "min_ttc_at_trigger",
        ):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        for name in ("max_collision_rate", "max_false_activation_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class Violation:
    clause: str
    measured: float
    threshold: float


@dataclass(frozen=True)
class AcceptanceVerdict:
    scenario_id: str
    passed: bool
    violations: tuple[Violation, ...]


def acceptance_check(
    nominal: SweepStats, scenario_stats: SweepStats, criteria: AcceptanceCriteria
) -> AcceptanceVerdict:
    """Compare one scenario's aggregates against the nominal baseline.

    Fails iff any clause is violated; every violated clause is listed with
    the measured value and its threshold.  Raises
    :class:`InvalidComparisonError` when the two sweeps come from
    different ODDs.
    """
    if nominal.odd_fingerprint != scenario_stats.odd_fingerprint:
        raise InvalidComparisonError(
            f"cannot compare '{scenario_stats.scenario_id}' against "
            f"'{nominal.scenario_id}': different ODDs "
            f"({scenario_stats.odd_fingerprint} vs {nominal.odd_fingerprint})"
        )
    violations = []
    if nominal.gap_mean > 0.0:
        degradation = (nominal.gap_mean - scenario_stats.gap_mean) / nominal.gap_mean
        if degradation > criteria.max_final_gap_degradation:
            violations.append(
                Violation(
                    "max_final_gap_degradation",
                    degradation,
                    criteria.max_final_gap_degradation,
                )
            )
    if scenario_stats.collision_rate > criteria.max_collision_rate:
        violations.append(
            Violation(
                "max_collision_rate",
                scenario_stats.collision_rate,
                criteria.max_collision_rate,
            )
        )
    if scenario_stats.false_activation_rate > criteria.max_false_activation_rate:
        violations.append(
            Violation(
                "max_false_activation_rate",
                scenario_stats.false_activation_rate,
                criteria.max_false_activation_rate,
            )
        )
    if scenario_stats.ttc_at_trigger_min < criteria.min_ttc_at_trigger:
        violations.append(
            Violation(
                "min_ttc_at_trigger",
                scenario_stats.ttc_at_trigger_min,
                criteria.min_ttc_at_trigger,
            )
        )
    return AcceptanceVerdict(
        scenario_id=scenario_stats.scenario_id,
        passed=not violations,
        violations=tuple(violations),
    )


#: Which sweep statistic carries P(hazard | condition encountered).
_HAZARD_PROBABILITY = {
    HAZARD_COLLISION: lambda stats: stats.collision_rate,
    HAZARD_FALSE_ACTIVATION: lambda stats: stats.false_activation_rate,
}


def evaluate_residual_risk(
    sheet: Sequence[AnalysisRow],
    sweeps: Sequence[SweepStats],
    occurrences: Sequence[OccurrenceSpec],
    ego_speed_m_s: float,
    bins: OccurrenceBins | None = None,
) -> list[RiskResult]:
    """One RiskResult per (sheet row, linked hazard).

    Rows with no linked hazard emit a single negligible result so every
    analyzed scenario shows up in the risk table.  Missing occurrence data
    raises :class:`IncompleteOccurrenceError` naming the condition.
    """
    sweeps_by_id = {s.scenario_id: s for s in sweeps}
    occ_by_leaf = {o.leaf_id: o for o in occurrences}
    results = []
    for row in sheet:
        stats = sweeps_by_id.get(row.scenario_id)
        if stats is None:
            raise IncompleteAnalysisError(
                f"no sweep result for condition '{row.leaf_id}'"
            )
        occ = occ_by_leaf.get(row.leaf_id)
        if occ is None:
            raise IncompleteOccurrenceError(
                f"no occurrence (exposure) entry for condition '{row.leaf_id}'"
            )
        o_class = occurrence_class(occ.exposure_rate, bins)
        if not row.linked_hazard_ids:
            results.append(
                RiskResult(
                    scenario_id=row.scenario_id,
                    hazard_id=None,
                    severity=row.severity,
                    occurrence_class=o_class,
                    risk_level=RiskLevel.NEGLIGIBLE,
                    hazard_rate_per_hour=0.0,
                    hours_to_hazard=math.inf,
                    km_to_hazard=math.inf,
                )
            )
            continue
        for hazard_id in row.linked_hazard_ids:
            probability_of = _HAZARD_PROBABILITY.get(hazard_id)
            if probability_of is None:
                raise IncompleteAnalysisError(
                    f"no hazard-probability source for hazard '{hazard_id}' "
                    f"(condition '{row.leaf_id}')"
                )
            rate = hazard_rate(occ, probability_of(stats))
            hours = hours_to_hazard(rate)
            results.append(
                RiskResult(
                    scenario_id=row.scenario_id,
                    hazard_id=hazard_id,
                    severity=row.severity,
                    occurrence_class=o_class,
                    risk_level=risk_level(row.severity, o_class),
                    hazard_rate_per_hour=rate,
                    hours_to_hazard=hours,
                    km_to_hazard=hours * ego_speed_m_s * 3.6,
                )
            )
    return results


def load_occurrences(path: str | Path) -> list[OccurrenceSpec]:
    """Load occurrence specs from a JSON list."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: occurrence file must be a JSON list")
    specs = []
    for i, item in enumerate(data):
        unknown = set(item) - {"leaf_id", "exposure_rate", "source"}
        if unknown:
            raise ValueError(f"{path}[{i}]: unknown keys {sorted(unknown)}")
        specs.append(
            OccurrenceSpec(
                leaf_id=item["leaf_id"],
                exposure_rate=float(item["exposure_rate"]),
                source=item.get("source", ""),
            )
        )
    return specs


def load_criteria(path: str | Path) -> AcceptanceCriteria:
    """Load acceptance criteria from JSON."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    required = {
        "max_final_gap_degradation",
        "max_collision_rate",
        "max_false_activation_rate",
        "min_ttc_at_trigger",
    }
    missing = required - set(data)
    if missing:
        raise ValueError(f"{path}: missing keys {sorted(missing)}")
    unknown = set(data) - required
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    return AcceptanceCriteria(**{k: float(v) for k, v in data.items()})


RISK_CSV_HEADER = (
    "scenario_id",
    "hazard_id",
    "severity",
    "occurrence_class",
    "risk_level",
    "hazard_rate_per_hour",
    "hours_to_hazard",
    "km_to_hazard",
)


def write_risk_csv(results: Sequence[RiskResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RISK_CSV_HEADER)
        for r in results:
            writer.writerow(
                [
                    r.scenario_id,
                    r.hazard_id or "",
                    r.severity.name,
                    r.occurrence_class.name,
                    r.risk_level.label,
                    r.hazard_rate_per_hour,
                    r.hours_to_hazard,
                    r.km_to_hazard,
                ]
            )


def risk_to_dict(r: RiskResult) -> dict:
    return {
        "scenario_id": r.scenario_id,
        "hazard_id": r.hazard_id,
        "severity": r.severity.name,
        "occurrence_class": r.occurrence_class.name,
        "risk_level": r.risk_level.label,
        "hazard_rate_per_hour": r.hazard_rate_per_hour,
        "hours_to_hazard": None if math.isinf(r.hours_to_hazard) else r.hours_to_hazard,
        "km_to_hazard": None if math.isinf(r.km_to_hazard) else r.km_to_hazard,
    }


def risk_from_dict(data: Mapping) -> RiskResult:
    return RiskResult(
        scenario_id=data["scenario_id"],
        hazard_id=data["hazard_id"],
        severity=Severity[data["severity"]],
        occurrence_class=OccurrenceClass[data["occurrence_class"]],
        risk_level=RiskLevel[data["risk_level"].upper()],
        hazard_rate_per_hour=data["hazard_rate_per_hour"],
        hours_to_hazard=math.inf if data["hours_to_hazard"] is None else data["hours_to_hazard"],
        km_to_hazard=math.inf if data["km_to_hazard"] is None else data["km_to_hazard"],
    )


def write_risk_json(results: Sequence[RiskResult], path: str | Path) -> None:
    payload = [risk_to_dict(r) for r in results]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
