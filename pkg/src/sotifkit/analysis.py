"""Hazard registry and the qualitative triggering-conditions analysis sheet.

The function decomposes into perception sense, perception algo, decision,
and actuation.  Each analyzed scenario is mapped to the subsystems its
effects can degrade, rated for severity, and linked to the hazards its
sweep statistics actually exhibited.  Severity thresholds are
configuration with shipped defaults: in practice these ratings come from
expert discussion, and the defaults only keep the pipeline runnable end
to end.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ContractViolationError, IncompleteAnalysisError, ParameterError
from .scenario import EffectModel, Scenario
from .simulator import Stage, SweepStats

__all__ = [
    "Severity",
    "Controllability",
    "Hazard",
    "HAZARD_COLLISION",
    "HAZARD_FALSE_ACTIVATION",
    "default_registry",
    "SeverityRules",
    "load_severity_rules",
    "AnalysisRow",
    "classify_affected_subsystems",
    "link_hazards",
    "build_analysis_sheet",
    "write_analysis_csv",
    "write_analysis_json",
    "ANALYSIS_CSV_HEADER",
]


class Severity(IntEnum):
    """Severity of a performance limitation: none / low / medium / high."""

    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3


class Controllability(IntEnum):
    C0 = 0
    C1 = 1
    C2 = 2
    C3 = 3


#: The function under test is a level-4 function with no backup operator,
#: so controllability is fixed at C3 unless a config explicitly overrides.
DEFAULT_CONTROLLABILITY = Controllability.C3

HAZARD_COLLISION = "H1"
HAZARD_FALSE_ACTIVATION = "H2"


@dataclass(frozen=True)
class Hazard:
    id: str
    description: str
    default_severity: Severity


def default_registry() -> dict[str, Hazard]:
    """The two hazards identified for the emergency-brake function."""
    hazards = [
        Hazard(
            id=HAZARD_COLLISION,
            description=(
                "Collision because the vehicle cannot brake to a stop "
                "before reaching the obstacle"
            ),
            default_severity=Severity.S3,
        ),
        Hazard(
            id=HAZARD_FALSE_ACTIVATION,
            description="Emergency brake activates on a falsely detected object",
            default_severity=Severity.S1,
        ),
    ]
    return {h.id: h for h in hazards}


@dataclass(frozen=True)
class SeverityRules:
    """Severity from sweep outcomes (defaults, expert-overridable).

    Collision severity steps on the worst impact speed; runs with false
    activations but no collision rate S1; everything else S0.
    """

    s3_impact_speed: float = 11.0
    s2_impact_speed: float = 5.0
    false_activation_severity: Severity = Severity.S1

    def __post_init__(self) -> None:
        if not 0.0 < self.s2_impact_speed <= self.s3_impact_speed:
            raise ParameterError(
                "need 0 < s2_impact_speed <= s3_impact_speed, got "
                f"{self.s2_impact_speed}, {self.s3_impact_speed}"
            )

    def collision_severity(self, impact_speed_max: float) -> Severity:
        if impact_speed_max >= self.s3_impact_speed:
            return Severity.S3
        if impact_speed_max >= self.s2_impact_speed:
            return Severity.S2
        if impact_speed_max > 0.0:
            return Severity.S1
        return Severity.S0


def load_severity_rules(path: str | Path) -> SeverityRules:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    allowed = {"s3_impact_speed", "s2_impact_speed", "false_activation_severity"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs: dict = {}
    if "s3_impact_speed" in data:
        kwargs["s3_impact_speed"] = float(data["s3_impact_speed"])
    if "s2_impact_speed" in data:
        kwargs["s2_impact_speed"] = float(data["s2_impact_speed"])
    if "false_activation_severity" in data:
        kwargs["false_activation_severity"] = Severity[data["false_activation_severity"]]
    return SeverityRules(**kwargs)


@dataclass(frozen=True)
class AnalysisRow:
    """One analysis-sheet row for a scenario with a triggering condition."""

    scenario_id: str
    leaf_id: str
    category_path: tuple[str, ...]
    affected_subsystems: frozenset[Stage]
    severity: Severity
    controllability: Controllability
    linked_hazard_ids: tuple[str, ...]
    rationale: str


def classify_affected_subsystems(effects: EffectModel) -> frozenset[Stage]:
    """Subsystems an effect model can degrade.

    Reduced range or ghost detections hit the raw sensing; extra latency
    hits the decision stage; reduced friction hits the actuation.  The
    perception algo cannot be inferred from effects alone and is assigned
    only through explicit overrides in :func:`build_analysis_sheet`.
    """
    subsystems = set()
    if effects.perception_range_factor < 1.0 or effects.ghost_rate > 0.0:
        subsystems.add(Stage.PERCEPTION_SENSE)
    if effects.rho_add > 0.0:
        subsystems.add(Stage.DECISION)
    if effects.mu_factor < 1.0:
        subsystems.add(Stage.ACTUATION)
    return frozenset(subsystems)


def link_hazards(stats: SweepStats, registry: Mapping[str, Hazard]) -> list[str]:
    """Hazard ids a sweep actually exhibited."""
    linked = []
    if stats.collision_rate > 0.0 and HAZARD_COLLISION in registry:
        linked.append(HAZARD_COLLISION)
    if stats.false_activation_rate > 0.0 and HAZARD_FALSE_ACTIVATION in registry:
        linked.append(HAZARD_FALSE_ACTIVATION)
    return linked


def _rationale(effects: EffectModel, stats: SweepStats) -> str:
    parts = []
    if effects.perception_range_factor < 1.0:
        parts.append(
            f"perception range reduced to {effects.perception_range_factor:.0%}"
        )
    if effects.ghost_rate > 0.0:
        parts.append(f"ghost detections at {effects.ghost_rate:.3f} per frame")
    if effects.rho_add > 0.0:
        parts.append(f"response latency increased by {effects.rho_add:.2f} s")
    if effects.mu_factor < 1.0:
        parts.append(f"friction reduced to {effects.mu_factor:.0%}")
    if not parts:
        parts.append("no physical effect mapped")
    if stats.collision_rate > 0.0:
        parts.append(
            f"collision in {stats.collision_rate:.0%} of runs "
            f"(max impact {stats.impact_speed_max:.2f} m/s)"
        )
    if stats.false_activation_rate > 0.0:
        parts.append(
            f"false activation in {stats.false_activation_rate:.0%} of runs"
        )
    if stats.collision_rate == 0.0 and stats.false_activation_rate == 0.0:
        parts.append("no hazardous outcome observed")
    return "; ".join(parts)


def build_analysis_sheet(
    scenarios: Sequence[Scenario],
    sweep_results: Sequence[SweepStats],
    registry: Mapping[str, Hazard] | None = None,
    severity_rules: SeverityRules | None = None,
    subsystem_overrides: Mapping[str, Iterable[Stage]] | None = None,
    controllability: Controllability = DEFAULT_CONTROLLABILITY,
) -> list[AnalysisRow]:
    """One row per non-nominal scenario, in scenario order.

    ``subsystem_overrides`` maps a condition leaf id to extra subsystems
    (the explicit path for perception-algo impacts).  Raises
    :class:`IncompleteAnalysisError` when a scenario has no sweep result.
    """
    if registry is None:
        registry = default_registry()
    if severity_rules is None:
        severity_rules = SeverityRules()
    overrides = subsystem_overrides or {}

    stats_by_id = {s.scenario_id: s for s in sweep_results}
    rows = []
    for scenario in scenarios:
        if scenario.is_nominal:
            continue
        stats = stats_by_id.get(scenario.id)
        if stats is None:
            raise IncompleteAnalysisError(
                f"no sweep result for scenario '{scenario.id}'"
            )
        condition = scenario.condition
        assert condition is not None
        subsystems = classify_affected_subsystems(scenario.effects) | frozenset(
            Stage(s) for s in overrides.get(condition.leaf_id, ())
        )
        if not scenario.effects.is_neutral and not subsystems:
            raise ContractViolationError(
                f"scenario '{scenario.id}' has effects but no affected subsystem"
            )
        hazards = link_hazards(stats, registry)
        for hazard_id in hazards:
            if hazard_id not in registry:
                raise ContractViolationError(f"hazard '{hazard_id}' not in registry")
        severity = Severity.S0
        if stats.collision_rate > 0.0:
            severity = severity_rules.collision_severity(stats.impact_speed_max)
        if stats.false_activation_rate > 0.0:
            severity = max(severity, severity_rules.false_activation_severity)
        rows.append(
            AnalysisRow(
                scenario_id=scenario.id,
                leaf_id=condition.leaf_id,
                category_path=condition.category_path,
                affected_subsystems=subsystems,
                severity=severity,
                controllability=controllability,
                linked_hazard_ids=tuple(hazards),
                rationale=_rationale(scenario.effects, stats),
            )
        )
    return rows


ANALYSIS_CSV_HEADER = (
    "triggering_condition",
    "category_path",
    "affected_subsystems",
    "severity",
    "controllability",
    "hazards",
    "rationale",
)


def _row_cells(row: AnalysisRow) -> list[str]:
    return [
        row.leaf_id,
        " / ".join(row.category_path),
        ", ".join(sorted(s.value for s in row.affected_subsystems)),
        row.severity.name,
        row.controllability.name,
        ", ".join(row.linked_hazard_ids),
        row.rationale,
    ]


def write_analysis_csv(rows: Sequence[AnalysisRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANALYSIS_CSV_HEADER)
        for row in rows:
            writer.writerow(_row_cells(row))


def row_to_dict(row: AnalysisRow) -> dict:
    return {
        "scenario_id": row.scenario_id,
        "triggering_condition": row.leaf_id,
        "category_path": list(row.category_path),
        "affected_subsystems": sorted(s.value for s in row.affected_subsystems),
        "severity": row.severity.name,
        "controllability": row.controllability.name,
        "hazards": list(row.linked_hazard_ids),
        "rationale": row.rationale,
    }


def row_from_dict(data: Mapping) -> AnalysisRow:
    return AnalysisRow(
        scenario_id=data["scenario_id"],
        leaf_id=data["triggering_condition"],
        category_path=tuple(data["category_path"]),
        affected_subsystems=frozenset(Stage(s) for s in data["affected_subsystems"]),
        severity=Severity[data["severity"]],
        controllability=Controllability[data["controllability"]],
        linked_hazard_ids=tuple(data["hazards"]),
        rationale=data["rationale"],
    )


def write_analysis_json(rows: Sequence[AnalysisRow], path: str | Path) -> None:
    payload = [row_to_dict(row) for row in rows]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
