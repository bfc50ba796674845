"""Campaign orchestration and the argumentation report bundle.

``run_campaign`` executes the whole pipeline (filter -> generate -> sweep
-> analyze -> mitigate -> risk -> acceptance) and returns a
:class:`ReportBundle`; ``write_bundle`` persists it as JSON plus CSV
tables plus a Markdown summary.  Bundles record digests of their input
files and the base seed, so a bundle is reproducible bit-for-bit (minus
the timestamp) from the same inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .analysis import (
    AnalysisRow,
    Hazard,
    SeverityRules,
    build_analysis_sheet,
    default_registry,
    row_from_dict,
    row_to_dict,
    write_analysis_csv,
    write_analysis_json,
)
from .errors import ContractViolationError, PipelineError
from .risk import (
    AcceptanceCriteria,
    AcceptanceVerdict,
    OccurrenceSpec,
    RiskResult,
    Violation,
    acceptance_check,
    evaluate_residual_risk,
    risk_from_dict,
    risk_to_dict,
    write_risk_csv,
    write_risk_json,
)
from .scenario import (
    EFFECT_FIELDS,
    EffectMapping,
    MitigationSpec,
    OddDefinition,
    Scenario,
    apply_mitigation,
    generate_scenarios,
    mitigation_applicable,
)
from .simulator import (
    SimConfig,
    SweepStats,
    export_trace_jsonl,
    monte_carlo_sweep,
    simulate,
    write_kpi_csv,
)
from .taxonomy import Taxonomy, enumerate_leaves, filter_by_odd

__all__ = [
    "RunMeta",
    "ScenarioSummary",
    "MitigationOutcome",
    "ReportBundle",
    "run_campaign",
    "write_bundle",
    "load_bundle",
    "emit_markdown_summary",
    "file_digest",
]

TOOL_NAME = "sotifkit"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _json_float(x: float) -> float | None:
    return None if math.isinf(x) else x


def _from_json_float(x: float | None) -> float:
    return math.inf if x is None else x


@dataclass(frozen=True)
class RunMeta:
    tool: str
    version: str
    created_utc: str
    base_seed: int
    runs_per_scenario: int
    dt: float
    max_time: float
    perception_tick: float
    workers: int
    input_digests: Mapping[str, str]
    odd_well_formed: bool


@dataclass(frozen=True)
class ScenarioSummary:
    id: str
    leaf_id: str | None
    category_path: tuple[str, ...]
    intensity: str | None
    effects: Mapping[str, float]
    seed: int

    @staticmethod
    def of(scenario: Scenario) -> "ScenarioSummary":
        condition = scenario.condition
        return ScenarioSummary(
            id=scenario.id,
            leaf_id=condition.leaf_id if condition else None,
            category_path=condition.category_path if condition else (),
            intensity=condition.intensity if condition else None,
            effects={f: getattr(scenario.effects, f) for f in EFFECT_FIELDS},
            seed=scenario.seed,
        )


@dataclass(frozen=True)
class MitigationOutcome:
    """Before/after comparison of one mitigation applied to one scenario."""

    mitigation_id: str
    scenario_id: str
    mitigated_scenario_id: str | None
    applied: bool
    note: str
    gap_mean_before: float
    gap_mean_after: float | None
    collision_rate_before: float
    collision_rate_after: float | None
    false_activation_rate_before: float
    false_activation_rate_after: float | None
    passes_after: bool | None


@dataclass(frozen=True)
class ReportBundle:
    meta: RunMeta
    taxonomy_summary: Mapping
    scenarios: tuple[ScenarioSummary, ...]
    kpi_table: tuple[SweepStats, ...]
    analysis_sheet: tuple[AnalysisRow, ...]
    risk_table: tuple[RiskResult, ...]
    mitigation_table: tuple[MitigationOutcome, ...]
    criteria: AcceptanceCriteria
    acceptance: tuple[AcceptanceVerdict, ...]

    def __post_init__(self) -> None:
        ids = {s.id for s in self.scenarios}
        for table, entries in (
            ("kpi_table", [s.scenario_id for s in self.kpi_table]),
            ("analysis_sheet", [r.scenario_id for r in self.analysis_sheet]),
            ("risk_table", [r.scenario_id for r in self.risk_table]),
            ("acceptance", [v.scenario_id for v in self.acceptance]),
            ("mitigation_table", [m.scenario_id for m in self.mitigation_table]),
        ):
            for scenario_id in entries:
                if scenario_id not in ids:
                    raise ContractViolationError(
                        f"{table} references unknown scenario '{scenario_id}'"
                    )

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.acceptance)


def _stage(name: str):
    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, exc) from exc
            return False

    return _Guard()


def run_campaign(
    odd: OddDefinition,
    taxonomy: Taxonomy,
    mapping: EffectMapping,
    occurrences: Sequence[OccurrenceSpec],
    criteria: AcceptanceCriteria,
    mitigations: Sequence[MitigationSpec] = (),
    base_seed: int = 0,
    runs_per_scenario: int = 100,
    cfg: SimConfig | None = None,
    workers: int = 1,
    registry: Mapping[str, Hazard] | None = None,
    severity_rules: SeverityRules | None = None,
    subsystem_overrides: Mapping[str, Sequence[str]] | None = None,
    input_digests: Mapping[str, str] | None = None,
    trace_dir: str | Path | None = None,
) -> ReportBundle:
    """Execute the full validation pipeline and assemble the bundle.

    Any module error is re-raised as :class:`PipelineError` naming the
    stage it came from.  When ``trace_dir`` is given, the first run
    (index 0) of every scenario is exported there as JSON lines.
    """
    if cfg is None:
        cfg = SimConfig()
    if registry is None:
        registry = default_registry()

    with _stage("filter"):
        all_conditions = enumerate_leaves(taxonomy)
        relevant = filter_by_odd(all_conditions, odd.odd_tags)

    with _stage("generate"):
        scenarios = generate_scenarios(odd, relevant, mapping, base_seed)
        nominal = scenarios[0]

    with _stage("sweep"):
        stats = monte_carlo_sweep(scenarios, cfg, runs_per_scenario, workers)
        stats_by_id = {s.scenario_id: s for s in stats}
        nominal_stats = stats_by_id[nominal.id]
        if trace_dir is not None:
            trace_path = Path(trace_dir)
            trace_path.mkdir(parents=True, exist_ok=True)
            for scenario in scenarios:
                trace = simulate(scenario, cfg, run_index=0)
                export_trace_jsonl(trace, trace_path / f"{scenario.id}.jsonl")

    with _stage("analyze"):
        sheet = build_analysis_sheet(
            scenarios, stats, registry, severity_rules, subsystem_overrides
        )

    all_scenarios = list(scenarios)
    all_stats = list(stats)
    mitigation_table: list[MitigationOutcome] = []
    with _stage("mitigate"):
        for mitigation in mitigations:
            for scenario in scenarios:
                if scenario.is_nominal:
                    continue
                before = stats_by_id[scenario.id]
                if mitigation.effect_overrides and not mitigation_applicable(
                    scenario, mitigation
                ):
                    mitigation_table.append(
                        MitigationOutcome(
                            mitigation_id=mitigation.id,
                            scenario_id=scenario.id,
                            mitigated_scenario_id=None,
                            applied=False,
                            note="not applicable: override would move an effect away from neutral",
                            gap_mean_before=before.gap_mean,
                            gap_mean_after=None,
                            collision_rate_before=before.collision_rate,
                            collision_rate_after=None,
                            false_activation_rate_before=before.false_activation_rate,
                            false_activation_rate_after=None,
                            passes_after=None,
                        )
                    )
                    continue
                mitigated = apply_mitigation(scenario, mitigation)
                (after,) = monte_carlo_sweep([mitigated], cfg, runs_per_scenario, workers)
                if trace_dir is not None:
                    export_trace_jsonl(
                        simulate(mitigated, cfg, run_index=0),
                        Path(trace_dir) / f"{mitigated.id}.jsonl",
                    )
                all_scenarios.append(mitigated)
                all_stats.append(after)
                verdict = acceptance_check(nominal_stats, after, criteria)
                mitigation_table.append(
                    MitigationOutcome(
                        mitigation_id=mitigation.id,
                        scenario_id=scenario.id,
                        mitigated_scenario_id=mitigated.id,
                        applied=True,
                        note=mitigation.description,
                        gap_mean_before=before.gap_mean,
                        gap_mean_after=after.gap_mean,
                        collision_rate_before=before.collision_rate,
                        collision_rate_after=after.collision_rate,
                        false_activation_rate_before=before.false_activation_rate,
                        false_activation_rate_after=after.false_activation_rate,
                        passes_after=verdict.passed,
                    )
                )

    with _stage("risk"):
        risk_table = evaluate_residual_risk(sheet, stats, occurrences, odd.vehicle.v_r)

    with _stage("acceptance"):
        verdicts = [
            acceptance_check(nominal_stats, stats_by_id[s.id], criteria)
            for s in scenarios
            if not s.is_nominal
        ]

    leaves_by_root = {
        root.id: sum(
            1
            for c in all_conditions
            if c.category_path and c.category_path[0] == root.name
        )
        for root in taxonomy.roots
    }
    taxonomy_summary = {
        "total_leaves": len(all_conditions),
        "relevant_leaves": len(relevant),
        "leaves_by_root": leaves_by_root,
    }

    meta = RunMeta(
        tool=TOOL_NAME,
        version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
        base_seed=base_seed,
        runs_per_scenario=runs_per_scenario,
        dt=cfg.dt,
        max_time=cfg.max_time,
        perception_tick=cfg.perception_tick,
        workers=workers,
        input_digests=dict(input_digests or {}),
        odd_well_formed=odd.is_nominally_well_formed,
    )

    return ReportBundle(
        meta=meta,
        taxonomy_summary=taxonomy_summary,
        scenarios=tuple(ScenarioSummary.of(s) for s in all_scenarios),
        kpi_table=tuple(all_stats),
        analysis_sheet=tuple(sheet),
        risk_table=tuple(risk_table),
        mitigation_table=tuple(mitigation_table),
        criteria=criteria,
        acceptance=tuple(verdicts),
    )


def _stats_to_dict(s: SweepStats) -> dict:
    d = dataclasses.asdict(s)
    d["ttc_at_trigger_min"] = _json_float(s.ttc_at_trigger_min)
    return d


def _stats_from_dict(d: Mapping) -> SweepStats:
    data = dict(d)
    data["ttc_at_trigger_min"] = _from_json_float(data["ttc_at_trigger_min"])
    return SweepStats(**data)


def bundle_to_dict(bundle: ReportBundle) -> dict:
    return {
        "meta": dataclasses.asdict(bundle.meta),
        "taxonomy_summary": dict(bundle.taxonomy_summary),
        "scenarios": [
            {
                "id": s.id,
                "leaf_id": s.leaf_id,
                "category_path": list(s.category_path),
                "intensity": s.intensity,
                "effects": dict(s.effects),
                "seed": s.seed,
            }
            for s in bundle.scenarios
        ],
        "kpi_table": [_stats_to_dict(s) for s in bundle.kpi_table],
        "analysis_sheet": [row_to_dict(r) for r in bundle.analysis_sheet],
        "risk_table": [risk_to_dict(r) for r in bundle.risk_table],
        "mitigation_table": [dataclasses.asdict(m) for m in bundle.mitigation_table],
        "acceptance": {
            "criteria": dataclasses.asdict(bundle.criteria),
            "verdicts": [
                {
                    "scenario_id": v.scenario_id,
                    "passed": v.passed,
                    "violations": [dataclasses.asdict(x) for x in v.violations],
                }
                for v in bundle.acceptance
            ],
            "all_passed": bundle.all_passed,
        },
    }


def bundle_from_dict(data: Mapping) -> ReportBundle:
    meta = RunMeta(**data["meta"])
    scenarios = tuple(
        ScenarioSummary(
            id=s["id"],
            leaf_id=s["leaf_id"],
            category_path=tuple(s["category_path"]),
            intensity=s["intensity"],
            effects=s["effects"],
            seed=s["seed"],
        )
        for s in data["scenarios"]
    )
    verdicts = tuple(
        AcceptanceVerdict(
            scenario_id=v["scenario_id"],
            passed=v["passed"],
            violations=tuple(Violation(**x) for x in v["violations"]),
        )
        for v in data["acceptance"]["verdicts"]
    )
    return ReportBundle(
        meta=meta,
        taxonomy_summary=data["taxonomy_summary"],
        scenarios=scenarios,
        kpi_table=tuple(_stats_from_dict(s) for s in data["kpi_table"]),
        analysis_sheet=tuple(row_from_dict(r) for r in data["analysis_sheet"]),
        risk_table=tuple(risk_from_dict(r) for r in data["risk_table"]),
        mitigation_table=tuple(
            MitigationOutcome(**m) for m in data["mitigation_table"]
        ),
        criteria=AcceptanceCriteria(**data["acceptance"]["criteria"]),
        acceptance=verdicts,
    )


def write_bundle(bundle: ReportBundle, out_dir: str | Path) -> Path:
    """Persist the bundle under ``out_dir``; returns the bundle.json path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle_path = out / "bundle.json"
    bundle_path.write_text(
        json.dumps(bundle_to_dict(bundle), indent=2) + "\n", encoding="utf-8"
    )
    write_kpi_csv(bundle.kpi_table, out / "kpis.csv")
    write_analysis_csv(bundle.analysis_sheet, out / "analysis_sheet.csv")
    write_analysis_json(bundle.analysis_sheet, out / "analysis_sheet.json")
    write_risk_csv(bundle.risk_table, out / "risk.csv")
    write_risk_json(bundle.risk_table, out / "risk.json")
    (out / "summary.md").write_text(emit_markdown_summary(bundle), encoding="utf-8")
    return bundle_path


def load_bundle(path: str | Path) -> ReportBundle:
    """Read a bundle back from bundle.json (or a directory containing it)."""
    p = Path(path)
    if p.is_dir():
        p = p / "bundle.json"
    return bundle_from_dict(json.loads(p.read_text(encoding="utf-8")))


def _fmt(x: float | None, digits: int = 3) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "unbounded"
    return f"{x:.{digits}f}"


def emit_markdown_summary(bundle: ReportBundle) -> str:
    """Human-readable argumentation summary for the campaign."""
    lines: list[str] = []
    meta = bundle.meta
    lines.append("# SOTIF validation summary")
    lines.append("")
    lines.append(
        f"Tool: {meta.tool} {meta.version} | base seed: {meta.base_seed} | "
        f"runs per scenario: {meta.runs_per_scenario} | dt: {meta.dt} s"
    )
    if meta.input_digests:
        lines.append("")
        lines.append("Input digests:")
        for name in sorted(meta.input_digests):
            lines.append(f"- {name}: `{meta.input_digests[name]}`")
    if not meta.odd_well_formed:
        lines.append("")
        lines.append(
            "Note: the ODD is not nominally well-formed "
            "(sensor range does not exceed both the object distance and the safe distance)."
        )
    lines.append("")

    if not bundle.acceptance:
        lines.append("## Acceptance")
        lines.append("")
        lines.append(
            "Nominal-only run: no triggering conditions were relevant for this ODD; "
            "only the nominal scenario was exercised."
        )
        lines.append("")
    else:
        lines.append("## Acceptance")
        lines.append("")
        failed = [v for v in bundle.acceptance if not v.passed]
        if not failed:
            lines.append("All acceptance criteria met.")
        else:
            lines.append(
                f"{len(failed)} of {len(bundle.acceptance)} condition scenarios "
                "violate the acceptance criteria."
            )
        lines.append("")
        lines.append("| scenario | verdict | violated clauses |")
        lines.append("| --- | --- | --- |")
        for v in bundle.acceptance:
            clauses = (
                "; ".join(
                    f"{x.clause} ({_fmt(x.measured)} vs {_fmt(x.threshold)})"
                    for x in v.violations
                )
                or "-"
            )
            lines.append(
                f"| {v.scenario_id} | {'pass' if v.passed else 'FAIL'} | {clauses} |"
            )
        lines.append("")

    hazard_links: dict[str, list[RiskResult]] = {}
    for r in bundle.risk_table:
        if r.hazard_id is not None:
            hazard_links.setdefault(r.hazard_id, []).append(r)
    if hazard_links:
        lines.append("## Hazards")
        lines.append("")
        for hazard_id in sorted(hazard_links):
            entries = hazard_links[hazard_id]
            names = ", ".join(e.scenario_id for e in entries)
            lines.append(f"### {hazard_id}")
            lines.append("")
            lines.append(f"Linked scenarios: {names}")
            lines.append("")

    if bundle.risk_table:
        lines.append("## Residual risk")
        lines.append("")
        bounded = [r for r in bundle.risk_table if r.hazard_rate_per_hour > 0]
        if bounded:
            worst = min(bounded, key=lambda r: r.hours_to_hazard)
            lines.append(
                f"Worst hours-to-hazard: {_fmt(worst.hours_to_hazard, 1)} h "
                f"({worst.scenario_id}, {worst.hazard_id})"
            )
            lines.append("")
        lines.append(
            "| scenario | hazard | severity | occurrence | risk | rate/h | hours | km |"
        )
        lines.append("| --- | --- | --- | --- | --- | --- | --- | --- |")
        for r in sorted(
            bundle.risk_table,
            key=lambda r: (-int(r.risk_level), -r.hazard_rate_per_hour, r.scenario_id),
        ):
            lines.append(
                f"| {r.scenario_id} | {r.hazard_id or '-'} | {r.severity.name} "
                f"| {r.occurrence_class.name} | {r.risk_level.label} "
                f"| {_fmt(r.hazard_rate_per_hour, 6)} | {_fmt(r.hours_to_hazard, 1)} "
                f"| {_fmt(r.km_to_hazard, 1)} |"
            )
        lines.append("")

    if bundle.mitigation_table:
        lines.append("## Mitigations")
        lines.append("")
        lines.append(
            "| mitigation | scenario | applied | gap mean | collision rate | false activation rate | passes after |"
        )
        lines.append("| --- | --- | --- | --- | --- | --- | --- |")
        for m in bundle.mitigation_table:
            gap = f"{_fmt(m.gap_mean_before)} -> {_fmt(m.gap_mean_after)}"
            coll = f"{_fmt(m.collision_rate_before, 2)} -> {_fmt(m.collision_rate_after, 2)}"
            false = (
                f"{_fmt(m.false_activation_rate_before, 2)} -> "
                f"{_fmt(m.false_activation_rate_after, 2)}"
            )
            passes = "-" if m.passes_after is None else ("yes" if m.passes_after else "no")
            lines.append(
                f"| {m.mitigation_id} | {m.scenario_id} | {'yes' if m.applied else 'no'} "
                f"| {gap} | {coll} | {false} | {passes} |"
            )
        lines.append("")

    return "\n".join(lines) + "\n"
