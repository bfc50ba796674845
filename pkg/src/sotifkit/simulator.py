"""Deterministic discrete-time longitudinal simulation of the AEB function.

The function is staged as perception-sense -> perception-algo -> decision ->
actuation on a 1D road: the ego starts at x=0 moving at constant speed
toward a static object at x=d_object.

Discrete semantics (semi-implicit Euler at ``dt``), which every public
number in a trace obeys:

* Steps n = 0, 1, ... at t = n*dt with state (x_n, v_n); x_0 = 0, v_0 = v_r.
* Terminal check first at each step: collision when gap_n <= 0, stopped
  when v_n == 0, timeout at the horizon step.  A terminal step has no
  perception or decision.
* Perception runs on sensor frames every ``tick_steps`` steps: the object
  enters the percept when gap <= d_perception * perception_range_factor
  (and stays there; the gap never grows), and a ghost detection with gap
  uniform in [0, trigger threshold) appears with probability ghost_rate.
* The decision stage checks every step: the brake latches when the
  closest perceived gap is <= the designed trigger threshold
  rss_min_distance(vehicle).  The deployed threshold cannot know that a
  triggering condition enlarged the response latency, so rho_add does not
  move it; it only delays the brake force.
* Brake force starts ceil((rho + rho_add)/dt) steps after the trigger and
  applies a constant deceleration effective_brake_decel(vehicle,
  mu * mu_factor).
* Integration: v_{n+1} = max(0, v_n + a*dt);  x_{n+1} = x_n + v_{n+1}*dt.

With piecewise-constant acceleration every phase has a closed form, so the
engine resolves trigger, brake-onset, collision, and stop steps
analytically instead of looping over 10^5 steps per run; the test suite
checks it against a literal per-dt stepper.  Identical (scenario, cfg,
run_index) always produces a bit-identical trace.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from . import core
from .errors import ContractViolationError, ParameterError, SimulationError
from .scenario import Scenario, derive_seed

__all__ = [
    "SimConfig",
    "Stage",
    "EventKind",
    "Terminal",
    "SimEvent",
    "SimTrace",
    "KpiReport",
    "SweepStats",
    "simulate",
    "compute_kpis",
    "monte_carlo_sweep",
    "trigger_threshold",
    "export_trace_jsonl",
    "write_kpi_csv",
    "KPI_CSV_HEADER",
]


class Stage(str, Enum):
    PERCEPTION_SENSE = "perception_sense"
    PERCEPTION_ALGO = "perception_algo"
    DECISION = "decision"
    ACTUATION = "actuation"


class EventKind(str, Enum):
    OBJECT_DETECTED = "object_detected"
    GHOST_DETECTED = "ghost_detected"
    BRAKE_TRIGGERED = "brake_triggered"
    BRAKE_EFFECTIVE = "brake_effective"
    STOPPED = "stopped"
    COLLISION = "collision"
    TIMEOUT = "timeout"


class Terminal(str, Enum):
    STOPPED = "stopped"
    COLLISION = "collision"
    TIMEOUT = "timeout"


_STAGE_FOR_KIND = {
    EventKind.GHOST_DETECTED: Stage.PERCEPTION_SENSE,
    EventKind.OBJECT_DETECTED: Stage.PERCEPTION_ALGO,
    EventKind.BRAKE_TRIGGERED: Stage.DECISION,
    EventKind.BRAKE_EFFECTIVE: Stage.ACTUATION,
    EventKind.STOPPED: Stage.ACTUATION,
    EventKind.COLLISION: Stage.ACTUATION,
    EventKind.TIMEOUT: Stage.ACTUATION,
}

_TERMINAL_KINDS = {EventKind.STOPPED, EventKind.COLLISION, EventKind.TIMEOUT}

_STAGE_ORDER = {
    Stage.PERCEPTION_SENSE: 0,
    Stage.PERCEPTION_ALGO: 1,
    Stage.DECISION: 2,
    Stage.ACTUATION: 3,
}


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``perception_tick`` is quantized to a whole number of ``dt`` steps
    (the effective frame period is tick_steps * dt).
    """

    dt: float = 0.001
    max_time: float = 60.0
    perception_tick: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.dt <= self.perception_tick <= self.max_time:
            raise ParameterError(
                "need 0 < dt <= perception_tick <= max_time, got "
                f"dt={self.dt}, perception_tick={self.perception_tick}, "
                f"max_time={self.max_time}"
            )

    @property
    def tick_steps(self) -> int:
        return max(1, round(self.perception_tick / self.dt))

    @property
    def max_steps(self) -> int:
        return int(self.max_time / self.dt + 1e-9)


@dataclass(frozen=True)
class SimEvent:
    time: float
    stage: Stage
    kind: EventKind
    gap: float


@dataclass(frozen=True)
class SimTrace:
    scenario_id: str
    events: tuple[SimEvent, ...]
    states: tuple[core.KinematicState, ...]
    terminal: Terminal


@dataclass(frozen=True)
class KpiReport:
    """Per-run key performance indicators.

    ttc_at_trigger is :data:`core.NO_CLOSING` (infinity) when the brake
    never triggered or the ego was not closing.  A collision implies
    final_gap == 0 (depth clamped) and impact_speed > 0.
    """

    ttc_at_trigger: float
    final_gap: float
    collision: bool
    impact_speed: float
    false_activation: bool
    d_rho_observed: float
    d_act_observed: float


@dataclass(frozen=True)
class SweepStats:
    """Aggregated KPIs for one scenario over repeated runs."""

    scenario_id: str
    runs: int
    collision_rate: float
    false_activation_rate: float
    gap_mean: float
    gap_min: float
    gap_max: float
    impact_speed_mean: float
    impact_speed_min: float
    impact_speed_max: float
    ttc_at_trigger_min: float
    odd_fingerprint: str


def trigger_threshold(scenario: Scenario) -> float:
    """The designed brake-trigger distance for this scenario's vehicle."""
    return core.rss_min_distance(scenario.odd.vehicle)


def _ceil_steps(quotient: float) -> int:
    """Smallest integer >= quotient, forgiving ~1e-9 of float noise."""
    return max(0, math.ceil(quotient - 1e-9))


@dataclass(frozen=True)
class _Resolved:
    """Closed-form resolution of one run on the dt grid."""

    v0: float
    dt: float
    b_eff: float
    d_object: float
    n_trig: int | None  # decision step where the brake latched
    n_eff: int | None   # step where brake force starts (None: never engaged)
    m_stop: int         # braking steps until v == 0 (if engaged)
    terminal_step: int
    terminal: Terminal

    def _brake_advance(self, m: int) -> float:
        # Distance gained after m braking steps; advance ceases once the
        # clamped velocity reaches zero (step m_stop).
        m = min(m, self.m_stop - 1)
        if m <= 0:
            return 0.0
        return m * self.v0 * self.dt - self.b_eff * self.dt * self.dt * m * (m + 1) / 2.0

    def x(self, n: int) -> float:
        if self.n_eff is None or n <= self.n_eff:
            return self.v0 * self.dt * n
        x_eff = self.v0 * self.dt * self.n_eff
        return x_eff + self._brake_advance(n - self.n_eff)

    def v(self, n: int) -> float:
        if self.n_eff is None or n <= self.n_eff:
            return self.v0
        return max(0.0, self.v0 - (n - self.n_eff) * self.b_eff * self.dt)

    def gap(self, n: int) -> float:
        return self.d_object - self.x(n)


def _resolve_run(
    scenario: Scenario, cfg: SimConfig, ghost_steps: np.ndarray
) -> _Resolved:
    odd = scenario.odd
    veh = odd.vehicle
    eff = scenario.effects
    dt = cfg.dt
    max_steps = cfg.max_steps
    tick_steps = cfg.tick_steps

    v0 = veh.v_r
    d_obj = odd.d_object
    range_eff = odd.d_perception * eff.perception_range_factor
    d_trigger = core.rss_min_distance(veh)
    b_eff = core.effective_brake_decel(veh, odd.mu * eff.mu_factor)
    delay_steps = _ceil_steps((veh.rho + eff.rho_add) / dt)

    if v0 == 0.0:
        return _Resolved(v0, dt, b_eff, d_obj, None, None, 0, 0, Terminal.STOPPED)

    def first_step_gap_le(threshold: float) -> int:
        # Smallest n with d_obj - v0*dt*n <= threshold (cruise trajectory).
        if d_obj <= threshold:
            return 0
        return _ceil_steps((d_obj - threshold) / (v0 * dt))

    # Natural trigger: needs visibility (a perception-tick property) and
    # the gap at or below the trigger threshold (checked every step).
    if d_obj <= range_eff:
        n_vis = 0
    else:
        n_vis = tick_steps * _ceil_steps((d_obj - range_eff) / (v0 * dt * tick_steps))
    n_nat = max(n_vis, first_step_gap_le(d_trigger))

    n_ghost = int(ghost_steps[0]) if ghost_steps.size else None
    n_trig: int | None
    if n_ghost is not None and n_ghost < n_nat:
        n_trig = n_ghost
    else:
        n_trig = n_nat

    n_hit_cruise = first_step_gap_le(0.0)  # first collided step while cruising

    if n_trig >= min(n_hit_cruise, max_steps):
        # Never triggered: cruise into the object or run out the clock.
        if n_hit_cruise <= max_steps:
            return _Resolved(v0, dt, b_eff, d_obj, None, None, 0, n_hit_cruise, Terminal.COLLISION)
        return _Resolved(v0, dt, b_eff, d_obj, None, None, 0, max_steps, Terminal.TIMEOUT)

    n_eff = n_trig + delay_steps
    if n_hit_cruise <= n_eff or n_eff >= max_steps:
        # Collision or horizon before any brake force is applied.
        if n_hit_cruise <= max_steps:
            return _Resolved(v0, dt, b_eff, d_obj, n_trig, None, 0, n_hit_cruise, Terminal.COLLISION)
        return _Resolved(v0, dt, b_eff, d_obj, n_trig, None, 0, max_steps, Terminal.TIMEOUT)

    # Braking engages at n_eff with speed still v0.
    m_stop = _ceil_steps(v0 / (b_eff * dt))
    x_eff = v0 * dt * n_eff
    need = d_obj - x_eff  # > 0 because n_hit_cruise > n_eff

    resolved = _Resolved(v0, dt, b_eff, d_obj, n_trig, n_eff, m_stop, 0, Terminal.STOPPED)

    # Smallest braking step m with advance(m) >= need, if any: collision.
    m_coll: int | None = None
    a_q = b_eff * dt * dt / 2.0
    lin = v0 * dt - a_q
    disc = lin * lin - 4.0 * a_q * need
    if disc >= 0.0:
        root = (lin - math.sqrt(disc)) / (2.0 * a_q)
        m = max(1, _ceil_steps(root))
        while m > 1 and resolved._brake_advance(m - 1) >= need:
            m -= 1
        while m <= m_stop - 1 and resolved._brake_advance(m) < need:
            m += 1
        if m <= m_stop - 1 and resolved._brake_advance(m) >= need:
            m_coll = m

    if m_coll is not None:
        terminal_step, terminal = n_eff + m_coll, Terminal.COLLISION
    else:
        terminal_step, terminal = n_eff + m_stop, Terminal.STOPPED
    if terminal_step > max_steps:
        terminal_step, terminal = max_steps, Terminal.TIMEOUT

    return _Resolved(v0, dt, b_eff, d_obj, n_trig, n_eff, m_stop, terminal_step, terminal)


def _first_visible_tick(res: _Resolved, range_eff: float, tick_steps: int) -> int | None:
    """First perception tick (strictly before terminal) seeing the object.

    The gap is nonincreasing along the whole trajectory, so this is a
    binary search over tick indices.
    """
    last_tick = (res.terminal_step - 1) // tick_steps
    if res.terminal_step == 0 or last_tick < 0:
        return None
    if res.gap(last_tick * tick_steps) > range_eff:
        return None
    lo, hi = 0, last_tick  # invariant: gap(hi) <= range_eff
    while lo < hi:
        mid = (lo + hi) // 2
        if res.gap(mid * tick_steps) <= range_eff:
            hi = mid
        else:
            lo = mid + 1
    return lo * tick_steps


def _ghost_draws(
    scenario: Scenario, cfg: SimConfig, run_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-run ghost randomness: flagged tick steps and their fake gaps.

    Both uniform streams are always drawn in full so that runs with the
    same seed stay coupled across effect changes (a lower ghost_rate
    selects a subset of the same flagged ticks).
    """
    n_ticks = (cfg.max_steps - 1) // cfg.tick_steps + 1 if cfg.max_steps > 0 else 0
    rng = np.random.default_rng(derive_seed(scenario.seed, run_index))
    u_flag = rng.random(n_ticks)
    u_gap = rng.random(n_ticks)
    ticks = np.flatnonzero(u_flag < scenario.effects.ghost_rate)
    d_trigger = core.rss_min_distance(scenario.odd.vehicle)
    return ticks * cfg.tick_steps, u_gap[ticks] * d_trigger


def simulate(scenario: Scenario, cfg: SimConfig | None = None, run_index: int = 0) -> SimTrace:
    """Run one scenario to its terminal and return the full trace.

    ``run_index`` selects the run's random stream within the scenario's
    seed (sweeps use 0, 1, 2, ...); equal inputs give bit-identical traces.
    """
    if cfg is None:
        cfg = SimConfig()
    ghost_steps, ghost_gaps = _ghost_draws(scenario, cfg, run_index)
    res = _resolve_run(scenario, cfg, ghost_steps)

    for name, value in (("position", res.x(res.terminal_step)), ("velocity", res.v(res.terminal_step))):
        if not math.isfinite(value):
            raise SimulationError(
                f"non-finite {name} at terminal of scenario '{scenario.id}'"
            )

    dt = cfg.dt
    range_eff = scenario.odd.d_perception * scenario.effects.perception_range_factor

    events: list[SimEvent] = []

    def add(step: int, kind: EventKind, gap: float) -> None:
        events.append(SimEvent(step * dt, _STAGE_FOR_KIND[kind], kind, gap))

    n_vis = _first_visible_tick(res, range_eff, cfg.tick_steps)
    if n_vis is not None:
        add(n_vis, EventKind.OBJECT_DETECTED, res.gap(n_vis))
    for step, fake_gap in zip(ghost_steps, ghost_gaps):
        if step >= res.terminal_step:
            break
        add(int(step), EventKind.GHOST_DETECTED, float(fake_gap))
    if res.n_trig is not None:
        add(res.n_trig, EventKind.BRAKE_TRIGGERED, res.gap(res.n_trig))
    if res.n_eff is not None and res.n_eff < res.terminal_step:
        add(res.n_eff, EventKind.BRAKE_EFFECTIVE, res.gap(res.n_eff))
    add(res.terminal_step, EventKind[res.terminal.name], res.gap(res.terminal_step))

    events.sort(key=lambda e: (e.time, _STAGE_ORDER[e.stage]))

    sample_steps = sorted(
        set(range(0, res.terminal_step, cfg.tick_steps))
        | {round(e.time / dt) for e in events}
        | {res.terminal_step}
    )
    states = tuple(
        core.KinematicState(position=res.x(n), velocity=res.v(n), time=n * dt)
        for n in sample_steps
    )

    return SimTrace(
        scenario_id=scenario.id,
        events=tuple(events),
        states=states,
        terminal=res.terminal,
    )


def _state_at(trace: SimTrace, time: float) -> core.KinematicState:
    for state in trace.states:
        if state.time == time:
            return state
    raise ContractViolationError(f"no state sampled at t={time}")


def compute_kpis(trace: SimTrace, scenario: Scenario) -> KpiReport:
    """Derive the KPI report from a finished trace."""
    terminal_events = [e for e in trace.events if e.kind in _TERMINAL_KINDS]
    if len(terminal_events) != 1:
        raise ContractViolationError(
            f"trace '{trace.scenario_id}' has {len(terminal_events)} terminal events, expected 1"
        )
    terminal_event = terminal_events[0]
    terminal_state = _state_at(trace, terminal_event.time)

    collision = trace.terminal is Terminal.COLLISION
    final_gap = max(0.0, terminal_event.gap)
    impact_speed = terminal_state.velocity if collision else 0.0

    trigger = next((e for e in trace.events if e.kind is EventKind.BRAKE_TRIGGERED), None)
    effective = next((e for e in trace.events if e.kind is EventKind.BRAKE_EFFECTIVE), None)

    if trigger is None:
        ttc_at_trigger = core.NO_CLOSING
        false_activation = False
        d_rho_observed = 0.0
        d_act_observed = 0.0
    else:
        trigger_state = _state_at(trace, trigger.time)
        ttc_at_trigger = core.ttc(max(0.0, trigger.gap), trigger_state.velocity, 0.0)
        ghost_times = {e.time for e in trace.events if e.kind is EventKind.GHOST_DETECTED}
        false_activation = (
            trigger.time in ghost_times and trigger.gap > trigger_threshold(scenario)
        )
        response_end = effective if effective is not None else terminal_event
        d_rho_observed = _state_at(trace, response_end.time).position - trigger_state.position
        if effective is not None:
            d_act_observed = terminal_state.position - _state_at(trace, effective.time).position
        else:
            d_act_observed = 0.0

    return KpiReport(
        ttc_at_trigger=ttc_at_trigger,
        final_gap=final_gap,
        collision=collision,
        impact_speed=impact_speed,
        false_activation=false_activation,
        d_rho_observed=d_rho_observed,
        d_act_observed=d_act_observed,
    )


def _run_kpis(scenario: Scenario, cfg: SimConfig, run_index: int) -> KpiReport:
    return compute_kpis(simulate(scenario, cfg, run_index), scenario)


def _aggregate(scenario: Scenario, kpis: Sequence[KpiReport]) -> SweepStats:
    gaps = [k.final_gap for k in kpis]
    speeds = [k.impact_speed for k in kpis]
    n = len(kpis)
    return SweepStats(
        scenario_id=scenario.id,
        runs=n,
        collision_rate=sum(k.collision for k in kpis) / n,
        false_activation_rate=sum(k.false_activation for k in kpis) / n,
        gap_mean=sum(gaps) / n,
        gap_min=min(gaps),
        gap_max=max(gaps),
        impact_speed_mean=sum(speeds) / n,
        impact_speed_min=min(speeds),
        impact_speed_max=max(speeds),
        ttc_at_trigger_min=min(k.ttc_at_trigger for k in kpis),
        odd_fingerprint=scenario.odd.fingerprint(),
    )


def monte_carlo_sweep(
    scenarios: Sequence[Scenario],
    cfg: SimConfig | None = None,
    runs_per_scenario: int = 1,
    workers: int = 1,
) -> list[SweepStats]:
    """Repeated-run KPI statistics per scenario.

    Run i of a scenario uses the random stream (scenario.seed, i), so the
    result is a pure function of the inputs: execution order and the
    worker count cannot change it.  Simulation errors are re-raised with
    the scenario id attached.
    """
    if runs_per_scenario < 1:
        raise ParameterError(f"runs_per_scenario must be >= 1, got {runs_per_scenario}")
    if cfg is None:
        cfg = SimConfig()

    results: list[SweepStats] = []
    for scenario in scenarios:
        try:
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    kpis = list(
                        pool.map(
                            lambda i: _run_kpis(scenario, cfg, i),
                            range(runs_per_scenario),
                        )
                    )
            else:
                kpis = [_run_kpis(scenario, cfg, i) for i in range(runs_per_scenario)]
        except SimulationError as exc:
            raise SimulationError(f"scenario '{scenario.id}': {exc}") from exc
        results.append(_aggregate(scenario, kpis))
    return results


def export_trace_jsonl(trace: SimTrace, path: str | Path) -> None:
    """Write a trace as JSON lines: one event per line plus a summary object."""
    lines = [
        json.dumps(
            {"time": e.time, "stage": e.stage.value, "kind": e.kind.value, "gap": e.gap}
        )
        for e in trace.events
    ]
    summary = {
        "summary": {
            "scenario_id": trace.scenario_id,
            "terminal": trace.terminal.value,
            "events": len(trace.events),
            "states": [
                {"time": s.time, "position": s.position, "velocity": s.velocity}
                for s in trace.states
            ],
        }
    }
    lines.append(json.dumps(summary))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


KPI_CSV_HEADER = (
    "scenario_id",
    "runs",
    "collision_rate",
    "false_activation_rate",
    "gap_mean",
    "gap_min",
    "gap_max",
    "impact_speed_max",
)


def write_kpi_csv(stats: Sequence[SweepStats], path: str | Path) -> None:
    """Write sweep aggregates as CSV (one row per scenario)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(KPI_CSV_HEADER)
        for s in stats:
            writer.writerow(
                [
                    s.scenario_id,
                    s.runs,
                    s.collision_rate,
                    s.false_activation_rate,
                    s.gap_mean,
                    s.gap_min,
                    s.gap_max,
                    s.impact_speed_max,
                ]
            )
