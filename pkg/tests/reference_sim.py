"""Independent per-dt reference stepper used to validate the fast engine.

This is a literal loop over integration steps implementing the documented
discrete semantics, with no closed-form shortcuts.  It recomputes the
ghost randomness from the public seed scheme rather than reusing engine
internals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sotifkit.core import effective_brake_decel, rss_min_distance
from sotifkit.scenario import Scenario, derive_seed
from sotifkit.simulator import SimConfig


@dataclass
class ReferenceOutcome:
    terminal: str  # "stopped" | "collision" | "timeout"
    terminal_step: int
    final_gap: float
    final_velocity: float
    trigger_step: int | None
    trigger_gap: float | None
    effective_step: int | None
    ghost_triggered: bool


def reference_run(scenario: Scenario, cfg: SimConfig, run_index: int = 0) -> ReferenceOutcome:
    odd = scenario.odd
    veh = odd.vehicle
    eff = scenario.effects
    dt = cfg.dt
    tick_steps = cfg.tick_steps
    max_steps = cfg.max_steps

    d_trigger = rss_min_distance(veh)
    b_eff = effective_brake_decel(veh, odd.mu * eff.mu_factor)
    range_eff = odd.d_perception * eff.perception_range_factor
    delay_steps = max(0, math.ceil((veh.rho + eff.rho_add) / dt - 1e-9))

    n_ticks = (max_steps - 1) // tick_steps + 1 if max_steps > 0 else 0
    rng = np.random.default_rng(derive_seed(scenario.seed, run_index))
    flags = rng.random(n_ticks) < eff.ghost_rate
    gap_u = rng.random(n_ticks)

    x, v = 0.0, veh.v_r
    visible = False
    trigger_step: int | None = None
    trigger_gap: float | None = None
    effective_step: int | None = None
    ghost_triggered = False

    n = 0
    while True:
        gap = odd.d_object - x
        if gap <= 0.0:
            return ReferenceOutcome(
                "collision", n, gap, v, trigger_step, trigger_gap, effective_step, ghost_triggered
            )
        if v == 0.0:
            return ReferenceOutcome(
                "stopped", n, gap, v, trigger_step, trigger_gap, effective_step, ghost_triggered
            )
        if n >= max_steps:
            return ReferenceOutcome(
                "timeout", n, gap, v, trigger_step, trigger_gap, effective_step, ghost_triggered
            )

        ghost_gap: float | None = None
        if n % tick_steps == 0:
            tick = n // tick_steps
            if gap <= range_eff:
                visible = True
            if flags[tick]:
                ghost_gap = gap_u[tick] * d_trigger

        if trigger_step is None:
            perceived = []
            if visible:
                perceived.append(gap)
            if ghost_gap is not None:
                perceived.append(ghost_gap)
            if perceived and min(perceived) <= d_trigger:
                trigger_step = n
                trigger_gap = gap
                ghost_triggered = not (visible and gap <= d_trigger)

        braking = trigger_step is not None and n >= trigger_step + delay_steps
        if braking and effective_step is None:
            effective_step = n
        a = -b_eff if braking else 0.0
        v = max(0.0, v + a * dt)
        x = x + v * dt
        n += 1
