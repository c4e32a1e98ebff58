"""Relative scheduling cost and fleet aggregation.

The cost at elapsed time t0 since spawn is the distance the vehicle has
fallen behind its ideal constant-ceiling trajectory, plus the further loss
already locked in by having to accelerate back up: ideal position minus
(position - (v_max - v)^2 / (2 a_acc)). Nonnegative for any trajectory that
starts at the ceiling and respects the acceleration limits; zero exactly on
the ideal trajectory; constant once the vehicle has recovered to the ceiling
and stays there.
"""

from __future__ import annotations

from dataclasses import dataclass


def relative_cost(spawn_position: float, spawn_time: float, log, t0: float,
                  limits) -> float:
    """Cost at elapsed time t0 >= 0 since the vehicle's spawn."""
    if t0 < -1e-12:
        raise ValueError("t0 precedes the spawn")
    t_abs = spawn_time + t0
    state = log.state_at(t_abs)
    recovery = (limits.v_max - state.velocity) ** 2 / (2.0 * limits.a_acc)
    return spawn_position + limits.v_max * t0 - (state.position - recovery)


@dataclass(frozen=True)
class FleetStats:
    mean_cost: float
    throughput: float
    count: int


def fleet_stats(result) -> FleetStats:
    """Cooperative-fleet aggregate over one finished run.

    Each cleared cooperative vehicle contributes its cost evaluated at its
    own zone-clearance instant (the value is constant afterwards, so this is
    the stable per-vehicle number). Vehicles still en route at the horizon
    contribute to neither the mean nor the clearance count.
    """
    span = result.horizon
    costs = []
    for veh in result.vehicles:
        if not veh.cooperative:
            continue
        t_clear = result.clearances.get(veh.id)
        if t_clear is None or t_clear > span:
            continue
        costs.append(relative_cost(veh.spawn_position, veh.spawn_time,
                                   result.logs[veh.id], t_clear - veh.spawn_time,
                                   veh.limits))
    if not costs:
        return FleetStats(0.0, 0.0, 0)
    return FleetStats(sum(costs) / len(costs), len(costs) / span, len(costs))
