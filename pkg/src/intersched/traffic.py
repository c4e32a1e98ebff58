"""Scenario construction: arrival processes, road assignment, parameter
jitter, and the scripted behaviors of non-cooperative vehicles.

Cooperative arrivals are a Poisson stream (exponential gaps); non-cooperative
arrivals come at a constant interval. Every shared geometric parameter gets a
relative jitter of 1e-6 so ties in the ordering problem are broken almost
surely. Spawns that would start inside the previous same-road vehicle's
headway are pushed back in time, never dropped, so arrival order survives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import KinematicLimits, VehicleState

REL_JITTER = 1e-6
BEHAVIOR_KINDS = ("constant_speed", "braking_pulse", "random_bounded")


@dataclass(frozen=True)
class ArrivalModel:
    """Validated arrival-process parameters. noncoop_interval = inf disables
    the non-cooperative stream; coop_rate = 0 disables the cooperative one."""

    coop_rate: float
    noncoop_interval: float
    spawn_position: float
    horizon: float

    def __post_init__(self):
        if self.coop_rate < 0.0 or self.noncoop_interval <= 0.0:
            raise ValueError("arrival rates must be nonnegative")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class NoncoopBehavior:
    """Open-loop policy tag. The brake window is a position interval
    (upstream of the entry, so negative) where braking_pulse floors the
    brake; outside it the vehicle recovers to the ceiling."""

    kind: str = "constant_speed"
    brake_window: tuple[float, float] = (-60.0, -30.0)

    def __post_init__(self):
        if self.kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior kind {self.kind!r}")
        if self.brake_window[1] < self.brake_window[0]:
            raise ValueError("brake window is reversed")


@dataclass(frozen=True)
class VehicleSpec:
    id: int
    road: int
    spawn_time: float
    spawn_position: float  # jittered; pre-jitter value is -(A+B)
    cooperative: bool
    behavior: NoncoopBehavior | None = None


@dataclass(frozen=True)
class TrafficScenario:
    """Everything a run needs: the spawn list plus the jittered shared
    parameters and an echo of the generating configuration."""

    vehicles: tuple[VehicleSpec, ...]
    extents: tuple[float, ...]   # jittered entry spans per road
    follow_gap: float            # jittered l + delta
    epoch_gap: float             # jittered epoch gap
    limits: KinematicLimits
    A: float
    B: float
    W: int
    v_red: float
    tau: float
    tick_gap: float
    horizon: float
    seed: int

    @property
    def road_count(self) -> int:
        return len(self.extents)

    def spawn_state(self, spec: VehicleSpec) -> VehicleState:
        return VehicleState(spec.spawn_position, self.limits.v_max)


def draw_coop_arrival_times(rng: np.random.Generator, rate: float,
                            horizon: float) -> np.ndarray:
    """Raw exponential-gap arrival instants in (0, horizon]. This is the
    stream the distributional test looks at; headway back-shifts happen
    later and deliberately fatten small gaps."""
    if rate <= 0.0:
        return np.empty(0)
    out = []
    t = 0.0
    while True:
        block = rng.exponential(1.0 / rate, size=256)
        for g in block:
            t += g
            if t > horizon:
                return np.array(out)
            out.append(t)


def generate_scenario(config, seed: int) -> TrafficScenario:
    """Deterministic scenario draw. config is duck-typed (RunConfig shape):
    needs roads, d, l, v_max, a_dec, a_acc, v_R, A, B, W, delta, tau,
    epoch_gap, tick_gap, lambda_coop, lambda_noncoop, noncoop_behavior,
    horizon."""
    if config.horizon <= 0.0:
        raise ValueError("horizon must be positive")
    interval = math.inf if config.lambda_noncoop <= 0.0 else 1.0 / config.lambda_noncoop
    model = ArrivalModel(config.lambda_coop, interval,
                         -(config.A + config.B), config.horizon)
    limits = KinematicLimits(config.v_max, config.a_dec, config.a_acc, config.l)
    rng = np.random.default_rng([0x5CE0, seed])

    def jitter(value: float) -> float:
        return value * (1.0 + rng.uniform(-REL_JITTER, REL_JITTER))

    extents = tuple(jitter(d) for d in config.d)
    follow_gap = jitter(config.l + config.delta)
    epoch_gap = jitter(config.epoch_gap)

    coop_times = draw_coop_arrival_times(rng, model.coop_rate, model.horizon)
    if math.isfinite(model.noncoop_interval):
        n_non = int(model.horizon / model.noncoop_interval)
        non_times = model.noncoop_interval * np.arange(1, n_non + 1)
    else:
        non_times = np.empty(0)
    merged = sorted(
        [(float(t), True, k) for k, t in enumerate(coop_times)]
        + [(float(t), False, k) for k, t in enumerate(non_times)],
        key=lambda row: (row[0], not row[1], row[2]),
    )

    roads = rng.integers(0, config.roads, size=len(merged))
    headway = follow_gap / limits.v_max + 1e-9
    last_on_road = [-math.inf] * config.roads
    rows = []
    for (t, coop, _), road in zip(merged, roads):
        t = max(t, last_on_road[road] + headway)
        last_on_road[road] = t
        behavior = None
        if not coop:
            kind = config.noncoop_behavior
            if kind == "mixed":
                kind = BEHAVIOR_KINDS[int(rng.integers(0, len(BEHAVIOR_KINDS)))]
            behavior = NoncoopBehavior(kind=kind)
        rows.append((t, int(road), coop, behavior, jitter(model.spawn_position)))

    rows.sort(key=lambda r: (r[0], not r[2]))
    vehicles = tuple(
        VehicleSpec(i, road, t, pos, coop, behavior)
        for i, (t, road, coop, behavior, pos) in enumerate(rows)
    )
    return TrafficScenario(
        vehicles=vehicles, extents=extents, follow_gap=follow_gap,
        epoch_gap=epoch_gap, limits=limits, A=config.A, B=config.B,
        W=config.W, v_red=config.v_R, tau=config.tau,
        tick_gap=config.tick_gap, horizon=config.horizon, seed=seed,
    )


def noncoop_policy_step(state: VehicleState, behavior: NoncoopBehavior,
                        rng: np.random.Generator,
                        limits: KinematicLimits) -> float:
    """Acceleration for the next tick. Velocity saturation at 0 and v_max is
    enforced by the trajectory builder, so the returned value only has to
    stay inside [-a_dec, a_acc]."""
    if behavior.kind == "constant_speed":
        return 0.0 if state.velocity >= limits.v_max - 1e-12 else limits.a_acc
    if behavior.kind == "braking_pulse":
        lo, hi = behavior.brake_window
        if lo <= state.position < hi:
            return -limits.a_dec
        return 0.0 if state.velocity >= limits.v_max - 1e-12 else limits.a_acc
    return float(rng.uniform(-limits.a_dec, limits.a_acc))
