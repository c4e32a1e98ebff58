"""Kinematic ground truth: road geometry, vehicle types, and exact
piecewise-constant-acceleration trajectories.

Positions are road-local front-bumper coordinates in meters, with the
conflict zone of road r occupying (0, d_r) and upstream positions negative.
Velocities saturate at [0, v_max]; saturation is handled by splitting
segments at the exact saturation instant, never by clipping after
integration, so downstream algebra (stopping points, crossing times)
stays closed-form exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

EPS = 1e-9


@dataclass(frozen=True)
class RoadGeometry:
    """Intersection layout: road_count roads, conflict zone (0, d[r]) on road r."""

    road_count: int
    intersection_extent: tuple[float, ...]

    def __post_init__(self):
        if self.road_count < 2:
            raise ValueError("need at least two roads")
        if len(self.intersection_extent) != self.road_count:
            raise ValueError("one extent per road")
        if any(d <= 0 for d in self.intersection_extent):
            raise ValueError("extents must be positive")

    def extent(self, road: int) -> float:
        return self.intersection_extent[road]


@dataclass(frozen=True)
class KinematicLimits:
    """Shared limits of the cooperative fleet.

    a_dec is the magnitude of the strongest deceleration (a positive number);
    commanded accelerations live in [-a_dec, a_acc].
    """

    v_max: float
    a_dec: float
    a_acc: float
    length: float

    def __post_init__(self):
        if min(self.v_max, self.a_dec, self.a_acc, self.length) <= 0:
            raise ValueError("limits must be strictly positive")


@dataclass(frozen=True)
class VehicleState:
    position: float
    velocity: float


@dataclass(frozen=True)
class Vehicle:
    id: int
    road: int
    cooperative: bool
    limits: KinematicLimits
    spawn_time: float
    initial_position: float


def stop_envelope(state: VehicleState, a_dec: float) -> float:
    """Minimum front position reachable from `state` braking at -a_dec.

    Positive value means intersection entry is already unavoidable.
    """
    return state.position + state.velocity * state.velocity / (2.0 * a_dec)


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant-acceleration profile from origin_state at origin_time.

    segments are (duration, acceleration) pairs. Beyond the last segment the
    final velocity is held. Velocity saturation at [0, v_max] is applied by
    exact segment splitting inside evaluate(), so the profile as stored may
    command an acceleration that the saturated motion ignores.
    """

    origin_time: float
    origin_state: VehicleState
    segments: tuple[tuple[float, float], ...]
    v_max: float

    # Resolved phases: (t_start, p, v, a_effective, duration). Built lazily on
    # first evaluation and cached; the dataclass stays logically immutable.
    _phases: list = field(default_factory=list, repr=False, compare=False)

    def phases(self) -> list[tuple[float, float, float, float, float]]:
        if not self._phases:
            self._phases.extend(_build_phases(self))
        return self._phases

    def evaluate(self, t: float) -> VehicleState:
        if t < self.origin_time - EPS:
            raise ValueError(f"t={t} precedes trajectory origin {self.origin_time}")
        ph = self.phases()
        p, v = _eval_phases(ph, t)
        return VehicleState(p, v)

    def final_phase_start(self) -> float:
        ph = self.phases()
        return ph[-1][0]

    def position(self, t: float) -> float:
        return self.evaluate(t).position

    def velocity(self, t: float) -> float:
        return self.evaluate(t).velocity


def _build_phases(traj: Trajectory):
    """Split commanded segments at saturation instants.

    Returns a list of (t_start, p0, v0, a, dur) with a == 0 whenever the
    velocity sits at a saturation boundary the command would cross. The final
    entry always has infinite duration (terminal hold).
    """
    out = []
    t = traj.origin_time
    p = traj.origin_state.position
    v = traj.origin_state.velocity
    vm = traj.v_max
    for dur, a in traj.segments:
        if dur <= 0:
            continue
        remaining = dur
        while remaining > 1e-15:
            if (a > 0 and v >= vm - 1e-15) or (a < 0 and v <= 1e-15) or a == 0.0:
                # held at a boundary (or commanded zero): constant velocity
                v_hold = vm if (a > 0 and v >= vm - 1e-15) else (0.0 if a < 0 and v <= 1e-15 else v)
                if not math.isfinite(remaining):
                    out.append((t, p, v_hold, 0.0, math.inf))
                    return out
                out.append((t, p, v_hold, 0.0, remaining))
                p += v_hold * remaining
                v = v_hold
                t += remaining
                remaining = 0.0
            else:
                # time to hit the relevant saturation boundary
                t_hit = (vm - v) / a if a > 0 else (0.0 - v) / a
                if t_hit >= remaining:
                    out.append((t, p, v, a, remaining))
                    p += v * remaining + 0.5 * a * remaining * remaining
                    v += a * remaining
                    t += remaining
                    remaining = 0.0
                else:
                    out.append((t, p, v, a, t_hit))
                    p += v * t_hit + 0.5 * a * t_hit * t_hit
                    v = vm if a > 0 else 0.0
                    t += t_hit
                    remaining -= t_hit
    out.append((t, p, v, 0.0, math.inf))
    return out


def _eval_phases(phases, t: float) -> tuple[float, float]:
    # phases are contiguous and sorted; linear scan is fine (profiles are short)
    for t0, p0, v0, a, dur in phases:
        if t <= t0 + dur:
            dt = max(0.0, t - t0)
            return p0 + v0 * dt + 0.5 * a * dt * dt, v0 + a * dt
    t0, p0, v0, a, dur = phases[-1]
    dt = t - t0
    return p0 + v0 * dt, v0


def extreme_trajectory(
    state: VehicleState, mode: str, origin_time: float, limits: KinematicLimits
) -> Trajectory:
    """Single unbounded max_accel (+a_acc, clamps at v_max) or min_accel
    (-a_dec, clamps at 0) profile."""
    if mode == "max_accel":
        a = limits.a_acc
    elif mode == "min_accel":
        a = -limits.a_dec
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return Trajectory(origin_time, state, ((math.inf, a),), limits.v_max)


def constant_accel_trajectory(
    state: VehicleState, a: float, origin_time: float, duration: float, limits: KinematicLimits
) -> Trajectory:
    """One bounded constant-acceleration segment followed by terminal hold."""
    return Trajectory(origin_time, state, ((duration, a),), limits.v_max)


def first_crossing_time(traj: Trajectory, threshold: float, t_from: float | None = None):
    """Earliest t >= t_from with position(t) >= threshold, or None if never.

    Exact per-phase quadratic solve; positions are nondecreasing within this
    system (velocities stay >= 0) so the first root is the crossing.
    """
    t0_search = traj.origin_time if t_from is None else max(t_from, traj.origin_time)
    for t0, p0, v0, a, dur in traj.phases():
        t_end = t0 + dur
        if t_end < t0_search:
            continue
        p_end = p0 + v0 * dur + 0.5 * a * dur * dur if math.isfinite(dur) else math.inf
        if a == 0.0 and v0 == 0.0:
            p_end = p0
        lo = max(t0, t0_search)
        dt_lo = lo - t0
        p_lo = p0 + v0 * dt_lo + 0.5 * a * dt_lo * dt_lo
        if p_lo >= threshold:
            return lo
        if p_end < threshold:
            continue
        # solve p0 + v0 dt + a/2 dt^2 = threshold for dt in [dt_lo, dur]
        c = p0 - threshold
        if a == 0.0:
            if v0 <= 0.0:
                continue
            dt = -c / v0
        else:
            disc = v0 * v0 - 2.0 * a * c
            if disc < 0:
                continue
            # first root works for either sign of a when p0 < threshold
            dt = (-v0 + math.sqrt(disc)) / a
        if dt >= dt_lo - 1e-12 and (not math.isfinite(dur) or dt <= dur + 1e-12):
            return t0 + max(dt, dt_lo)
    return None


@dataclass
class TrajectoryLog:
    """Committed motion history of one vehicle: a sorted list of trajectories,
    each valid from its origin_time until the next one's origin_time.

    append() merges a new commitment that extends the previous one with the
    same constant acceleration (keeps logs short over long runs).
    """

    entries: list[Trajectory] = field(default_factory=list)
    _hint: int = field(default=0, repr=False, compare=False)

    def append(self, traj: Trajectory) -> None:
        if self.entries:
            last = self.entries[-1]
            if traj.origin_time < last.origin_time - EPS:
                raise ValueError("log entries must be time-ordered")
            if (
                len(last.segments) == 1
                and len(traj.segments) == 1
                and math.isfinite(last.segments[0][0]) is False
                and math.isfinite(traj.segments[0][0]) is False
                and abs(last.segments[0][1] - traj.segments[0][1]) < 1e-12
            ):
                # unbounded same-acceleration re-commitment: drop (no new info)
                return
            if (
                len(last.segments) == 1
                and len(traj.segments) == 1
                and math.isfinite(last.segments[0][0])
                and math.isfinite(traj.segments[0][0])
                and abs(last.segments[0][1] - traj.segments[0][1]) < 1e-12
                and abs(last.origin_time + last.segments[0][0] - traj.origin_time) < 1e-9
            ):
                merged = Trajectory(
                    last.origin_time,
                    last.origin_state,
                    ((last.segments[0][0] + traj.segments[0][0], last.segments[0][1]),),
                    last.v_max,
                )
                self.entries[-1] = merged
                return
        self.entries.append(traj)

    def active_at(self, t: float) -> Trajectory:
        entries = self.entries
        if not entries:
            raise ValueError("empty log")
        if t < entries[0].origin_time - EPS:
            raise ValueError(f"t={t} precedes first log entry")
        # queries arrive nearly time-monotone: the hinted entry or one of its
        # neighbors almost always covers t, bisection is the cold path
        n = len(entries)
        i = min(self._hint, n - 1)
        if entries[i].origin_time <= t + EPS:
            if i + 1 == n or entries[i + 1].origin_time > t + EPS:
                self._hint = i
                return entries[i]
            if i + 2 == n or entries[i + 2].origin_time > t + EPS:
                self._hint = i + 1
                return entries[i + 1]
            lo, hi = i + 2, n - 1
        elif i > 0 and entries[i - 1].origin_time <= t + EPS:
            self._hint = i - 1
            return entries[i - 1]
        else:
            lo, hi = 0, max(i - 1, 0)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if entries[mid].origin_time <= t + EPS:
                lo = mid
            else:
                hi = mid - 1
        self._hint = lo
        return entries[lo]

    def state_at(self, t: float) -> VehicleState:
        return self.active_at(t).evaluate(t)

    def start_time(self) -> float:
        return self.entries[0].origin_time

    def composite_phases(self, t_end: float):
        """Flatten the log into contiguous (t_start, p, v, a, dur) pieces on
        [start_time, t_end], clipping each entry at its successor's origin."""
        out = []
        n = len(self.entries)
        for i, traj in enumerate(self.entries):
            stop = self.entries[i + 1].origin_time if i + 1 < n else t_end
            stop = min(stop, t_end)
            if stop <= traj.origin_time + 1e-15:
                continue
            for t0, p0, v0, a, dur in traj.phases():
                if t0 >= stop - 1e-15:
                    break
                seg_end = min(t0 + dur, stop)
                if seg_end <= t0 + 1e-15:
                    continue
                out.append((t0, p0, v0, a, seg_end - t0))
        return out
