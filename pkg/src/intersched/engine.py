"""Discrete-event simulation clock.

Shared epochs drive the upstream self-organization stage for cooperative
vehicles in [-A-B, -B]; per-vehicle 0.1 s ticks drive the boundary-stage
planner in [-B, 0]. A vehicle whose tick endpoint goes envelope-positive is
committed: its log already floors the throttle forever, so it stops ticking
and the zone-crossing instants fall out of its final trajectory. Cooperative
peers are observed with per-message uniform delay in [0, tau]; so are
non-cooperative vehicles unless a different delay bound is given. Safety
violations are collected by a post-run audit, never raised.

Same-tick decisions are computed from the pre-tick logs and appended
afterwards, so processing order inside one tick cannot leak information;
tick_order exists only so a test can prove that.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    KinematicLimits,
    RoadGeometry,
    Trajectory,
    TrajectoryLog,
    VehicleState,
    extreme_trajectory,
    first_crossing_time,
    stop_envelope,
)
from ._fastpath import HAVE_FAST, FastPlanner
from ._kernels import observe_batch
from .long_horizon import EpochView, LongHorizonParams, epoch_step
from .safety import TOL, _crossing, audit
from .short_horizon import (
    Knowledge,
    Observation,
    ShortHorizonParams,
    algorithm2_step,
    baseline_minimax_step,
    in_region_C,
)
from .traffic import NoncoopBehavior, TrafficScenario, noncoop_policy_step

_SPAWN, _EPOCH, _DECIDE = 0, 1, 2


@dataclass(frozen=True)
class SimVehicle:
    id: int
    road: int
    cooperative: bool
    spawn_time: float
    spawn_position: float
    limits: KinematicLimits
    behavior: NoncoopBehavior | None = None


@dataclass(frozen=True)
class DecisionRecord:
    time: float
    vehicle: int
    branch: str  # "epoch" | "floor" | "commit" | "track" | "noncoop"
    p_end: float
    v_end: float


@dataclass(frozen=True)
class HandoffRecord:
    """Logged when a cooperative vehicle crosses -B: the frozen predecessor
    and the worst pairwise separation slack against every other cooperative
    vehicle at that instant (negative slack = ordering not yet converged)."""

    time: float
    vehicle: int
    predecessor: int | None
    separation_slack: float
    velocity: float


@dataclass
class _AuditRow:
    vehicle: SimVehicle
    log: TrajectoryLog


@dataclass
class SimResult:
    scenario: TrafficScenario
    policy: str
    seed: int
    horizon: float
    vehicles: tuple[SimVehicle, ...]
    logs: dict[int, TrajectoryLog]
    decisions: list[DecisionRecord]
    handoffs: list[HandoffRecord]
    entries: dict[int, float]
    clearances: dict[int, float]
    violations: list


@dataclass
class _Live:
    spec: SimVehicle
    log: TrajectoryLog
    stage: str  # "long" | "short" | "done"
    ideal_ref: float
    pred: int | None = None
    pred_dropped: bool = False
    handoff_at: float | None = None
    committed: bool = False
    in_zone: bool = False  # true position has reached -B (never reverts)
    wake: float = -math.inf  # no -B arrival possible before this instant


class _Sim:
    def __init__(self, scenario: TrafficScenario, policy: str, seed: int,
                 noncoop_delay, tick_order: str, fast: bool | None = None):
        if policy not in ("two_stage", "baseline_minimax"):
            raise ValueError(f"unknown policy {policy!r}")
        self.sc = scenario
        self.policy = policy
        self.seed = seed
        self.tick = scenario.tick_gap
        self.horizon = scenario.horizon
        self.reverse_ticks = tick_order == "descending"
        lim = scenario.limits
        self.lim = lim
        self.geometry = RoadGeometry(scenario.road_count, scenario.extents)
        self.sh = ShortHorizonParams(
            B=scenario.B, decision_gap=scenario.tick_gap, tau=scenario.tau,
            limits=lim, geometry=self.geometry)
        use_fast = HAVE_FAST if fast is None else fast
        self.fastplan = FastPlanner(self.sh) if use_fast else None
        self.lh = LongHorizonParams(
            window=scenario.W, gap=scenario.follow_gap, v_red=scenario.v_red,
            extents=scenario.extents, limits=lim)
        self.nc_delay = scenario.tau if noncoop_delay is None else float(noncoop_delay)
        self.rng_obs = np.random.default_rng([181, seed])
        self.rng_nc = np.random.default_rng([78, seed])
        # beyond this position nothing can enter any conflict region again
        self.gone_beyond = max(scenario.extents) + 2.0 * lim.length + 3.0
        self.live: dict[int, _Live] = {}
        self._obs_time = -math.inf
        self._obs_table: list = []
        self._slot: dict[int, int] = {}
        n_spec = len(scenario.vehicles)
        self._rows = np.zeros((max(n_spec, 1), 32, 5))
        self._rowc = np.zeros(max(n_spec, 1), dtype=np.int64)
        self._rowt0 = np.full(max(n_spec, 1), math.inf)
        self._obs_out = np.empty((64, 2))
        self.last_coop_handoff: int | None = None
        self.decisions: list[DecisionRecord] = []
        self.handoffs: list[HandoffRecord] = []
        self.heap: list = []
        self._seq = 0
        for spec in scenario.vehicles:
            if spec.spawn_time <= self.horizon:
                self._push(spec.spawn_time, _SPAWN, ("spawn", spec.id))
        k, t_e = 1, scenario.epoch_gap
        while t_e <= self.horizon:
            self._push(t_e, _EPOCH, ("epoch", -1))
            k += 1
            t_e = k * scenario.epoch_gap
        self._push(0.0, _EPOCH, ("epoch", -1))

    # ------------------------------------------------------------------
    def _push(self, t: float, prio: int, payload) -> None:
        heapq.heappush(self.heap, (t, prio, self._seq, payload))
        self._seq += 1

    # ------------------------------------------------------------------
    def run(self) -> SimResult:
        while self.heap:
            t, prio, _, payload = self.heap[0]
            if t > self.horizon + 1e-9:
                break
            batch = []
            while self.heap and self.heap[0][0] == t and self.heap[0][1] == prio:
                batch.append(heapq.heappop(self.heap)[3])
            if prio == _SPAWN:
                for _, vid in batch:
                    self._spawn(vid, t)
            elif prio == _EPOCH:
                self._epoch(t)
            else:
                self._decide_batch(t, batch)
        return self._finish()

    # ------------------------------------------------------------------
    def _spawn(self, vid: int, t: float) -> None:
        spec = self.sc.vehicles[vid]
        veh = SimVehicle(spec.id, spec.road, spec.cooperative, spec.spawn_time,
                         spec.spawn_position, self.lim, spec.behavior)
        state = VehicleState(spec.spawn_position, self.lim.v_max)
        log = TrajectoryLog()
        log.append(Trajectory(t, state, ((math.inf, 0.0),), self.lim.v_max))
        ideal_ref = spec.spawn_position - self.lim.v_max * spec.spawn_time
        live = _Live(veh, log, "long", ideal_ref)
        self.live[vid] = live
        self._slot[vid] = len(self._slot)
        self._refresh(live)
        if not spec.cooperative:
            live.stage = "short"
            self._push(t, _DECIDE, ("ntick", vid))
            return
        if self.sc.A <= 0.0 or spec.spawn_position >= -self.sc.B:
            live.stage = "short"
            self._push(t, _DECIDE, ("handoff", vid))
        else:
            next_epoch = self.sc.epoch_gap * (math.floor(t / self.sc.epoch_gap) + 1.0)
            self._maybe_handoff(live, next_epoch)

    def _maybe_handoff(self, live: _Live, valid_until: float) -> None:
        x = first_crossing_time(live.log.entries[-1], -self.sc.B)
        if x is not None and x <= min(valid_until + 1e-9, self.horizon):
            live.handoff_at = x
            self._push(x, _DECIDE, ("handoff", live.spec.id))

    # ------------------------------------------------------------------
    def _epoch(self, t: float) -> None:
        active = [lv for lv in self.live.values()
                  if lv.spec.cooperative and lv.stage == "long"
                  and lv.handoff_at is None]
        if not active:
            return
        active.sort(key=lambda lv: lv.spec.id)
        t_next = t + self.sc.epoch_gap
        staged = []
        for ego in active:
            rows = []
            for other in active:
                if other is ego:
                    st = ego.log.state_at(t)
                else:
                    age = float(self.rng_obs.uniform(0.0, self.sc.tau))
                    stamp = max(t - age, other.spec.spawn_time)
                    st = other.log.state_at(stamp)
                rows.append((other.spec.id, other.spec.road, st.position,
                             other.ideal_ref))
            view = EpochView.build(t, rows, self.sc.road_count)
            staged.append((ego, epoch_step(view, ego.spec.id, self.lh, t_next)))
        for ego, dec in staged:
            ego.log.append(dec.trajectory)
            self._refresh(ego)
            end = dec.trajectory.evaluate(t_next)
            self.decisions.append(DecisionRecord(t, ego.spec.id, "epoch",
                                                 end.position, end.velocity))
            self._maybe_handoff(ego, t_next)

    # ------------------------------------------------------------------
    def _next_tick(self, t: float) -> float:
        """First shared tick-grid instant strictly after t. Handoffs land
        between grid points, so the first planning interval is shorter than
        the tick gap; every interval stays within the decision-gap bound."""
        return (math.floor(t / self.tick + 1e-9) + 1.0) * self.tick

    # ------------------------------------------------------------------
    def _centered(self, lv: _Live, t: float) -> float:
        st = lv.log.state_at(t)
        return st.position - self.sc.extents[lv.spec.road] / 2.0

    def _handoff(self, vid: int, t: float) -> None:
        # the passing order is realized by -B crossing order, so the
        # order-predecessor is simply the previous cooperative handoff;
        # nearest-by-position would jump queued traffic and break the
        # follow chain that zone exclusivity rests on
        live = self.live[vid]
        live.stage = "short"
        live.handoff_at = t
        live.pred = self.last_coop_handoff
        self.last_coop_handoff = vid
        c_ego = self._centered(live, t)
        slack = math.inf
        for lv in self.live.values():
            if (not lv.spec.cooperative or lv.spec.id == vid
                    or lv.spec.spawn_time > t + 1e-12):
                continue
            c = self._centered(lv, t)
            lead_road = lv.spec.road if c >= c_ego else live.spec.road
            req = self.sc.follow_gap
            if lv.spec.road != live.spec.road:
                req += self.sc.extents[lead_road]
            slack = min(slack, abs(c - c_ego) - req)
        self.handoffs.append(HandoffRecord(
            t, vid, live.pred, slack, live.log.state_at(t).velocity))

    # ------------------------------------------------------------------
    def _observe(self, target: _Live, t: float, hi: float) -> Observation:
        age = float(self.rng_obs.uniform(0.0, hi)) if hi > 0.0 else 0.0
        stamp = max(t - age, target.spec.spawn_time)
        return Observation(target.spec.id, target.log.state_at(stamp), stamp,
                           target.spec.road)

    def _refresh(self, lv: _Live) -> None:
        """Cache the tail of the vehicle's log as flat phase rows so the
        observation batch can evaluate recent stamps without touching the
        log. Three entries cover any stamp at most two tick gaps old;
        older stamps fall back to the exact log path."""
        k = self._slot[lv.spec.id]
        entries = lv.log.entries
        use = entries[-3:]
        rows = self._rows[k]
        cap = rows.shape[0]
        n = 0
        for i, entry in enumerate(use):
            nxt = use[i + 1].origin_time if i + 1 < len(use) else math.inf
            for t0, p0, v0, a, dur in entry.phases():
                if t0 >= nxt:
                    break
                if t0 + dur > nxt:
                    dur = nxt - t0
                if n == cap:
                    # cannot represent: defer every stamp to the log path
                    self._rowc[k] = 0
                    self._rowt0[k] = math.inf
                    return
                rows[n, 0] = t0
                rows[n, 1] = p0
                rows[n, 2] = v0
                rows[n, 3] = a
                rows[n, 4] = dur
                n += 1
        rows[n - 1, 4] = math.inf
        self._rowc[k] = n
        self._rowt0[k] = use[0].origin_time

    def _broadcast(self, t: float):
        """One stamped observation per relevant vehicle per instant, shared
        by every receiver deciding at that instant. Targets still upstream
        of -B are excluded before any draw: positions never decrease and
        stamps never exceed t, so an aged observation could not pass the -B
        filter either and the kept set is unchanged. While upstream, a
        vehicle is only re-examined once it could have reached -B at full
        speed."""
        if t == self._obs_time:
            return self._obs_table
        kept = []
        for vid in sorted(self.live):
            lv = self.live[vid]
            if lv.stage == "done":
                continue
            if not lv.in_zone:
                if t < lv.wake:
                    continue
                p_true = lv.log.state_at(t).position
                if p_true < -self.sc.B:
                    lv.wake = t + (-self.sc.B - p_true) / self.lim.v_max
                    continue
                lv.in_zone = True
            kept.append(lv)
        table = []
        n = len(kept)
        if n:
            if n > self._obs_out.shape[0]:
                self._obs_out = np.empty((2 * n, 2))
            u = self.rng_obs.uniform(0.0, 1.0, n)
            idxs = np.empty(n, dtype=np.int64)
            stamps = np.empty(n)
            for k, lv in enumerate(kept):
                hi = self.sc.tau if lv.spec.cooperative else self.nc_delay
                s = t - u[k] * hi
                if s < lv.spec.spawn_time:
                    s = lv.spec.spawn_time
                stamps[k] = s
                idxs[k] = self._slot[lv.spec.id]
            out = self._obs_out
            observe_batch(self._rows, self._rowc, idxs, stamps, out)
            for k, lv in enumerate(kept):
                s = float(stamps[k])
                if s < self._rowt0[idxs[k]]:
                    st = lv.log.state_at(s)
                    p, v = st.position, st.velocity
                else:
                    p = float(out[k, 0])
                    v = float(out[k, 1])
                if p > self.gone_beyond:
                    lv.stage = "done"
                    continue
                if p < -self.sc.B:
                    continue
                table.append((lv.spec.id, lv.spec.cooperative,
                              Observation(lv.spec.id, VehicleState(p, v), s,
                                          lv.spec.road)))
        self._obs_time = t
        self._obs_table = table
        return table

    def _adversaries(self, ego_id: int, t: float, include_coop: bool):
        return tuple(obs for vid, coop, obs in self._broadcast(t)
                     if vid != ego_id and (include_coop or not coop))

    def _knowledge(self, live: _Live, t: float) -> Knowledge:
        if self.policy == "baseline_minimax":
            return Knowledge(live.spec.road, None,
                             self._adversaries(live.spec.id, t, True), True)
        pred_obs = None
        if live.pred is not None and not live.pred_dropped:
            target = self.live[live.pred]
            obs = self._observe(target, t, self.sc.tau)
            # release the link once the predecessor's rear has cleared its
            # own zone box with margin; it can never conflict again
            span = self.lim.length + self.sc.extents[target.spec.road]
            if obs.state.position > span + self.lim.length + 3.0:
                live.pred_dropped = True
            else:
                pred_obs = obs
        return Knowledge(live.spec.road, pred_obs,
                         self._adversaries(live.spec.id, t, False),
                         live.pred is None or live.pred_dropped)

    # ------------------------------------------------------------------
    def _decide_batch(self, t: float, batch) -> None:
        hoffs = [vid for kind, vid in batch if kind == "handoff"]
        if hoffs:
            # same-instant handoffs enter the chain front-to-back so the
            # link assignment cannot depend on tick processing order
            hoffs.sort(key=lambda v: (-self._centered(self.live[v], t), v))
            for vid in hoffs:
                self._handoff(vid, t)
        order = sorted(batch, key=lambda kv: kv[1], reverse=self.reverse_ticks)
        staged = []
        for kind, vid in order:
            live = self.live.get(vid)
            if live is None or live.stage == "done" or live.committed:
                continue
            state = live.log.state_at(t)
            if not live.spec.cooperative:
                a = noncoop_policy_step(state, live.spec.behavior, self.rng_nc,
                                        self.lim)
                traj = Trajectory(t, state, ((self.tick, a),), self.lim.v_max)
                staged.append((live, traj, "noncoop"))
                continue
            knowledge = self._knowledge(live, t)
            t_next = t + self.tick
            if self.policy == "two_stage":
                if in_region_C(state, self.lim):
                    traj, branch = extreme_trajectory(state, "max_accel", t,
                                                      self.lim), "floor"
                elif self.fastplan is not None:
                    traj = self.fastplan.algorithm2(state, knowledge, t,
                                                    t_next, live.ideal_ref)
                    branch = "track"
                else:
                    traj = algorithm2_step(state, knowledge, self.sh, t,
                                           t_next, live.ideal_ref)
                    branch = "track"
            elif self.fastplan is not None:
                traj = self.fastplan.baseline(state, knowledge, t, t_next,
                                              live.ideal_ref)
                branch = "track"
            else:
                traj = baseline_minimax_step(state, knowledge, self.sh, t,
                                             t_next, live.ideal_ref)
                branch = "track"
            end = traj.evaluate(t_next)
            if branch != "floor" and stop_envelope(end, self.lim.a_dec) > TOL:
                branch = "commit"
            staged.append((live, traj, branch))
        for live, traj, branch in staged:
            live.log.append(traj)
            self._refresh(live)
            t_next = t + self.tick
            end = traj.evaluate(t_next)
            self.decisions.append(DecisionRecord(t, live.spec.id, branch,
                                                 end.position, end.velocity))
            if branch == "noncoop":
                if (t_next <= self.horizon
                        and end.position <= self.gone_beyond):
                    self._push(t_next, _DECIDE, ("ntick", live.spec.id))
                else:
                    live.stage = "done"
                continue
            if branch in ("floor", "commit"):
                live.committed = True
            elif t_next <= self.horizon:
                self._push(t_next, _DECIDE, ("tick", live.spec.id))

    # ------------------------------------------------------------------
    def _finish(self) -> SimResult:
        logs, entries, clearances, rows = {}, {}, {}, []
        vehicles = []
        for spec in self.sc.vehicles:
            veh = SimVehicle(spec.id, spec.road, spec.cooperative,
                             spec.spawn_time, spec.spawn_position, self.lim,
                             spec.behavior)
            vehicles.append(veh)
            lv = self.live.get(spec.id)
            if lv is None:
                continue
            logs[spec.id] = lv.log
            phases = lv.log.composite_phases(self.horizon)
            span = self.sc.extents[spec.road] + self.lim.length
            t_in = _crossing(phases, 0.0, self.horizon)
            t_out = _crossing(phases, span, self.horizon)
            if t_in is not None:
                entries[spec.id] = t_in
            if t_out is not None:
                clearances[spec.id] = t_out
            rows.append(_AuditRow(veh, lv.log))
        violations = audit(rows, self.geometry, self.horizon)
        return SimResult(self.sc, self.policy, self.seed, self.horizon,
                         tuple(vehicles), logs, self.decisions, self.handoffs,
                         entries, clearances, violations)


def run(scenario: TrafficScenario, policy: str = "two_stage", seed: int = 0,
        noncoop_delay: float | None = None, tick_order: str = "ascending",
        fast: bool | None = None) -> SimResult:
    """Simulate one scenario to its horizon. Deterministic given seed.

    fast=None picks the compiled planner twins when numba is importable;
    fast=False forces the pure-Python planners. Results are identical
    either way, only the speed differs."""
    return _Sim(scenario, policy, seed, noncoop_delay, tick_order, fast).run()


def snapshot(result_or_sim, t: float) -> dict[int, VehicleState]:
    """Physical truth at t: exact states of every vehicle spawned by t,
    evaluated from the committed logs. Same t, same answer, any caller."""
    logs = result_or_sim.logs if hasattr(result_or_sim, "logs") else {
        vid: lv.log for vid, lv in result_or_sim.live.items()}
    out = {}
    for vid in sorted(logs):
        log = logs[vid]
        if log.entries and log.start_time() <= t + 1e-12:
            out[vid] = log.state_at(t)
    return out
