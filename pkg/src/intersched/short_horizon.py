"""Boundary-stage planning: committed-region shortcut, robust candidate
search, the follower-feasible target set, and minimax target selection.

The planner decides one tick at a time. A target endpoint is "committing"
when its stop envelope goes positive: from there the vehicle can no longer
stop before the zone, so it floors the throttle and the decision reduces to
whether the committed sweep is robust against every kinematically feasible
continuation of every uncertain vehicle. Uncommitting endpoints are safe by
construction (the envelope is nondecreasing along any admissible profile, so
a nonpositive endpoint envelope bounds the whole tick).

The cost-to-go surrogate V is a deterministic rollout: hold the envelope at
zero while the scenario blocks the zone, otherwise run the time-optimal
approach (full throttle, braking just enough to stop short of the scenario's
worst-case wall), and charge the relative scheduling cost at rear clearance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    KinematicLimits,
    RoadGeometry,
    Trajectory,
    VehicleState,
    constant_accel_trajectory,
    extreme_trajectory,
    first_crossing_time,
    stop_envelope,
)
from .safety import TOL, follow_clearance, min_gap, same_road_tube_conflict

_BIG = 1e15
_FAR_PAST = -1e30


@dataclass(frozen=True)
class Observation:
    """Last known state of another vehicle; stamp may lag current time."""

    subject: int
    state: VehicleState
    stamp: float
    road: int


@dataclass(frozen=True)
class Knowledge:
    """Everything one planner invocation may legally look at."""

    ego_road: int
    predecessor: Observation | None = None
    noncoop: tuple[Observation, ...] = ()
    first_in_order: bool = True


@dataclass(frozen=True)
class ShortHorizonParams:
    B: float
    decision_gap: float
    tau: float
    limits: KinematicLimits
    geometry: RoadGeometry
    candidate_grid: int = 25
    tD_grid: int = 64
    scenario_cap: int = 8
    value_horizon: float = 180.0
    relevance_horizon: float = 90.0

    @property
    def delta_star(self) -> float:
        lm = self.limits
        return lm.v_max * (self.tau + self.decision_gap) * (1.0 + lm.a_dec / lm.a_acc)


def in_region_C(state: VehicleState, limits: KinematicLimits) -> bool:
    """Committed region: the vehicle can no longer stop upstream of the zone."""
    return stop_envelope(state, limits.a_dec) > TOL


def candidate_accels(params: ShortHorizonParams) -> tuple[float, ...]:
    """Acceleration grid for one-tick candidates, descending, endpoints exact."""
    lm = params.limits
    n = max(params.candidate_grid, 2)
    step = (lm.a_acc + lm.a_dec) / (n - 1)
    vals = {-lm.a_dec, lm.a_acc}
    for k in range(n):
        vals.add(min(-lm.a_dec + k * step, lm.a_acc))
    return tuple(sorted(vals, reverse=True))


def candidate_endpoints(ego_state: VehicleState, t_k: float, t_next: float,
                        params: ShortHorizonParams):
    """Deduped (accel, trajectory, p_end, v_end) list, descending accel.

    Saturation collapses distinct accelerations onto identical endpoints
    (all a >= 0 from v_max, all a <= 0 from rest); the largest accel is kept
    as the representative realization.
    """
    out = []
    seen = set()
    dt = t_next - t_k
    for a in candidate_accels(params):
        traj = constant_accel_trajectory(ego_state, a, t_k, dt, params.limits)
        end = traj.evaluate(t_next)
        p, v = end.position, end.velocity
        key = (p, v)
        if key in seen:
            continue
        seen.add(key)
        out.append((a, traj, p, v))
    return out


def f_fol_member(candidate: VehicleState, t_next: float,
                 pred_obs: Observation | None, L: float,
                 limits: KinematicLimits, tD_grid: int = 64) -> bool:
    """Follower-feasible test for one target state at t_next.

    (i) the target keeps the stop envelope nonpositive; (ii) for every shared
    dip time t_D: with ego fixed at the target from t_next and the predecessor
    at its observed state from its stamp, both braking fully until t_D and
    flooring afterwards, the gap never falls below L.

    Beyond t_stop (both at rest) a later t_D only time-shifts the joint
    motion, so the sweep is the window [t_next, t_stop]; within it the worst
    gap for each t_D is found exactly from the piecewise-quadratic profiles.
    The t_D candidates are the regime boundaries (either vehicle's stop time,
    the window ends) plus a uniform grid.
    """
    if stop_envelope(candidate, limits.a_dec) > TOL:
        return False
    if pred_obs is None:
        return True
    ego_stop = t_next + candidate.velocity / limits.a_dec
    pred_stop = pred_obs.stamp + pred_obs.state.velocity / limits.a_dec
    t_hi = max(t_next, ego_stop, pred_stop)
    tds = {t_next, t_hi}
    for bound in (ego_stop, pred_stop):
        tds.add(min(max(bound, t_next), t_hi))
    if tD_grid > 1 and t_hi > t_next:
        step = (t_hi - t_next) / (tD_grid - 1)
        for k in range(tD_grid):
            tds.add(t_next + k * step)
    for t_D in sorted(tds):
        ego = Trajectory(t_next, candidate,
                         ((t_D - t_next, -limits.a_dec), (math.inf, limits.a_acc)),
                         limits.v_max)
        pred = Trajectory(pred_obs.stamp, pred_obs.state,
                          ((t_D - pred_obs.stamp, -limits.a_dec), (math.inf, limits.a_acc)),
                          limits.v_max)
        t_end = max(ego.final_phase_start(), pred.final_phase_start(), t_next) + 1.0
        gap, _ = min_gap(ego.phases(), pred.phases(), t_next, t_end)
        if gap < L - TOL:
            return False
    return True


# ---------------------------------------------------------------------------
# adversary tubes and scenarios

def occupancy_window(obs: Observation, span: float, limits: KinematicLimits,
                     mode: str):
    """Zone occupancy [entry, exit) of the subject under one extreme profile.

    None if that profile never enters; exit is +inf if it parks inside.
    """
    if obs.state.position >= span:
        return None
    traj = extreme_trajectory(obs.state, mode, obs.stamp, limits)
    t_in = first_crossing_time(traj, 0.0)
    if t_in is None:
        return None
    t_out = first_crossing_time(traj, span, t_in)
    return (t_in, t_out if t_out is not None else math.inf)


def reachable_window(obs: Observation, span: float, limits: KinematicLimits):
    """Union over all feasible continuations of the subject's zone-occupancy
    times: entry under full throttle, exit under full braking (inf if it can
    park inside). Exact for this monotone 1D model."""
    if obs.state.position >= span:
        return None
    acc = extreme_trajectory(obs.state, "max_accel", obs.stamp, limits)
    t_in = first_crossing_time(acc, 0.0)
    if t_in is None:
        return None
    brk = extreme_trajectory(obs.state, "min_accel", obs.stamp, limits)
    t_out = first_crossing_time(brk, span)
    return (t_in, t_out if t_out is not None else math.inf)


@dataclass(frozen=True)
class Scenario:
    """One joint assignment of extreme continuations, reduced to what the
    rollout consumes: merged cross-zone blocking windows plus the tightest
    same-road wall (max position ego may ever occupy; inf if none)."""

    windows: tuple[tuple[float, float], ...]
    wall: float


def earliest_zone_entry(state: VehicleState, t0: float,
                        limits: KinematicLimits) -> float:
    """Zone-entry time of the floored continuation: a lower bound on the
    entry time of every trajectory reachable from this state. A blocking
    window that closes before it can never bind any candidate."""
    p, v = state.position, state.velocity
    if p >= 0.0:
        return t0
    a = limits.a_acc
    p_vm = p + (limits.v_max * limits.v_max - v * v) / (2.0 * a)
    if p_vm >= 0.0:
        return t0 + (math.sqrt(v * v - 2.0 * a * p) - v) / a
    return t0 + (limits.v_max - v) / a - p_vm / limits.v_max


def _adversary_options(obs: Observation, ego_road: int, ego_position: float,
                       params: ShortHorizonParams):
    """The two extreme continuations of one adversary, as (window, wall) pairs."""
    lm, geo = params.limits, params.geometry
    if obs.road != ego_road:
        span = lm.length + geo.extent(obs.road)
        opts = []
        for mode in ("min_accel", "max_accel"):
            w = occupancy_window(obs, span, lm, mode)
            opts.append((w, math.inf))
        return opts
    if obs.state.position <= ego_position:
        return []  # same road behind: cannot block ego's progress
    span = lm.length + geo.extent(obs.road)
    if obs.state.position >= span + lm.length:
        return []  # parked-or-moving, its body can no longer reach ego's path
    opts = []
    # braking continuation: parks, leaving a wall one body length upstream
    q = stop_envelope(obs.state, lm.a_dec)
    opts.append((None, q - lm.length))
    # flooring continuation: passes through; ego entry waits for its body
    acc = extreme_trajectory(obs.state, "max_accel", obs.stamp, lm)
    t_free = first_crossing_time(acc, lm.length)
    opts.append(((_FAR_PAST, t_free), math.inf))
    return opts


def _merge_windows(windows, t_now: float):
    iv = sorted((a, b) for (a, b) in windows if b > t_now)
    out: list[list[float]] = []
    for a, b in iv:
        if out and a <= out[-1][1] + 1e-12:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def build_scenarios(noncoop, ego_road: int, ego_position: float, t_now: float,
                    params: ShortHorizonParams,
                    earliest: float = -math.inf) -> list[Scenario]:
    """Finite scenario set covering every joint extreme continuation.

    An adversary whose continuations collapse to one constraint (the other
    pruned as unreachable) contributes it to every scenario instead of
    doubling the product; only genuinely two-sided adversaries branch.
    Same-road branchers stay linear: braking several leaders at once is
    dominated by braking only the one with the lowest wall, so the all-floor
    combo plus one combo per braking leader covers the worst case exactly.
    Branchers past the cap (nearest first) fall back to their flooring
    continuation instead of being ignored.

    earliest: lower bound on ego's zone-entry time; windows closing before
    it cannot bind and are discarded before classification."""
    base_windows: list[tuple[float, float]] = []
    base_wall = math.inf
    branchers = []
    for obs in noncoop:
        opts = _adversary_options(obs, ego_road, ego_position, params)
        kept = []
        for w, wall in opts:
            if w is not None and w[1] <= earliest:
                w = None
            if w is None and not math.isfinite(wall):
                continue
            if (w, wall) not in kept:
                kept.append((w, wall))
        if not kept:
            continue
        effect = math.inf
        for w, wall in kept:
            if w is not None:
                effect = min(effect, max(w[0], t_now))
            if math.isfinite(wall):
                effect = min(effect, t_now + max(wall - ego_position, 0.0)
                             / params.limits.v_max)
        if effect > t_now + params.relevance_horizon:
            continue
        if len(kept) == 1:
            w, wall = kept[0]
            if w is not None:
                base_windows.append(w)
            base_wall = min(base_wall, wall)
        else:
            branchers.append((effect, obs.road == ego_road, kept))
    branchers.sort(key=lambda x: x[0])
    for _, _, kept in branchers[params.scenario_cap:]:
        base_windows.append(kept[-1][0])
    branchers = branchers[: params.scenario_cap]
    same = [kept for _, is_same, kept in branchers if is_same]
    cross = [kept for _, is_same, kept in branchers if not is_same]
    out = []
    seen = set()
    for s in range(len(same) + 1):
        wall_s = base_wall if s == 0 else min(base_wall, same[s - 1][0][1])
        wins_s = list(base_windows)
        for j, kept in enumerate(same):
            if j != s - 1:
                wins_s.append(kept[1][0])
        for mask in range(1 << len(cross)):
            wall = wall_s
            windows = list(wins_s)
            for j, kept in enumerate(cross):
                w, wl = kept[(mask >> j) & 1]
                windows.append(w)
                wall = min(wall, wl)
            sc = Scenario(_merge_windows(windows, t_now), wall)
            key = (sc.windows, sc.wall)
            if key not in seen:
                seen.add(key)
                out.append(sc)
    return out


# ---------------------------------------------------------------------------
# cost-to-go surrogate

def _approach_profile(state: VehicleState, t0: float, wall: float,
                      limits: KinematicLimits) -> Trajectory:
    """Time-optimal safe approach: full throttle, braking just enough to come
    to rest exactly at the wall. Requires the wall to be ahead of the state's
    own stopping point."""
    if not math.isfinite(wall):
        return extreme_trajectory(state, "max_accel", t0, limits)
    v0 = state.velocity
    # switch point where the throttle curve meets the braking curve into the wall
    p_s = (2.0 * limits.a_dec * wall - v0 * v0 + 2.0 * limits.a_acc * state.position) \
        / (2.0 * (limits.a_dec + limits.a_acc))
    p_s = max(p_s, state.position)
    v_s_sq = max(2.0 * limits.a_dec * (wall - p_s), 0.0)
    v_s = math.sqrt(v_s_sq)
    if v_s <= limits.v_max:
        t1 = max(v_s - v0, 0.0) / limits.a_acc
        t2 = v_s / limits.a_dec
        segments = ((t1, limits.a_acc), (t2, -limits.a_dec), (math.inf, 0.0))
    else:
        t1 = (limits.v_max - v0) / limits.a_acc
        p_plateau = state.position + (limits.v_max * limits.v_max - v0 * v0) / (2.0 * limits.a_acc)
        p_brake = wall - limits.v_max * limits.v_max / (2.0 * limits.a_dec)
        t_cr = max(p_brake - p_plateau, 0.0) / limits.v_max
        t2 = limits.v_max / limits.a_dec
        segments = ((t1, limits.a_acc), (t_cr, 0.0), (t2, -limits.a_dec), (math.inf, 0.0))
    return Trajectory(t0, state, segments, limits.v_max)


def _clearance_cost(t_c: float, v_c: float, ideal_ref: float, ego_span: float,
                    limits: KinematicLimits) -> float:
    return (ideal_ref + limits.v_max * t_c - ego_span
            + (limits.v_max - v_c) * (limits.v_max - v_c) / (2.0 * limits.a_acc))


def _capped_cost(park_pos: float, t0: float, ideal_ref: float,
                 params: ShortHorizonParams) -> float:
    lm = params.limits
    t_h = t0 + params.value_horizon
    return ideal_ref + lm.v_max * t_h - park_pos + lm.v_max * lm.v_max / (2.0 * lm.a_acc)


def minimax_value(p: float, v: float, scenario: Scenario, t0: float,
                  ideal_ref: float, ego_span: float,
                  params: ShortHorizonParams) -> float:
    """Deterministic rollout cost of holding at the zone while the scenario
    blocks it and clearing at the first feasible release. Wall overruns are
    charged a large penalty graded by overshoot so gentler candidates order
    first even among doomed ones."""
    lm = params.limits
    wall = scenario.wall
    if p > wall + TOL:
        return _BIG * (1.0 + p - wall)
    q_e = p + v * v / (2.0 * lm.a_dec)
    if q_e > wall + TOL:
        return _BIG * (1.0 + q_e - wall)
    if q_e > TOL:
        # committed endpoint: flooring is forced; scenario compatibility was
        # the admitting tube check's job
        if wall < ego_span - TOL:
            return _BIG * (1.0 + ego_span - wall)
        traj = _approach_profile(VehicleState(p, v), t0, wall, lm)
        t_c = first_crossing_time(traj, ego_span)
        if t_c is None:
            park = wall if math.isfinite(wall) else q_e
            return _capped_cost(park, t0, ideal_ref, params)
        return _clearance_cost(t_c, traj.velocity(t_c), ideal_ref, ego_span, lm)
    if wall < ego_span - TOL:
        # holding short of the wall: the rollout creeps to the wall envelope
        return _capped_cost(wall, t0, ideal_ref, params)

    t_stop = t0 + v / lm.a_dec
    cap_t = t0 + params.value_horizon

    def release_state(t_rel):
        if t_rel >= t_stop:
            return VehicleState(q_e, 0.0)
        dt = t_rel - t0
        return VehicleState(p + v * dt - 0.5 * lm.a_dec * dt * dt,
                            v - lm.a_dec * dt)

    # entry offset once parked is release-invariant
    parked_traj = _approach_profile(VehicleState(q_e, 0.0), 0.0, wall, lm)
    parked_entry_offset = first_crossing_time(parked_traj, 0.0)

    t_rel = t0
    windows = scenario.windows
    for _ in range(len(windows) + 2):
        st = release_state(t_rel)
        traj = _approach_profile(st, t_rel, wall, lm)
        t_in = first_crossing_time(traj, 0.0)
        t_c = first_crossing_time(traj, ego_span)
        if t_in is None or t_c is None:
            return _capped_cost(q_e, t0, ideal_ref, params)
        blocker = None
        for a, b in windows:
            if t_in < b and t_c > a:
                blocker = (a, b)
                break
        if blocker is None:
            return _clearance_cost(t_c, traj.velocity(t_c), ideal_ref, ego_span, lm)
        b = blocker[1]
        if not math.isfinite(b):
            return _capped_cost(q_e, t0, ideal_ref, params)
        # minimal release whose entry waits past the blocking window
        if parked_entry_offset is None:
            return _capped_cost(q_e, t0, ideal_ref, params)
        t_rel_parked = b - parked_entry_offset
        if t_rel_parked >= t_stop:
            t_rel = max(t_rel, t_rel_parked)
        else:
            lo, hi = max(t_rel, t0), t_stop
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                st_m = release_state(mid)
                e_m = first_crossing_time(_approach_profile(st_m, mid, wall, lm), 0.0)
                if e_m is None or e_m >= b:
                    hi = mid
                else:
                    lo = mid
            t_rel = hi
        if t_rel > cap_t:
            return _capped_cost(q_e, t0, ideal_ref, params)
    return _capped_cost(q_e, t0, ideal_ref, params)


def minimax_select(candidates, knowledge: Knowledge, params: ShortHorizonParams,
                   t_next: float, ideal_ref: float, ego_position: float,
                   value_fn=None, earliest: float = -math.inf):
    """Inner max over the scenario set, outer min over candidate endpoints.

    candidates: iterable of (p, v) target states. Ties break toward the
    largest p, then the largest v.
    """
    cands = list(candidates)
    if not cands:
        raise ValueError("minimax_select requires a non-empty candidate set")
    scenarios = build_scenarios(knowledge.noncoop, knowledge.ego_road,
                                ego_position, t_next, params,
                                earliest=earliest)
    ego_span = params.limits.length + params.geometry.extent(knowledge.ego_road)
    best_key = None
    best = None
    for p, v in cands:
        worst = -math.inf
        for sc in scenarios:
            if value_fn is not None:
                val = value_fn(p, v, sc)
            else:
                val = minimax_value(p, v, sc, t_next, ideal_ref, ego_span, params)
            if val > worst:
                worst = val
        key = (worst, -p, -v)
        if best_key is None or key < best_key:
            best_key = key
            best = (p, v)
    return best


# ---------------------------------------------------------------------------
# robust candidate admission

def _committed_clear(composite: Trajectory, knowledge_noncoop, ego_road: int,
                     params: ShortHorizonParams, t_k: float) -> bool:
    """True iff the committed sweep is conflict-free against every feasible
    continuation of every listed adversary."""
    lm, geo = params.limits, params.geometry
    ego_span = lm.length + geo.extent(ego_road)
    g_in = first_crossing_time(composite, 0.0)
    g_out = first_crossing_time(composite, ego_span)
    if g_in is None or g_out is None:
        return False
    for obs in knowledge_noncoop:
        if obs.road != ego_road:
            span = lm.length + geo.extent(obs.road)
            w = reachable_window(obs, span, lm)
            if w is None:
                continue
            if g_out <= w[0] - 1e-6:
                continue
            if math.isfinite(w[1]) and g_in >= w[1] + 1e-6:
                continue
            return False
        else:
            if obs.state.position >= ego_span + lm.length:
                continue
            lo = extreme_trajectory(obs.state, "min_accel", obs.stamp, lm).phases()
            hi = extreme_trajectory(obs.state, "max_accel", obs.stamp, lm).phases()
            if same_road_tube_conflict(composite.phases(), lo, hi,
                                       geo.extent(ego_road), lm.length, lm.length,
                                       max(t_k, obs.stamp), g_out + 1e-9):
                return False
    return True


def best_safe_trajectory(ego_state: VehicleState, knowledge: Knowledge,
                         params: ShortHorizonParams, t_k: float, t_next: float):
    """Robust candidate search: admit uncommitting endpoints outright, admit
    committing ones only when their floored continuation clears every
    adversary tube, and rank the survivors by worst-case rollout cost.
    Returns (trajectory, p_end, v_end); falls back to full braking."""
    lm = params.limits
    if not knowledge.noncoop:
        traj = extreme_trajectory(ego_state, "max_accel", t_k, lm)
        return traj, traj.position(t_next), traj.velocity(t_next)
    feasible = []
    for a, traj, p, v in candidate_endpoints(ego_state, t_k, t_next, params):
        if stop_envelope(VehicleState(p, v), lm.a_dec) <= TOL:
            feasible.append((traj, p, v))
            continue
        composite = Trajectory(t_k, ego_state,
                               ((t_next - t_k, a), (math.inf, lm.a_acc)), lm.v_max)
        if _committed_clear(composite, knowledge.noncoop, knowledge.ego_road,
                            params, t_k):
            feasible.append((composite, p, v))
    if not feasible:
        traj = extreme_trajectory(ego_state, "min_accel", t_k, lm)
        return traj, traj.position(t_next), traj.velocity(t_next)
    scenarios = build_scenarios(knowledge.noncoop, knowledge.ego_road,
                                ego_state.position, t_next, params,
                                earliest=earliest_zone_entry(ego_state, t_k, lm))
    ego_span = lm.length + params.geometry.extent(knowledge.ego_road)
    best = None
    best_key = None
    for traj, p, v in feasible:
        worst = -math.inf
        for sc in scenarios:
            val = minimax_value(p, v, sc, t_next, ideal_ref=0.0,
                                ego_span=ego_span, params=params)
            if val > worst:
                worst = val
        key = (worst, -p, -v)
        if best_key is None or key < best_key:
            best_key = key
            best = (traj, p, v)
    return best


# ---------------------------------------------------------------------------
# the per-tick policies

def algorithm2_step(ego_state: VehicleState, knowledge: Knowledge,
                    params: ShortHorizonParams, t_k: float, t_next: float,
                    ideal_ref: float = 0.0) -> Trajectory:
    """One cooperative planning tick.

    Committed region: floor it. Otherwise: if the predecessor is observed
    committed and the best robust trajectory commits too, take it (the
    handover that lets platoons stream through); if no follower-feasible
    target exists, brake fully; otherwise pick the minimax target among the
    follower-feasible endpoints and realize it at constant acceleration.
    """
    lm = params.limits
    if in_region_C(ego_state, lm):
        return extreme_trajectory(ego_state, "max_accel", t_k, lm)
    sigma, p_star, v_star = best_safe_trajectory(ego_state, knowledge, params,
                                                 t_k, t_next)
    pred = knowledge.predecessor
    pred_committed = pred is None or in_region_C(pred.state, lm)
    if pred_committed and stop_envelope(VehicleState(p_star, v_star), lm.a_dec) > TOL:
        return sigma
    if pred is None:
        L = 0.0
    else:
        L = follow_clearance(lm.length, params.geometry.extent(pred.road),
                             pred.road == knowledge.ego_road)
    members = []
    for a, traj, p, v in candidate_endpoints(ego_state, t_k, t_next, params):
        if f_fol_member(VehicleState(p, v), t_next, pred, L, lm, params.tD_grid):
            members.append((traj, p, v))
    if not members:
        return extreme_trajectory(ego_state, "min_accel", t_k, lm)
    p_tar, v_tar = minimax_select([(p, v) for _, p, v in members], knowledge,
                                  params, t_next, ideal_ref, ego_state.position,
                                  earliest=earliest_zone_entry(ego_state, t_k, lm))
    for traj, p, v in members:
        if p == p_tar and v == v_tar:
            return traj
    return members[0][0]


def baseline_minimax_step(ego_state: VehicleState, knowledge: Knowledge,
                          params: ShortHorizonParams, t_k: float, t_next: float,
                          ideal_ref: float = 0.0) -> Trajectory:
    """Prior-generation fully-robust planner, for the paired comparison.

    Every other vehicle (knowledge.noncoop holds them all here, cooperative
    included) is adversarial. No committed-region shortcut, no predecessor
    gate, no follower set: a candidate is admitted if its endpoint keeps the
    stop envelope nonpositive or its floored continuation robustly clears
    every adversary tube; admitted candidates are ranked by worst-case cost.
    """
    lm = params.limits
    feasible = []
    for a, traj, p, v in candidate_endpoints(ego_state, t_k, t_next, params):
        if stop_envelope(VehicleState(p, v), lm.a_dec) <= TOL:
            feasible.append((traj, p, v))
            continue
        composite = Trajectory(t_k, ego_state,
                               ((t_next - t_k, a), (math.inf, lm.a_acc)), lm.v_max)
        if _committed_clear(composite, knowledge.noncoop, knowledge.ego_road,
                            params, t_k):
            feasible.append((composite, p, v))
    if not feasible:
        return extreme_trajectory(ego_state, "min_accel", t_k, lm)
    p_tar, v_tar = minimax_select([(p, v) for _, p, v in feasible], knowledge,
                                  params, t_next, ideal_ref, ego_state.position,
                                  earliest=earliest_zone_entry(ego_state, t_k, lm))
    for traj, p, v in feasible:
        if p == p_tar and v == v_tar:
            return traj
    return feasible[0][0]
