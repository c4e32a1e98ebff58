"""Distributed self-organization stage: per-epoch information collection,
the order-optimization program, and the position-update rule.

Every cooperative vehicle runs the same three steps at each shared epoch
while inside the upstream range: build a bounded window of nearby equivalent
positions, solve a small disjunctive ordering program over that window, and
commit a decelerate-cruise-accelerate profile that lands the chosen
displacement with endpoint velocity exactly v_max.

All positions here are "equivalent positions": live positions clamped so
same-road windows respect the required headway front to back. Cross-road
comparisons subtract half the zone extent ("centered" coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import KinematicLimits, Trajectory, VehicleState

TOL = 1e-9


@dataclass(frozen=True)
class LongHorizonParams:
    window: int          # optimization window size W
    gap: float           # required same-road headway l + delta (jittered)
    v_red: float         # max average-velocity reduction per epoch
    extents: tuple[float, ...]
    limits: KinematicLimits

    def cross_gap(self, leader_road: int) -> float:
        return self.gap + self.extents[leader_road]


@dataclass
class EpochView:
    """Immutable per-epoch snapshot of cooperative vehicles in the upstream
    range: live positions plus the initial-order bookkeeping the neighbor
    maps need. per_road lists ids front to back (descending order_ref)."""

    t: float
    pos: dict[int, float]
    road: dict[int, int]
    order_ref: dict[int, float]
    per_road: list[list[int]] = field(default_factory=list)
    index: dict[int, int] = field(default_factory=dict)

    @staticmethod
    def build(t, rows, road_count) -> "EpochView":
        """rows: iterable of (id, road, position, order_ref)."""
        view = EpochView(t, {}, {}, {})
        view.per_road = [[] for _ in range(road_count)]
        for vid, road, p, ref in rows:
            view.pos[vid] = p
            view.road[vid] = road
            view.order_ref[vid] = ref
        for r in range(road_count):
            ids = [v for v in view.pos if view.road[v] == r]
            ids.sort(key=lambda v: (-view.order_ref[v], v))
            view.per_road[r] = ids
            for i, v in enumerate(ids):
                view.index[v] = i
        return view

    def front(self, vid):
        i = self.index[vid]
        ids = self.per_road[self.road[vid]]
        return ids[i - 1] if i > 0 else None

    def behind(self, vid):
        i = self.index[vid]
        ids = self.per_road[self.road[vid]]
        return ids[i + 1] if i + 1 < len(ids) else None

    def cross_nearest(self, vid, road):
        """Foreign-road vehicle with the closest initial-order reference."""
        ids = self.per_road[road]
        if not ids:
            return None
        ref = self.order_ref[vid]
        return min(ids, key=lambda v: (abs(self.order_ref[v] - ref), v))


@dataclass
class CollectedInfo:
    ego: int
    members: tuple[int, ...]             # sorted by centered equivalent position
    eq_pos: dict[int, float]
    road_of: dict[int, int]
    road_seq: dict[int, tuple[int, ...]]  # road -> member ids front to back


def _centered(p, road, extents):
    return p - extents[road] / 2.0


def collect_info(view: EpochView, ego: int, params: LongHorizonParams) -> CollectedInfo:
    """Window construction: seed one vehicle per empty road (nearest by
    initial order), extend backward while some road's rearmost member is
    still centered ahead of ego, otherwise extend forward on the road whose
    frontmost member is centered rearmost; re-clamp equivalent positions
    after every addition; finally prune members centered behind ego and
    truncate to the window size."""
    R = len(params.extents)
    gap = params.gap
    extents = params.extents
    ego_road = view.road[ego]

    # per-road contiguous index windows into view.per_road
    lo: dict[int, int] = {ego_road: view.index[ego]}
    hi: dict[int, int] = {ego_road: view.index[ego]}
    members = [ego]
    member_set = {ego}
    P = {ego: view.pos[ego]}

    def chain(r):
        return view.per_road[r][lo[r]: hi[r] + 1]

    def reclamp():
        for m in members:
            P[m] = view.pos[m]
        for r in lo:
            ids = chain(r)
            for k in range(1, len(ids)):
                bound = P[ids[k - 1]] - gap
                if P[ids[k]] > bound:
                    P[ids[k]] = bound

    target_size = params.window + 2 * R
    while len(members) < target_size:
        added = None
        for r in range(R):
            if r not in lo and view.per_road[r]:
                cand = view.cross_nearest(ego, r)
                if cand is not None and cand not in member_set:
                    lo[r] = hi[r] = view.index[cand]
                    added = cand
                    break
        if added is None:
            ego_c = _centered(P[ego], ego_road, extents)
            for r in sorted(lo):
                rear = view.per_road[r][hi[r]]
                if _centered(P[rear], r, extents) > ego_c and hi[r] + 1 < len(view.per_road[r]):
                    hi[r] += 1
                    added = view.per_road[r][hi[r]]
                    break
        if added is None:
            order = sorted(
                lo, key=lambda r: (_centered(P[view.per_road[r][lo[r]]], r, extents), r)
            )
            for r in order:
                if lo[r] - 1 >= 0:
                    lo[r] -= 1
                    added = view.per_road[r][lo[r]]
                    break
        if added is None:
            break
        members.append(added)
        member_set.add(added)
        P[added] = view.pos[added]
        reclamp()

    # prune members centered strictly behind ego, then truncate to W
    ego_c = _centered(P[ego], ego_road, extents)
    kept = [m for m in members if m == ego or _centered(P[m], view.road[m], extents) >= ego_c]
    kept.sort(key=lambda m: (_centered(P[m], view.road[m], extents), m))
    if len(kept) > params.window:
        kept = kept[: params.window]

    eq_pos = {m: P[m] for m in kept}
    road_of = {m: view.road[m] for m in kept}
    road_seq = {}
    for r in range(R):
        ids = [m for m in view.per_road[r] if m in eq_pos]
        if ids:
            road_seq[r] = tuple(ids)
    return CollectedInfo(ego, tuple(kept), eq_pos, road_of, road_seq)


def _interleavings(road_seq):
    """All front-to-back merges of the per-road sequences (initial order kept
    within each road). Yields tuples of (road, id)."""
    roads = [(r, list(seq)) for r, seq in sorted(road_seq.items()) if seq]
    total = sum(len(s) for _, s in roads)
    if total == 0:
        yield ()
        return
    # depth-first merge
    stack = [(tuple(0 for _ in roads), ())]
    while stack:
        ptrs, prefix = stack.pop()
        if len(prefix) == total:
            yield prefix
            continue
        for i in range(len(roads) - 1, -1, -1):
            r, seq = roads[i]
            if ptrs[i] < len(seq):
                nxt = list(ptrs)
                nxt[i] += 1
                stack.append((tuple(nxt), prefix + ((r, seq[ptrs[i]]),)))


def solve_order_opt(info: CollectedInfo, live_pos, params: LongHorizonParams):
    """Exact optimum of the window ordering program: maximize the summed
    shifted positions subject to upper bounds at live positions, same-road
    headway in initial order, and cross-road disjunctive headway. Enumerates
    every road-sequence interleaving and places vehicles greedily front to
    back against all earlier members; ties by lexicographically smallest id
    sequence."""
    members = info.members
    if len(members) == 1:
        return {info.ego: min(info.eq_pos[info.ego], live_pos[info.ego])}
    gap = params.gap
    extents = params.extents
    best_val = -math.inf
    best_ids = None
    best_assign = None
    for order in _interleavings(info.road_seq):
        assign = {}
        placed = []  # (road, id, pstar)
        total = 0.0
        for road, vid in order:
            ub = live_pos[vid]
            for r_e, _, p_e in placed:
                g = gap if r_e == road else gap + extents[r_e]
                bound = p_e - g
                if bound < ub:
                    ub = bound
            assign[vid] = ub
            placed.append((road, vid, ub))
            total += ub
        ids = tuple(v for _, v in order)
        if total > best_val + 1e-12:
            best_val = total
            best_ids = ids
            best_assign = assign
        elif total > best_val - 1e-12 and (best_ids is None or ids < best_ids):
            best_val = max(best_val, total)
            best_ids = ids
            best_assign = assign
    return best_assign


def lemma1_premises_hold(info: CollectedInfo, params: LongHorizonParams, slack=TOL) -> bool:
    """True when the non-ego members of the window are already pairwise
    separated (same-road headway in initial order, cross-road disjunctive
    headway) and the nearest member is centered strictly apart from ego."""
    others = [m for m in info.members if m != info.ego]
    if not others:
        return False
    gap = params.gap
    extents = params.extents
    for r, seq in info.road_seq.items():
        seq_o = [m for m in seq if m != info.ego]
        for a, b in zip(seq_o[:-1], seq_o[1:]):
            if info.eq_pos[a] - info.eq_pos[b] < gap - slack:
                return False
    for i in range(len(others)):
        for j in range(i + 1, len(others)):
            a, b = others[i], others[j]
            ra, rb = info.road_of[a], info.road_of[b]
            if ra == rb:
                continue
            fwd = info.eq_pos[a] - info.eq_pos[b] >= gap + extents[ra] - slack
            bwd = info.eq_pos[b] - info.eq_pos[a] >= gap + extents[rb] - slack
            if not (fwd or bwd):
                return False
    s_m = min(others, key=lambda m: (info.eq_pos[m], m))
    cm = _centered(info.eq_pos[s_m], info.road_of[s_m], extents)
    ce = _centered(info.eq_pos[info.ego], info.road_of[info.ego], extents)
    if abs(cm - ce) <= slack:
        return False
    return True


def lemma1_closed_form(info: CollectedInfo, params: LongHorizonParams) -> float:
    """Closed-form window optimum for ego when the premises hold: yield to
    the rearmost other member or keep the own equivalent position, whichever
    is lower."""
    if not lemma1_premises_hold(info, params, slack=TOL):
        raise ValueError("closed form requires pre-separated window members")
    others = [m for m in info.members if m != info.ego]
    s_m = min(others, key=lambda m: (info.eq_pos[m], m))
    r_star = info.road_of[s_m]
    g = params.gap if r_star == info.road_of[info.ego] else params.gap + params.extents[r_star]
    return min(info.eq_pos[s_m] - g, info.eq_pos[info.ego])


def long_horizon_step(live_pos, p_star, t_k, t_k1, params: LongHorizonParams):
    """Position-update rule plus its realizing profile.

    Returns (target, trajectory) where target = max(velocity-reduction floor,
    shifted optimum + full-speed displacement) and the trajectory is the
    symmetric decelerate-cruise-accelerate profile hitting the target with
    endpoint velocity exactly v_max.
    """
    lim = params.limits
    vm = lim.v_max
    dt = t_k1 - t_k
    floor = live_pos + (vm - params.v_red) * dt
    target = max(floor, p_star + vm * dt)
    ideal = live_pos + vm * dt
    if target > ideal + 1e-9 or target < floor - 1e-9:
        raise AssertionError("epoch displacement left its feasible band")
    shortfall = ideal - target
    if shortfall <= 1e-12:
        traj = Trajectory(t_k, VehicleState(live_pos, vm), ((dt, 0.0),), vm)
        return ideal, traj
    K = 1.0 / lim.a_dec + 1.0 / lim.a_acc
    disc = dt * dt - 2.0 * K * shortfall
    if disc < 0.0:
        raise AssertionError("epoch gap too small for the requested shift")
    u = (dt - math.sqrt(disc)) / (lim.a_dec * K)
    u2 = u * lim.a_dec / lim.a_acc
    cruise = dt - u - u2
    if cruise < -1e-9:
        raise AssertionError("profile timing underflow")
    segments = ((u, -lim.a_dec), (max(cruise, 0.0), 0.0), (u2, lim.a_acc))
    traj = Trajectory(t_k, VehicleState(live_pos, vm), segments, vm)
    return target, traj


@dataclass
class EpochDecision:
    info: CollectedInfo
    p_star: float
    target: float
    trajectory: Trajectory
    used_closed_form: bool


def epoch_step(view: EpochView, ego: int, params: LongHorizonParams, t_k1) -> EpochDecision:
    """One full epoch decision for ego: collect, optimize (closed form when
    the window is already separated with comfortable slack), update."""
    info = collect_info(view, ego, params)
    live = view.pos[ego]
    used_cf = False
    if len(info.members) == 1:
        p_star = min(info.eq_pos[ego], live)
    elif lemma1_premises_hold(info, params, slack=-1e-6):
        # negative slack argument = require margin 1e-6 beyond the bound
        p_star = lemma1_closed_form(info, params)
        used_cf = True
    else:
        p_star = solve_order_opt(info, {m: view.pos[m] for m in info.members}, params)[ego]
    p_star = min(p_star, live)
    target, traj = long_horizon_step(live, p_star, view.t, t_k1, params)
    return EpochDecision(info, p_star, target, traj, used_cf)
