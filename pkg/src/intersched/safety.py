"""Conflict predicates and the global safety audit.

Both conflict kinds reduce to the same question: does the pointwise minimum
of a handful of affine combinations of the two positions ever exceed zero?
Positions under committed profiles are piecewise quadratic in time, so the
max-over-time of that min is found exactly from piece endpoints, parabola
vertices, and pairwise term crossings. No sampling.

Conventions: occupancy intervals are open, implemented as "depth > TOL";
grazing contact at exactly zero gap is non-conflicting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Trajectory

TOL = 1e-9


def follow_clearance(length: float, d_pred_road: float, same_road: bool) -> float:
    """Required longitudinal clearance behind a predecessor: own-length only on
    the same road, plus the predecessor road's zone extent across roads."""
    return length + (0.0 if same_road else d_pred_road)


def separation_met(p1, p2, r1, r2, delta, length, extents) -> bool:
    """True iff the pair is ordered with enough slack in either direction.

    The leading vehicle's road decides the cross-road extent term.
    """
    cross = r1 != r2
    if p1 - p2 >= length + delta + (extents[r1] if cross else 0.0):
        return True
    if p2 - p1 >= length + delta + (extents[r2] if cross else 0.0):
        return True
    return False


def _local_quad(phase, t_ref):
    """Coefficients (c, b, a2) of p(t_ref + x) = c + b x + a2 x^2 for a phase
    tuple (t0, p0, v0, a, dur)."""
    t0, p0, v0, a, _ = phase
    dt = t_ref - t0
    c = p0 + v0 * dt + 0.5 * a * dt * dt
    b = v0 + a * dt
    return c, b, 0.5 * a


def _phases_clip(phases, t_lo, t_hi):
    """Yield (start, end, phase) pieces of one phase list covering [t_lo, t_hi]."""
    for ph in phases:
        t0, _, _, _, dur = ph
        s = max(t0, t_lo)
        e = min(t0 + dur, t_hi)
        if e > s + 1e-15:
            yield s, e, ph
        if t0 + dur >= t_hi:
            break


def max_min_terms(phases_i, phases_j, terms, t_lo, t_hi):
    """Exact max over t in [t_lo, t_hi] of min_k (ci_k p_i(t) + cj_k p_j(t) + c0_k).

    Returns (value, argmax_t). Both phase lists must cover the range.
    """
    if t_hi <= t_lo:
        return -math.inf, t_lo
    # merged piece boundaries
    cuts = {t_lo, t_hi}
    for phases in (phases_i, phases_j):
        for t0, _, _, _, dur in phases:
            if t_lo < t0 < t_hi:
                cuts.add(t0)
            e = t0 + dur
            if math.isfinite(e) and t_lo < e < t_hi:
                cuts.add(e)
    grid = sorted(cuts)

    def quad_at(phases, t_ref):
        for t0, p0, v0, a, dur in phases:
            if t_ref < t0 + dur - 1e-15:
                return _local_quad((t0, p0, v0, a, dur), t_ref)
        return _local_quad(phases[-1], t_ref)

    best = -math.inf
    best_t = t_lo
    n_terms = len(terms)
    for s, e in zip(grid[:-1], grid[1:]):
        width = e - s
        qi = quad_at(phases_i, s)
        qj = quad_at(phases_j, s)
        # term coefficients in local time x in [0, width]
        tc = []
        for ci, cj, c0 in terms:
            tc.append(
                (
                    ci * qi[2] + cj * qj[2],
                    ci * qi[1] + cj * qj[1],
                    ci * qi[0] + cj * qj[0] + c0,
                )
            )
        cands = [0.0, width]
        for a2, b, _ in tc:
            if a2 != 0.0:
                xv = -b / (2.0 * a2)
                if 0.0 < xv < width:
                    cands.append(xv)
        for u in range(n_terms):
            for w in range(u + 1, n_terms):
                da = tc[u][0] - tc[w][0]
                db = tc[u][1] - tc[w][1]
                dc = tc[u][2] - tc[w][2]
                if da == 0.0:
                    if db != 0.0:
                        x = -dc / db
                        if 0.0 < x < width:
                            cands.append(x)
                else:
                    disc = db * db - 4.0 * da * dc
                    if disc >= 0.0:
                        sq = math.sqrt(disc)
                        for x in ((-db + sq) / (2.0 * da), (-db - sq) / (2.0 * da)):
                            if 0.0 < x < width:
                                cands.append(x)
        for x in cands:
            g = math.inf
            for a2, b, c in tc:
                val = (a2 * x + b) * x + c
                if val < g:
                    g = val
            if g > best:
                best = g
                best_t = s + x
    return best, best_t


def min_gap(phases_i, phases_j, t_lo, t_hi):
    """Exact min over t in [t_lo, t_hi] of p_j(t) - p_i(t). Returns (value, t)."""
    if t_hi <= t_lo:
        return math.inf, t_lo
    cuts = {t_lo, t_hi}
    for phases in (phases_i, phases_j):
        for t0, _, _, _, dur in phases:
            if t_lo < t0 < t_hi:
                cuts.add(t0)
            e = t0 + dur
            if math.isfinite(e) and t_lo < e < t_hi:
                cuts.add(e)
    grid = sorted(cuts)
    best = math.inf
    best_t = t_lo
    for s, e in zip(grid[:-1], grid[1:]):
        width = e - s
        ci, bi, ai = _quad_at(phases_i, s)
        cj, bj, aj = _quad_at(phases_j, s)
        a2, b, c = aj - ai, bj - bi, cj - ci
        cands = [0.0, width]
        if a2 != 0.0:
            xv = -b / (2.0 * a2)
            if 0.0 < xv < width:
                cands.append(xv)
        for x in cands:
            g = (a2 * x + b) * x + c
            if g < best:
                best = g
                best_t = s + x
    return best, best_t


def _quad_at(phases, t_ref):
    for t0, p0, v0, a, dur in phases:
        if t_ref < t0 + dur - 1e-15:
            return _local_quad((t0, p0, v0, a, dur), t_ref)
    return _local_quad(phases[-1], t_ref)


def _quad_roots_in(a2, b, c, width):
    """Real roots of a2 x^2 + b x + c = 0 strictly inside (0, width)."""
    out = []
    if a2 == 0.0:
        if b != 0.0:
            x = -c / b
            if 0.0 < x < width:
                out.append(x)
        return out
    disc = b * b - 4.0 * a2 * c
    if disc < 0.0:
        return out
    sq = math.sqrt(disc)
    for x in ((-b + sq) / (2.0 * a2), (-b - sq) / (2.0 * a2)):
        if 0.0 < x < width:
            out.append(x)
    return out


def _max_min_quads(quads, x0, x1):
    """Exact max over [x0, x1] of min_k (a2_k x^2 + b_k x + c_k)."""
    cands = [x0, x1]
    n = len(quads)
    for a2, b, _ in quads:
        if a2 != 0.0:
            xv = -b / (2.0 * a2)
            if x0 < xv < x1:
                cands.append(xv)
    for u in range(n):
        for w in range(u + 1, n):
            da = quads[u][0] - quads[w][0]
            db = quads[u][1] - quads[w][1]
            dc = quads[u][2] - quads[w][2]
            for x in _quad_roots_in(da, db, dc, x1):
                if x > x0:
                    cands.append(x)
    best = -math.inf
    best_x = x0
    for x in cands:
        g = math.inf
        for a2, b, c in quads:
            val = (a2 * x + b) * x + c
            if val < g:
                g = val
        if g > best:
            best = g
            best_x = x
    return best, best_x


def same_road_tube_conflict(ego_phases, lo_phases, hi_phases, d_r, l_ego, l_adv,
                            t_lo, t_hi) -> bool:
    """True iff some kinematically feasible adversary trajectory inside the
    position tube [lo(t), hi(t)] produces a same-road zone conflict with ego.

    Any single point of the tube is reachable by a feasible trajectory, so the
    test is: does max over t of the conflict depth, with the adversary position
    free inside the tube cross-section, exceed zero? The free-position maximum
    of the depth is piecewise quadratic in t; branch switches are cut exactly.
    """
    if t_hi <= t_lo:
        return False
    cuts = {t_lo, t_hi}
    for phases in (ego_phases, lo_phases, hi_phases):
        for t0, _, _, _, dur in phases:
            if t_lo < t0 < t_hi:
                cuts.add(t0)
            e = t0 + dur
            if math.isfinite(e) and t_lo < e < t_hi:
                cuts.add(e)
    grid = sorted(cuts)
    best = -math.inf
    for s, e in zip(grid[:-1], grid[1:]):
        width = e - s
        if width <= 1e-15:
            continue
        qi = _quad_at(ego_phases, s)
        ql = _quad_at(lo_phases, s)
        qh = _quad_at(hi_phases, s)
        qi_q = (qi[2], qi[1], qi[0])
        ql_q = (ql[2], ql[1], ql[0])
        qh_q = (qh[2], qh[1], qh[0])

        # branch switches of U = min(0, l_ego - p_i) and S = l_adv + min(d_r, p_i)
        xs = {0.0, width}
        for x in _quad_roots_in(qi_q[0], qi_q[1], qi_q[2] - l_ego, width):
            xs.add(x)
        for x in _quad_roots_in(qi_q[0], qi_q[1], qi_q[2] - d_r, width):
            xs.add(x)
        sub = sorted(xs)
        for x0, x1 in zip(sub[:-1], sub[1:]):
            xm = 0.5 * (x0 + x1)
            pi_m = (qi_q[0] * xm + qi_q[1]) * xm + qi_q[2]
            if pi_m > l_ego:
                u_q = (-qi_q[0], -qi_q[1], l_ego - qi_q[2])
            else:
                u_q = (0.0, 0.0, 0.0)
            if pi_m < d_r:
                s_q = (qi_q[0], qi_q[1], qi_q[2] + l_adv)
            else:
                s_q = (0.0, 0.0, d_r + l_adv)
            # unclamped balance point p_a* = (S - U)/2
            pstar = tuple(0.5 * (s_q[k] - u_q[k]) for k in range(3))
            ys = {x0, x1}
            for x in _quad_roots_in(pstar[0] - ql_q[0], pstar[1] - ql_q[1],
                                    pstar[2] - ql_q[2], x1):
                if x > x0:
                    ys.add(x)
            for x in _quad_roots_in(pstar[0] - qh_q[0], pstar[1] - qh_q[1],
                                    pstar[2] - qh_q[2], x1):
                if x > x0:
                    ys.add(x)
            sub2 = sorted(ys)
            e1 = qi_q
            e2 = (-qi_q[0], -qi_q[1], d_r + l_ego - qi_q[2])
            for y0, y1 in zip(sub2[:-1], sub2[1:]):
                ym = 0.5 * (y0 + y1)
                ps = (pstar[0] * ym + pstar[1]) * ym + pstar[2]
                lo_m = (ql_q[0] * ym + ql_q[1]) * ym + ql_q[2]
                hi_m = (qh_q[0] * ym + qh_q[1]) * ym + qh_q[2]
                if ps < lo_m:
                    pin = ql_q
                elif ps > hi_m:
                    pin = qh_q
                else:
                    pin = pstar
                quads = [
                    e1,
                    e2,
                    tuple(pin[k] + u_q[k] for k in range(3)),
                    tuple(-pin[k] + s_q[k] for k in range(3)),
                ]
                val, _ = _max_min_quads(quads, y0, y1)
                if val > best:
                    best = val
                    if best > TOL:
                        return True
    return best > TOL


def _same_road_terms(d_r, l_i, l_j):
    # depth of triple intersection (0,d_r) ∩ (p_i-l_i, p_i) ∩ (p_j-l_j, p_j)
    return (
        (1.0, 0.0, 0.0),          # p_i
        (0.0, 1.0, 0.0),          # p_j
        (-1.0, 0.0, d_r + l_i),   # d_r - (p_i - l_i)
        (0.0, -1.0, d_r + l_j),   # d_r - (p_j - l_j)
        (1.0, -1.0, l_j),         # p_i - (p_j - l_j)
        (-1.0, 1.0, l_i),         # p_j - (p_i - l_i)
    )


def _cross_road_terms(d_r, d_rp, l_i, l_j):
    return (
        (1.0, 0.0, 0.0),
        (-1.0, 0.0, l_i + d_r),
        (0.0, 1.0, 0.0),
        (0.0, -1.0, l_j + d_rp),
    )


def same_road_conflict(traj_i: Trajectory, traj_j: Trajectory, d_r, l_i, l_j, horizon,
                       road_i=None, road_j=None) -> bool:
    """True iff some zone slice (x, x+l) is occupied by both bodies at once."""
    if road_i is not None and road_j is not None and road_i != road_j:
        raise ValueError("same_road_conflict called with distinct roads")
    t_lo = max(traj_i.origin_time, traj_j.origin_time)
    depth, _ = max_min_terms(
        traj_i.phases(), traj_j.phases(), _same_road_terms(d_r, l_i, l_j), t_lo, horizon
    )
    return depth > TOL


def cross_road_conflict(traj_i: Trajectory, traj_j: Trajectory, d_r, d_rp, l_i, l_j, horizon,
                        road_i=None, road_j=None) -> bool:
    """True iff both vehicles are strictly inside their own zones at once."""
    if road_i is not None and road_j is not None and road_i == road_j:
        raise ValueError("cross_road_conflict called with equal roads")
    t_lo = max(traj_i.origin_time, traj_j.origin_time)
    depth, _ = max_min_terms(
        traj_i.phases(), traj_j.phases(), _cross_road_terms(d_r, d_rp, l_i, l_j), t_lo, horizon
    )
    return depth > TOL


def zone_window(phases, span: float, t_hi: float):
    """Time interval [t_in, t_out) during which position lies in (0, span),
    given a monotone (v >= 0) phase list. Returns None if the zone is never
    entered before t_hi; t_out may be math.inf (parked inside)."""
    t_in = _crossing(phases, 0.0, t_hi)
    if t_in is None:
        return None
    t_out = _crossing(phases, span, t_hi)
    return (t_in, t_out if t_out is not None else math.inf)


def _crossing(phases, threshold, t_hi):
    """Earliest t <= t_hi with p(t) >= threshold on a phase list (p nondecreasing)."""
    for t0, p0, v0, a, dur in phases:
        if t0 > t_hi:
            return None
        end = min(dur, t_hi - t0)
        if p0 >= threshold:
            return t0
        c = p0 - threshold
        if a == 0.0:
            if v0 <= 0.0:
                continue
            x = -c / v0
        else:
            disc = v0 * v0 - 2.0 * a * c
            if disc < 0.0:
                continue
            x = (-v0 + math.sqrt(disc)) / a
        if 0.0 <= x <= end + 1e-12:
            return t0 + x
    return None


@dataclass(frozen=True)
class Violation:
    vehicle_i: int
    vehicle_j: int
    time: float
    depth: float
    kind: str  # "same_road" | "cross_road"


def audit(records, geometry, horizon, include_noncoop_pairs=False) -> list[Violation]:
    """Global referee: pairwise conflict scan over complete committed logs.

    records: iterable of objects with .vehicle (id, road, cooperative, limits)
    and .log (TrajectoryLog). Non-cooperative/non-cooperative pairs are skipped
    unless include_noncoop_pairs; the safety guarantee concerns cooperative
    traffic only.
    """
    recs = list(records)
    prepared = []
    for rec in recs:
        veh = rec.vehicle
        phases = rec.log.composite_phases(horizon)
        if not phases:
            continue
        prepared.append((veh, phases))
    out = []
    for i in range(len(prepared)):
        vi, ph_i = prepared[i]
        for j in range(i + 1, len(prepared)):
            vj, ph_j = prepared[j]
            if not include_noncoop_pairs and not vi.cooperative and not vj.cooperative:
                continue
            # window prefilter: each vehicle interacts with its zone while
            # p ∈ (0, l + d_own); disjoint windows cannot conflict
            d_i = geometry.extent(vi.road)
            d_j = geometry.extent(vj.road)
            w_i = zone_window(ph_i, vi.limits.length + d_i, horizon)
            w_j = zone_window(ph_j, vj.limits.length + d_j, horizon)
            if w_i is None or w_j is None:
                continue
            t_lo = max(w_i[0], w_j[0], ph_i[0][0], ph_j[0][0]) - 1e-6
            t_hi = min(w_i[1], w_j[1], horizon) + 1e-6
            t_lo = max(t_lo, ph_i[0][0], ph_j[0][0])
            t_hi = min(t_hi, horizon)
            if t_hi <= t_lo:
                continue
            if vi.road == vj.road:
                terms = _same_road_terms(d_i, vi.limits.length, vj.limits.length)
                kind = "same_road"
            else:
                terms = _cross_road_terms(d_i, d_j, vi.limits.length, vj.limits.length)
                kind = "cross_road"
            depth, t_star = max_min_terms(ph_i, ph_j, terms, t_lo, t_hi)
            if depth > TOL:
                out.append(Violation(vi.id, vj.id, t_star, depth, kind))
    return out
