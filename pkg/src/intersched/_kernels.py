"""Compiled batch twins of the boundary-stage numerics.

Every function here mirrors a pure-Python reference (phase building, gap
minima, follower-feasibility margins, rollout values, scenario packing)
operation for operation, so results agree bitwise on the same inputs; the
equivalence tests hold them to that. Scenario packs skip the reference's
dedupe steps: duplicates never change a max or a pruned argmin. Import of
numba is guarded: without it HAVE_NUMBA is False and callers keep the
pure-Python planners.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


TOL = 1e-9
_BIG = 1e15
_FAR_PAST = -1e30


# ---------------------------------------------------------------------------
# phase construction (rows: t0, p0, v0, a, dur)

@njit(cache=True)
def _brake_floor_phases(t_start, p, v, t_d, a_dec, a_acc, v_max, rows):
    """Brake at a_dec on [t_start, t_d], floor the throttle afterwards,
    saturating at rest and at the ceiling. Returns the row count."""
    n = 0
    t = t_start
    remaining = t_d - t_start
    a = -a_dec
    while remaining > 1e-15:
        if v <= 1e-15:
            rows[n, 0] = t
            rows[n, 1] = p
            rows[n, 2] = 0.0
            rows[n, 3] = 0.0
            rows[n, 4] = remaining
            n += 1
            v = 0.0
            t += remaining
            remaining = 0.0
        else:
            t_hit = (0.0 - v) / a
            if t_hit >= remaining:
                rows[n, 0] = t
                rows[n, 1] = p
                rows[n, 2] = v
                rows[n, 3] = a
                rows[n, 4] = remaining
                n += 1
                p += v * remaining + 0.5 * a * remaining * remaining
                v += a * remaining
                t += remaining
                remaining = 0.0
            else:
                rows[n, 0] = t
                rows[n, 1] = p
                rows[n, 2] = v
                rows[n, 3] = a
                rows[n, 4] = t_hit
                n += 1
                p += v * t_hit + 0.5 * a * t_hit * t_hit
                v = 0.0
                t += t_hit
                remaining -= t_hit
    if v >= v_max - 1e-15:
        rows[n, 0] = t
        rows[n, 1] = p
        rows[n, 2] = v_max
        rows[n, 3] = 0.0
        rows[n, 4] = math.inf
        return n + 1
    t_hit = (v_max - v) / a_acc
    rows[n, 0] = t
    rows[n, 1] = p
    rows[n, 2] = v
    rows[n, 3] = a_acc
    rows[n, 4] = t_hit
    n += 1
    p += v * t_hit + 0.5 * a_acc * t_hit * t_hit
    t += t_hit
    rows[n, 0] = t
    rows[n, 1] = p
    rows[n, 2] = v_max
    rows[n, 3] = 0.0
    rows[n, 4] = math.inf
    return n + 1


@njit(cache=True)
def _segments_phases(t_start, p, v, segs, n_segs, v_max, rows):
    """General segment list -> saturation-split phases; the last segment may
    have infinite duration. Mirrors the trajectory phase builder."""
    n = 0
    t = t_start
    for k in range(n_segs):
        dur = segs[k, 0]
        a = segs[k, 1]
        if dur <= 0.0:
            continue
        remaining = dur
        while remaining > 1e-15:
            at_top = a > 0.0 and v >= v_max - 1e-15
            at_rest = a < 0.0 and v <= 1e-15
            if at_top or at_rest or a == 0.0:
                if at_top:
                    v_hold = v_max
                elif at_rest:
                    v_hold = 0.0
                else:
                    v_hold = v
                if not math.isfinite(remaining):
                    rows[n, 0] = t
                    rows[n, 1] = p
                    rows[n, 2] = v_hold
                    rows[n, 3] = 0.0
                    rows[n, 4] = math.inf
                    return n + 1
                rows[n, 0] = t
                rows[n, 1] = p
                rows[n, 2] = v_hold
                rows[n, 3] = 0.0
                rows[n, 4] = remaining
                n += 1
                p += v_hold * remaining
                v = v_hold
                t += remaining
                remaining = 0.0
            else:
                if a > 0.0:
                    t_hit = (v_max - v) / a
                else:
                    t_hit = (0.0 - v) / a
                if t_hit >= remaining:
                    rows[n, 0] = t
                    rows[n, 1] = p
                    rows[n, 2] = v
                    rows[n, 3] = a
                    rows[n, 4] = remaining
                    n += 1
                    p += v * remaining + 0.5 * a * remaining * remaining
                    v += a * remaining
                    t += remaining
                    remaining = 0.0
                else:
                    rows[n, 0] = t
                    rows[n, 1] = p
                    rows[n, 2] = v
                    rows[n, 3] = a
                    rows[n, 4] = t_hit
                    n += 1
                    p += v * t_hit + 0.5 * a * t_hit * t_hit
                    if a > 0.0:
                        v = v_max
                    else:
                        v = 0.0
                    t += t_hit
                    remaining -= t_hit
    rows[n, 0] = t
    rows[n, 1] = p
    rows[n, 2] = v
    rows[n, 3] = 0.0
    rows[n, 4] = math.inf
    return n + 1


@njit(cache=True)
def _eval_rows(rows, n, t):
    """State (p, v) at t on a phase list; mirrors trajectory evaluation."""
    for k in range(n):
        if t <= rows[k, 0] + rows[k, 4]:
            dt = max(0.0, t - rows[k, 0])
            return (rows[k, 1] + rows[k, 2] * dt + 0.5 * rows[k, 3] * dt * dt,
                    rows[k, 2] + rows[k, 3] * dt)
    dt = t - rows[n - 1, 0]
    return rows[n - 1, 1] + rows[n - 1, 2] * dt, rows[n - 1, 2]


@njit(cache=True)
def endpoint_batch(p0, v0, t_k, t_next, accels, v_max, out):
    """Endpoint (p, v) at t_next of one constant-acceleration tick per accel."""
    segs = np.empty((1, 2))
    rows = np.empty((4, 5))
    dt = t_next - t_k
    for i in range(accels.shape[0]):
        segs[0, 0] = dt
        segs[0, 1] = accels[i]
        nr = _segments_phases(t_k, p0, v0, segs, 1, v_max, rows)
        p, v = _eval_rows(rows, nr, t_next)
        out[i, 0] = p
        out[i, 1] = v


# ---------------------------------------------------------------------------
# exact pairwise gap minimum over phase lists

@njit(cache=True)
def _quad_at(rows, n, t_ref):
    for k in range(n):
        if t_ref < rows[k, 0] + rows[k, 4] - 1e-15:
            dt = t_ref - rows[k, 0]
            c = rows[k, 1] + rows[k, 2] * dt + 0.5 * rows[k, 3] * dt * dt
            b = rows[k, 2] + rows[k, 3] * dt
            return c, b, 0.5 * rows[k, 3]
    dt = t_ref - rows[n - 1, 0]
    c = rows[n - 1, 1] + rows[n - 1, 2] * dt + 0.5 * rows[n - 1, 3] * dt * dt
    b = rows[n - 1, 2] + rows[n - 1, 3] * dt
    return c, b, 0.5 * rows[n - 1, 3]


@njit(cache=True)
def _min_gap(rows_i, ni, rows_j, nj, t_lo, t_hi, cuts):
    if t_hi <= t_lo:
        return math.inf
    m = 0
    cuts[m] = t_lo
    m += 1
    cuts[m] = t_hi
    m += 1
    for k in range(ni):
        t0 = rows_i[k, 0]
        if t_lo < t0 < t_hi:
            cuts[m] = t0
            m += 1
        e = t0 + rows_i[k, 4]
        if math.isfinite(e) and t_lo < e < t_hi:
            cuts[m] = e
            m += 1
    for k in range(nj):
        t0 = rows_j[k, 0]
        if t_lo < t0 < t_hi:
            cuts[m] = t0
            m += 1
        e = t0 + rows_j[k, 4]
        if math.isfinite(e) and t_lo < e < t_hi:
            cuts[m] = e
            m += 1
    # insertion sort; duplicate cuts only add zero-width intervals
    for k in range(1, m):
        key = cuts[k]
        j = k - 1
        while j >= 0 and cuts[j] > key:
            cuts[j + 1] = cuts[j]
            j -= 1
        cuts[j + 1] = key
    best = math.inf
    for k in range(m - 1):
        s = cuts[k]
        width = cuts[k + 1] - s
        ci, bi, ai = _quad_at(rows_i, ni, s)
        cj, bj, aj = _quad_at(rows_j, nj, s)
        a2 = aj - ai
        b = bj - bi
        c = cj - ci
        g = c
        if g < best:
            best = g
        g = (a2 * width + b) * width + c
        if g < best:
            best = g
        if a2 != 0.0:
            xv = -b / (2.0 * a2)
            if 0.0 < xv < width:
                g = (a2 * xv + b) * xv + c
                if g < best:
                    best = g
    return best


# ---------------------------------------------------------------------------
# follower-feasibility margins

@njit(cache=True)
def ffol_min_gaps(ps, vs, t_next, pred_p, pred_v, pred_stamp,
                  a_dec, a_acc, v_max, n_grid):
    """Per candidate: the worst (over shared dip times) minimum gap to the
    predecessor under joint brake-then-floor continuations. Candidates whose
    stop envelope is already positive get -inf (never members)."""
    n = ps.shape[0]
    out = np.empty(n)
    ego_rows = np.empty((6, 5))
    pred_rows = np.empty((6, 5))
    cuts = np.empty(32)
    tds = np.empty(4 + n_grid)
    pred_stop = pred_stamp + pred_v / a_dec
    for i in range(n):
        if ps[i] + vs[i] * vs[i] / (2.0 * a_dec) > TOL:
            out[i] = -math.inf
            continue
        ego_stop = t_next + vs[i] / a_dec
        t_hi = max(max(t_next, ego_stop), pred_stop)
        worst = math.inf
        tds[0] = t_next
        tds[1] = t_hi
        tds[2] = min(max(ego_stop, t_next), t_hi)
        tds[3] = min(max(pred_stop, t_next), t_hi)
        n_td = 4
        if n_grid > 1 and t_hi > t_next:
            step = (t_hi - t_next) / (n_grid - 1)
            for k in range(n_grid):
                tds[n_td] = t_next + k * step
                n_td += 1
        for k in range(n_td):
            t_d = tds[k]
            ne = _brake_floor_phases(t_next, ps[i], vs[i], t_d,
                                     a_dec, a_acc, v_max, ego_rows)
            np_ = _brake_floor_phases(pred_stamp, pred_p, pred_v, t_d,
                                      a_dec, a_acc, v_max, pred_rows)
            t_end = max(max(ego_rows[ne - 1, 0], pred_rows[np_ - 1, 0]),
                        t_next) + 1.0
            gap = _min_gap(ego_rows, ne, pred_rows, np_, t_next, t_end, cuts)
            if gap < worst:
                worst = gap
        out[i] = worst
    return out


# ---------------------------------------------------------------------------
# rollout value

@njit(cache=True)
def _approach_phases(p, v, t0, wall, v_max, a_dec, a_acc, segs, rows):
    """Time-optimal throttle-then-brake approach parked at the wall (or the
    unbounded throttle profile when there is no wall)."""
    if not math.isfinite(wall):
        segs[0, 0] = math.inf
        segs[0, 1] = a_acc
        return _segments_phases(t0, p, v, segs, 1, v_max, rows)
    p_s = (2.0 * a_dec * wall - v * v + 2.0 * a_acc * p) \
        / (2.0 * (a_dec + a_acc))
    p_s = max(p_s, p)
    v_s_sq = max(2.0 * a_dec * (wall - p_s), 0.0)
    v_s = math.sqrt(v_s_sq)
    if v_s <= v_max:
        t1 = max(v_s - v, 0.0) / a_acc
        t2 = v_s / a_dec
        segs[0, 0] = t1
        segs[0, 1] = a_acc
        segs[1, 0] = t2
        segs[1, 1] = -a_dec
        segs[2, 0] = math.inf
        segs[2, 1] = 0.0
        return _segments_phases(t0, p, v, segs, 3, v_max, rows)
    t1 = (v_max - v) / a_acc
    p_plateau = p + (v_max * v_max - v * v) / (2.0 * a_acc)
    p_brake = wall - v_max * v_max / (2.0 * a_dec)
    t_cr = max(p_brake - p_plateau, 0.0) / v_max
    t2 = v_max / a_dec
    segs[0, 0] = t1
    segs[0, 1] = a_acc
    segs[1, 0] = t_cr
    segs[1, 1] = 0.0
    segs[2, 0] = t2
    segs[2, 1] = -a_dec
    segs[3, 0] = math.inf
    segs[3, 1] = 0.0
    return _segments_phases(t0, p, v, segs, 4, v_max, rows)


@njit(cache=True)
def _crossing_phases(rows, n, threshold, t_from):
    """Earliest t >= t_from with p(t) >= threshold; nan if never."""
    t0_search = t_from
    for k in range(n):
        t0 = rows[k, 0]
        p0 = rows[k, 1]
        v0 = rows[k, 2]
        a = rows[k, 3]
        dur = rows[k, 4]
        t_end = t0 + dur
        if t_end < t0_search:
            continue
        if math.isfinite(dur):
            p_end = p0 + v0 * dur + 0.5 * a * dur * dur
        else:
            p_end = math.inf
        if a == 0.0 and v0 == 0.0:
            p_end = p0
        lo = max(t0, t0_search)
        dt_lo = lo - t0
        p_lo = p0 + v0 * dt_lo + 0.5 * a * dt_lo * dt_lo
        if p_lo >= threshold:
            return lo
        if p_end < threshold:
            continue
        c = p0 - threshold
        if a == 0.0:
            if v0 <= 0.0:
                continue
            dt = -c / v0
        else:
            disc = v0 * v0 - 2.0 * a * c
            if disc < 0.0:
                continue
            dt = (-v0 + math.sqrt(disc)) / a
        if dt >= dt_lo - 1e-12 and (not math.isfinite(dur) or dt <= dur + 1e-12):
            return t0 + max(dt, dt_lo)
    return math.nan


@njit(cache=True)
def _velocity_phases(rows, n, t):
    for k in range(n):
        if t <= rows[k, 0] + rows[k, 4]:
            dt = max(0.0, t - rows[k, 0])
            return rows[k, 2] + rows[k, 3] * dt
    return rows[n - 1, 2]


@njit(cache=True)
def _capped(park_pos, t0, ideal_ref, value_horizon, v_max, a_acc):
    t_h = t0 + value_horizon
    return ideal_ref + v_max * t_h - park_pos + v_max * v_max / (2.0 * a_acc)


@njit(cache=True)
def _clearance(t_c, v_c, ideal_ref, ego_span, v_max, a_acc):
    return (ideal_ref + v_max * t_c - ego_span
            + (v_max - v_c) * (v_max - v_c) / (2.0 * a_acc))


@njit(cache=True)
def _rollout_one(p, v, windows, wall, t0, ideal_ref, ego_span,
                 v_max, a_dec, a_acc, value_horizon, segs, rows):
    """Worst-case rollout cost of one candidate endpoint under one scenario
    (merged blocking windows plus a same-road wall)."""
    n_win = windows.shape[0]
    if p > wall + TOL:
        return _BIG * (1.0 + p - wall)
    q_e = p + v * v / (2.0 * a_dec)
    if q_e > wall + TOL:
        return _BIG * (1.0 + q_e - wall)
    if q_e > TOL:
        if wall < ego_span - TOL:
            return _BIG * (1.0 + ego_span - wall)
        nr = _approach_phases(p, v, t0, wall, v_max, a_dec, a_acc, segs, rows)
        t_c = _crossing_phases(rows, nr, ego_span, rows[0, 0])
        if math.isnan(t_c):
            park = wall if math.isfinite(wall) else q_e
            return _capped(park, t0, ideal_ref, value_horizon, v_max, a_acc)
        return _clearance(t_c, _velocity_phases(rows, nr, t_c),
                          ideal_ref, ego_span, v_max, a_acc)
    if wall < ego_span - TOL:
        return _capped(wall, t0, ideal_ref, value_horizon, v_max, a_acc)
    t_stop = t0 + v / a_dec
    cap_t = t0 + value_horizon
    nr = _approach_phases(q_e, 0.0, 0.0, wall, v_max, a_dec, a_acc, segs, rows)
    parked_entry_offset = _crossing_phases(rows, nr, 0.0, rows[0, 0])
    t_rel = t0
    for _ in range(n_win + 2):
        if t_rel >= t_stop:
            st_p = q_e
            st_v = 0.0
        else:
            dt = t_rel - t0
            st_p = p + v * dt - 0.5 * a_dec * dt * dt
            st_v = v - a_dec * dt
        nr = _approach_phases(st_p, st_v, t_rel, wall, v_max, a_dec, a_acc,
                              segs, rows)
        t_in = _crossing_phases(rows, nr, 0.0, rows[0, 0])
        t_c = _crossing_phases(rows, nr, ego_span, rows[0, 0])
        if math.isnan(t_in) or math.isnan(t_c):
            return _capped(q_e, t0, ideal_ref, value_horizon, v_max, a_acc)
        blk_b = math.nan
        for w in range(n_win):
            if t_in < windows[w, 1] and t_c > windows[w, 0]:
                blk_b = windows[w, 1]
                break
        if math.isnan(blk_b):
            return _clearance(t_c, _velocity_phases(rows, nr, t_c),
                              ideal_ref, ego_span, v_max, a_acc)
        if not math.isfinite(blk_b):
            return _capped(q_e, t0, ideal_ref, value_horizon, v_max, a_acc)
        if math.isnan(parked_entry_offset):
            return _capped(q_e, t0, ideal_ref, value_horizon, v_max, a_acc)
        t_rel_parked = blk_b - parked_entry_offset
        if t_rel_parked >= t_stop:
            t_rel = max(t_rel, t_rel_parked)
        else:
            lo = max(t_rel, t0)
            hi = t_stop
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if mid >= t_stop:
                    m_p = q_e
                    m_v = 0.0
                else:
                    dtm = mid - t0
                    m_p = p + v * dtm - 0.5 * a_dec * dtm * dtm
                    m_v = v - a_dec * dtm
                nrm = _approach_phases(m_p, m_v, mid, wall, v_max, a_dec,
                                       a_acc, segs, rows)
                e_m = _crossing_phases(rows, nrm, 0.0, rows[0, 0])
                if math.isnan(e_m) or e_m >= blk_b:
                    hi = mid
                else:
                    lo = mid
            t_rel = hi
        if t_rel > cap_t:
            return _capped(q_e, t0, ideal_ref, value_horizon, v_max, a_acc)
    return _capped(q_e, t0, ideal_ref, value_horizon, v_max, a_acc)


@njit(cache=True)
def rollout_values(ps, vs, windows, wall, t0, ideal_ref, ego_span,
                   v_max, a_dec, a_acc, value_horizon):
    """Rollout cost for each candidate endpoint under one scenario."""
    n = ps.shape[0]
    out = np.empty(n)
    segs = np.empty((4, 2))
    rows = np.empty((8, 5))
    for i in range(n):
        out[i] = _rollout_one(ps[i], vs[i], windows, wall, t0, ideal_ref,
                              ego_span, v_max, a_dec, a_acc, value_horizon,
                              segs, rows)
    return out


@njit(cache=True)
def argmin_worst_rollout(ps, vs, win_flat, win_off, walls, n_scen, t0,
                         ideal_ref, ego_span, v_max, a_dec, a_acc,
                         value_horizon):
    """Index of the candidate minimizing (max-over-scenarios value, -p, -v).

    A candidate whose running max already exceeds the incumbent's worst value
    is abandoned early; that can only skip candidates whose final key would
    compare strictly greater, so the winner is unchanged.
    """
    segs = np.empty((4, 2))
    rows = np.empty((8, 5))
    best = -1
    best_w = 0.0
    best_p = 0.0
    best_v = 0.0
    for i in range(ps.shape[0]):
        p = ps[i]
        v = vs[i]
        worst = -math.inf
        lost = False
        for s in range(n_scen):
            val = _rollout_one(p, v, win_flat[win_off[s]:win_off[s + 1]],
                               walls[s], t0, ideal_ref, ego_span, v_max,
                               a_dec, a_acc, value_horizon, segs, rows)
            if val > worst:
                worst = val
                if best >= 0 and worst > best_w:
                    lost = True
                    break
        if lost:
            continue
        if best < 0:
            take = True
        elif worst < best_w:
            take = True
        elif worst == best_w and (p > best_p or (p == best_p and v > best_v)):
            take = True
        else:
            take = False
        if take:
            best = i
            best_w = worst
            best_p = p
            best_v = v
    return best


# ---------------------------------------------------------------------------
# batched observation evaluation

@njit(cache=True)
def observe_batch(rows, counts, idxs, stamps, out):
    """Evaluate cached piecewise profiles at per-target stamps.

    rows[j] holds contiguous (t_start, p0, v0, a, dur) rows for vehicle slot
    j, clipped at successor origins; the final row has infinite duration, so
    the scan always terminates. Arithmetic matches the scalar evaluator
    expression for expression."""
    for k in range(idxs.shape[0]):
        j = idxs[k]
        s = stamps[k]
        n = counts[j]
        for i in range(n):
            t0 = rows[j, i, 0]
            dur = rows[j, i, 4]
            if s <= t0 + dur:
                dt = s - t0
                if dt < 0.0:
                    dt = 0.0
                a = rows[j, i, 3]
                out[k, 0] = rows[j, i, 1] + rows[j, i, 2] * dt + 0.5 * a * dt * dt
                out[k, 1] = rows[j, i, 2] + a * dt
                break


# ---------------------------------------------------------------------------
# scenario packing (product of per-adversary extreme continuations)

@njit(cache=True)
def scenario_pack(adv, n_adv, ego_road, ego_pos, t_now, earliest, ext, length,
                  v_max, a_dec, a_acc, relevance, cap,
                  win_flat, win_off, walls):
    """Pack the scenario set into flat arrays; returns the scenario count.

    adv rows: (road, position, velocity, stamp). An adversary with one
    surviving continuation joins a base shared by every scenario; only
    two-sided adversaries branch. Same-road branchers enter linearly (the
    all-floor combo plus one combo per braking leader, which dominates any
    multi-braker assignment); cross-road branchers enter as a product.
    Branchers are kept nearest effect first up to the cap, the rest fall
    back to their flooring window. Windows closing before earliest (ego's
    floored zone entry) can never bind and are dropped up front. Scenarios
    are not deduped (duplicates cannot change a max).
    """
    opt = np.empty((n_adv + 1, 2, 4))  # has_window, lo, hi, wall
    eff = np.empty(n_adv + 1)
    kind = np.empty(n_adv + 1, np.int64)  # 1 same-road, 2 cross-road
    base = np.empty((n_adv + 1, 2))
    base_wall = math.inf
    nb = 0
    segs = np.empty((1, 2))
    rows = np.empty((4, 5))
    m = 0
    for j in range(n_adv):
        road = int(adv[j, 0])
        p = adv[j, 1]
        v = adv[j, 2]
        stamp = adv[j, 3]
        if road != ego_road:
            span = length + ext[road]
            for oi in range(2):
                opt[m, oi, 0] = 0.0
                opt[m, oi, 3] = math.inf
                if p >= span:
                    continue
                segs[0, 0] = math.inf
                segs[0, 1] = -a_dec if oi == 0 else a_acc
                nr = _segments_phases(stamp, p, v, segs, 1, v_max, rows)
                t_in = _crossing_phases(rows, nr, 0.0, rows[0, 0])
                if math.isnan(t_in):
                    continue
                t_out = _crossing_phases(rows, nr, span, t_in)
                hi = t_out if not math.isnan(t_out) else math.inf
                if hi <= earliest:
                    continue
                opt[m, oi, 0] = 1.0
                opt[m, oi, 1] = t_in
                opt[m, oi, 2] = hi
            if opt[m, 0, 0] == 0.0 and opt[m, 1, 0] == 0.0:
                continue
            two = (opt[m, 0, 0] == 1.0 and opt[m, 1, 0] == 1.0
                   and (opt[m, 0, 1] != opt[m, 1, 1]
                        or opt[m, 0, 2] != opt[m, 1, 2]))
            kind[m] = 2
        else:
            if p <= ego_pos:
                continue
            span = length + ext[road]
            if p >= span + length:
                continue
            opt[m, 0, 0] = 0.0
            opt[m, 0, 3] = (p + v * v / (2.0 * a_dec)) - length
            segs[0, 0] = math.inf
            segs[0, 1] = a_acc
            nr = _segments_phases(stamp, p, v, segs, 1, v_max, rows)
            t_free = _crossing_phases(rows, nr, length, rows[0, 0])
            if t_free <= earliest:
                opt[m, 1, 0] = 0.0
                opt[m, 1, 1] = 0.0
                opt[m, 1, 2] = 0.0
            else:
                opt[m, 1, 0] = 1.0
                opt[m, 1, 1] = _FAR_PAST
                opt[m, 1, 2] = t_free
            opt[m, 1, 3] = math.inf
            two = opt[m, 1, 0] == 1.0
            kind[m] = 1
        e = math.inf
        for oi in range(2):
            if opt[m, oi, 0] == 1.0:
                e = min(e, max(opt[m, oi, 1], t_now))
            w = opt[m, oi, 3]
            if math.isfinite(w):
                e = min(e, t_now + max(w - ego_pos, 0.0) / v_max)
        if e > t_now + relevance:
            continue
        if not two:
            if kind[m] == 1:
                base_wall = min(base_wall, opt[m, 0, 3])
            else:
                oi = 0 if opt[m, 0, 0] == 1.0 else 1
                base[nb, 0] = opt[m, oi, 1]
                base[nb, 1] = opt[m, oi, 2]
                nb += 1
            continue
        eff[m] = e
        m += 1
    # stable sort branchers by effect, nearest first
    order = np.empty(m + 1, np.int64)
    for i in range(m):
        order[i] = i
    for i in range(1, m):
        key = eff[order[i]]
        oi_ = order[i]
        j = i - 1
        while j >= 0 and eff[order[j]] > key:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = oi_
    mm = min(m, cap)
    for i in range(mm, m):
        jj = order[i]
        base[nb, 0] = opt[jj, 1, 1]
        base[nb, 1] = opt[jj, 1, 2]
        nb += 1
    same_idx = np.empty(mm + 1, np.int64)
    cross_idx = np.empty(mm + 1, np.int64)
    ks = 0
    cs = 0
    for i in range(mm):
        jj = order[i]
        if kind[jj] == 1:
            same_idx[ks] = jj
            ks += 1
        else:
            cross_idx[cs] = jj
            cs += 1
    n_scen = (ks + 1) << cs
    tmp = np.empty((nb + mm + 1, 2))
    cursor = 0
    idx = 0
    for s in range(ks + 1):
        for mask in range(1 << cs):
            wall = base_wall
            if s > 0 and opt[same_idx[s - 1], 0, 3] < wall:
                wall = opt[same_idx[s - 1], 0, 3]
            nw = 0
            for b in range(nb):
                if base[b, 1] > t_now:
                    tmp[nw, 0] = base[b, 0]
                    tmp[nw, 1] = base[b, 1]
                    nw += 1
            for j in range(ks):
                if j != s - 1:
                    row = opt[same_idx[j], 1]
                    if row[2] > t_now:
                        tmp[nw, 0] = row[1]
                        tmp[nw, 1] = row[2]
                        nw += 1
            for j in range(cs):
                row = opt[cross_idx[j], (mask >> j) & 1]
                if row[3] < wall:
                    wall = row[3]
                if row[0] == 1.0 and row[2] > t_now:
                    tmp[nw, 0] = row[1]
                    tmp[nw, 1] = row[2]
                    nw += 1
            # sort windows by (start, end), then merge near-touching ones
            for w_i in range(1, nw):
                lo0 = tmp[w_i, 0]
                hi0 = tmp[w_i, 1]
                j = w_i - 1
                while j >= 0 and (tmp[j, 0] > lo0
                                  or (tmp[j, 0] == lo0 and tmp[j, 1] > hi0)):
                    tmp[j + 1, 0] = tmp[j, 0]
                    tmp[j + 1, 1] = tmp[j, 1]
                    j -= 1
                tmp[j + 1, 0] = lo0
                tmp[j + 1, 1] = hi0
            win_off[idx] = cursor
            start = cursor
            for w_i in range(nw):
                a0 = tmp[w_i, 0]
                b0 = tmp[w_i, 1]
                if cursor > start and a0 <= win_flat[cursor - 1, 1] + 1e-12:
                    if b0 > win_flat[cursor - 1, 1]:
                        win_flat[cursor - 1, 1] = b0
                else:
                    win_flat[cursor, 0] = a0
                    win_flat[cursor, 1] = b0
                    cursor += 1
            walls[idx] = wall
            idx += 1
    win_off[n_scen] = cursor
    return n_scen


def warmup() -> None:
    """Force compilation of every kernel (cache persists across processes)."""
    if not HAVE_NUMBA:
        return
    ps = np.array([-30.0, -10.0])
    vs = np.array([5.0, 20.0])
    out = np.empty((3, 2))
    endpoint_batch(-30.0, 5.0, 0.0, 0.1, np.array([-4.0, 0.0, 3.0]), 20.0, out)
    ffol_min_gaps(ps, vs, 0.1, -5.0, 18.0, 0.0, 4.0, 3.0, 20.0, 8)
    win = np.array([[1.0, 2.0]])
    rollout_values(ps, vs, win, math.inf, 0.1, 0.0, 10.0, 20.0, 4.0, 3.0, 180.0)
    rollout_values(ps, vs, np.empty((0, 2)), -12.0, 0.1, 0.0, 10.0,
                   20.0, 4.0, 3.0, 180.0)
    adv = np.array([[1.0, -40.0, 18.0, 0.0], [0.0, -10.0, 12.0, 0.0]])
    win_flat = np.empty((64, 2))
    win_off = np.empty(33, dtype=np.int64)
    walls = np.empty(32)
    ns = scenario_pack(adv, 2, 0, -50.0, 0.1, 0.1, np.array([5.0, 5.0, 5.0]),
                       5.0, 20.0, 4.0, 3.0, 90.0, 8, win_flat, win_off, walls)
    argmin_worst_rollout(ps, vs, win_flat, win_off, walls, ns, 0.1, 0.0,
                         10.0, 20.0, 4.0, 3.0, 180.0)
    prof = np.zeros((1, 4, 5))
    prof[0, 0] = (0.0, -30.0, 5.0, 3.0, 5.0)
    prof[0, 1] = (5.0, 8.75, 20.0, 0.0, math.inf)
    observe_batch(prof, np.array([2], dtype=np.int64),
                  np.array([0], dtype=np.int64), np.array([1.3]),
                  np.empty((1, 2)))
