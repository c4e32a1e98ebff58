"""Bit-equivalence probe: FastPlanner vs the pure-Python planners."""
import math
import sys
import time

sys.path.insert(0, "/root/pkg/src")
sys.path.insert(0, "/root/pkg/tests")

import numpy as np

from intersched import _kernels as K
from intersched._fastpath import FastPlanner
from intersched.core import KinematicLimits, RoadGeometry, VehicleState
from intersched.short_horizon import (
    Knowledge, Observation, ShortHorizonParams, algorithm2_step,
    baseline_minimax_step, candidate_endpoints, f_fol_member,
    best_safe_trajectory,
)
from intersched.safety import follow_clearance, TOL

print("HAVE_NUMBA", K.HAVE_NUMBA)
t0 = time.time()
K.warmup()
print(f"warmup {time.time()-t0:.1f}s")

LIM = KinematicLimits(v_max=20.0, a_dec=4.0, a_acc=3.0, length=5.0)
GEO = RoadGeometry(3, (5.0, 5.0, 5.0))
PAR = ShortHorizonParams(B=200.0, decision_gap=0.1, tau=0.1, limits=LIM,
                         geometry=GEO)
FP = FastPlanner(PAR)
rng = np.random.default_rng(7)

# --- endpoint_batch vs candidate_endpoints -------------------------------
bad = 0
for _ in range(300):
    p = rng.uniform(-220.0, 20.0)
    v = rng.uniform(0.0, 20.0)
    t_k = rng.uniform(0.0, 80.0)
    t_next = t_k + 0.1
    st = VehicleState(p, v)
    ref = candidate_endpoints(st, t_k, t_next, PAR)
    fast = FP._endpoints(st, t_k, t_next)
    if len(ref) != len(fast):
        bad += 1
        continue
    for (a1, _, p1, v1), (a2, p2, v2) in zip(ref, fast):
        if not (a1 == a2 and p1 == p2 and v1 == v2):
            bad += 1
            break
print("endpoint mismatches:", bad)

# --- ffol_min_gaps membership vs f_fol_member ----------------------------
bad = 0
for _ in range(400):
    t_next = rng.uniform(0.0, 50.0)
    cand = VehicleState(rng.uniform(-150.0, -1.0), rng.uniform(0.0, 20.0))
    pred = Observation(9, VehicleState(cand.position + rng.uniform(0.0, 60.0),
                                       rng.uniform(0.0, 20.0)),
                       t_next - rng.uniform(0.0, 0.3), rng.integers(0, 3))
    L = follow_clearance(5.0, 5.0, bool(rng.integers(0, 2)))
    ref = f_fol_member(cand, t_next, pred, L, LIM, PAR.tD_grid)
    gaps = K.ffol_min_gaps(np.array([cand.position]), np.array([cand.velocity]),
                           t_next, pred.state.position, pred.state.velocity,
                           pred.stamp, 4.0, 3.0, 20.0, PAR.tD_grid)
    fast = not (gaps[0] < L - TOL)
    if ref != fast:
        bad += 1
print("ffol membership mismatches:", bad)


def rand_knowledge(t_k, with_pred, n_nc):
    pred = None
    if with_pred:
        pp = rng.uniform(-180.0, 30.0)
        pred = Observation(50, VehicleState(pp, rng.uniform(0.0, 20.0)),
                           t_k - rng.uniform(0.0, 0.1), int(rng.integers(0, 3)))
    ncs = []
    for j in range(n_nc):
        ncs.append(Observation(100 + j,
                               VehicleState(rng.uniform(-250.0, 40.0),
                                            rng.uniform(0.0, 20.0)),
                               t_k - rng.uniform(0.0, 0.2),
                               int(rng.integers(0, 3))))
    return Knowledge(0, pred, tuple(ncs), pred is None)


# --- full planner equivalence --------------------------------------------
t0 = time.time()
bad_a = bad_b = 0
for trial in range(400):
    t_k = rng.uniform(0.0, 60.0)
    t_next = t_k + 0.1
    st = VehicleState(rng.uniform(-200.0, -0.5), rng.uniform(0.0, 20.0))
    kn = rand_knowledge(t_k, bool(rng.integers(0, 2)), int(rng.integers(0, 6)))
    ideal = rng.uniform(0.0, 40.0)
    r1 = algorithm2_step(st, kn, PAR, t_k, t_next, ideal)
    f1 = FP.algorithm2(st, kn, t_k, t_next, ideal)
    if r1.phases() != f1.phases():
        bad_a += 1
        if bad_a <= 3:
            print("ALG2 mismatch", trial, st, len(kn.noncoop),
                  kn.predecessor is not None)
    r2 = baseline_minimax_step(st, kn, PAR, t_k, t_next, ideal)
    f2 = FP.baseline(st, kn, t_k, t_next, ideal)
    if r2.phases() != f2.phases():
        bad_b += 1
        if bad_b <= 3:
            print("BASE mismatch", trial, st, len(kn.noncoop))
print(f"alg2 mismatches: {bad_a}  baseline mismatches: {bad_b} "
      f"({time.time()-t0:.1f}s for 400 pairs)")
