"""System probe: fast vs reference whole-run equality, then wall-clock."""
import sys
import time

sys.path.insert(0, "/root/pkg/src")

from intersched import _kernels as K
from intersched.config import RunConfig
from intersched.engine import run
from intersched.traffic import generate_scenario

K.warmup()


def same(r1, r2):
    if r1.decisions != r2.decisions:
        return "decisions"
    if r1.handoffs != r2.handoffs:
        return "handoffs"
    if r1.entries != r2.entries or r1.clearances != r2.clearances:
        return "zone times"
    if r1.violations != r2.violations:
        return "violations"
    for vid, log in r1.logs.items():
        if log.composite_phases(r1.horizon) != r2.logs[vid].composite_phases(r2.horizon):
            return f"phases {vid}"
    return None


base = dict(A=600.0, B=200.0, horizon=60.0)
for policy in ("two_stage", "baseline_minimax"):
    for lam_nc, beh in ((0.1, "constant_speed"), (0.2, "braking_pulse"),
                        (0.15, "random_bounded")):
        cfg = RunConfig(A=base["A"], B=base["B"], horizon=base["horizon"], lambda_coop=1.0, lambda_noncoop=lam_nc,
                        noncoop_behavior=beh)
        sc = generate_scenario(cfg, seed=11)
        t0 = time.time()
        rf = run(sc, policy=policy, seed=11, fast=True)
        tf = time.time() - t0
        t0 = time.time()
        rr = run(sc, policy=policy, seed=11, fast=False)
        tr = time.time() - t0
        diff = same(rf, rr)
        n = len(sc.vehicles)
        print(f"{policy:17s} nc={beh:15s} veh={n:3d} fast={tf:6.2f}s "
              f"ref={tr:7.2f}s  {'MATCH' if diff is None else 'DIFF: ' + diff}")

# budget-shaped timing: criterion 6 (A=600, W=6, 100 s) and criterion 2 (B=200)
print("\n-- budgets --")
for policy in ("two_stage", "baseline_minimax"):
    for lam_c, lam_nc in ((0.6, 0.0), (1.0, 0.2)):
        cfg = RunConfig(A=600.0, B=200.0, horizon=100.0, lambda_coop=lam_c,
                        lambda_noncoop=lam_nc, noncoop_behavior="braking_pulse")
        sc = generate_scenario(cfg, seed=3)
        t0 = time.time()
        r = run(sc, policy=policy, seed=3, fast=True)
        print(f"{policy:17s} lc={lam_c} lnc={lam_nc} veh={len(sc.vehicles):3d} "
              f"{time.time()-t0:6.2f}s  viol={len(r.violations)}")
