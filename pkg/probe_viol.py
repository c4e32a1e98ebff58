"""Dump the mixed-run violations to see who hits whom, where, when."""
import sys

sys.path.insert(0, "/root/pkg/src")

from intersched import _kernels as K
from intersched.config import RunConfig
from intersched.engine import run
from intersched.traffic import generate_scenario

K.warmup()

cfg = RunConfig(A=600.0, B=200.0, horizon=100.0, lambda_coop=1.0,
                lambda_noncoop=0.2, noncoop_behavior="braking_pulse")
sc = generate_scenario(cfg, seed=3)
coop = {v.id for v in sc.vehicles if v.cooperative}
r = run(sc, policy="two_stage", seed=3)
for v in r.violations:
    ci = "C" if v.vehicle_i in coop else "N"
    cj = "C" if v.vehicle_j in coop else "N"
    print(f"{ci}{v.vehicle_i:4d} {cj}{v.vehicle_j:4d} kind={v.kind:10s} "
          f"t={v.time:8.3f} depth={v.depth:.4f}")
    for vid in (v.vehicle_i, v.vehicle_j):
        log = r.logs[vid]
        ph = log.composite_phases(r.horizon)
        st = None
        for t0, dur, p, vel, a in ph:
            if t0 <= v.time <= t0 + dur:
                dt = v.time - t0
                st = (p + vel * dt + 0.5 * a * dt * dt, vel + a * dt, a)
        spec = next(s for s in sc.vehicles if s.id == vid)
        print(f"   veh {vid} road={spec.road} coop={spec.cooperative} "
          f"spawn_t={spec.spawn_time:.2f} state_at_violation={st}")
