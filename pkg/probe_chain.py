"""Trace pred links, drops, commits and zone windows around the violations."""
import sys

sys.path.insert(0, "/root/pkg/src")

from intersched import _kernels as K
from intersched.config import RunConfig
from intersched.engine import _Sim
from intersched.traffic import generate_scenario

K.warmup()

cfg = RunConfig(A=600.0, B=200.0, horizon=100.0, lambda_coop=1.0,
                lambda_noncoop=0.2, noncoop_behavior="braking_pulse")
sc = generate_scenario(cfg, seed=3)
sim = _Sim(sc, "two_stage", 3, None, "ascending", None)
res = sim.run()

commit = {}
for d in res.decisions:
    if d.branch in ("commit", "floor") and d.vehicle not in commit:
        commit[d.vehicle] = d.time

print("id  road coop  handoff   pred dropped  commit    zone_in   zone_out")
for spec in sc.vehicles:
    lv = sim.live.get(spec.id)
    if lv is None or spec.id < 30 or spec.id > 60:
        continue
    hoff = next((h.time for h in res.handoffs if h.vehicle == spec.id), None)
    ti = res.entries.get(spec.id)
    to = res.clearances.get(spec.id)
    fmt = lambda x: f"{x:8.2f}" if x is not None else "      --"
    print(f"{spec.id:3d} {spec.road:3d} {'C' if spec.cooperative else 'N':>4s}"
          f" {fmt(hoff)}  {str(lv.pred):>5s} {str(lv.pred_dropped):>7s}"
          f" {fmt(commit.get(spec.id))} {fmt(ti)} {fmt(to)}")
