"""Positions of every live coop at vehicle 46's handoff instant."""
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

t = next(h.time for h in res.handoffs if h.vehicle == 46)
print(f"t_handoff(46) = {t}")
for vid in range(30, 50):
    lv = sim.live.get(vid)
    if lv is None or not lv.spec.cooperative:
        continue
    if lv.spec.spawn_time > t:
        continue
    st = lv.log.state_at(t)
    c = st.position - sc.extents[lv.spec.road] / 2.0
    print(f"  {vid:3d} road={lv.spec.road} p={st.position:9.3f} "
          f"v={st.velocity:6.2f} centered={c:9.3f}")
