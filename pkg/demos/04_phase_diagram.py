"""
Phase diagram in the (q1, contrast) plane
=========================================

Classify a coarse grid of operating points, trace the saddle-node and Hopf
branches, and read off the contrasts at which oscillations first appear.
The default grid (201 x 120) takes a few minutes; this one takes about two.
"""

import numpy as np

from twofluidnet import continuation as C
from twofluidnet.model import example_config

cfg = example_config(1)
d = C.build_phase_diagram(cfg, q1_grid=np.linspace(0.0, 1.0, 41), contrast_grid=np.geomspace(2.0, 500.0, 30))
print("regions present:", d.regions_present())
code = {lab: str(k + 1) for k, lab in enumerate(C.REGIONS)}
print("rows below use 1-5 for regions", ", ".join(C.REGIONS))
for m in (5.0, 30.0, 100.0):
    j = int(np.argmin(np.abs(np.log(d.contrast / m))))
    print(f"contrast {d.contrast[j]:7.2f}: " + "".join(code.get(lab, "?") for lab in d.labels[j]))

hopf = [c for c in d.curves if c.kind == C.HOPF]
q1, m, omega, label = C.destabilizing_minima(cfg, hopf)[0]
print(f"first oscillatory instability: contrast {m:.2f} at q1 = {q1:.3f} (omega {omega:.2f}, {label})")
cross = min((p for h in hopf for s in d.curves if s.kind != C.HOPF for p in C.crossings(h, s)), key=lambda p: p[1])
print(f"Hopf branch enters the multiple-equilibria region at contrast {cross[1]:.2f}")
