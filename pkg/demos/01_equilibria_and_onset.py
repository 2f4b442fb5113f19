"""
Multiple equilibria and their onset
===================================

Solve the loop-flow equation of the symmetric reference network, watch a
single equilibrium split into three as the viscosity contrast grows, and
compare the onset contrast with its closed-form approximation.
"""

import numpy as np

from twofluidnet import equilibrium as E
from twofluidnet.model import example_config

# below the onset a single state carries no loop flow at q1 = 0.5
for contrast in (2.0, 3.0, 10.0, 30.0):
    states = E.solve_equilibria(example_config(1, contrast, 0.5))
    print(f"contrast {contrast:5.1f}: q_c =", np.round([s.q_c for s in states], 5))

# the onset contrast and the approximation that ignores the bypass resistance
on = E.onset_contrast(example_config(1))
print(f"onset contrast {on.contrast:.4f} (approximation {on.approximation:.4f}) at q1 = {on.q1}")

# trace the equilibrium curve through both folds at contrast 30
curve = E.continue_curve(example_config(1, 30.0, 0.0), (0.0, 1.0), ds_max=0.01)
for f in E.detect_folds(curve):
    print(f"fold at q1 = {f.q1:.4f}, q_c = {f.q_c:+.4f}")
