"""
Linear stability of an equilibrium
==================================

Build the characteristic function of the lower equilibrium at contrast 50,
locate its roots as intersections of the zero contours of the real and
imaginary parts, and classify the whole equilibrium curve.
"""

from twofluidnet import equilibrium as E
from twofluidnet import stability as S
from twofluidnet.model import example_config

cfg = example_config(1, 50.0, 0.5)
state = E.nearest_equilibrium(cfg, -0.19, max_distance=0.01)
coeffs = S.char_coefficients(state, cfg)
print(f"equilibrium q_c = {state.q_c:.5f}")
print("coefficients a, b, c, d =", [round(float(v), 4) for v in coeffs.coefficients])

# roots with the largest growth rates first
for r in S.find_eigenvalues(coeffs)[:5]:
    print(f"  lambda = {r.sigma:+.5f} {r.omega:+.5f} i")

# the zero contours themselves, as they would be drawn
fld = S.eigen_contours(coeffs, (-1.0, 0.5), (0.0, 20.0), 200)
print("contour intersections:", [(round(float(s), 3), round(float(w), 3)) for s, w in S.contour_intersections(fld)])

# stability bands along the equilibrium curve at contrast 30
curve = E.continue_curve(example_config(1, 30.0, 0.0), (0.0, 1.0), ds_max=0.01)
for seg in S.classify_stability(curve).segments:
    print(f"  {seg.label:12s} q1 {seg.q1_start:.3f} -> {seg.q1_stop:.3f}")
