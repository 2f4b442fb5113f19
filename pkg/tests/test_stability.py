import cmath
import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from twofluidnet import equilibrium as E
from twofluidnet import stability as S
from twofluidnet.model import NoSeparation, example_config

from oracles import psi_oracle


@pytest.fixture(scope="module")
def lower_state():
    cfg = example_config(1, 50.0, 0.5)
    st = E.nearest_equilibrium(cfg, -0.19, max_distance=0.01)
    return cfg, st, S.char_coefficients(st, cfg)


def test_kernel_values():
    assert S.delay_kernel(0.0) == 1.0
    assert S.delay_kernel(1j * math.pi) == pytest.approx(-2j / math.pi, abs=1e-15)
    z = 0.7 - 2.3j
    assert S.delay_kernel(z) == pytest.approx((1 - cmath.exp(-z)) / z, abs=1e-15)


def _kernel_exact(z):
    mpmath.mp.dps = 40
    zz = mpmath.mpc(z.real, z.imag)
    return complex(-mpmath.expm1(-zz) / zz)


def test_kernel_branches_agree():
    # both sides of the series cut-off, against a 40-digit reference
    for k in range(16):
        for r in (0.9999e-4, 1e-4, 1.0001e-4):
            z = r * cmath.exp(2j * math.pi * k / 16)
            series = 1 - z / 2 + z * z / 6 - z**3 / 24
            assert abs(S.delay_kernel(z) - _kernel_exact(z)) < 1e-12
            assert abs(series - _kernel_exact(z)) < 1e-12


def test_kernel_derivative_matches_finite_difference():
    for z in (0.3 + 0.1j, 2.0 - 5.0j, 1e-3j):
        h = 1e-6
        fd = (S.delay_kernel(z + h) - S.delay_kernel(z - h)) / (2 * h)
        assert S.delay_kernel_prime(z) == pytest.approx(fd, abs=1e-8)


def test_linear_viscosity_has_zero_coefficients():
    cfg = example_config(1, 1.0, 0.4)
    st = E.solve_equilibria(cfg)[0]
    c = S.char_coefficients(st, cfg)
    assert np.all(np.asarray(c.coefficients) == 0.0)
    assert S.chi(c, 0.3 + 2j) == -1.0
    assert S.find_eigenvalues(c) == []
    assert S.count_unstable(c) == 0


def test_no_separation_leaves_only_b():
    base = example_config(1, 30.0, 0.3)
    # distinct inlet fluids, otherwise every fraction is equal and b vanishes too
    cfg = replace(base, separation=NoSeparation(), inlets=replace(base.inlets, phi2=0.5))
    for st in E.solve_equilibria(cfg):
        c = S.char_coefficients(st, cfg)
        assert c.a == 0 and c.c == 0 and c.d == 0
        assert c.b != 0


def test_no_separation_roots_are_real():
    for m, q1 in [(30.0, 0.3), (200.0, 0.5), (5.0, 0.9)]:
        cfg = replace(example_config(2, m, q1), separation=NoSeparation())
        for st in E.solve_equilibria(cfg):
            c = S.char_coefficients(st, cfg)
            roots = S.find_eigenvalues(c, window=(-2.0, 1.0, 0.0, 40.0))
            assert all(abs(r.omega) <= 1e-6 for r in roots)
            fld = S.eigen_contours(c, (-2.0, 1.0), (1e-3, 40.0), 200)
            assert S.contour_intersections(fld) == []


def test_chi_at_zero_is_flow_map_slope_minus_one():
    # independent: centred difference of the closed-form flow map
    for which, q1, m in [(1, 0.5, 50.0), (1, 0.3, 30.0), (2, 0.95, 30.0), (2, 0.4, 10.0)]:
        cfg = example_config(which, m, q1)
        for st in E.solve_equilibria(cfg):
            if abs(st.q_c) < 1e-4:
                continue
            h = 1e-6
            slope = (psi_oracle(cfg, st.q_c + h) - psi_oracle(cfg, st.q_c - h)) / (2 * h)
            c = S.char_coefficients(st, cfg)
            assert c.chi0 == pytest.approx(slope - 1.0, abs=1e-7)
            assert S.chi(c, 0.0).real == pytest.approx(slope - 1.0, abs=1e-7)


def test_conjugate_symmetry(lower_state):
    _, _, c = lower_state
    rng = np.random.default_rng(7)
    lam = rng.uniform(-3, 3, 10_000) + 1j * rng.uniform(-40, 40, 10_000)
    np.testing.assert_allclose(S.chi(c, np.conj(lam)), np.conj(S.chi(c, lam)), rtol=0, atol=1e-12)
    x = rng.uniform(-3, 3, 100)
    assert np.max(np.abs(np.imag(S.chi(c, x.astype(complex))))) == 0.0


def test_contour_axis_row_is_real(lower_state):
    _, _, c = lower_state
    fld = S.eigen_contours(c, (-1.0, 0.5), (0.0, 15.0), 101)
    assert fld.omega[0] == 0.0
    assert np.max(np.abs(fld.I[0])) < 1e-14


def test_lower_state_dominant_root(lower_state):
    cfg, st, c = lower_state
    lam = S.dominant_eigenvalue(c)
    assert lam.sigma == pytest.approx(0.04, abs=0.02)
    assert lam.omega == pytest.approx(9.16, abs=0.05)
    assert abs(S.chi(c, complex(lam.sigma, lam.omega))) < 1e-10
    assert abs(S.chi(c, 0.04 + 9.16j)) < 0.1


def test_lower_state_root_against_mpmath(lower_state):
    """Independent arbitrary-precision root of the characteristic function."""
    _, _, c = lower_state
    mpmath.mp.dps = 30

    def K(z):
        return -mpmath.expm1(-z) / z

    def f(lam):
        return (c.a * K(lam * c.tau_a) + (c.b + c.d * mpmath.exp(-lam * c.tau_c)) * K(lam * c.tau_b)
                + c.c * K(lam * c.tau_c) - 1)

    ref = complex(mpmath.findroot(f, mpmath.mpc(0.04, 9.17)))
    lam = S.dominant_eigenvalue(c)
    assert complex(lam.sigma, lam.omega) == pytest.approx(ref, abs=1e-9)


def test_every_returned_root_converged(lower_state):
    _, _, c = lower_state
    roots = S.find_eigenvalues(c)
    assert roots
    for r in roots:
        assert abs(S.chi(c, complex(r.sigma, r.omega))) < 1e-10


def test_roots_independent_of_grid(lower_state):
    _, _, c = lower_state
    coarse = S.find_eigenvalues(c, window=(-1.0, 0.5, 0.0, 15.0), grid=200)
    fine = S.find_eigenvalues(c, window=(-1.0, 0.5, 0.0, 15.0), grid=400)
    key = lambda r: (round(r.omega, 4), round(r.sigma, 4))
    a = sorted(coarse, key=key)
    b = sorted(fine, key=key)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert abs(complex(x.sigma, x.omega) - complex(y.sigma, y.omega)) < 1e-8


def test_lower_state_unstable_spectrum(lower_state):
    """The computed spectrum: one clearly growing pair plus two near-neutral pairs."""
    _, _, c = lower_state
    roots = S.find_eigenvalues(c, window=(-1.0, 0.5, 0.0, 15.0))
    growing = sorted((r for r in roots if r.sigma > 0), key=lambda r: -r.sigma)
    assert len(growing) == 3
    assert growing[0].sigma > 10 * growing[1].sigma
    assert S.count_unstable(c) == 6  # three conjugate pairs
    assert S.stability_label(c)[0] == S.OSCILLATORY


@pytest.mark.xfail(strict=True, reason="two additional near-neutral unstable pairs exist at this state")
def test_lower_state_single_positive_intersection(lower_state):
    _, _, c = lower_state
    roots = S.find_eigenvalues(c, window=(-1.0, 0.5, 0.0, 15.0))
    assert sum(r.sigma > 0 for r in roots) == 1


def test_stable_state_has_no_positive_roots():
    cfg = example_config(1, 5.0, 0.2)
    for st in E.solve_equilibria(cfg):
        c = S.char_coefficients(st, cfg)
        assert all(r.sigma < 0 for r in S.find_eigenvalues(c, window=(-1.0, 0.5, 0.0, 15.0)))
        assert S.count_unstable(c) == 0


def test_count_matches_roots_found():
    for which, q1, m in [(1, 0.5, 50.0), (1, 0.33, 30.0), (2, 0.97, 30.0), (1, 0.2, 5.0)]:
        cfg = example_config(which, m, q1)
        for st in E.solve_equilibria(cfg):
            c = S.char_coefficients(st, cfg)
            roots = S.find_eigenvalues(c, window=(-0.5, 20.0, 0.0, 60.0), grid=500)
            n = sum(2 if r.omega > 1e-9 else 1 for r in roots if r.sigma > 0)
            assert S.count_unstable(c) == n


def test_saddle_label_on_middle_branch():
    cfg = example_config(1, 30.0, 0.5)
    mid = E.solve_equilibria(cfg)[1]
    label, n = S.classify_state(cfg, mid)
    assert label == S.SADDLE and n % 2 == 1


def test_spectrum_exchange_symmetry():
    for which, q1, m in [(1, 0.4, 50.0), (2, 0.95, 30.0)]:
        cfg = example_config(which, m, q1)
        sw = cfg.swapped()
        for st in E.solve_equilibria(cfg):
            st2 = E.nearest_equilibrium(sw, -st.q_c, max_distance=1e-8)
            a = S.find_eigenvalues(S.char_coefficients(st, cfg), window=(-1.0, 1.0, 0.0, 20.0))
            b = S.find_eigenvalues(S.char_coefficients(st2, sw), window=(-1.0, 1.0, 0.0, 20.0))
            key = lambda r: (round(r.omega, 5), round(r.sigma, 5))
            a, b = sorted(a, key=key), sorted(b, key=key)
            assert len(a) == len(b)
            for x, y in zip(a, b):
                assert abs(complex(x.sigma, x.omega) - complex(y.sigma, y.omega)) < 1e-9


def test_hopf_scan_contrast_2_is_empty():
    curve = E.continue_curve(example_config(1, 2.0, 0.0), (0.0, 1.0), ds_max=0.01)
    assert S.hopf_scan(curve) == []
    assert S.classify_stability(curve).stable.all()


def test_hopf_points_symmetric_and_converged():
    cfg = example_config(1, 50.0, 0.0)
    curve = E.continue_curve(cfg, (0.0, 1.0), ds_max=0.01)
    pts = S.hopf_scan(curve)
    assert pts
    for p in pts:
        assert p.omega > 0
        F = S.hopf_system(cfg, p.q1, p.q_c, p.omega)
        assert np.max(np.abs(F)) < 1e-10
    # pairs under q1 -> 1 - q1, q_c -> -q_c
    for p in pts:
        assert any(abs(p.q1 + o.q1 - 1) < 1e-7 and abs(p.q_c + o.q_c) < 1e-7 and abs(p.omega - o.omega) < 1e-6
                   for o in pts)
    # low-frequency crossings near the folds
    folds = E.detect_folds(curve)
    assert any(p.omega < 2.0 and min(abs(p.q1 - f.q1) for f in folds) < 0.05 for p in pts)


def test_hopf_scan_example2_positive_branch_only():
    curve = E.continue_curve(example_config(2, 50.0, 0.0), (0.0, 1.0), ds_max=0.01)
    pts = S.hopf_scan(curve)
    assert pts
    assert all(p.q1 > 0.5 and p.q_c > 0 for p in pts)


def test_band_edges_example1_contrast30():
    curve = E.continue_curve(example_config(1, 30.0, 0.0), (0.0, 1.0), ds_max=0.01)
    stab = S.classify_stability(curve)
    osc = [(s.q1_start, s.q1_stop) for s in stab.segments if s.label == S.OSCILLATORY]
    lo = min(osc, key=lambda b: b[0])
    assert lo[0] == pytest.approx(0.286, abs=0.01)
    assert lo[1] == pytest.approx(0.397, abs=0.01)
    hi = max(osc, key=lambda b: b[1])
    assert hi[0] == pytest.approx(1 - 0.397, abs=0.01)
    assert hi[1] == pytest.approx(1 - 0.286, abs=0.01)


def test_example2_positive_branch_unstable_at_contrast30():
    cfg = example_config(2, 30.0, 0.0)
    curve = E.continue_curve(cfg, (0.0, 1.0), ds_max=0.01)
    stab = S.classify_stability(curve)
    for i, st in enumerate(curve.states):
        if st.q_c > 1e-3 and 0 < st.q1 < 1:
            assert stab.labels[i] != S.STABLE
