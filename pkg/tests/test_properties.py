"""Randomized invariants over configurations and arguments."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from twofluidnet import equilibrium as E
from twofluidnet import simulator as sim
from twofluidnet import stability as S
from twofluidnet.model import (
    Arrhenius,
    InletConditions,
    Microvascular,
    NetworkConfig,
    NetworkGeometry,
    NoSeparation,
    Stratified,
)

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

laws = st.one_of(
    st.floats(1.2, 4.0).map(Microvascular),
    st.just(Microvascular(2.0)),
    st.floats(0.1, 1.0).map(Stratified),
    st.just(NoSeparation()),
)


def fraction_cap(law):
    """Largest inlet fraction for which no downstream fraction exceeds 1."""
    x = np.linspace(0.0, 1.0, 4001)[:-1]
    through = (1.0 - law.f(x) * x) / (1.0 - x)
    return 0.98 / max(1.0, float(np.max(law.f(x))), float(np.max(through)))


@st.composite
def configs(draw, separation=laws):
    law = draw(separation)
    cap = fraction_cap(law)
    d = [draw(st.floats(0.4, 2.5)) for _ in range(3)]
    l = [draw(st.floats(0.3, 2.0)) for _ in range(3)]
    geom = NetworkGeometry.from_dimensions(d, l)
    inl = InletConditions(draw(st.floats(0.02, 0.98)), draw(st.floats(0.05, cap)), draw(st.floats(0.05, cap)))
    return NetworkConfig(geom, inl, Arrhenius(draw(st.floats(1.5, 200.0))), law)


@SETTINGS
@given(configs())
def test_swap_is_an_involution(cfg):
    assert cfg.swapped().swapped() == cfg
    assert cfg.swapped().swapped().inlets.q2 == cfg.inlets.q2


@SETTINGS
@given(configs())
def test_equilibria_exchange_symmetry(cfg):
    a = sorted(s.q_c for s in E.solve_equilibria(cfg))
    b = sorted(-s.q_c for s in E.solve_equilibria(cfg.swapped()))
    assert len(a) == len(b) and len(a) % 2 == 1
    np.testing.assert_allclose(a, b, atol=1e-9)


@SETTINGS
@given(configs(), st.data())
def test_flow_map_exchange_symmetry(cfg, data):
    q1 = cfg.q1
    qc = data.draw(st.floats(-(1 - q1), q1, exclude_min=True, exclude_max=True))
    side = 1 if qc >= 0 else -1
    x = float(E.flow_map(cfg, qc, side))
    y = float(E.flow_map(cfg.swapped(), -qc, -side))
    assert x == pytest.approx(-y, abs=1e-12)


@SETTINGS
@given(configs(), st.data())
def test_phase_fractions_stay_in_unit_interval(cfg, data):
    qc = data.draw(st.floats(-(1 - cfg.q1), cfg.q1, exclude_min=True, exclude_max=True))
    for v in E.phase_fractions(cfg, qc, 1 if qc >= 0 else -1):
        assert 0.0 <= v <= 1.0


@SETTINGS
@given(configs(), st.floats(-3.0, 3.0), st.floats(-50.0, 50.0))
def test_chi_conjugate_symmetry(cfg, s, w):
    st_ = E.solve_equilibria(cfg)[0]
    co = S.char_coefficients(st_, cfg)
    lam = complex(s, w)
    assert abs(S.chi(co, lam.conjugate()) - S.chi(co, lam).conjugate()) <= 1e-12 * max(1.0, abs(S.chi(co, lam)))


@SETTINGS
@given(configs(separation=st.just(NoSeparation())))
def test_no_separation_has_no_oscillatory_instability(cfg):
    # b K(lambda tau_B) = 1 has complex roots, but only with sigma < 0
    for st_ in E.solve_equilibria(cfg):
        co = S.char_coefficients(st_, cfg)
        hi = max(2.0, 2.0 * abs(co.b) / co.tau_b)
        for r in S.find_eigenvalues(co, window=(0.0, hi, 0.0, 60.0), grid=200):
            assert abs(r.omega) <= 1e-6
        fld = S.eigen_contours(co, (0.0, hi), (1e-3, 60.0), 200)
        assert S.contour_intersections(fld) == []


@SETTINGS
@given(laws, st.floats(0.01, 0.99))
def test_separation_derivative_matches_finite_difference(law, x):
    h = 1e-6
    fd = (law.f(x + h) - law.f(x - h)) / (2 * h)
    assert law.fprime(x) == pytest.approx(fd, abs=1e-6)
    assert law.x_fprime(x) == pytest.approx(x * law.fprime(x), rel=1e-12, abs=1e-15)


@SETTINGS
@given(st.complex_numbers(max_magnitude=60.0, allow_nan=False, allow_infinity=False))
def test_kernel_is_entire_and_normalized(z):
    k = S.delay_kernel(z)
    assert np.isfinite(k)
    if abs(z) > 1e-3:
        assert abs(k * z - (1 - np.exp(-z))) <= 1e-12 * max(1.0, abs(np.exp(-z)))


@settings(max_examples=8, deadline=None)
@given(configs(separation=st.sampled_from([Microvascular(2.0), Stratified(1.0)])))
def test_node_conservation_random_networks(cfg):
    seed = E.solve_equilibria(cfg)[0]
    sc = sim.SimConfig(cells_per_vessel=32, t_end=0.5, perturbation=1e-2, seed_state=seed)
    state = sim.init(cfg, sc)
    for _ in range(60):
        assert np.max(np.abs(sim.node_residuals(cfg, state))) < 1e-12
        try:
            dt = sim.stable_dt(cfg, state, 0.9)
        except sim.StarvedVesselError:
            return
        sim.step(state, cfg, dt)
        for t in state.tubes:
            assert -1e-12 <= t.vals.min() and t.vals.max() <= 1 + 1e-12
