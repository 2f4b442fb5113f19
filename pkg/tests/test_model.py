import json
import math

import numpy as np
import pytest

from twofluidnet import model as M


def test_resistance_and_volume_scaling():
    g = M.NetworkGeometry.from_dimensions((1.0, 0.5, 2.0), (1.0, 2.0, 0.5))
    # r ~ l / d^4 and V ~ d^2 l, both relative to vessel C
    r_c, v_c = 0.5 / 2.0**4, 2.0**2 * 0.5
    assert g.ra_rc == pytest.approx((1.0 / 1.0) / r_c, rel=1e-14)
    assert g.rb_rc == pytest.approx((2.0 / 0.5**4) / r_c, rel=1e-14)
    assert g.va_vc == pytest.approx(1.0 / v_c, rel=1e-14)
    assert g.vb_vc == pytest.approx(0.5**2 * 2.0 / v_c, rel=1e-14)


def test_arrhenius_endpoints_and_log_derivative():
    law = M.Arrhenius(30.0)
    assert law.relative(0.0) == 1.0
    assert law.relative(1.0) == pytest.approx(30.0, rel=1e-15)
    phi = np.linspace(0, 1, 11)
    np.testing.assert_allclose(law.dlog(phi), math.log(30.0))
    h = 1e-6
    fd = (math.log(law.relative(0.5 + h)) - math.log(law.relative(0.5 - h))) / (2 * h)
    assert fd == pytest.approx(law.dlog(0.5), rel=1e-8)


@pytest.mark.parametrize("law", [M.Microvascular(2.0), M.Microvascular(3.5), M.Stratified(1.0), M.Stratified(0.4)])
def test_separation_derivative_matches_finite_difference(law):
    for x in np.linspace(0.05, 0.95, 19):
        h = 1e-6
        fd = (law.f(x + h) - law.f(x - h)) / (2 * h)
        assert law.fprime(x) == pytest.approx(fd, abs=1e-6)
        assert law.x_fprime(x) == pytest.approx(x * law.fprime(x), abs=1e-12)


def test_microvascular_fixed_points():
    law = M.Microvascular(2.0)
    assert law.f(0.5) == pytest.approx(1.0)
    assert law.f(1.0) == pytest.approx(1.0)
    assert law.f(0.0) == 0.0
    # f'(0) = 1 for p = 2
    assert law.fprime(0.0) == pytest.approx(1.0)


def test_microvascular_singular_slope_for_small_exponent():
    with pytest.raises(M.SingularityError):
        M.Microvascular(1.5).fprime(0.0)
    # the grouped form stays finite
    assert math.isfinite(M.Microvascular(1.5).x_fprime(0.0))


def test_stratified_shape():
    law = M.Stratified(1.0)
    assert law.f(1.0) == 1.0
    assert law.f(0.0) == 0.0
    assert law.fprime(0.0) == 2.0


def test_fraction_domain_checked():
    with pytest.raises(M.DomainError):
        M.Arrhenius(10.0).relative(1.5)
    with pytest.raises(M.DomainError):
        M.Microvascular().f(-0.1)
    with pytest.raises(M.DomainError):
        M.Arrhenius(-1.0)


def test_swap_is_an_involution(ex1):
    cfg = M.example_config(2, 30.0, 0.3)
    twice = cfg.swapped().swapped()
    assert twice == cfg and twice.q1 == cfg.q1 and twice.inlets.q2 == cfg.inlets.q2
    assert cfg.swapped().q1 == pytest.approx(0.7)


def test_bundled_configs_match_examples():
    from importlib import resources

    for n in (1, 2):
        with resources.as_file(resources.files("twofluidnet") / "data" / f"example{n}.json") as p:
            cfg = M.load_config(p)
        ref = M.example_config(n, cfg.contrast, cfg.q1)
        assert cfg.separation == ref.separation
        np.testing.assert_allclose(cfg.geometry.resistances, ref.geometry.resistances, rtol=1e-14)


def test_config_roundtrip():
    cfg = M.example_config(2, 12.5, 0.25)
    back = M.config_from_dict(json.loads(json.dumps(M.config_to_dict(cfg))))
    assert back.q1 == cfg.q1 and back.contrast == cfg.contrast
    assert back.separation == cfg.separation
    np.testing.assert_allclose(back.geometry.resistances, cfg.geometry.resistances, rtol=1e-14)


def test_config_errors_are_collected():
    doc = {
        "geometry": {"dA": -1, "dB": 1, "dC": 1, "lA": 1, "lB": 1},
        "inlets": {"q1": 1.5, "phi1": 0.5, "phi2": "x"},
        "viscosity": {"type": "arrhenius", "contrast": 10},
        "separation": {"type": "microvascular", "p": 2},
    }
    with pytest.raises(M.ConfigError) as err:
        M.config_from_dict(doc)
    text = "\n".join(err.value.problems)
    assert "geometry.lC" in text and "geometry.dA" in text
    assert "inlets.q1" in text and "inlets.phi2" in text


@pytest.mark.parametrize("law", [M.Microvascular(2.0), M.Microvascular(3.5), M.Stratified(0.7), M.NoSeparation()])
def test_through_fraction_matches_conservation(law):
    x = np.linspace(0.0, 0.9, 91)
    np.testing.assert_allclose(M.phi_A_fraction(law, x), (1.0 - law.f(x) * x) / (1.0 - x), rtol=0, atol=1e-13)
    # stays non-negative right up to the starved end
    assert np.all(M.phi_A_fraction(law, 1.0 - np.logspace(-15, -6, 10)) >= 0.0)
