import math

import numpy as np
import pytest

import oracles
from cphasegate import (ConvergenceError, GateOverlaps, ParameterError, amplitude,
                        integrate_1d, integrate_2d, make_profile)
from cphasegate.overlaps import OverlapKernel
from cphasegate.quadrature import MIN_HALFWIDTH, QuadratureSpec, Rule, make_grid
from cphasegate.pulses import gaussian_sigma_prime


@pytest.fixture
def gauss1():
    return make_profile("gaussian", 1.0)


def test_plain_gaussian_integral():
    val, rep = integrate_1d(lambda k: np.exp(-k * k), QuadratureSpec(rel_tol=1e-10))
    assert val == pytest.approx(math.sqrt(math.pi), abs=1e-8)
    assert rep.converged and rep.rel_change <= 1e-10


def test_intensity_normalization(gauss1):
    spec = QuadratureSpec(rel_tol=1e-10).resolved(gauss1)
    val, _ = integrate_1d(lambda k: np.abs(amplitude(gauss1, k)) ** 2, spec)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_shifted_intensity_integral(gauss1):
    spec = QuadratureSpec(rel_tol=1e-10).resolved(gauss1)
    val, _ = integrate_1d(lambda k: np.abs(amplitude(gauss1, k)) ** 2 * np.exp(-2j * k), spec)
    ref = oracles.gaussian_fourier(1.0, 2.0)
    assert val == pytest.approx(ref, abs=1e-10)
    assert ref == pytest.approx(math.exp(-1 / (4 * math.log(2))), rel=1e-14)
    assert ref == pytest.approx(0.697206, abs=1e-6)


def test_2d_product_normalization(gauss1):
    spec = QuadratureSpec(rel_tol=1e-10).resolved(gauss1)

    def f(k, kp):
        return np.abs(amplitude(gauss1, k)) ** 2 * np.abs(amplitude(gauss1, kp)) ** 2

    val, _ = integrate_2d(f, spec)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_2d_zero_integrand(gauss1):
    val, rep = integrate_2d(lambda k, kp: 0 * amplitude(gauss1, k) * amplitude(gauss1, kp))
    assert val == 0 and rep.converged


def test_2d_shifted_product(gauss1):
    spec = QuadratureSpec(rel_tol=1e-10).resolved(gauss1)

    def f(k, kp):
        return (np.abs(amplitude(gauss1, k)) ** 2 * np.abs(amplitude(gauss1, kp)) ** 2
                * np.exp(-2j * (k + kp)))

    val, _ = integrate_2d(f, spec)
    ref = oracles.gaussian_fourier(1.0, 2.0) ** 2
    assert val == pytest.approx(ref, abs=1e-10)
    assert ref == pytest.approx(0.486097, abs=1e-6)


def test_nonconvergence_carries_last_estimates():
    spec = QuadratureSpec(nodes=9, max_refinements=2, rel_tol=1e-14, abs_tol=0.0)
    with pytest.raises(ConvergenceError) as info:
        integrate_1d(lambda k: np.cos(40 * k) + 0j, spec)
    err = info.value
    assert len(err.estimates) == 2
    assert err.nodes == spec.refined_counts()[-1]
    assert err.rel_change > 1e-14
    assert "did not reach" in str(err)


def test_grid_doubling_consistency(gauss1):
    spec = QuadratureSpec(rel_tol=1e-6).resolved(gauss1)

    def f(k):
        return np.abs(amplitude(gauss1, k)) ** 2 * np.exp(-1.3j * k) / (k + 1j)

    val, rep = integrate_1d(f, spec)
    finer = make_grid(spec, 2 * rep.nodes - 1)
    again = np.sum(finer.weights * f(finer.nodes))
    assert abs(again - val) <= 1e-6 * abs(val)


@pytest.mark.parametrize("shape,sigma,L", [("gaussian", 1.72, 0.8), ("sech", 1.0, 1.5),
                                           ("gaussian", 0.5, 2.0)])
def test_rule_agreement_on_overlaps(shape, sigma, L):
    p = make_profile(shape, sigma)
    tol = 1e-6
    tr = OverlapKernel(p, spec=QuadratureSpec(rel_tol=tol)).overlaps(L)
    gl = OverlapKernel(p, spec=QuadratureSpec(rel_tol=tol, rule="gauss_legendre")).overlaps(L)
    assert abs(tr.O1 - gl.O1) <= 10 * tol * abs(tr.O1)
    assert abs(tr.T - gl.T) <= 10 * tol * abs(tr.T)


@pytest.mark.parametrize("shape,sigma,L", [("gaussian", 1.72, 0.8), ("sech", 1.75, 0.78),
                                           ("gaussian", 0.3, 1.9)])
def test_window_robustness(shape, sigma, L):
    p = make_profile(shape, sigma)
    tol = 1e-6
    base = QuadratureSpec(rel_tol=tol).resolved(p)
    wide = QuadratureSpec(rel_tol=tol, window_halfwidth=1.5 * base.halfwidth,
                          nodes=385)
    a = OverlapKernel(p, spec=base).overlaps(L)
    b = OverlapKernel(p, spec=wide).overlaps(L)
    assert abs(a.O1 - b.O1) < tol * abs(a.O1)
    assert abs(a.T - b.T) < tol * abs(a.T)


@pytest.mark.parametrize("sigma", [0.1, 1.0, 5.0, 20.0])
def test_default_window_covers_pulse_and_pole(sigma):
    p = make_profile("gaussian", sigma)
    spec = QuadratureSpec().resolved(p)
    assert spec.halfwidth >= max(8 * gaussian_sigma_prime(sigma), MIN_HALFWIDTH)


def test_window_follows_detuned_emitter():
    from cphasegate import EmitterParams
    p = make_profile("gaussian", 1.0)
    spec = QuadratureSpec().resolved(p, EmitterParams(delta=3.0))
    assert spec.halfwidth >= MIN_HALFWIDTH + 3.0


def test_trapezoid_refinement_is_nested():
    spec = QuadratureSpec(nodes=17, window_halfwidth=4.0)
    counts = spec.refined_counts()
    assert counts[:3] == [17, 33, 65]
    coarse, fine = make_grid(spec, counts[0]), make_grid(spec, counts[1])
    np.testing.assert_allclose(fine.nodes[::2], coarse.nodes, atol=1e-15)
    assert fine.weights.sum() == pytest.approx(8.0)


def test_gauss_legendre_doubles():
    spec = QuadratureSpec(nodes=20, rule=Rule.GAUSS_LEGENDRE, window_halfwidth=2.0)
    assert spec.refined_counts()[:3] == [20, 40, 80]
    g = make_grid(spec)
    assert g.weights.sum() == pytest.approx(4.0)
    assert not g.uniform
    with pytest.raises(ValueError):
        g.spacing


@pytest.mark.parametrize("kwargs", [dict(nodes=2), dict(rel_tol=0.0), dict(rule="simpson"),
                                    dict(window_halfwidth=-1.0), dict(max_refinements=0),
                                    dict(abs_tol=-1.0), dict(nodes=10.5)])
def test_spec_validation(kwargs):
    with pytest.raises(ParameterError):
        QuadratureSpec(**kwargs)


def test_spec_round_trip():
    spec = QuadratureSpec(window_halfwidth=9.0, nodes=129, rule="gauss_legendre", rel_tol=1e-7)
    assert QuadratureSpec.from_dict(spec.to_dict()) == spec
    assert spec.to_dict()["rule"] == "gauss_legendre"


def test_overlaps_value_object():
    ov = GateOverlaps(1.0, 0.5, 0.6 + 0.8j, -0.5)
    assert ov.abs_O1 == pytest.approx(1.0)
    assert ov.to_dict()["O1"] == [0.6, 0.8]
