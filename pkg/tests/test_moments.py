import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from jumpcontrast.kernels import TruncationKernel, kernel_moment
from jumpcontrast.model import JumpLaw, linear_ou
from jumpcontrast.moments import (
    VARIANTS,
    FilterConfig,
    MomentApproximator,
    jump_integral_J1,
    jump_integral_J2,
    m2_euler,
    m2_exact_ou,
    m2_generator2,
    m2_generator2_raw,
    m2_second_order,
    m_euler,
    m_exact_ou,
    m_generator2,
    m_second_order,
)

PHI0 = TruncationKernel()
TABLE1 = linear_ou(-1.0, 1.0, JumpLaw(1.0, 4.0, 0.5))
TABLE1_FILTER = FilterConfig(beta=0.3, c=1.25)


def quad_oracle(power, model, kernel, filt, delta):
    """Independent adaptive-quadrature value of the jump integral."""
    thr = filt.c * delta**filt.beta
    g = model.gamma_const
    r = kernel.support_radius
    val, _ = integrate.quad(lambda u: u**power * kernel(u) * model.jumps.density(u * thr / g), -r, r,
                            points=[-1.0, 1.0], limit=400, epsabs=1e-14, epsrel=1e-12)
    return thr ** (power + 1) * delta / g * val


def test_filter_config_validation():
    for beta in (0.25, 0.5, 0.1):
        with pytest.raises(ValueError):
            FilterConfig(beta=beta)
    with pytest.raises(ValueError):
        FilterConfig(c=0.0)
    with pytest.raises(ValueError):
        FilterConfig(k_trunc=0.0)
    assert FilterConfig(0.3, 1.25).threshold(0.002) == pytest.approx(1.25 * 0.002**0.3)


def test_euler_examples():
    m = linear_ou(-1.0)
    assert m_euler(m, (2.0, 0.5), 0.0, 0.1) == pytest.approx(0.2)
    assert m2_euler(m, (2.0, 0.5), 0.0, 0.1) == pytest.approx(0.025)
    assert m2_euler(m, (2.0, 0.5), 1.3, 0.02) == pytest.approx(0.005)
    assert m_euler(m, (2.0, 0.5), 0.7, 1e-300) == pytest.approx(0.7)
    # compensator enters the drift
    assert m_euler(TABLE1, (2.0, 0.5), 0.0, 0.002) == pytest.approx(-0.004)


def test_j1_vanishes_for_centred_jumps():
    m = linear_ou(-1.0, 1.0, JumpLaw(10.0, 0.0, 1.0))
    assert abs(jump_integral_J1(m, PHI0, FilterConfig(), 0.01)) < 1e-15
    assert abs(jump_integral_J1(m, TruncationKernel(2, 1.4), FilterConfig(), 0.01)) < 1e-15


def test_j_vanish_without_jumps():
    m = linear_ou(-1.0)
    assert jump_integral_J1(m, PHI0, FilterConfig(), 0.01) == 0.0
    assert jump_integral_J2(m, PHI0, FilterConfig(), 0.01) == 0.0


def test_j_vanish_without_filter():
    assert jump_integral_J2(TABLE1, PHI0, FilterConfig(c=np.inf), 0.01) == 0.0


def test_j1_table1_small_positive():
    j1 = jump_integral_J1(TABLE1, PHI0, TABLE1_FILTER, 0.002)
    assert 0 < j1 < 1e-10
    assert j1 == pytest.approx(quad_oracle(1, TABLE1, PHI0, TABLE1_FILTER, 0.002), rel=1e-6)


@pytest.mark.parametrize("kernel", [PHI0, TruncationKernel(2, 1.4), TruncationKernel(4, 1.2)], ids=lambda k: k.label())
@pytest.mark.parametrize("power", [1, 2])
def test_j_against_adaptive_quadrature(kernel, power):
    m = linear_ou(-1.0, 1.3, JumpLaw(2.0, 0.4, 0.7))
    filt = FilterConfig(0.4, 2.0)
    fn = jump_integral_J1 if power == 1 else jump_integral_J2
    assert fn(m, kernel, filt, 0.05) == pytest.approx(quad_oracle(power, m, kernel, filt, 0.05), rel=1e-7, abs=1e-16)


def test_j_reject_state_dependent_gamma():
    m = dataclasses.replace(TABLE1, gamma_const=None, is_linear_ou=False, ou_slope=None)
    with pytest.raises(ValueError):
        jump_integral_J1(m, PHI0, TABLE1_FILTER, 0.002)
    with pytest.raises(ValueError):
        MomentApproximator("second-order").validate(m)


def test_j2_limit_ratio():
    m = linear_ou(-1.0, 1.0, JumpLaw(3.0, 0.5, 1.0))
    filt = FilterConfig(0.45, 1.5)
    limit = filt.c**3 * float(m.jumps.density(0.0)) * kernel_moment(PHI0, 2)
    ratios = [jump_integral_J2(m, PHI0, filt, d) / d ** (1 + 3 * filt.beta) for d in (1e-6, 1e-7, 1e-8)]
    assert ratios[-1] == pytest.approx(limit, rel=1e-3)
    assert abs(ratios[-1] - ratios[-2]) < 0.01 * abs(ratios[-1])


def _ratios(fn, exponent, filt, ds):
    m = linear_ou(-1.0, 1.0, JumpLaw(3.0, 0.5, 1.0))
    return [fn(m, PHI0, filt, d) / d ** (1 + exponent * filt.beta) for d in ds]


def test_j2_scaling_stabilises():
    r = _ratios(jump_integral_J2, 3, FilterConfig(0.45, 2.0), [2.0**-20, 2.0**-21, 2.0**-22])
    assert abs(r[1] - r[0]) < 0.01 * abs(r[1])
    assert abs(r[2] - r[1]) < 0.01 * abs(r[2])


def test_j1_scaling():
    # a symmetric kernel cancels the F(0) term, so J1 / D^(1+2 beta) -> 0 like D^beta
    # and the first surviving order is D^(1+3 beta), driven by F'(0)
    filt = FilterConfig(0.45, 2.0)
    ds = [2.0**-20, 2.0**-21, 2.0**-22]
    r2 = _ratios(jump_integral_J1, 2, filt, ds)
    assert r2[1] / r2[0] == pytest.approx(2.0**-0.45, rel=1e-3)
    r3 = _ratios(jump_integral_J1, 3, filt, ds)
    assert abs(r3[2] - r3[1]) < 0.01 * abs(r3[2])
    f_prime = 3.0 * stats.norm.pdf(0.0, 0.5, 1.0) * 0.5  # lam * d/dz N(0.5, 1) at 0
    assert r3[2] == pytest.approx(filt.c**3 * f_prime * kernel_moment(PHI0, 2), rel=1e-3)


def test_oscillating_kernel_cancels_j2():
    # moments 0..2 of the level-3 kernel vanish, so only the curvature of F survives
    m = linear_ou(-1.0, 1.0, JumpLaw(10.0, 0.0, 1.0))
    filt = FilterConfig(0.49, 2.0)
    d = 1e-6
    plain = jump_integral_J2(m, PHI0, filt, d)
    osc = jump_integral_J2(m, TruncationKernel(3, 1.4), filt, d)
    assert abs(osc) < 1e-3 * abs(plain)


def test_second_order_examples():
    th = (2.0, 0.5)
    j1 = jump_integral_J1(TABLE1, PHI0, TABLE1_FILTER, 0.002)
    assert m_second_order(TABLE1, th, 0.0, 0.002, PHI0, TABLE1_FILTER) == pytest.approx(-0.004 + j1, abs=1e-18)
    j2_hi = jump_integral_J2(TABLE1, PHI0, FilterConfig(0.49, 1.25), 0.002)
    j2_lo = jump_integral_J2(TABLE1, PHI0, TABLE1_FILTER, 0.002)
    assert j2_hi < j2_lo


@given(st.floats(-5, 5), st.floats(1e-4, 0.5), st.floats(-3, 3), st.floats(0.05, 2))
def test_second_order_equals_euler_without_jumps(x, d, mu, sigma):
    m = linear_ou(-1.0)
    assert m_second_order(m, (mu, sigma), x, d, PHI0, FilterConfig()) == m_euler(m, (mu, sigma), x, d)
    assert m2_second_order(m, (mu, sigma), x, d, PHI0, FilterConfig()) == m2_euler(m, (mu, sigma), x, d)


def test_generator_order_one_is_euler():
    m = linear_ou(-1.3, 0.8, JumpLaw(2.0, 0.6, 1.0))
    xs = np.linspace(-2, 3, 11)
    np.testing.assert_allclose(m_generator2(m, (2.0, 0.5), xs, 0.1, order=1), m_euler(m, (2.0, 0.5), xs, 0.1),
                               rtol=1e-14)
    np.testing.assert_allclose(m2_generator2(m, (2.0, 0.5), xs, 0.1, order=1),
                               m2_euler(m, (2.0, 0.5), xs, 0.1) - (m_euler(m, (2.0, 0.5), xs, 0.1) - xs) ** 2,
                               rtol=1e-12)


def test_generator_matches_taylor_of_exact():
    m = linear_ou(-1.0, 1.0, JumpLaw(1.0, 0.5, 1.0))
    th, x = (2.0, 0.5), 0.4
    b = -x + 2.0 - 0.5
    for d in (0.01, 0.001):
        taylor_m = x + b * d - b * d**2 / 2
        assert m_generator2(m, th, x, d) == pytest.approx(taylor_m, abs=1e-14)
        assert abs(m_generator2(m, th, x, d) - m_exact_ou(m, th, x, d)) < abs(b) * d**3
        taylor_m2 = 0.25 * (d - d**2)
        assert m2_generator2(m, th, x, d) == pytest.approx(taylor_m2, abs=b * b * d**3 + 1e-16)


def test_generator_raw_form_agrees():
    m = linear_ou(-0.7, 1.0, JumpLaw(1.0, 0.5, 1.0))
    xs = np.linspace(-1, 3, 9)
    np.testing.assert_allclose(m2_generator2_raw(m, (2.0, 0.5), xs, 0.05), m2_generator2(m, (2.0, 0.5), xs, 0.05),
                               atol=1e-13)


def test_generator_order_slope():
    m = linear_ou(-1.0)
    deltas = 2.0 ** -np.arange(4, 11)
    err = np.abs(m2_generator2(m, (2.0, 0.5), 0.3, deltas) - m2_exact_ou(m, (2.0, 0.5), deltas))
    slope = np.polyfit(np.log(deltas), np.log(err), 1)[0]
    assert slope >= 2.7


def test_exact_ou_examples():
    m = linear_ou(-1.0)
    assert m_exact_ou(m, (2.0, 0.5), 0.3, 0.0) == 0.3
    assert m2_exact_ou(m, (2.0, 0.5), 0.0) == 0.0
    assert m_exact_ou(m, (2.0, 0.5), 0.0, np.log(2)) == pytest.approx(1.0, rel=1e-14)
    assert m2_exact_ou(m, (2.0, 0.5), np.log(2)) == pytest.approx(0.09375, rel=1e-14)


def test_exact_ou_matches_closed_form_with_jumps():
    m = linear_ou(-1.2, 1.5, JumpLaw(2.0, 0.3, 1.0))
    t1, t2, jm, x, d = -1.2, 2.0, 1.5 * 2.0 * 0.3, 0.8, 0.3
    ref = (x + t2 / t1 - jm / t1) * np.exp(t1 * d) + (jm - t2) / t1
    assert m_exact_ou(m, (t2, 0.5), x, d) == pytest.approx(ref, rel=1e-13)


def test_exact_ou_rejects():
    with pytest.raises(ValueError):
        m_exact_ou(linear_ou(0.0), (2.0, 0.5), 0.0, 0.1)
    nonlinear = dataclasses.replace(linear_ou(-1.0), is_linear_ou=False, ou_slope=None, gamma_const=None)
    with pytest.raises(ValueError):
        MomentApproximator("exact-ou").validate(nonlinear)


def test_exact_ou_is_the_continuous_part():
    from jumpcontrast.simulate import make_rng, simulate_one_step

    # the compensated jumps add zero mean, so the unfiltered mean is the OU mean with intercept theta2,
    # while m~ is the mean of the continuous part, whose intercept carries the compensator
    m = linear_ou(-1.0, 1.0, JumpLaw(3.0, 0.5, 0.5))
    xs = simulate_one_step(m, (2.0, 0.5), 1.0, 0.2, 400_000, make_rng(7))
    tol = 4 * xs.std() / np.sqrt(xs.size)
    assert xs.mean() == pytest.approx(m_exact_ou(linear_ou(-1.0), (2.0, 0.5), 1.0, 0.2), abs=tol)
    shift = 3.0 * 0.5 * np.expm1(-0.2) / -1.0
    assert m_exact_ou(m, (2.0, 0.5), 1.0, 0.2) == pytest.approx(xs.mean() - shift, abs=tol)


def test_unknown_variant():
    with pytest.raises(ValueError):
        MomentApproximator("kessler")


def test_approximator_dispatch_and_corrections():
    filt = TABLE1_FILTER
    x, d = np.array([0.0, 1.0]), np.array([0.002, 0.002])
    for v in VARIANTS:
        m, m2 = MomentApproximator(v).moments(TABLE1, (2.0, 0.5), x, d, filt)
        assert m.shape == x.shape and np.shape(m2) == x.shape
    j1, j2 = MomentApproximator("second-order").jump_corrections(TABLE1, d, filt)
    assert j1[0] == jump_integral_J1(TABLE1, PHI0, filt, 0.002)
    z1, z2 = MomentApproximator("euler").jump_corrections(TABLE1, d, filt)
    assert not z1.any() and not z2.any()


@given(st.sampled_from(VARIANTS), st.floats(-20, 20), st.floats(1e-5, 0.5), st.floats(-5, 5), st.floats(0.01, 3))
def test_m2_positive(variant, x, d, mu, sigma):
    m = linear_ou(-1.0, 1.0, JumpLaw(1.0, 0.5, 1.0))
    _, m2 = MomentApproximator(variant).moments(m, (mu, sigma), np.array([x]), np.array([d]), FilterConfig())
    assert m2[0] > 0


def test_cache_thread_safe():
    from concurrent.futures import ThreadPoolExecutor

    m = linear_ou(-1.0, 1.0, JumpLaw(2.0, 0.1, 1.0))
    filt = FilterConfig(0.41, 1.7)
    with ThreadPoolExecutor(8) as pool:
        vals = list(pool.map(lambda _: jump_integral_J2(m, PHI0, filt, 0.0123), range(64)))
    assert len(set(vals)) == 1


def test_gaussian_density_used():
    assert TABLE1.jumps.density(4.0) == pytest.approx(stats.norm.pdf(4.0, 4.0, 0.5))
