import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jumpcontrast.kernels import (
    TruncationKernel,
    kernel_moment,
    kernel_plot_data,
    moment_tolerance,
    phi0_eval,
    phi1_eval,
    phi_l_eval,
)

KERNELS = [
    TruncationKernel(),
    TruncationKernel(1, 2.0),
    TruncationKernel(2, 1.4),
    TruncationKernel(3, 1.4),
    TruncationKernel(4, 1.2),
]
kernels = st.sampled_from(KERNELS)


# frozen values of the bump transition
@pytest.mark.parametrize("x, expected", [(0.5, 1.0), (2.5, 0.0), (1.5, 0.5), (-1.5, 0.5), (1.0, 1.0), (2.0, 0.0)])
def test_phi0_values(x, expected):
    assert phi0_eval(x) == expected


def test_phi0_transition_matches_formula():
    x = 1.3
    t = x - 1.0
    s = np.exp(-1 / t) / (np.exp(-1 / t) + np.exp(-1 / (1 - t)))
    assert phi0_eval(x) == pytest.approx(1 - s, rel=1e-14)


def test_phi0_is_monotone_on_transition():
    xs = np.linspace(1.0, 2.0, 2001)
    assert np.all(np.diff(phi0_eval(xs)) <= 0)


def test_phi_l_examples():
    assert phi_l_eval(TruncationKernel(1, 2.0), 0.5) == 1.0
    assert phi_l_eval(TruncationKernel(2, 1.4), 0.0) == 1.0
    # (2 phi0(1.5) - phi0(0.75)) / (2 - 1) = 2 * 0.5 - 1
    assert phi_l_eval(TruncationKernel(1, 2.0), 1.5) == pytest.approx(0.0, abs=1e-15)


def test_level_one_equals_phi1():
    xs = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(TruncationKernel(1, 2.0)(xs), phi1_eval(xs, 2.0), atol=1e-15)


def test_normaliser():
    assert TruncationKernel(2, 1.4).normaliser == pytest.approx(1.5)
    assert TruncationKernel(1, 2.0).normaliser == 1.0


@pytest.mark.parametrize("level, scale", [(1, 1.0), (2, 0.5), (1, None)])
def test_bad_scale_rejected(level, scale):
    with pytest.raises(ValueError):
        TruncationKernel(level, scale)


def test_phi1_rejects_small_scale():
    with pytest.raises(ValueError):
        phi1_eval(0.3, 1.0)


def test_support_radius():
    assert TruncationKernel().support_radius == 2.0
    assert TruncationKernel(2, 1.4).support_radius == pytest.approx(5.6)


@given(kernels, st.floats(-1.0, 1.0))
def test_plateau_is_exact(k, x):
    assert k(x) == 1.0


@given(kernels, st.floats(1.0, 1e6))
def test_outside_support_is_zero(k, excess):
    assert k(k.support_radius + excess) == 0.0
    assert k(-k.support_radius - excess) == 0.0


@given(kernels, st.floats(-20.0, 20.0))
def test_even(k, x):
    assert k(-x) == k(x)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.label())
def test_derivative_bounded(k):
    r = k.support_radius
    xs = np.linspace(-r - 0.5, r + 0.5, 200_001)
    slope = np.abs(np.diff(k(xs))) / (xs[1] - xs[0])
    assert slope.max() < 50.0


def test_moment_examples():
    assert abs(kernel_moment(TruncationKernel(1, 2.0), 0)) <= 1e-8
    assert kernel_moment(TruncationKernel(), 1) == 0.0
    m0 = kernel_moment(TruncationKernel(), 0)
    assert 2.0 < m0 < 4.0
    # symmetric transition: the bump has mass exactly 3
    assert m0 == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.label())
def test_odd_moments_vanish(k):
    for j in (1, 3, 5):
        assert abs(kernel_moment(k, j)) <= moment_tolerance(k, j)


@pytest.mark.parametrize("k", KERNELS[1:], ids=lambda k: k.label())
def test_moments_below_level_vanish(k):
    for j in range(k.level):
        assert abs(kernel_moment(k, j)) <= moment_tolerance(k, j)


def test_top_even_moment_of_alternating_sum_is_nonzero():
    # the alternating sum cancels x^j for j < level only; x^level survives when level is even
    assert kernel_moment(TruncationKernel(2, 1.4), 2) == pytest.approx(10.4418, rel=1e-4)
    assert kernel_moment(TruncationKernel(4, 1.2), 4) == pytest.approx(252.72, rel=1e-4)


def test_moment_quadrature_converged():
    k = TruncationKernel(2, 1.4)
    assert kernel_moment(k, 2, panels=256) == pytest.approx(kernel_moment(k, 2, panels=512), abs=1e-10)


def test_negative_moment_order():
    with pytest.raises(ValueError):
        kernel_moment(TruncationKernel(), -1)


def test_plot_data():
    k = TruncationKernel(2, 1.4)
    data = kernel_plot_data(k, 11)
    assert data.shape == (11, 2)
    assert data[0, 1] == 0.0 and data[-1, 1] == 0.0
    assert data[5, 0] == 0.0 and data[5, 1] == 1.0
    assert kernel_plot_data(k, 401).shape[0] == 401
    with pytest.raises(ValueError):
        kernel_plot_data(k, 1)
