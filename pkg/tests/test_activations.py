"""Activation bundles: derivative consistency, bounds, and the interval
degeneracy probe."""

import numpy as np
import pytest
from scipy.integrate import quad

from twolayer_opt import (ACTIVATION_NAMES, PAPER_ACTIVATIONS, NumericsError,
                          builtin_activation, c1_probe, vector_apply)

# kinked at 0: exclude a neighbourhood of the kink from derivative grids
KINKED = {"elliot", "elliot_symmetric", "relu"}


def sample_grid(name, rng, n=1000, lo=-10.0, hi=10.0):
    x = rng.uniform(lo, hi, size=n)
    if name in KINKED:
        x = x[np.abs(x) > 1e-3]
    return x


def max_scaled_diff(approx, exact):
    return float(np.max(np.abs(approx - exact))) / max(1.0, float(np.max(np.abs(exact))))


def test_builtin_trivial_values():
    sig = builtin_activation("sigmoid")
    assert sig.eval(0.0) == pytest.approx(0.5)
    assert sig.deriv(0.0) == pytest.approx(0.25)

    tanh = builtin_activation("tanh")
    assert tanh.eval(0.0) == 0.0
    assert tanh.value_bound == 1.0

    soft = builtin_activation("softplus")
    assert soft.value_bound is None
    assert soft.eval(0.0) == pytest.approx(np.log(2.0))


def test_claimed_c1_flags():
    for name in PAPER_ACTIVATIONS:
        assert builtin_activation(name).claimed_c1
    assert not builtin_activation("linear").claimed_c1
    assert not builtin_activation("relu").claimed_c1
    assert len(PAPER_ACTIVATIONS) == 9


def test_unknown_name_raises():
    with pytest.raises(NameError):
        builtin_activation("swish")


def test_erf_scaling_against_quadrature():
    """The erf activation integrates exp(-t^2/2), not the usual exp(-t^2)."""
    a = builtin_activation("erf")
    for x in (-3.0, -0.7, 0.5, 1.0, 2.4):
        expected, _ = quad(lambda t: 2.0 / np.sqrt(np.pi) * np.exp(-0.5 * t * t), 0.0, x)
        assert a.eval(x) == pytest.approx(expected, rel=1e-12)
    assert a.value_bound == pytest.approx(np.sqrt(2.0))


def test_vector_apply():
    sig = builtin_activation("sigmoid")
    np.testing.assert_allclose(vector_apply(sig, [0.0, 0.0]), [0.5, 0.5])
    assert vector_apply(sig, []).shape == (0,)
    gauss = builtin_activation("gaussian")
    np.testing.assert_allclose(vector_apply(gauss, [0.0, 1.0]), [1.0, np.exp(-1.0)])
    with pytest.raises(NumericsError):
        vector_apply(sig, [0.0, np.nan])


@pytest.mark.parametrize("name", ACTIVATION_NAMES)
def test_deriv_matches_finite_differences(name, rng):
    a = builtin_activation(name)
    x = sample_grid(name, rng)
    step = 1e-5
    fd = (a.eval(x + step) - a.eval(x - step)) / (2.0 * step)
    assert max_scaled_diff(fd, a.deriv(x)) <= 1e-6


@pytest.mark.parametrize("name", ACTIVATION_NAMES)
def test_deriv2_matches_finite_differences(name, rng):
    a = builtin_activation(name)
    x = sample_grid(name, rng)
    step = 1e-5
    fd = (a.deriv(x + step) - a.deriv(x - step)) / (2.0 * step)
    assert max_scaled_diff(fd, a.deriv2(x)) <= 1e-5


@pytest.mark.parametrize("name", ACTIVATION_NAMES)
def test_value_bound_holds(name, rng):
    a = builtin_activation(name)
    if a.value_bound is None:
        return
    x = rng.uniform(-10, 10, size=1000)
    assert np.max(np.abs(a.eval(x))) <= a.value_bound * (1 + 1e-12)


@pytest.mark.parametrize("name", ACTIVATION_NAMES)
def test_deriv_difference_quotients_below_lipschitz(name, rng):
    a = builtin_activation(name)
    if a.deriv_lipschitz is None:
        return
    x = np.sort(sample_grid(name, rng, n=2000))
    quotients = np.abs(np.diff(a.deriv(x))) / np.diff(x)
    if a.deriv_lipschitz == 0.0:
        assert np.max(quotients) == 0.0
    else:
        assert np.max(quotients) <= a.deriv_lipschitz * (1 + 1e-6)


@pytest.mark.parametrize("name", ACTIVATION_NAMES)
def test_grad_H_bound_holds(name, rng):
    a = builtin_activation(name)
    if a.grad_H_bound is None:
        return
    x1 = rng.uniform(-10, 10, size=10_000)
    x2 = rng.uniform(-10, 10, size=10_000)
    g2 = (a.deriv(x1) * a.deriv(x2)) ** 2 + (a.eval(x1) * a.deriv2(x2)) ** 2
    assert np.max(g2) <= a.grad_H_bound ** 2 * (1 + 1e-6)


class TestC1Probe:
    def test_relu_flagged_on_positive_interval(self):
        report = c1_probe(builtin_activation("relu"), [(1.0, 2.0)], tol=1e-8)
        assert report.intervals[0].flagged
        assert report.verdict is False

    def test_linear_flagged(self):
        report = c1_probe(builtin_activation("linear"), [(-1.0, 1.0)], tol=1e-8)
        assert report.intervals[0].flagged

    def test_sigmoid_clean_on_random_intervals(self, rng):
        """Cross-checked against an independent normal-equations fit."""
        a = builtin_activation("sigmoid")
        intervals = []
        for _ in range(20):
            lo = rng.uniform(-5, 4)
            intervals.append((lo, lo + rng.uniform(0.2, 1.0)))
        report = c1_probe(a, intervals, grid_points=64, tol=1e-8)
        assert report.verdict is True

        lo, hi = intervals[0]
        x = np.linspace(lo, hi, 64)
        y = x * a.deriv(x) + a.eval(x)
        A = np.column_stack([-a.deriv(x), np.ones_like(x)])
        coef = np.linalg.solve(A.T @ A, A.T @ y)
        resid = (float(np.max(np.abs(A @ coef - y)))
                 / float(np.max(np.abs(y - y.mean()))))
        assert resid == pytest.approx(report.intervals[0].residual_affine_relation,
                                      rel=1e-6)
        assert resid > 1e-8

    # The elliot pair is excluded: despite being listed with the good
    # activations, both satisfy (x+1) h'(x) + h(x) = 1 identically on x > 0
    # (and the mirrored relation on x < 0), so the probe rightly flags any
    # one-sided interval.  See test_elliot_family_interval_degeneracy.
    @pytest.mark.parametrize(
        "name", [n for n in PAPER_ACTIVATIONS if not n.startswith("elliot")])
    def test_interval_clean_activations_pass_100_intervals(self, name, rng):
        a = builtin_activation(name)
        intervals = []
        for _ in range(100):
            lo = rng.uniform(-5.0, 4.9)
            hi = min(5.0, lo + rng.uniform(0.1, 2.0))
            intervals.append((lo, hi))
        assert c1_probe(a, intervals, tol=1e-8).verdict is True

    @pytest.mark.parametrize("name", ["elliot", "elliot_symmetric"])
    def test_elliot_family_interval_degeneracy(self, name):
        a = builtin_activation(name)
        x = np.linspace(0.2, 4.0, 200)
        relation = (x + 1) * a.deriv(x) + a.eval(x)
        np.testing.assert_allclose(relation, relation[0], rtol=0, atol=1e-14)
        mirrored = (-x - 1) * a.deriv(-x) + a.eval(-x)
        np.testing.assert_allclose(mirrored, mirrored[0], rtol=0, atol=1e-14)

        report = c1_probe(a, [(0.5, 1.5), (-2.0, -1.0)], tol=1e-8)
        assert all(p.flagged for p in report.intervals)
        # an interval straddling the kink admits no single (c2, c3)
        report0 = c1_probe(a, [(-1.0, 1.0)], tol=1e-8)
        assert not report0.intervals[0].flagged

    @pytest.mark.parametrize("name", ["linear", "relu"])
    def test_controls_fail_100_intervals(self, name, rng):
        a = builtin_activation(name)
        intervals = []
        for _ in range(100):
            lo = rng.uniform(-5.0, 4.9)
            hi = min(5.0, lo + rng.uniform(0.1, 2.0))
            intervals.append((lo, hi))
        assert c1_probe(a, intervals, tol=1e-8).verdict is False

    @pytest.mark.parametrize("name", PAPER_ACTIVATIONS)
    def test_probe_on_derivative(self, name, rng):
        # heuristic only: probing h' with its own derivative pair
        a = builtin_activation(name)
        intervals = [(rng.uniform(-4, 3), 0) for _ in range(10)]
        intervals = [(lo, lo + 0.7) for lo, _ in intervals]
        assert c1_probe(a, intervals, tol=1e-8, on_deriv=True).verdict is True

    def test_argument_validation(self):
        a = builtin_activation("sigmoid")
        with pytest.raises(ValueError):
            c1_probe(a, [(0.0, 1.0)], grid_points=4)
        with pytest.raises(ValueError):
            c1_probe(a, [(1.0, 1.0)])
