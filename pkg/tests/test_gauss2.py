import warnings

import numpy as np
import pytest
from scipy.optimize import least_squares

from jointtherm.errors import ConfigurationError, UndefinedMetricError
from jointtherm.gauss2 import (PUBLISHED_COEFFICIENTS, Gauss2Coefficients, eval_gauss2, fit_gauss2,
                               gauss2_jacobian, r_squared, read_profile_csv)

X = np.arange(2000.0)


def perturbed(coeffs, rng, frac=0.2):
    return Gauss2Coefficients.from_array(coeffs.as_array() * (1 + rng.uniform(-frac, frac, 6)))


def test_eval_at_peak():
    # the second term adds a vanishing tail at x = b1
    assert eval_gauss2(PUBLISHED_COEFFICIENTS, 276.0) == pytest.approx(34.07, abs=1e-3)
    assert eval_gauss2(PUBLISHED_COEFFICIENTS, X).shape == X.shape


def test_single_term_definition():
    c = Gauss2Coefficients(2.0, 1.0, 3.0, 0.0, 0.0, 1.0)
    assert eval_gauss2(c, 4.0) == pytest.approx(2.0 * np.exp(-1.0))


def test_widths_must_be_nonzero():
    with pytest.raises(ConfigurationError):
        Gauss2Coefficients(1, 0, 0, 1, 0, 1)


def test_jacobian_matches_finite_differences(rng):
    c = PUBLISHED_COEFFICIENTS.as_array()
    x = rng.uniform(-100, 1500, 50)
    J = gauss2_jacobian(c, x)
    for k in range(6):
        h = 1e-6 * max(1.0, abs(c[k]))
        cp, cm = c.copy(), c.copy()
        cp[k] += h
        cm[k] -= h
        fd = (eval_gauss2(cp, x) - eval_gauss2(cm, x)) / (2 * h)
        assert np.allclose(J[:, k], fd, rtol=1e-6, atol=1e-8)


def test_r_squared():
    y = np.array([1.0, 2.0, 3.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(np.full(3, 2.0), y) == 0.0
    with pytest.raises(UndefinedMetricError):
        r_squared(y, np.ones(3))


def test_noiseless_recovery():
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, X)
    report = fit_gauss2(X, y, init=perturbed(PUBLISHED_COEFFICIENTS, np.random.default_rng(0)))
    assert report.rmse <= 1e-6
    assert report.converged


@pytest.mark.parametrize("seed", range(5))
def test_noisy_fit_regime(seed):
    rng = np.random.default_rng(seed)
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, X) + rng.normal(0, 0.08, X.size)
    report = fit_gauss2(X, y, init=perturbed(PUBLISHED_COEFFICIENTS, rng))
    assert 0.05 <= report.rmse <= 0.11
    assert report.r_squared >= 0.98


def test_ssr_never_increases(rng):
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, X) + rng.normal(0, 0.08, X.size)
    hist = fit_gauss2(X, y, init=perturbed(PUBLISHED_COEFFICIENTS, rng)).ssr_history
    assert np.all(np.diff(hist) <= 0)


def test_agrees_with_scipy(rng):
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, X) + rng.normal(0, 0.08, X.size)
    init = perturbed(PUBLISHED_COEFFICIENTS, rng)
    ours = fit_gauss2(X, y, init=init)
    ref = least_squares(lambda p: eval_gauss2(p, X) - y, PUBLISHED_COEFFICIENTS.as_array(),
                        jac=lambda p: gauss2_jacobian(p, X), method="lm", xtol=1e-14,
                        ftol=1e-14)
    ref_rmse = np.sqrt(np.mean(ref.fun ** 2))
    assert ours.rmse == pytest.approx(ref_rmse, rel=1e-6)


def test_auto_init_fits_regime(rng):
    y = eval_gauss2(PUBLISHED_COEFFICIENTS, X) + rng.normal(0, 0.08, X.size)
    report = fit_gauss2(np.c_[X, y])
    assert report.rmse < 0.11 and report.r_squared > 0.98


def test_constant_profile_is_degenerate():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        report = fit_gauss2(X[:50], np.full(50, 30.0))
    assert report.degenerate and report.r_squared == 0.0 and w


def test_too_few_samples():
    with pytest.raises(ConfigurationError):
        fit_gauss2(np.arange(5.0), np.ones(5))


def test_read_profile_csv(tmp_path):
    p = tmp_path / "prof.csv"
    p.write_text("x,temperature\n0,30.5\n1,30.6\n")
    assert np.array_equal(read_profile_csv(p), [[0, 30.5], [1, 30.6]])
    p.write_text("0,1\n1,x\n")
    with pytest.raises(ConfigurationError, match=":2:"):
        read_profile_csv(p)
