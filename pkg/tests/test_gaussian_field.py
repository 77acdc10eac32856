import math

import numpy as np
import pytest

from coxextremes.covariance import matern, powered_exponential
from coxextremes.errors import ParameterError
from coxextremes.gaussian_field import (GaussianFieldSampler, IntensityMeanPolicy, simulate_gaussian,
                                        simulate_log_gaussian)
from coxextremes.grid import GridSpec, Rect


def empirical_cov(samples, a, b):
    x = samples[:, a[0], a[1]]
    y = samples[:, b[0], b[1]]
    return np.mean((x - x.mean()) * (y - y.mean()))


@pytest.mark.parametrize("method,n", [("cholesky", 12), ("circulant", 33)])
def test_covariance_reproduced(method, n):
    model = matern(1.5, 2.0, 1.5)
    spec = GridSpec.over(Rect(0, 4, 0, 4), n, n)
    sampler = GaussianFieldSampler(model, spec, method)
    s = sampler.sample(np.random.default_rng(0), 4000)
    assert s.shape == (4000, n, n)
    assert abs(s[:, 0, 0].var() - 2.0) < 0.15
    lag = spec.dx * 3
    assert abs(empirical_cov(s, (2, 2), (2, 5)) - model(lag)) < 0.15
    # diagonal lag
    d = math.hypot(3 * spec.dx, 3 * spec.dy)
    assert abs(empirical_cov(s, (1, 1), (4, 4)) - model(d)) < 0.15


def test_auto_method_switches_on_size():
    small = GaussianFieldSampler(matern(1.0), GridSpec.over(Rect(0, 20, 0, 20), 64, 64))
    big = GaussianFieldSampler(matern(1.0), GridSpec.over(Rect(0, 20, 0, 20), 65, 64))
    assert small.method == "cholesky" and big.method == "circulant"
    with pytest.raises(ParameterError):
        GaussianFieldSampler(matern(1.0), GridSpec.over(Rect(0, 1, 0, 1), 65, 64), "cholesky")


def test_backends_agree_in_distribution():
    model = powered_exponential(1.0, 1.0, 1.0)
    spec = GridSpec.over(Rect(0, 3, 0, 3), 10, 10)
    a = GaussianFieldSampler(model, spec, "cholesky").sample(np.random.default_rng(1), 3000)
    b = GaussianFieldSampler(model, spec, "circulant").sample(np.random.default_rng(2), 3000)
    ca = empirical_cov(a, (0, 0), (0, 9))
    cb = empirical_cov(b, (0, 0), (0, 9))
    assert abs(ca - cb) < 0.1
    assert abs(ca - model(3.0)) < 0.08


def test_seed_determinism():
    spec = GridSpec.over(Rect(-1, 1, -1, 1), 9, 9)
    a = simulate_gaussian(matern(math.inf), spec, seed=42).values
    b = simulate_gaussian(matern(math.inf), spec, seed=42).values
    c = simulate_gaussian(matern(math.inf), spec, seed=43).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_unit_policy_gives_unit_mean_intensity():
    model = matern(0.5, 1.0, 0.5)
    pol = IntensityMeanPolicy.unit()
    assert pol.gaussian_mean(model) == -0.5
    assert pol.c_psi(model) == pytest.approx(1.0)
    spec = GridSpec.over(Rect(0, 10, 0, 10), 21, 21)
    vals = np.array([simulate_log_gaussian(model, spec, pol, seed=s).values.mean() for s in range(200)])
    assert abs(vals.mean() - 1.0) < 0.05
    psi = simulate_log_gaussian(model, spec, pol, seed=1)
    assert np.all(psi.values > 0) and psi.meta["c_psi"] == pytest.approx(1.0)


def test_explicit_policy():
    pol = IntensityMeanPolicy.explicit(0.3)
    assert pol.c_psi(matern(1.0, 2.0)) == pytest.approx(math.exp(1.3))
    with pytest.raises(ParameterError):
        IntensityMeanPolicy("other")


def test_unknown_method():
    with pytest.raises(ParameterError):
        GaussianFieldSampler(matern(1.0), GridSpec.over(Rect(0, 1, 0, 1), 3, 3), "svd")


def test_embedding_failure_is_reported():
    from coxextremes.errors import EmbeddingError
    # very smooth field on a window far smaller than its correlation range
    with pytest.raises(EmbeddingError):
        GaussianFieldSampler(matern(math.inf, 1.0, 5.0), GridSpec.over(Rect(0, 1, 0, 1), 80, 80), "circulant")
