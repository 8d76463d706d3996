import numpy as np
import pytest

from clusterentropy import synth
from clusterentropy.series import Origin
from clusterentropy.synth import (
    EmbeddingWarning,
    FbmConfig,
    fgn_autocovariance,
    fractional_gaussian_noise,
    generate_fbm,
    mirror_market_schedule,
)


def test_config_validation():
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            FbmConfig(bad, 100)
    with pytest.raises(ValueError):
        FbmConfig(0.5, 1)
    with pytest.raises(ValueError):
        FbmConfig(0.5, 10, segment_lengths=(5, 4, 10))
    with pytest.raises(ValueError):
        FbmConfig(0.5, 10, segment_lengths=(5, 9))


def test_brownian_increments():
    N = 100_000
    path = generate_fbm(FbmConfig(0.5, N + 1, seed=11))
    inc = np.diff(path.values)
    rho1 = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(rho1) < 3 / np.sqrt(N)
    assert abs(inc.mean()) < 3 * inc.std() / np.sqrt(N)
    assert inc.std() == pytest.approx(1.0, abs=0.02)
    assert path.values[0] == 0.0
    assert path.origin == Origin.synthetic(11, 0.5)


def test_determinism():
    a = generate_fbm(FbmConfig(0.5, 5000, seed=3))
    b = generate_fbm(FbmConfig(0.5, 5000, seed=3))
    c = generate_fbm(FbmConfig(0.5, 5000, seed=4))
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)


def test_variance_scaling_oracle():
    x = generate_fbm(FbmConfig(0.7, 100_000, seed=5)).values
    lags = np.unique(np.logspace(0, 3, 20).astype(int))
    var = [np.var(x[lag:] - x[:-lag]) for lag in lags]
    slope = np.polyfit(np.log(lags), np.log(var), 1)[0]
    assert slope == pytest.approx(1.4, abs=0.05)


def test_autocovariance_values():
    assert fgn_autocovariance(0, 0.7) == 1.0
    np.testing.assert_allclose(fgn_autocovariance(np.arange(1, 5), 0.5), 0.0, atol=1e-15)
    assert fgn_autocovariance(1, 0.7) == pytest.approx(2**0.4 - 1)


def test_hosking_fallback_covariance(monkeypatch):
    def broken(size, hurst):
        lam = np.ones(2 * size)
        lam[0] = -1.0
        return lam

    monkeypatch.setattr(synth, "_circulant_eigenvalues", broken)
    rng = np.random.default_rng(0)
    with pytest.warns(EmbeddingWarning):
        fractional_gaussian_noise(6, 0.8, rng)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmbeddingWarning)
        samples = np.array([fractional_gaussian_noise(6, 0.8, rng) for _ in range(6000)])
    emp = np.cov(samples, rowvar=False)
    want = fgn_autocovariance(np.subtract.outer(np.arange(6), np.arange(6)), 0.8)
    np.testing.assert_allclose(emp, want, atol=0.06)


def test_embedding_covariance():
    rng = np.random.default_rng(1)
    samples = np.array([fractional_gaussian_noise(6, 0.3, rng) for _ in range(6000)])
    emp = np.cov(samples, rowvar=False)
    want = fgn_autocovariance(np.subtract.outer(np.arange(6), np.arange(6)), 0.3)
    np.testing.assert_allclose(emp, want, atol=0.06)


def test_mirror_schedule():
    path, sched = mirror_market_schedule(FbmConfig(0.5, 8, seed=9), [4, 8])
    assert len(path) == 8 and sched.boundaries == (4, 8)
    parts = [path.prefix(b) for b in sched.boundaries]
    assert np.array_equal(parts[0].values, parts[1].values[:4])
    single, s1 = mirror_market_schedule(FbmConfig(0.5, 100), [100])
    assert len(single) == 100 and len(s1) == 1
    with pytest.raises(ValueError):
        mirror_market_schedule(FbmConfig(0.5, 8), [8, 4])
