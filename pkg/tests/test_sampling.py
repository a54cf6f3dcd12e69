import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import integrate

from coboson.errors import InvalidInput
from coboson.sampling import (
    BLOCK_SIZE,
    GENERATOR_NAME,
    SamplerConfig,
    block_layout,
    sample_array,
    sample_batch,
    sample_block,
    sample_spectrum,
)


def simplex_moment(weight, f):
    """Integral of weight*f over the 2-simplex divided by the integral of weight."""

    def inner(fn):
        def g(y, x):
            lam = (x, y, 1.0 - x - y)
            return weight(*lam) * fn(*lam)

        val, _ = integrate.dblquad(g, 0.0, 1.0, 0.0, lambda x: 1.0 - x, epsabs=1e-13, epsrel=1e-11)
        return val

    return inner(f) / inner(lambda *_: 1.0)


def purity3(a, b, c):
    return a * a + b * b + c * c


def vandermonde_sq(a, b, c):
    # eigenvalue density of a 3x3 complex Wishart matrix restricted to unit trace
    return ((a - b) * (a - c) * (b - c)) ** 2


@lru_cache
def induced_moments():
    return (
        simplex_moment(vandermonde_sq, purity3),
        simplex_moment(vandermonde_sq, lambda *l: purity3(*l) ** 2),
    )


def test_quadrature_oracles_match_closed_forms():
    mean, _ = induced_moments()
    assert mean == pytest.approx(0.6, abs=1e-9)
    assert simplex_moment(lambda *_: 1.0, purity3) == pytest.approx(0.5, abs=1e-9)


def test_induced_mean_and_spread_match_quadrature():
    lam = sample_array(SamplerConfig(3, "induced", seed=2024), 200_000)
    p = np.sum(lam * lam, axis=1)
    mean, second = induced_moments()
    se = p.std(ddof=1) / math.sqrt(p.size)
    assert abs(p.mean() - mean) <= 3 * se
    assert abs(np.mean(p * p) - second) <= 3 * np.std(p * p) / math.sqrt(p.size)


def test_flat_mean_purity():
    lam = sample_array(SamplerConfig(3, "flat", seed=9), 200_000)
    p = np.sum(lam * lam, axis=1)
    assert abs(p.mean() - 0.5) <= 3 * p.std(ddof=1) / math.sqrt(p.size)


def test_measures_differ():
    a = np.sum(sample_array(SamplerConfig(3, "induced", seed=1), 50_000) ** 2, axis=1)
    b = np.sum(sample_array(SamplerConfig(3, "flat", seed=1), 50_000) ** 2, axis=1)
    assert a.mean() - b.mean() > 0.08


@pytest.mark.parametrize("measure", ["induced", "flat"])
def test_canonical_rows(measure):
    lam = sample_array(SamplerConfig(6, measure, seed=3), 5000)
    assert lam.shape == (5000, 6)
    assert np.all(lam >= 0) and np.all(np.diff(lam, axis=1) <= 0)
    assert np.max(np.abs(lam.sum(axis=1) - 1)) < 1e-14


def test_reproducible_and_seed_sensitive():
    cfg = SamplerConfig(4, seed=77, stream_id=3)
    assert np.array_equal(sample_array(cfg, 1000), sample_array(cfg, 1000))
    other = SamplerConfig(4, seed=77, stream_id=4)
    assert not np.array_equal(sample_array(cfg, 1000), sample_array(other, 1000))
    assert not np.array_equal(sample_array(cfg, 1000), sample_array(SamplerConfig(4, seed=78, stream_id=3), 1000))


def test_prefix_stable():
    cfg = SamplerConfig(3, seed=5)
    assert np.array_equal(sample_block(cfg, 0, 10), sample_block(cfg, 0, 100)[:10])
    assert np.array_equal(sample_array(cfg, 70_000)[:500], sample_array(cfg, 500))


def test_worker_count_does_not_change_output():
    cfg = SamplerConfig(3, "flat", seed=12)
    count = 2 * BLOCK_SIZE + 17
    assert np.array_equal(sample_array(cfg, count, workers=1), sample_array(cfg, count, workers=2))


def test_block_layout():
    assert block_layout(0) == []
    assert block_layout(BLOCK_SIZE) == [(0, BLOCK_SIZE)]
    assert block_layout(BLOCK_SIZE + 1) == [(0, BLOCK_SIZE), (1, 1)]


def test_spectrum_and_batch():
    cfg = SamplerConfig(5, seed=8)
    batch = sample_batch(cfg, 3)
    assert len(batch) == 3 and batch[0] == sample_spectrum(cfg)
    assert sample_spectrum(SamplerConfig(1)).lambdas.tolist() == [1.0]
    assert sample_array(cfg, 0).shape == (0, 5)


def test_config_validation():
    for kwargs in ({"s": 0}, {"s": 3, "measure": "haar"}, {"s": 3, "seed": -1}, {"s": 3, "stream_id": 2**64}):
        with pytest.raises(InvalidInput):
            SamplerConfig(**kwargs)
    with pytest.raises(InvalidInput):
        sample_batch(SamplerConfig(3), 0)
    meta = SamplerConfig(3, seed=4).metadata()
    assert meta["generator"] == GENERATOR_NAME and meta["seed"] == 4 and meta["s"] == 3
