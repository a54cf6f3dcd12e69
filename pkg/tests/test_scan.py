import math

import numpy as np
import pytest

from coboson.bounds import lower_tight, upper_finite_s, upper_bound_u
from coboson.errors import ChainViolation, GridMismatch, InfeasibleN, InvalidInput
from coboson.formats import grid_from_csv, grid_to_csv
from coboson.sampling import BLOCK_SIZE, SamplerConfig
from coboson.scan import (
    Grid2D,
    bound_overlay,
    check_chain,
    default_grid,
    scan_random_states,
)


def bin_edges(grid, xi, yi):
    (x0, x1), (y0, y1) = grid.x_range, grid.y_range
    dx, dy = (x1 - x0) / grid.x_bins, (y1 - y0) / grid.y_bins
    return x0 + xi * dx, x0 + (xi + 1) * dx, y0 + yi * dy, y0 + (yi + 1) * dy


def assert_inside_band(grid, n, s):
    for xi, yi, _ in grid.nonzero():
        plo, phi, rlo, rhi = bin_edges(grid, xi, yi)
        plo = max(plo, 1.0 / s)
        # bounds decrease with P, so the band over a bin spans [lower(phi), upper(plo)]
        assert rhi >= lower_tight(phi, n) - 1e-12
        assert rlo <= upper_finite_s(plo, n, s) + 1e-12


def test_grid_add_and_overflow():
    g = Grid2D(4, 2, (0.0, 1.0), (0.0, 1.0))
    g.add(np.array([0.0, 1.0, 0.5, 1.5, math.nan]), np.array([0.0, 1.0, 0.5, 0.5, 0.5]))
    assert g.total == 3 and g.overflow == 2
    assert g.counts[0, 0] == 1 and g.counts[3, 1] == 1 and g.counts[2, 1] == 1
    assert int(g.counts.sum()) == g.total


def test_grid_validation():
    with pytest.raises(InvalidInput):
        Grid2D(0, 2, (0, 1), (0, 1))
    with pytest.raises(InvalidInput):
        Grid2D(2, 2, (1, 1), (0, 1))
    with pytest.raises(GridMismatch):
        Grid2D(2, 2, (0, 1), (0, 1)).merge(Grid2D(3, 2, (0, 1), (0, 1)))


def test_merge_is_commutative_and_associative():
    rng = np.random.default_rng(0)
    grids = []
    for _ in range(3):
        g = Grid2D(10, 10, (0, 1), (0, 1))
        g.add(rng.random(100), rng.random(100) * 1.1)
        grids.append(g)
    a, b, c = grids
    left = a.merge(b).merge(c)
    right = a.merge(b.merge(c))
    assert np.array_equal(left.counts, right.counts) and left.total == right.total
    assert np.array_equal(a.merge(b).counts, b.merge(a).counts)
    assert left.overflow == a.overflow + b.overflow + c.overflow


def test_empty_scan():
    g = scan_random_states(SamplerConfig(3), 2, 0)
    assert g.total == 0 and g.overflow == 0 and g.x_bins == 1000
    assert g.x_range == (1 / 3, 1.0)


def test_infeasible_n():
    with pytest.raises(InfeasibleN):
        scan_random_states(SamplerConfig(3), 3, 10)


def test_scan_s3_inside_band():
    g = scan_random_states(SamplerConfig(3, seed=1), 2, 100_000, Grid2D(200, 200, (1 / 3, 1), (0, 1)))
    assert g.total == 100_000 and g.overflow == 0
    assert_inside_band(g, 2, 3)
    assert abs(g.x_mean() - 0.6) <= 3 * g.x_stderr()


def test_scan_s5_inside_band():
    g = scan_random_states(SamplerConfig(5, seed=2), 2, 100_000, Grid2D(200, 200, (0.2, 1), (0, 1)))
    assert g.overflow == 0
    assert_inside_band(g, 2, 5)


def test_shards_merge_to_single_scan():
    cfg = SamplerConfig(4, seed=3)
    geom = Grid2D(50, 50, (0.25, 1), (0, 1))
    whole = scan_random_states(cfg, 2, BLOCK_SIZE + 1000, geom)
    split = scan_random_states(cfg, 2, BLOCK_SIZE + 1000, geom, workers=2)
    assert whole.identical(split)


def test_concentration_grows_with_s():
    for seed in (0, 1, 2):
        shares = [
            scan_random_states(SamplerConfig(s, seed=seed), 2, 20_000, default_grid(s, 200)).max_share()
            for s in (3, 5)
        ]
        assert shares[0] <= shares[1]


def test_check_chain_rejects_outliers():
    p = np.array([0.5])
    check_chain(p, np.array([0.1]), 2, 3)
    with pytest.raises(ChainViolation):
        check_chain(p, np.array([0.9]), 2, 3)


def test_grid_csv_round_trip():
    g = scan_random_states(SamplerConfig(3, seed=4), 2, 2000, Grid2D(30, 20, (1 / 3, 1), (0, 1)))
    text = grid_to_csv(g, {"seed": 4})
    assert text.splitlines()[1].startswith("# x_bins=30, y_bins=20, x_range=[")
    back = grid_from_csv(text)
    assert back.identical(g)
    with pytest.raises(InvalidInput):
        grid_from_csv("# nothing\n")


def test_overlay():
    header, rows = bound_overlay([1 / 50, 0.1, 0.5, 1.0], 2, [50, 3])
    assert header[-2:] == ["upper_finite_s_50", "upper_finite_s_3"]
    first = dict(zip(header, rows[0]))
    assert first["upper_finite_s_50"] == first["lower_tight"]
    assert math.isnan(first["upper_finite_s_3"])
    mid = dict(zip(header, rows[1]))
    assert abs(mid["upper_finite_s_50"] / upper_bound_u(0.1, 2) - 1) <= 0.05
    last = dict(zip(header, rows[-1]))
    assert last["upper_loose"] == 0.0 and last["lower_tight"] == 0.0
    for row in rows:
        r = dict(zip(header, row))
        assert r["lower_tight"] <= r["upper_tight"] + 1e-12 <= r["upper_loose"] + 2e-12
    with pytest.raises(InvalidInput):
        bound_overlay([0.0], 2, [3])
