"""Monte Carlo scans of (purity, normalization ratio) into mergeable 2-D histograms."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    CHAIN_TOL,
    lower_tight_array,
    upper_bound_u_array,
    upper_finite_s_array,
)
from .chi import chi_dp_batch
from .errors import ChainViolation, GridMismatch, InfeasibleN, InvalidInput
from .sampling import SamplerConfig, block_layout, sample_block

DEFAULT_BINS = 1000


@dataclass
class Grid2D:
    """Counts on a closed rectangle; the top edge belongs to the last bin.

    Points outside the rectangle (or NaN) go to ``overflow`` instead of being
    clamped. ``x_sum`` and ``x_sumsq`` accumulate the binned x values so the
    x-marginal mean can be reported without binning error.
    """

    x_bins: int
    y_bins: int
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]
    total: int = 0
    overflow: int = 0
    x_sum: float = 0.0
    x_sumsq: float = 0.0

    def __post_init__(self):
        if self.x_bins < 1 or self.y_bins < 1:
            raise InvalidInput("bin counts must be positive")
        for lo, hi in (self.x_range, self.y_range):
            if not lo < hi:
                raise InvalidInput(f"empty range [{lo}, {hi}]")
        self.x_range = (float(self.x_range[0]), float(self.x_range[1]))
        self.y_range = (float(self.y_range[0]), float(self.y_range[1]))
        if self.counts is None:
            self.counts = np.zeros((self.x_bins, self.y_bins), dtype=np.int64)
        elif self.counts.shape != (self.x_bins, self.y_bins):
            raise InvalidInput("counts shape does not match the bin numbers")

    @property
    def geometry(self) -> tuple:
        return (self.x_bins, self.y_bins, self.x_range, self.y_range)

    def empty_like(self) -> Grid2D:
        return Grid2D(self.x_bins, self.y_bins, self.x_range, self.y_range)

    @staticmethod
    def _index(v: np.ndarray, lo: float, hi: float, bins: int):
        inside = (v >= lo) & (v <= hi)
        idx = np.floor((np.where(inside, v, lo) - lo) / (hi - lo) * bins).astype(np.int64)
        return np.minimum(idx, bins - 1), inside

    def add(self, x: np.ndarray, y: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi, xin = self._index(x, *self.x_range, self.x_bins)
        yi, yin = self._index(y, *self.y_range, self.y_bins)
        ok = xin & yin
        np.add.at(self.counts, (xi[ok], yi[ok]), 1)
        kept = int(np.count_nonzero(ok))
        self.total += kept
        self.overflow += x.size - kept
        self.x_sum += float(np.sum(x[ok]))
        self.x_sumsq += float(np.sum(x[ok] ** 2))

    def merge(self, other: Grid2D) -> Grid2D:
        """New grid with summed counts; geometries must match exactly."""
        if self.geometry != other.geometry:
            raise GridMismatch(f"{self.geometry} vs {other.geometry}")
        return Grid2D(
            self.x_bins,
            self.y_bins,
            self.x_range,
            self.y_range,
            self.counts + other.counts,
            self.total + other.total,
            self.overflow + other.overflow,
            self.x_sum + other.x_sum,
            self.x_sumsq + other.x_sumsq,
        )

    def x_mean(self) -> float:
        return self.x_sum / self.total if self.total else math.nan

    def x_stderr(self) -> float:
        if self.total < 2:
            return math.nan
        mean = self.x_mean()
        var = max(self.x_sumsq / self.total - mean * mean, 0.0) * self.total / (self.total - 1)
        return math.sqrt(var / self.total)

    def nonzero(self) -> list[tuple[int, int, int]]:
        xi, yi = np.nonzero(self.counts)
        return list(zip(xi.tolist(), yi.tolist(), self.counts[xi, yi].tolist()))

    def max_share(self) -> float:
        return float(self.counts.max()) / self.total if self.total else 0.0

    def identical(self, other: Grid2D) -> bool:
        return (
            self.geometry == other.geometry
            and np.array_equal(self.counts, other.counts)
            and (self.total, self.overflow, self.x_sum, self.x_sumsq)
            == (other.total, other.overflow, other.x_sum, other.x_sumsq)
        )


def default_grid(s: int, bins: int = DEFAULT_BINS) -> Grid2D:
    return Grid2D(bins, bins, (1.0 / s, 1.0), (0.0, 1.0))


def purity_and_ratio(lams: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Purity and chi_{n+1}/chi_n for each row of ``lams``."""
    p = np.sum(lams * lams, axis=1)
    log_chi = chi_dp_batch(lams, n + 1)
    with np.errstate(invalid="ignore"):
        ratio = np.exp(log_chi[:, n + 1] - log_chi[:, n])
    return p, np.minimum(ratio, 1.0)


def check_chain(p: np.ndarray, ratio: np.ndarray, n: int, s: int, tol: float = CHAIN_TOL) -> None:
    """Raise :class:`ChainViolation` if any point escapes the bound chain."""
    lo_loose = 1.0 - n * p
    lo = lower_tight_array(p, n)
    hi_s = upper_finite_s_array(p, n, s)
    hi = upper_bound_u_array(p, n)
    bad = ~(
        (lo_loose <= lo + tol)
        & (lo <= ratio + tol)
        & (ratio <= hi_s + tol)
        & (hi_s <= hi + tol)
        & (hi <= 1.0 - p + tol)
    )
    bad &= np.isfinite(ratio)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ChainViolation(
            f"{int(bad.sum())} point(s) outside the bound chain; first: P={p[i]!r}, "
            f"ratio={ratio[i]!r}, lower={lo[i]!r}, upper_s={hi_s[i]!r}, upper={hi[i]!r}"
        )


def _scan_block(args) -> Grid2D:
    cfg, block, size, n, grid, check = args
    lams = sample_block(cfg, block, size)
    p, ratio = purity_and_ratio(lams, n)
    if check:
        check_chain(p, ratio, n, cfg.s)
    out = grid.empty_like()
    out.add(p, ratio)
    return out


def scan_random_states(
    cfg: SamplerConfig,
    n: int,
    samples: int,
    grid: Grid2D | None = None,
    workers: int = 1,
    check: bool = True,
) -> Grid2D:
    """Histogram of (P, chi_{n+1}/chi_n) over ``samples`` random spectra.

    Each sampling block is binned into its own grid and the grids are summed
    in block order, so the result is bit-identical for any worker count.
    """
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if n >= cfg.s:
        raise InfeasibleN(f"n = {n} must be below s = {cfg.s}")
    if samples < 0:
        raise InvalidInput("samples must be >= 0")
    geometry = default_grid(cfg.s) if grid is None else grid.empty_like()
    jobs = [(cfg, b, size, n, geometry, check) for b, size in block_layout(samples)]
    result = geometry.empty_like()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_scan_block, jobs):
                result = result.merge(part)
    else:
        for job in jobs:
            result = result.merge(_scan_block(job))
    return result


OVERLAY_COLUMNS = ("p", "lower_loose", "lower_tight", "upper_tight", "upper_loose")


def bound_overlay(p_grid, n: int, s_list) -> tuple[list[str], list[tuple]]:
    """Bound curves against P for plotting over a scan; NaN where P < 1/S."""
    p = np.asarray(p_grid, dtype=float)
    if np.any((p <= 0.0) | (p > 1.0)):
        raise InvalidInput("p_grid must lie within (0, 1]")
    header = list(OVERLAY_COLUMNS) + [f"upper_finite_s_{int(s)}" for s in s_list]
    cols = [p, 1.0 - n * p, lower_tight_array(p, n), upper_bound_u_array(p, n), 1.0 - p]
    cols += [upper_finite_s_array(p, n, int(s)) for s in s_list]
    rows = [tuple(float(c[i]) for c in cols) for i in range(p.size)]
    return header, rows
