"""Bounds on the normalization ratio chi_{N+1}/chi_N at fixed purity.

The ordered chain evaluated here is::

    1 - N P  <=  uniform ratio  <=  [actual ratio]  <=  [peaked ratio at S]
             <=  U_N(P)  <=  1 - P

where U_N(P) = 1 - N P / (1 + (N - 1) sqrt P) is the infinite-S peaked limit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .chi import (
    BOUND_CEIL_TOL,
    chi_ratio,
    extremal_deviation_terms,
    extremal_ratio_terms,
    ratio_peaked,
    ratio_uniform,
)
from .errors import (
    InfeasiblePurity,
    InsufficientPowerSums,
    InvalidInput,
    OutsideConvergenceRadius,
    PurityMismatch,
)
from .schmidt import PowerSums, SchmidtDistribution, extremal_radicand, min_schmidt_number, purity

CHAIN_TOL = 1e-12
PURITY_MATCH_TOL = 1e-9


def _check(p: float, n: int) -> None:
    if not (0.0 < p <= 1.0):
        raise InfeasiblePurity(f"purity must lie in (0, 1], got {p!r}")
    if n < 1:
        raise InvalidInput("n must be >= 1")


def upper_bound_u(p: float, n: int) -> float:
    """U_N(P) = 1 - P N / (1 + (N-1) sqrt P)."""
    _check(p, n)
    return 1.0 - p * n / (1.0 + (n - 1) * math.sqrt(p))


def asymptotic_upper(p: float) -> float:
    """Large-N limit of U_N(P): 1 - sqrt P."""
    _check(p, 1)
    return 1.0 - math.sqrt(p)


def bound_l(p: float) -> int:
    """L = ceil(1/P) as used by the bound formulas (rounding-level snap only)."""
    return min_schmidt_number(p, BOUND_CEIL_TOL)


def lower_tight(p: float, n: int) -> float:
    """Uniform-distribution ratio; zero once n reaches ceil(1/P)."""
    _check(p, n)
    if n >= bound_l(p):
        return 0.0
    return ratio_uniform(p, n)


def lower_tight_deviation(p: float, n: int) -> float:
    """1 - lower_tight(p, n), accurate even when it is tiny."""
    _check(p, n)
    size = bound_l(p)
    if n >= size:
        return 1.0
    dev, den = extremal_deviation_terms(p, size, n, -math.sqrt(extremal_radicand(p, size)))
    return dev / den


def upper_finite_s(p: float, n: int, size: int) -> float:
    """Peaked-distribution ratio with ``size`` coefficients; zero once n >= S."""
    _check(p, n)
    if size < bound_l(p):
        raise InfeasiblePurity(f"S = {size} cannot reach purity {p!r}")
    if n >= size:
        return 0.0
    return ratio_peaked(p, size, n)


def min_schmidt_number_array(p: np.ndarray) -> np.ndarray:
    x = 1.0 / p
    nearest = np.rint(x)
    return np.where(np.abs(x - nearest) <= BOUND_CEIL_TOL, nearest, np.ceil(x)).astype(np.int64)


def lower_tight_array(p: np.ndarray, n: int) -> np.ndarray:
    """Elementwise :func:`lower_tight`; bit-identical to the scalar version."""
    p = np.asarray(p, dtype=float)
    size = min_schmidt_number_array(p)
    rad = np.maximum((size - 1) * (size * p - 1.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        num, den = extremal_ratio_terms(p, size, n, -np.sqrt(rad))
        return np.where(n >= size, 0.0, num / den)


def upper_finite_s_array(p: np.ndarray, n: int, size: int) -> np.ndarray:
    """Elementwise :func:`upper_finite_s` at one S (NaN where S P < 1)."""
    p = np.asarray(p, dtype=float)
    if n >= size:
        return np.where(min_schmidt_number_array(p) <= size, 0.0, np.nan)
    rad = np.maximum((size - 1) * (size * p - 1.0), 0.0)
    num, den = extremal_ratio_terms(p, size, n, np.sqrt(rad))
    return np.where(min_schmidt_number_array(p) <= size, num / den, np.nan)


def upper_bound_u_array(p: np.ndarray, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return 1.0 - p * n / (1.0 + (n - 1) * np.sqrt(p))


@dataclass(frozen=True)
class BoundsReport:
    p: float
    n: int
    s: int | None
    l: int
    lower_loose: float
    lower_loose_raw: float
    lower_tight: float
    ratio: float | None
    upper_finite_s: float | None
    upper_tight: float
    upper_loose: float
    chain_ok: bool
    slacks: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def bounds_chain(
    p: float,
    n: int,
    s: int | None = None,
    d: SchmidtDistribution | None = None,
    chain_tol: float = CHAIN_TOL,
) -> BoundsReport:
    """Evaluate every link of the bound chain and check its ordering.

    If ``d`` is given its purity must match ``p`` to 1e-9; the actual ratio is
    then included and, unless ``s`` is passed explicitly, the finite-S bound
    uses the number of nonzero coefficients of ``d``.

    ``slacks`` maps each link ``"a<=b"`` to ``b - a``; the chain holds when
    every slack is at least ``-chain_tol``.
    """
    _check(p, n)
    ratio = None
    if d is not None:
        actual = purity(d)
        if abs(actual - p) > PURITY_MATCH_TOL:
            raise PurityMismatch(f"distribution has purity {actual!r}, not {p!r}")
        if s is None:
            s = d.nnz
        ratio = chi_ratio(d, n)
    raw = 1.0 - n * p
    values = {
        "lower_loose": raw,
        "lower_tight": lower_tight(p, n),
        "ratio": ratio,
        "upper_finite_s": None if s is None else upper_finite_s(p, n, s),
        "upper_tight": upper_bound_u(p, n),
        "upper_loose": 1.0 - p,
    }
    present = [(k, v) for k, v in values.items() if v is not None]
    slacks = {f"{a}<={b}": vb - va for (a, va), (b, vb) in zip(present, present[1:])}
    return BoundsReport(
        p=p,
        n=n,
        s=s,
        l=bound_l(p),
        lower_loose=max(raw, 0.0),
        lower_loose_raw=raw,
        lower_tight=values["lower_tight"],
        ratio=ratio,
        upper_finite_s=values["upper_finite_s"],
        upper_tight=values["upper_tight"],
        upper_loose=values["upper_loose"],
        chain_ok=all(v >= -chain_tol for v in slacks.values()),
        slacks=slacks,
    )


@dataclass(frozen=True)
class SeriesExpansion:
    value: float
    error_scale: float | None


def series_expansion_ratio(ps: PowerSums, n: int) -> SeriesExpansion:
    """Small-N P expansion 1 - N P + N^2 (M(3) - P^2) of the ratio.

    ``error_scale`` is |N^3 (M(4) + 2 P^3 - 2 P M(3))|, the size of the next
    order, available when M(4) is known. It is a magnitude only; the sign and
    constant of the remainder are not known.
    """
    if ps.m_max < 3:
        raise InsufficientPowerSums("the expansion needs M(1..3)")
    if n < 1:
        raise InvalidInput("n must be >= 1")
    p, m3 = ps[2], ps[3]
    value = 1.0 - n * p + n * n * (m3 - p * p)
    err = None
    if ps.m_max >= 4:
        err = abs(n**3 * (ps[4] + 2.0 * p**3 - 2.0 * p * m3))
    return SeriesExpansion(value, err)


def upper_bound_expansion(p: float, n: int, order: int = 2) -> float:
    """Truncated expansion of U_N(P) in powers of sqrt P.

    ``U = 1 - sum_{k>=2} (-1)^k P^{k/2} (N-1)^{k-2} N``; ``order`` q keeps the
    terms k = 2..q+1, so order 2 is ``1 - N P + P^{3/2} N (N-1)``. The series
    converges for P < 1/(N-1)^2; outside that a warning is issued.
    """
    _check(p, n)
    if order < 1:
        raise InvalidInput("order must be >= 1")
    if n >= 2 and p >= 1.0 / (n - 1) ** 2:
        warnings.warn(
            f"P = {p!r} is outside the convergence radius 1/(N-1)^2 = {1.0 / (n - 1) ** 2!r}",
            OutsideConvergenceRadius,
            stacklevel=2,
        )
    x = (n - 1) * math.sqrt(p)
    terms = [(-1) ** k * p * n * x ** (k - 2) for k in range(2, order + 2)]
    return 1.0 - math.fsum(terms)


DEVIATION_HEADER = (
    "n",
    "p",
    "dev_lower_loose",
    "dev_lower_tight",
    "dev_upper_tight",
    "dev_upper_loose",
)


def default_p_grid(points: int = 200, lo: float = 1e-9, hi: float = 1.0) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


def deviation_curves(n_list, p_grid=None) -> list[tuple]:
    """Rows (n, P, 1 - bound...) for each bound of the chain, for log-log plots.

    Deviations are ordered largest first: N P, 1 - uniform ratio,
    N P / (1 + (N-1) sqrt P), and the N-independent P.
    """
    grid = default_p_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if np.any((grid <= 0.0) | (grid > 1.0)):
        raise InfeasiblePurity("p_grid must lie within (0, 1]")
    rows = []
    for n in n_list:
        for p in grid.tolist():
            rows.append(
                (
                    int(n),
                    p,
                    n * p,
                    lower_tight_deviation(p, n),
                    n * p / (1.0 + (n - 1) * math.sqrt(p)),
                    p,
                )
            )
    return rows
