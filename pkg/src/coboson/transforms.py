"""Uniforming and peaking maps on coefficient triples.

Both maps replace three coefficients by a triple with the same sum K1 and the
same sum of squares K2, so the purity of the whole distribution is unchanged.
The peaking map moves towards the shape (big, small, small), the uniforming
map towards (small, big, big); they respectively raise and lower the
normalization ratio.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .chi import chi_ratio
from .errors import InvalidInput, InvalidTriple, NoConvergence
from .schmidt import SchmidtDistribution

MONOTONICITY_TOL = 1e-12


@dataclass(frozen=True)
class TripleSelection:
    """Three 1-based positions in the canonical (descending) order."""

    j1: int
    j2: int
    j3: int
    k1: float
    k2: float

    @property
    def indices(self) -> tuple[int, int, int]:
        return (self.j1, self.j2, self.j3)


def select_triple(d: SchmidtDistribution, j1: int, j2: int, j3: int) -> TripleSelection:
    if not (1 <= j1 < j2 < j3 <= d.s):
        raise InvalidTriple(f"need 1 <= j1 < j2 < j3 <= {d.s}, got ({j1}, {j2}, {j3})")
    vals = d.lambdas[[j1 - 1, j2 - 1, j3 - 1]]
    return TripleSelection(j1, j2, j3, math.fsum(vals), math.fsum(vals * vals))


def _spread(a: float, b: float, c: float) -> float:
    # 6 K2 - 2 K1^2 written as a sum of squares, so it never goes negative
    # and an already-degenerate triple stays exactly degenerate.
    return 2.0 * math.fsum(((a - b) ** 2, (b - c) ** 2, (a - c) ** 2))


def _peaked_values(a: float, b: float, c: float) -> tuple[float, float, float]:
    k1 = math.fsum((a, b, c))
    r = math.sqrt(_spread(a, b, c))
    small = (2.0 * k1 - r) / 6.0
    return ((k1 + r) / 3.0, small, small)


def _uniform_values(a: float, b: float, c: float) -> tuple[float, float, float]:
    k1 = math.fsum((a, b, c))
    # K1^2 - 2 K2 = 2(ab + bc + ca) - (a^2 + b^2 + c^2)
    gap = math.fsum((2 * a * b, 2 * b * c, 2 * a * c, -a * a, -b * b, -c * c))
    if gap >= 0.0:
        r = math.sqrt(_spread(a, b, c))
        big = (2.0 * k1 + r) / 6.0
        return (max((k1 - r) / 3.0, 0.0), big, big)
    # The symmetric solution would need a negative entry; drop one instead.
    r = math.sqrt(-gap)
    return (0.0, (k1 + r) / 2.0, (k1 - r) / 2.0)


def _triple(d: SchmidtDistribution, t: TripleSelection) -> tuple[float, float, float]:
    lam = d.lambdas
    return (float(lam[t.j1 - 1]), float(lam[t.j2 - 1]), float(lam[t.j3 - 1]))


def _replace(d: SchmidtDistribution, t: TripleSelection, vals) -> SchmidtDistribution:
    arr = np.array(d.lambdas)
    arr[[t.j1 - 1, t.j2 - 1, t.j3 - 1]] = vals
    return SchmidtDistribution(np.sort(arr)[::-1])


def gamma_peaked(d: SchmidtDistribution, t: TripleSelection) -> SchmidtDistribution:
    return _replace(d, t, _peaked_values(*_triple(d, t)))


def gamma_uniform(d: SchmidtDistribution, t: TripleSelection) -> SchmidtDistribution:
    return _replace(d, t, _uniform_values(*_triple(d, t)))


class TripleProducts(NamedTuple):
    lower: float
    value: float
    upper: float

    def holds(self, tol: float = 0.0) -> bool:
        return self.lower - tol <= self.value <= self.upper + tol


def triple_product_bounds(d: SchmidtDistribution, t: TripleSelection) -> TripleProducts:
    """Product of the triple, bracketed by the products after each map."""
    vals = _triple(d, t)
    return TripleProducts(
        math.prod(_uniform_values(*_triple(d, t))),
        math.prod(vals),
        math.prod(_peaked_values(*_triple(d, t))),
    )


class MonotonicityCheck(NamedTuple):
    r_u: float
    r: float
    r_p: float
    ok: bool


def ratio_monotonicity_check(
    d: SchmidtDistribution, t: TripleSelection, n: int, tol: float = MONOTONICITY_TOL
) -> MonotonicityCheck:
    r_u = chi_ratio(gamma_uniform(d, t), n)
    r = chi_ratio(d, n)
    r_p = chi_ratio(gamma_peaked(d, t), n)
    return MonotonicityCheck(r_u, r, r_p, r_u <= r + tol and r <= r_p + tol)


@dataclass(frozen=True)
class IterationResult:
    distribution: SchmidtDistribution
    iterations: int
    converged: bool
    change: float


def _sweep(count: int) -> list[tuple[int, int, int]]:
    """0-based triples visited in one sweep over ``count`` eligible positions.

    Starts with (largest, median, smallest), then pairs the largest and the
    smallest with every other position and finally walks adjacent pairs; a
    single fixed triple can stall while the rest of the vector is unsettled.
    """
    if count < 3:
        return []
    last = count - 1
    out = [(0, last // 2, last)]
    out += [(0, j, last) for j in range(1, last)]
    out += [(i, i + 1, last) for i in range(1, last - 1)]
    out += [(0, i, i + 1) for i in range(1, last)]
    return out


def iterate_to_extremal(
    d: SchmidtDistribution,
    direction: Literal["uniform", "peaked"],
    max_iters: int = 10_000,
    tol: float = 1e-13,
) -> IterationResult:
    """Apply one map in sweeps over triples until the distribution stops moving.

    Each sweep starts with the (largest, median, smallest) triple. Stops when
    a whole sweep changes no coefficient by ``tol`` or more; if ``max_iters`` is hit
    first a :class:`NoConvergence` warning is issued and the last iterate is
    returned.
    """
    if direction not in ("uniform", "peaked"):
        raise InvalidInput(f"unknown direction {direction!r}")
    if d.s < 3:
        raise InvalidInput("need at least three coefficients")
    step = _uniform_values if direction == "uniform" else _peaked_values
    arr = np.array(d.lambdas)
    change = math.inf
    for it in range(1, max_iters + 1):
        # Zeros can be refilled by peaking but are inert for uniforming.
        count = arr.size if direction == "peaked" else int(np.count_nonzero(arr))
        before = arr.copy()
        for tri in _sweep(count):
            idx = list(tri)
            arr[idx] = step(*arr[idx].tolist())
            arr = np.sort(arr)[::-1]
        change = float(np.max(np.abs(arr - before)))
        if change < tol:
            return IterationResult(SchmidtDistribution(arr), it, True, change)
    warnings.warn(
        f"no convergence after {max_iters} steps (last change {change:.3g})",
        NoConvergence,
        stacklevel=2,
    )
    return IterationResult(SchmidtDistribution(arr), max_iters, False, change)
