"""Schmidt-coefficient distributions, their power sums and the extremal shapes.

A distribution is stored in canonical form: non-negative coefficients sorted
in non-increasing order that sum to one. Objects are immutable; every
operation returns a new instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    InfeasiblePurity,
    InvalidInput,
    MinusBranchInfeasible,
    NegativeCoefficient,
    NotNormalized,
)

NORM_TOL = 1e-12
CONSTRAINT_TOL = 1e-12
CEIL_TOL = 1e-9

Branch = Literal["plus", "minus"]


class SchmidtDistribution:
    """Immutable, canonically sorted probability vector of Schmidt coefficients.

    Use :func:`make_distribution` to build one from raw input; the constructor
    trusts its argument and only freezes it.
    """

    __slots__ = ("_lambdas",)

    def __init__(self, lambdas: np.ndarray):
        arr = np.array(lambdas, dtype=float)
        arr.flags.writeable = False
        self._lambdas = arr

    @property
    def lambdas(self) -> np.ndarray:
        return self._lambdas

    @property
    def s(self) -> int:
        return int(self._lambdas.size)

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self._lambdas))

    def __len__(self) -> int:
        return self.s

    def __iter__(self):
        return iter(self._lambdas.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SchmidtDistribution):
            return NotImplemented
        return np.array_equal(self._lambdas, other._lambdas)

    def __hash__(self) -> int:
        return hash(self._lambdas.tobytes())

    def __repr__(self) -> str:
        if self.s <= 8:
            body = ", ".join(f"{x:.6g}" for x in self._lambdas)
        else:
            head = ", ".join(f"{x:.6g}" for x in self._lambdas[:4])
            body = f"{head}, ... ({self.s} coefficients)"
        return f"SchmidtDistribution([{body}])"


@dataclass(frozen=True)
class PowerSums:
    """Power sums M(1..m_max) of a distribution; ``values[k-1]`` is M(k).

    ``exact`` optionally carries the same sums as exact rationals of the
    floating-point coefficients, for evaluations that must not round.
    """

    m_max: int
    values: tuple[float, ...]
    exact: tuple[Fraction, ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.m_max < 1 or len(self.values) != self.m_max:
            raise InvalidInput("values must hold exactly m_max power sums")
        if abs(self.values[0] - 1.0) > NORM_TOL:
            raise NotNormalized(f"M(1) = {self.values[0]!r}, expected 1")
        if any(not (0.0 < v <= 1.0 + NORM_TOL) for v in self.values):
            raise InvalidInput("power sums must lie in (0, 1]")

    def __getitem__(self, k: int) -> float:
        """Return M(k), 1-based like the usual notation."""
        if not 1 <= k <= self.m_max:
            raise IndexError(k)
        return self.values[k - 1]

    @property
    def purity(self) -> float:
        if self.m_max < 2:
            raise InvalidInput("purity needs m_max >= 2")
        return self.values[1]

    def holder_violations(self, tol: float = CONSTRAINT_TOL) -> list[int]:
        """Orders k >= 3 at which the Jensen/Hoelder sandwich fails.

        Checks ``M(k-1)**((k-1)/(k-2)) <= M(k) <= M(k-1)**(k/(k-1))`` and
        monotone decay, each with absolute slack ``tol``.
        """
        bad = []
        for k in range(2, self.m_max + 1):
            prev, cur = self[k - 1], self[k]
            ok = cur <= prev + tol
            if k >= 3:
                lo = prev ** ((k - 1) / (k - 2))
                hi = prev ** (k / (k - 1))
                ok = ok and lo - tol <= cur <= hi + tol
            if not ok:
                bad.append(k)
        return bad


def make_distribution(
    raw: Iterable[float],
    norm_tol: float = NORM_TOL,
    floor: float | None = None,
    renormalize: bool = False,
) -> SchmidtDistribution:
    """Validate raw coefficients and return the canonical distribution.

    Entries in ``[-norm_tol, 0)`` are clipped to zero. With ``floor`` set,
    coefficients strictly below it are dropped; the remainder is rescaled to
    unit sum only when ``renormalize`` is true. Nothing is modified silently
    otherwise.

    Raises
    ------
    EmptyInput, NegativeCoefficient, NotNormalized
    """
    arr = np.asarray(list(raw) if not isinstance(raw, np.ndarray) else raw, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInput("distribution has no coefficients")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("coefficients must be finite")
    if np.any(arr < -norm_tol):
        worst = float(arr.min())
        raise NegativeCoefficient(f"coefficient {worst!r} is negative")
    arr = np.where(arr < 0.0, 0.0, arr)
    if floor is not None:
        arr = arr[arr >= floor]
        if arr.size == 0:
            raise EmptyInput(f"no coefficient survives floor={floor}")
    if renormalize:
        total = math.fsum(arr)
        if total <= 0.0:
            raise NotNormalized("cannot renormalize an all-zero vector")
        arr = arr / total
    total = math.fsum(arr)
    if abs(total - 1.0) > norm_tol:
        raise NotNormalized(f"coefficients sum to {total!r}")
    arr = np.sort(arr)[::-1]
    return SchmidtDistribution(arr)


def _power_sum(lam: np.ndarray, k: int) -> float:
    # lam is already descending; fsum is exactly rounded regardless.
    return math.fsum(np.power(lam, k))


def power_sums(d: SchmidtDistribution, m_max: int, exact: bool = False) -> PowerSums:
    """M(1..m_max), each correctly rounded; with ``exact`` also as rationals.

    The exact sums cost O(s * m_max) big-rational operations and are meant
    for small distributions.
    """
    if m_max < 1:
        raise InvalidInput("m_max must be >= 1")
    lam = d.lambdas[d.lambdas > 0.0]
    vals = [_power_sum(lam, k) for k in range(1, m_max + 1)]
    # M(1) is 1 up to the construction tolerance; pin it so downstream
    # recursions see the exact normalization.
    vals[0] = 1.0 if abs(vals[0] - 1.0) <= NORM_TOL else vals[0]
    rational = None
    if exact:
        base = [Fraction(x) for x in lam.tolist()]
        cur = list(base)
        sums = []
        for _ in range(m_max):
            sums.append(sum(cur, Fraction(0)))
            cur = [c * b for c, b in zip(cur, base)]
        rational = tuple(sums)
    return PowerSums(m_max, tuple(min(v, 1.0) for v in vals), rational)


def purity(d: SchmidtDistribution) -> float:
    return _power_sum(d.lambdas, 2)


def renyi_entropy(d: SchmidtDistribution, m: int) -> float:
    """Renyi entropy of order ``m`` (natural log)."""
    if m < 2:
        raise InvalidInput("Renyi order must be >= 2")
    value = math.log(_power_sum(d.lambdas, m)) / (1 - m)
    return max(value, 0.0)


def min_schmidt_number(p: float, ceil_tol: float = CEIL_TOL) -> int:
    """Smallest number of coefficients compatible with purity ``p``: ceil(1/p).

    If 1/p lies within ``ceil_tol`` of an integer that integer is returned, so
    that floating-point renderings of 1/L map back to L.
    """
    _check_purity(p)
    x = 1.0 / p
    nearest = round(x)
    if abs(x - nearest) <= ceil_tol:
        return max(int(nearest), 1)
    return int(math.ceil(x))


def _check_purity(p: float) -> None:
    if not (0.0 < p <= 1.0) or math.isnan(p):
        raise InfeasiblePurity(f"purity must lie in (0, 1], got {p!r}")


def extremal_radicand(p: float, size: int) -> float:
    """(S-1)(S P-1), clipped at zero when S is feasible by the ceil tolerance."""
    return max((size - 1) * (size * p - 1.0), 0.0)


def extremal_distribution(p: float, size: int, branch: Branch) -> SchmidtDistribution:
    """Distribution with ``size-1`` equal coefficients and purity ``p``.

    The distinguished coefficient is ``(1 +/- sqrt((S-1)(S p-1)))/S``; the
    plus branch gives the peaked shape, the minus branch the uniform one.
    """
    if branch not in ("plus", "minus"):
        raise InvalidInput(f"unknown branch {branch!r}")
    _check_purity(p)
    size = int(size)
    if size < 1:
        raise InvalidInput("S must be a positive integer")
    if size < min_schmidt_number(p):
        raise InfeasiblePurity(f"S*P = {size * p!r} < 1")
    if size == 1:
        return SchmidtDistribution(np.array([1.0]))
    rad = extremal_radicand(p, size)
    if branch == "minus":
        if rad > 1.0 + 1e-12:
            raise MinusBranchInfeasible(
                f"(S-1)(SP-1) = {rad!r} > 1; leading coefficient would be negative"
            )
        first = max((1.0 - math.sqrt(rad)) / size, 0.0)
    else:
        first = (1.0 + math.sqrt(rad)) / size
    rest = (1.0 - first) / (size - 1)
    arr = np.full(size, rest)
    arr[0] = first
    return SchmidtDistribution(np.sort(arr)[::-1])


def uniform_distribution(p: float) -> SchmidtDistribution:
    return extremal_distribution(p, min_schmidt_number(p), "minus")


def peaked_distribution(p: float, size: int) -> SchmidtDistribution:
    return extremal_distribution(p, size, "plus")


def parse_coefficients(text: str) -> list[float]:
    """Parse a distribution from file text or an inline comma-separated list.

    One coefficient per line, ``#`` starts a comment; commas and whitespace
    also separate values so ``"0.5,0.3,0.2"`` works inline.
    """
    out: list[float] = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for tok in line.replace(",", " ").split():
            try:
                out.append(float(tok))
            except ValueError:
                raise InvalidInput(f"not a number: {tok!r}") from None
    return out


def format_distribution(d: SchmidtDistribution | Sequence[float], sep: str = "\n") -> str:
    values = d.lambdas if isinstance(d, SchmidtDistribution) else d
    return sep.join(f"{float(x):.17g}" for x in values)
