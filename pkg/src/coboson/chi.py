"""Normalization factors chi_N = N! e_N(lambda) and the ratio chi_{N+1}/chi_N.

Three independent evaluations are provided so they can check one another:

* :func:`chi_dp` - all-positive prefix recurrence over the coefficients
  (primary; no cancellation),
* :func:`chi_newton` - the alternating power-sum recursion,
* :func:`chi_bruteforce` - direct subset enumeration (small inputs only),

plus the birthday-problem oracle, closed forms for the extremal shapes and a
divide-and-conquer variant of the DP for very long coefficient vectors.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import (
    Infeasible,
    InsufficientPowerSums,
    InvalidInput,
    StabilityWarning,
    TooLarge,
    VanishingDenominator,
)
from .schmidt import (
    PowerSums,
    SchmidtDistribution,
    extremal_radicand,
    min_schmidt_number,
    power_sums,
)

Method = Literal["dp", "newton", "brute", "dc"]

UNDERFLOW_FLOOR = 1e-300
BRUTE_LIMIT = 10**7
ENUM_LIMIT = 10**8
CANCELLATION_DIGITS = 6
# Snap 1/P to an integer only at rounding level in the ratio formulas: a
# looser snap (as used when building distributions) would evaluate the
# uniform formula at an L with L*P < 1 and drop it below 1 - N P.
BOUND_CEIL_TOL = 1e-12

# Fast-path limits, see _log_e.
_SAFE_LOG_RANGE = math.log(1e290)
_TRIM_MIN_S = 8192
_TRIM_MAX_TOP = 1200
_TINY_LAMBDA = 1e-200
_DC_CHUNK = 1 << 16


@dataclass(frozen=True)
class NormalizationSequence:
    """chi_0..chi_{n_max} with their natural logs (-inf marks an exact zero)."""

    n_max: int
    chi: np.ndarray
    log_chi: np.ndarray
    method: str

    def __post_init__(self):
        for arr in (self.chi, self.log_chi):
            arr.flags.writeable = False

    def ratio(self, n: int) -> float:
        return ratio_from_log(self.log_chi, n)

    def to_dict(self) -> dict:
        return {
            "n": self.n_max,
            "chi": [float(x) for x in self.chi],
            "log_chi": [None if math.isinf(x) else float(x) for x in self.log_chi],
            "method": self.method,
        }


def _sequence(log_chi: np.ndarray, method: str) -> NormalizationSequence:
    chi = np.minimum(np.exp(log_chi), 1.0)
    return NormalizationSequence(len(log_chi) - 1, chi, log_chi, method)


def ratio_from_log(log_chi: Sequence[float], n: int) -> float:
    """chi_{n+1}/chi_n from a log sequence, clipped to [0, 1]."""
    if n < 0 or n + 1 >= len(log_chi):
        raise InvalidInput(f"need log chi up to index {n + 1}")
    den = log_chi[n]
    if math.isinf(den):
        raise VanishingDenominator(f"chi_{n} is zero")
    num = log_chi[n + 1]
    if math.isinf(num):
        return 0.0
    return min(math.exp(num - den), 1.0)


# ---------------------------------------------------------------------------
# elementary symmetric polynomials in log form


def _log_e_rows(lam: np.ndarray, top: int, trim: float | None, factorial: bool) -> np.ndarray:
    """log e_0..e_top (or log k! e_k) by rows over k; each row is a rescaled cumulative sum.

    Row k holds e_k of every prefix of ``lam``. Rows are normalized by their
    last entry, so only the dynamic range *within* a row matters. With
    ``trim`` set, the leading prefix entries smaller than ``trim`` times the
    row total are dropped from later rows.
    """
    s = lam.size
    out = np.full(top + 1, -np.inf)
    out[0] = 0.0
    row = np.ones(s)
    buf = np.empty(s)
    # Running scale kept as mantissa * 2**exponent so the factors k * last
    # multiply without rounding through logarithms.
    scale_m, scale_e = 1.0, 0
    start = 0
    prev_lo = 0
    for k in range(1, top + 1):
        lo = max(start, k - 1)
        seg = buf[lo:]
        np.multiply(lam[lo + 1 :], row[lo:-1], out=seg[1:])
        if lo == 0:
            seg[0] = lam[0]
        else:
            # row[lo-1] is stale if the previous row started after it (trimmed).
            seg[0] = lam[lo] * row[lo - 1] if lo - 1 >= prev_lo else 0.0
        prev_lo = lo
        np.cumsum(seg, out=row[lo:])
        last = row[-1]
        if last == 0.0:
            break
        row[lo:] *= 1.0 / last
        scale_m, e = math.frexp(scale_m * last * (k if factorial else 1))
        scale_e += e
        out[k] = math.log(scale_m) + scale_e * _LN2
        if trim is not None:
            idx = int(np.searchsorted(row[lo:], trim))
            start = max(lo, lo + idx - 1)
    return out


_SENTINEL = -(1 << 40)
_LN2 = math.log(2.0)


def _log_e_exact(lam: np.ndarray, top: int, factorial: bool) -> np.ndarray:
    """log e_0..e_top (or log k! e_k) with a separate binary exponent per k.

    Loops over coefficients and updates every degree at once; each e_k is a
    mantissa in [0.5, 1) times 2**E_k, so no entry can underflow regardless of
    how the magnitudes spread across k.
    """
    m = np.zeros(top + 1)
    ex = np.full(top + 1, _SENTINEL, dtype=np.int64)
    m[0], ex[0] = 0.5, 1
    ks = np.arange(1, top + 1, dtype=float) if factorial else np.ones(top)
    for j, x in enumerate(lam.tolist()):
        kk = min(j + 1, top)
        bm, be = np.frexp(x * ks[:kk] * m[:kk])
        te = be.astype(np.int64) + ex[:kk]
        am, ae = m[1 : kk + 1], ex[1 : kk + 1]
        en = np.maximum(ae, te)
        val = np.ldexp(am, np.maximum(ae - en, -2000)) + np.ldexp(bm, np.maximum(te - en, -2000))
        vm, ve = np.frexp(val)
        m[1 : kk + 1] = vm
        ex[1 : kk + 1] = np.where(vm == 0.0, _SENTINEL, en + ve)
    with np.errstate(divide="ignore"):
        out = np.log(m) + ex * _LN2
    out[m == 0.0] = -np.inf
    return out


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_e(lam: np.ndarray, top: int, factorial: bool = False) -> np.ndarray:
    """log e_k(lam) for k = 0..top; ``lam`` positive and non-increasing.

    With ``factorial`` the result is log(k! e_k), accumulated exactly inside
    the recurrence instead of adding log k! afterwards.

    Picks the cheapest evaluation that is safe for the input:

    * plain rows when every row's dynamic range is provably below 1e290
      (bounded by the largest binomial coefficient, since the smallest nonzero
      prefix term is the product of the leading coefficients);
    * trimmed rows for very long vectors at moderate degree, where the
      discarded prefix mass is negligible;
    * the per-degree exponent recurrence otherwise.
    """
    s = lam.size
    top = min(top, s)
    if top == 0:
        return np.zeros(1)
    tiny = lam[-1] < _TINY_LAMBDA
    if not tiny and _log_binom(s, min(top, s // 2)) < _SAFE_LOG_RANGE:
        return _log_e_rows(lam, top, None, factorial)
    if not tiny and s >= _TRIM_MIN_S and top <= _TRIM_MAX_TOP:
        return _log_e_rows(lam, top, UNDERFLOW_FLOOR, factorial)
    return _log_e_exact(lam, top, factorial)


def _log_factorials(n: int) -> np.ndarray:
    return np.array([math.lgamma(k + 1) for k in range(n + 1)])


def _positive(d: SchmidtDistribution) -> np.ndarray:
    lam = d.lambdas
    return np.ascontiguousarray(lam[lam > 0.0])


def _finish(log_chi: np.ndarray, n_max: int) -> np.ndarray:
    out = np.full(n_max + 1, -np.inf)
    top = min(len(log_chi) - 1, n_max)
    out[: top + 1] = log_chi[: top + 1]
    out[0] = 0.0
    if n_max >= 1 and top >= 1:
        # The distribution is normalized, so chi_1 = sum(lambda) = 1.
        out[1] = 0.0
    return out


def chi_dp(d: SchmidtDistribution, n_max: int) -> NormalizationSequence:
    """chi_0..chi_{n_max} from the all-positive prefix recurrence.

    ``chi_k^{(j)} = chi_k^{(j-1)} + k lambda_j chi_{k-1}^{(j-1)}`` with every
    term non-negative. Degrees above the number of nonzero coefficients are
    set to exactly zero.
    """
    if n_max < 0:
        raise InvalidInput("n_max must be >= 0")
    lam = _positive(d)
    log_chi = _log_e(lam, min(n_max, lam.size), factorial=True)
    return _sequence(_finish(log_chi, n_max), "dp")


def chi_dp_batch(lams: np.ndarray, n_max: int) -> np.ndarray:
    """log chi_0..chi_{n_max} for many short distributions at once.

    ``lams`` has shape (count, s), each row normalized and sorted descending.
    Intended for small ``s`` where the row dynamic range is harmless; returns
    an array of shape (count, n_max + 1).
    """
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 2:
        raise InvalidInput("expected a 2-D array of distributions")
    count, s = lams.shape
    out = np.full((count, n_max + 1), -np.inf)
    out[:, 0] = 0.0
    top = min(n_max, s)
    prev = np.ones((count, s))
    shifted = np.empty((count, s))
    shift = np.zeros(count)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(1, top + 1):
            shifted[:, 0] = 1.0 if k == 1 else 0.0
            shifted[:, 1:] = prev[:, :-1]
            cur = np.cumsum(lams * shifted, axis=1)
            last = cur[:, -1]
            pos = last > 0.0
            log_last = np.where(pos, np.log(np.where(pos, last, 1.0)), -np.inf)
            out[:, k] = log_last + shift + math.lgamma(k + 1)
            cur /= np.where(pos, last, 1.0)[:, None]
            shift += np.where(pos, log_last, 0.0)
            prev = cur
    return out


def _chunk_log_e(args: tuple[np.ndarray, int]) -> np.ndarray:
    lam, top = args
    res = np.full(top + 1, -np.inf)
    le = _log_e(lam, min(top, lam.size))
    res[: le.size] = le
    return res


def _log_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated product of two polynomials given by log coefficients."""
    n = a.size - 1
    out = np.full(n + 1, -np.inf)
    for i in range(n + 1):
        if math.isinf(a[i]):
            break
        np.logaddexp(out[i:], a[i] + b[: n + 1 - i], out=out[i:])
    return out


def chi_dc(
    d: SchmidtDistribution,
    n_max: int,
    chunk: int = _DC_CHUNK,
    workers: int = 1,
) -> NormalizationSequence:
    """Divide-and-conquer evaluation: prod_j (1 + lambda_j x) truncated at x^n_max.

    Chunks of coefficients are expanded independently (optionally in worker
    processes) and combined by truncated convolution in a fixed pairwise
    tree, so the result does not depend on the worker count.
    """
    if n_max < 0:
        raise InvalidInput("n_max must be >= 0")
    if chunk < 1:
        raise InvalidInput("chunk must be >= 1")
    lam = _positive(d)
    top = min(n_max, lam.size)
    jobs = [(lam[i : i + chunk], top) for i in range(0, lam.size, chunk)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_log_e, jobs))
    else:
        parts = [_chunk_log_e(job) for job in jobs]
    while len(parts) > 1:
        merged = [_log_convolve(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    log_chi = parts[0] + _log_factorials(top)
    return _sequence(_finish(log_chi, n_max), "dc")


# ---------------------------------------------------------------------------
# independent evaluations


def chi_newton(
    ps: PowerSums,
    n_max: int,
    reference: NormalizationSequence | None = None,
    arithmetic: Literal["float", "exact"] = "float",
) -> NormalizationSequence:
    """chi_0..chi_{n_max} from the alternating power-sum recursion.

    ``chi_N = sum_m (-1)^{1+m} (N-1)!/(N-m)! M(m) chi_{N-m}`` with the
    factorial ratio built up one factor at a time.

    In ``float`` arithmetic a :class:`StabilityWarning` is emitted when the sum
    of absolute terms exceeds the result by more than six decimal digits, or
    when ``reference`` is given and the two sequences disagree at that level.
    The recursion is ill-conditioned in the power sums, so rounding them to
    doubles already limits the attainable accuracy. ``exact`` evaluates the
    same recursion in rational arithmetic on ``ps.exact`` (see
    :func:`~coboson.schmidt.power_sums`), which removes both error sources.
    """
    if n_max < 0:
        raise InvalidInput("n_max must be >= 0")
    if ps.m_max < n_max:
        raise InsufficientPowerSums(f"need M(1..{n_max}), have M(1..{ps.m_max})")
    if arithmetic == "exact":
        seq = _newton_exact(ps, n_max)
    elif arithmetic == "float":
        seq = _newton_float(ps, n_max)
    else:
        raise InvalidInput(f"unknown arithmetic {arithmetic!r}")
    if reference is not None:
        top = min(n_max, reference.n_max)
        a, b = seq.chi[: top + 1], reference.chi[: top + 1]
        scale = np.maximum(np.abs(b), np.finfo(float).tiny)
        rel = np.where((a == 0) & (b == 0), 0.0, np.abs(a - b) / scale)
        if rel.max(initial=0.0) > 10.0**-CANCELLATION_DIGITS:
            warnings.warn(
                f"alternating recursion deviates from reference by {rel.max():.3g} relative",
                StabilityWarning,
                stacklevel=2,
            )
    return seq


def _newton_float(ps: PowerSums, n_max: int) -> NormalizationSequence:
    log_m = [math.log(v) for v in ps.values]
    chi = [1.0]
    worst = 0.0
    negative = False
    for n in range(1, n_max + 1):
        terms = []
        log_c = 0.0
        for m in range(1, n + 1):
            if m > 1:
                log_c += math.log(n - m + 1)
            prev = chi[n - m]
            if prev == 0.0:
                continue
            mag = math.exp(log_c + log_m[m - 1] + math.log(abs(prev)))
            sign = (1.0 if m % 2 else -1.0) * (1.0 if prev > 0 else -1.0)
            terms.append(sign * mag)
        val = math.fsum(terms)
        if val != 0.0:
            worst = max(worst, math.fsum(abs(t) for t in terms) / abs(val))
        if val < 0.0:
            negative = True
            val = 0.0
        chi.append(val)
    if worst > 10.0**CANCELLATION_DIGITS or negative:
        warnings.warn(
            f"alternating recursion lost up to {math.log10(max(worst, 1.0)):.1f} digits"
            + ("; negative values clipped to 0" if negative else ""),
            StabilityWarning,
            stacklevel=3,
        )
    arr = np.array(chi)
    with np.errstate(divide="ignore"):
        log_chi = np.log(arr)
    return NormalizationSequence(n_max, np.minimum(arr, 1.0), log_chi, "newton")


def _log_fraction(x: Fraction) -> float:
    if x <= 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


def _newton_exact(ps: PowerSums, n_max: int) -> NormalizationSequence:
    if ps.exact is None:
        raise InvalidInput("exact arithmetic needs power_sums(..., exact=True)")
    chi = [Fraction(1)]
    for n in range(1, n_max + 1):
        total = Fraction(0)
        coeff = 1
        for m in range(1, n + 1):
            if m > 1:
                coeff *= n - m + 1
            term = coeff * ps.exact[m - 1] * chi[n - m]
            total += term if m % 2 else -term
        chi.append(total)
    log_chi = np.array([_log_fraction(x) for x in chi])
    arr = np.array([float(x) for x in chi])
    return NormalizationSequence(n_max, np.minimum(arr, 1.0), log_chi, "newton")


def chi_bruteforce(d: SchmidtDistribution, n_max: int) -> NormalizationSequence:
    """chi_k = k! * sum over all k-subsets of the coefficient products."""
    if n_max < 0:
        raise InvalidInput("n_max must be >= 0")
    lam = d.lambdas.tolist()
    s = len(lam)
    largest = max(math.comb(s, k) for k in range(min(n_max, s) + 1))
    if largest > BRUTE_LIMIT:
        raise TooLarge(f"{largest} subsets exceed the enumeration limit {BRUTE_LIMIT}")
    chi = [1.0]
    for k in range(1, n_max + 1):
        if k > s:
            chi.append(0.0)
            continue
        e_k = math.fsum(math.prod(c) for c in itertools.combinations(lam, k))
        chi.append(math.factorial(k) * e_k)
    arr = np.array(chi)
    with np.errstate(divide="ignore"):
        log_chi = np.log(arr)
    return NormalizationSequence(n_max, np.minimum(arr, 1.0), log_chi, "brute")


def birthday_probability(
    d: SchmidtDistribution,
    n: int,
    mode: Literal["enumerate", "montecarlo"] = "enumerate",
    trials: int = 100_000,
    seed: int = 0,
) -> float:
    """Probability that ``n`` independent draws from ``d`` are all different."""
    if mode == "enumerate":
        return _birthday_enumerate(d, n)
    if mode == "montecarlo":
        return birthday_montecarlo(d, n, trials, seed)[0]
    raise InvalidInput(f"unknown mode {mode!r}")


def _birthday_enumerate(d: SchmidtDistribution, n: int, block: int = 1 << 18) -> float:
    if n < 1:
        raise InvalidInput("n must be >= 1")
    s = d.s
    total = s**n
    if total > ENUM_LIMIT:
        raise TooLarge(f"s^n = {s}^{n} exceeds the enumeration limit {ENUM_LIMIT}")
    lam = np.asarray(d.lambdas)
    partial = []
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        digits = np.empty((n, idx.size), dtype=np.int64)
        for pos in range(n):
            idx, digits[pos] = np.divmod(idx, s)
        prob = np.prod(lam[digits], axis=0)
        ordered = np.sort(digits, axis=0)
        distinct = np.all(ordered[1:] != ordered[:-1], axis=0)
        partial.extend(prob[distinct].tolist())
    return math.fsum(partial)


def birthday_montecarlo(
    d: SchmidtDistribution, n: int, trials: int, seed: int, block: int = 1 << 16
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of the all-distinct probability."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    lam = np.asarray(d.lambdas)
    hits = 0
    done = 0
    while done < trials:
        size = min(block, trials - done)
        draws = np.sort(rng.choice(lam.size, size=(size, n), p=lam), axis=1)
        hits += int(np.count_nonzero(np.all(draws[:, 1:] != draws[:, :-1], axis=1)))
        done += size
    p = hits / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


# ---------------------------------------------------------------------------
# ratios and closed forms


def chi_ratio(d: SchmidtDistribution, n: int, method: Literal["dp", "newton"] = "dp") -> float:
    """chi_{n+1}/chi_n, evaluated from log values."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if method == "dp":
        seq = chi_dp(d, n + 1)
    elif method == "newton":
        seq = chi_newton(power_sums(d, n + 1), n + 1)
    else:
        raise InvalidInput(f"unknown method {method!r}")
    return seq.ratio(n)


def commutator_expectation(d: SchmidtDistribution, n: int) -> float:
    """Expectation of the coboson commutator in the N-coboson state: 2 r - 1."""
    return 2.0 * chi_ratio(d, n) - 1.0


def chi_peaked_closed(p: float, n: int) -> float:
    """(1 - sqrt P)^(n-1) (1 + (n-1) sqrt P), the infinite-S peaked shape."""
    if not 0.0 < p <= 1.0:
        raise InvalidInput("P must lie in (0, 1]")
    if n < 0:
        raise InvalidInput("n must be >= 0")
    if n == 0:
        return 1.0
    r = math.sqrt(p)
    return (1.0 - r) ** (n - 1) * (1.0 + (n - 1) * r)


def log_chi_uniform_closed(size: int, n: int) -> float:
    if size < 1 or n < 0:
        raise InvalidInput("need L >= 1 and n >= 0")
    if n > size:
        return -math.inf
    return math.fsum(math.log1p(-k / size) for k in range(1, n))


def chi_uniform_closed(size: int, n: int) -> float:
    """L!/((L-n)! L^n) as a product of (1 - k/L), zero for n > L."""
    return math.exp(log_chi_uniform_closed(size, n))


def extremal_ratio_terms(p, size, n, radical):
    """Numerator and denominator of the ratio for one distinguished and S-1 equal coefficients.

    ``radical`` is +sqrt((S-1)(SP-1)) for the peaked shape and the negative
    root for the uniform one; sharing the expression makes the two agree
    bit-for-bit where the radical vanishes. Works elementwise on arrays.
    """
    num = (size - n) * (1.0 - p) * (size - 1 + n * radical)
    den = (size - 1) * (size + size * (n - 1) * p - n * (1.0 - radical))
    return num, den


def extremal_deviation_terms(p, size, n, radical):
    """Numerator and denominator of 1 - ratio, free of the cancellation in 1 - num/den.

    Uses den - num = N (P (S-1)^2 + r ((S-N) P + N - 1)).
    """
    dev = n * (p * (size - 1) ** 2 + radical * ((size - n) * p + n - 1))
    den = (size - 1) * (size + size * (n - 1) * p - n * (1.0 - radical))
    return dev, den


def _extremal_ratio(p: float, size: int, n: int, radical: float) -> float:
    num, den = extremal_ratio_terms(p, size, n, radical)
    if den == 0.0:
        raise VanishingDenominator(f"ratio denominator vanishes at P={p}, S={size}, n={n}")
    return num / den


def ratio_peaked(p: float, size: int, n: int) -> float:
    """Exact chi_{n+1}/chi_n of the peaked distribution with ``size`` coefficients."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if not 0.0 < p <= 1.0:
        raise Infeasible(f"P = {p!r} outside (0, 1]")
    if size < min_schmidt_number(p, BOUND_CEIL_TOL):
        raise Infeasible(f"S*P = {size * p!r} < 1")
    if n >= size:
        raise Infeasible(f"n = {n} >= S = {size}")
    return _extremal_ratio(p, size, n, math.sqrt(extremal_radicand(p, size)))


def ratio_uniform(p: float, n: int) -> float:
    """Exact chi_{n+1}/chi_n of the uniform distribution on ceil(1/P) coefficients."""
    if n < 1:
        raise InvalidInput("n must be >= 1")
    if not 0.0 < p <= 1.0:
        raise Infeasible(f"P = {p!r} outside (0, 1]")
    size = min_schmidt_number(p, BOUND_CEIL_TOL)
    if n >= size:
        raise Infeasible(f"n = {n} >= L = {size}")
    return _extremal_ratio(p, size, n, -math.sqrt(extremal_radicand(p, size)))


def chi(
    d: SchmidtDistribution,
    n_max: int,
    method: Method = "dp",
    workers: int = 1,
    exact: bool = False,
) -> NormalizationSequence:
    """Dispatch to one of the evaluation methods by name.

    ``exact`` only affects ``newton``, switching it to rational arithmetic.
    """
    if method == "dp":
        return chi_dp(d, n_max)
    if method == "newton":
        ps = power_sums(d, max(n_max, 1), exact=exact)
        return chi_newton(ps, n_max, arithmetic="exact" if exact else "float")
    if method == "brute":
        return chi_bruteforce(d, n_max)
    if method == "dc":
        return chi_dc(d, n_max, workers=workers)
    raise InvalidInput(f"unknown method {method!r}")
