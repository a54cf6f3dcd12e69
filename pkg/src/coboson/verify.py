"""Self-check suite: the library's invariants at small scale.

Run from the command line with ``coboson verify``; every check is seeded and
finishes well within a minute in total.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import bounds, chi, schmidt, transforms


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _random_dist(rng: np.random.Generator, s: int) -> schmidt.SchmidtDistribution:
    # Dirichlet with a random concentration covers both near-uniform and
    # strongly peaked spectra.
    alpha = rng.choice([0.2, 1.0, 5.0])
    lam = rng.dirichlet(np.full(s, alpha))
    lam = np.maximum(lam, 1e-12)
    return schmidt.make_distribution(lam, renormalize=True)


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def check_schmidt(rng) -> tuple[bool, str]:
    worst = []
    for _ in range(300):
        s = int(rng.integers(1, 30))
        d = _random_dist(rng, s)
        lam = d.lambdas
        if np.any(np.diff(lam) > 0) or abs(math.fsum(lam) - 1) > 1e-12:
            return False, "canonical form violated"
        ps = schmidt.power_sums(d, 8)
        if ps.holder_violations():
            return False, f"power-sum sandwich fails at k={ps.holder_violations()}"
        if schmidt.renyi_entropy(d, 2) < 0:
            return False, "negative Renyi entropy"
        p = ps.purity
        if not 1.0 / s - 1e-12 <= p <= 1.0 + 1e-12:
            return False, "purity outside [1/s, 1]"
        if s >= schmidt.min_schmidt_number(p) and s > 1:
            e = schmidt.peaked_distribution(p, s)
            worst.append(abs(schmidt.purity(e) - p))
    for size in range(2, 40):
        u = schmidt.uniform_distribution(1.0 / size)
        if u.s != size:
            return False, f"uniform support {u.s} != {size}"
    return max(worst) < 1e-12, f"max extremal purity error {max(worst):.2e}"


def check_chi_agreement(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(200):
        s = int(rng.integers(1, 9))
        d = _random_dist(rng, s)
        dp = chi.chi_dp(d, s)
        br = chi.chi_bruteforce(d, s)
        nw = chi.chi_newton(schmidt.power_sums(d, s, exact=True), s, arithmetic="exact")
        for k in range(s + 1):
            worst = max(worst, _rel(dp.chi[k], br.chi[k]), _rel(nw.chi[k], br.chi[k]))
    return worst <= 1e-10, f"max relative disagreement {worst:.2e}"


def check_birthday(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        s = int(rng.integers(1, 7))
        n = int(rng.integers(1, 5))
        d = _random_dist(rng, s)
        a = chi.birthday_probability(d, n)
        b = chi.chi_dp(d, n).chi[n]
        worst = max(worst, abs(a - b))
    return worst <= 1e-12, f"max |enumerate - dp| {worst:.2e}"


def check_chi_structure(rng) -> tuple[bool, str]:
    for _ in range(200):
        s = int(rng.integers(2, 40))
        d = _random_dist(rng, s)
        seq = chi.chi_dp(d, s + 2)
        if seq.chi[s + 1] != 0.0 or seq.chi[s + 2] != 0.0:
            return False, "chi_N nonzero for N > s"
        if abs(seq.chi[2] - (1 - schmidt.purity(d))) > 1e-14:
            return False, "chi_2 != 1 - P"
        if np.any(seq.chi < 0) or np.any(seq.chi > 1):
            return False, "chi outside [0, 1]"
        r = np.exp(np.diff(seq.log_chi[: s + 1]))
        if np.any(np.diff(r) > 1e-12):
            return False, "ratio sequence increases"
    return True, "chi_2 identity, Pauli zeros, ratio decay"


def check_closed_forms(rng) -> tuple[bool, str]:
    worst = 0.0
    for size in (2, 3, 7, 50, 365, 400):
        d = schmidt.uniform_distribution(1.0 / size)
        seq = chi.chi_dp(d, size + 1)
        for n in range(size + 2):
            c = chi.chi_uniform_closed(size, n)
            worst = max(worst, abs(c - seq.chi[n]))
            if c > chi.chi_peaked_closed(1.0 / size, n) + 1e-15:
                return False, f"uniform closed form exceeds peaked at L={size}, n={n}"
    return worst <= 1e-12, f"max |closed - dp| {worst:.2e}"


def check_bound_chain(rng) -> tuple[bool, str]:
    bad = 0
    for s in (3, 4, 5):
        for n in (2, 3):
            if n >= s:
                continue
            for _ in range(300):
                d = _random_dist(rng, s)
                if d.nnz < s:
                    continue
                rep = bounds.bounds_chain(schmidt.purity(d), n, d=d)
                bad += not rep.chain_ok
    return bad == 0, f"{bad} chain violations"


def check_saturation(rng) -> tuple[bool, str]:
    worst = 0.0
    for size in range(3, 30):
        for n in range(1, size):
            p = 1.0 / size
            r = chi.chi_ratio(schmidt.uniform_distribution(p), n)
            worst = max(worst, abs(r - (1 - n * p)))
            q = float(rng.uniform(p, 1.0))
            r = chi.chi_ratio(schmidt.peaked_distribution(q, size), n)
            worst = max(worst, abs(r - chi.ratio_peaked(q, size, n)))
            if bounds.upper_finite_s(p, n, size) != bounds.lower_tight(p, n):
                return False, f"bounds do not merge at P=1/{size}, n={n}"
    return worst <= 1e-12, f"max saturation gap {worst:.2e}"


def check_bound_limits(rng) -> tuple[bool, str]:
    for n in (2, 5, 10):
        p = (1.0 / n) * (1 - 1e-6)
        q = bounds.lower_tight(p, n) / (1 - n * p)
        if abs(q / ((1 + n) / 2) - 1) > 0.01:
            return False, f"lower-bound factor {q:.4g} at N={n}"
    grid = np.linspace(0.01, 1.0, 60)
    for n in (1, 2, 5, 40):
        u = [bounds.upper_bound_u(p, n) for p in grid]
        if np.any(np.diff(u) > 0):
            return False, "U_N not decreasing in P"
    for p in grid:
        u = [bounds.upper_bound_u(p, n) for n in range(1, 50)]
        if np.any(np.diff(u) > 1e-15):
            return False, "U_N not decreasing in N"
    gap = abs(bounds.upper_bound_u(0.01, 10**6) - bounds.asymptotic_upper(0.01))
    return gap <= 1e-5, f"large-N gap {gap:.2e}"


def check_transforms(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(300):
        s = int(rng.integers(3, 9))
        d = _random_dist(rng, s)
        j = sorted(rng.choice(np.arange(1, s + 1), 3, replace=False).tolist())
        t = transforms.select_triple(d, *j)
        m_before = schmidt.power_sums(d, 3)
        up = transforms.gamma_uniform(d, t)
        pk = transforms.gamma_peaked(d, t)
        for out in (up, pk):
            ps = schmidt.power_sums(out, 3)
            worst = max(worst, abs(math.fsum(out.lambdas) - 1), abs(ps[2] - m_before[2]))
        if schmidt.power_sums(pk, 3)[3] < m_before[3] - 1e-15:
            return False, "peaking lowered M(3)"
        if schmidt.power_sums(up, 3)[3] > m_before[3] + 1e-15:
            return False, "uniforming raised M(3)"
        if not transforms.triple_product_bounds(d, t).holds(1e-15):
            return False, "triple product outside its bounds"
        for n in (2, 3):
            if n >= s:
                continue
            a, b, c = (chi.chi_dp(x, n).chi[n] for x in (up, d, pk))
            if not (a <= b + 1e-12 and b <= c + 1e-12):
                return False, f"chi ordering fails at n={n}"
            if not transforms.ratio_monotonicity_check(d, t, n).ok:
                return False, f"ratio monotonicity fails at n={n}"
    return worst <= 1e-13, f"max M(1)/M(2) drift {worst:.2e}"


CHECKS: dict[str, Callable] = {
    "schmidt.canonical_and_power_sums": check_schmidt,
    "chi.three_way_agreement": check_chi_agreement,
    "chi.birthday_enumeration": check_birthday,
    "chi.structure": check_chi_structure,
    "chi.closed_forms": check_closed_forms,
    "bounds.chain": check_bound_chain,
    "bounds.saturation_and_merging": check_saturation,
    "bounds.limits_and_monotonicity": check_bound_limits,
    "transforms.invariants": check_transforms,
}


def run_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, i])
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash is a failed check, not a crash of the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
