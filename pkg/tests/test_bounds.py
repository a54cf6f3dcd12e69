import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from coboson.bounds import (
    DEVIATION_HEADER,
    asymptotic_upper,
    bound_l,
    bounds_chain,
    deviation_curves,
    lower_tight,
    lower_tight_array,
    lower_tight_deviation,
    series_expansion_ratio,
    upper_bound_expansion,
    upper_bound_u,
    upper_bound_u_array,
    upper_finite_s,
    upper_finite_s_array,
)
from coboson.chi import chi_ratio
from coboson.errors import InfeasiblePurity, OutsideConvergenceRadius, PurityMismatch
from coboson.schmidt import (
    make_distribution,
    peaked_distribution,
    PowerSums,
    power_sums,
    purity,
    uniform_distribution,
)

from conftest import distributions, random_distribution

purities = st.floats(1e-6, 1.0)


def test_upper_bound_examples():
    assert upper_bound_u(0.3, 1) == pytest.approx(0.7, abs=1e-15)
    assert upper_bound_u(0.25, 2) == pytest.approx(2 / 3, abs=1e-15)
    assert upper_bound_u(0.25, 10**9) == pytest.approx(0.5, abs=1e-8)
    assert asymptotic_upper(0.25) == 0.5 and asymptotic_upper(1.0) == 0.0
    assert abs(upper_bound_u(0.01, 10**6) - asymptotic_upper(0.01)) <= 1e-5


def test_bad_purity():
    for p in (0.0, -0.1, 1.5, math.nan):
        with pytest.raises(InfeasiblePurity):
            upper_bound_u(p, 2)


@settings(max_examples=200)
@given(purities, purities, st.integers(1, 200))
def test_upper_bound_monotone(p, q, n):
    lo, hi = min(p, q), max(p, q)
    assert upper_bound_u(hi, n) <= upper_bound_u(lo, n) + 1e-15
    assert upper_bound_u(p, n + 1) <= upper_bound_u(p, n) + 1e-15
    assert 0.0 <= upper_bound_u(p, n) <= 1.0 - p + 1e-15


@settings(max_examples=200)
@given(purities, st.integers(1, 60))
def test_bound_chain_without_distribution(p, n):
    assert bounds_chain(p, n).chain_ok


@settings(max_examples=300, deadline=None)
@given(distributions(min_s=2, max_s=12), st.integers(1, 11))
def test_bound_chain_holds_for_random_states(d, n):
    assume(n < d.nnz)
    rep = bounds_chain(purity(d), n, d=d)
    assert rep.chain_ok, rep.slacks


def test_chain_report_fields():
    rep = bounds_chain(1 / 3, 2, d=uniform_distribution(1 / 3))
    assert rep.s == 3 and rep.l == 3
    assert rep.ratio == pytest.approx(1 / 3, abs=1e-12)
    assert rep.lower_tight == pytest.approx(1 / 3, abs=1e-12)
    assert rep.lower_loose == pytest.approx(1 / 3, abs=1e-12)
    assert list(rep.slacks) == [
        "lower_loose<=lower_tight",
        "lower_tight<=ratio",
        "ratio<=upper_finite_s",
        "upper_finite_s<=upper_tight",
        "upper_tight<=upper_loose",
    ]
    assert rep.to_dict()["chain_ok"] is True


def test_chain_rejects_wrong_purity():
    with pytest.raises(PurityMismatch):
        bounds_chain(0.5, 2, d=uniform_distribution(1 / 3))


def test_loose_lower_clamped():
    rep = bounds_chain(0.9, 3)
    assert rep.lower_loose == 0.0 and rep.lower_loose_raw == pytest.approx(-1.7)


def test_near_fractional_purity_keeps_chain():
    rep = bounds_chain(0.3333333333, 2)
    assert rep.chain_ok
    assert rep.lower_tight == pytest.approx(1 / 3, abs=1e-9)
    assert rep.lower_loose == pytest.approx(1 / 3, abs=1e-9)


def test_saturation():
    for size in range(2, 40):
        p = 1.0 / size
        for n in range(1, size):
            assert abs(chi_ratio(uniform_distribution(p), n) - (1 - n * p)) <= 1e-12
    d = peaked_distribution(0.2, 16)
    assert abs(chi_ratio(d, 2) - upper_finite_s(0.2, 2, 16)) <= 1e-12


def test_bounds_merge_at_fractional_purity():
    assert upper_finite_s(1 / 50, 2, 50) == lower_tight(1 / 50, 2)
    for size in range(2, 80):
        for n in (1, 2, 5):
            assert upper_finite_s(1 / size, n, size) == lower_tight(1 / size, n)


def test_finite_s_close_to_total_upper():
    assert abs(upper_finite_s(0.1, 2, 50) / upper_bound_u(0.1, 2) - 1) <= 0.05


def test_finite_s_infeasible_and_pauli():
    with pytest.raises(InfeasiblePurity):
        upper_finite_s(0.1, 2, 5)
    assert upper_finite_s(0.5, 3, 3) == 0.0
    assert lower_tight(0.5, 2) == 0.0


@pytest.mark.parametrize("n", [2, 5, 10])
def test_lower_bound_factor(n):
    p = (1.0 / n) * (1 - 1e-6)
    assert abs(lower_tight(p, n) / (1 - n * p) / ((1 + n) / 2) - 1) <= 0.01


def test_lower_deviation_is_cancellation_free():
    for p in (1e-9, 1e-6, 0.01, 0.2, 0.5):
        for n in (1, 2, 10):
            dev = lower_tight_deviation(p, n)
            assert dev == pytest.approx(1 - lower_tight(p, n), rel=1e-6, abs=1e-15)
    # below 1e-8 the naive difference loses most digits; the series value is N P
    assert lower_tight_deviation(1e-9, 10) == pytest.approx(1e-8, rel=1e-6)


@settings(max_examples=200)
@given(st.floats(1e-4, 1.0), st.integers(1, 30), st.integers(1, 400))
def test_array_versions_match_scalars(p, n, size):
    assert lower_tight_array(np.array([p]), n)[0] == lower_tight(p, n)
    assert upper_bound_u_array(np.array([p]), n)[0] == upper_bound_u(p, n)
    arr = upper_finite_s_array(np.array([p]), n, size)[0]
    if size < bound_l(p):
        assert math.isnan(arr)
    else:
        assert arr == upper_finite_s(p, n, size)


def test_series_expansion_examples():
    for size in (3, 10, 100):
        ps = power_sums(uniform_distribution(1 / size), 4)
        for n in (1, 2):
            assert series_expansion_ratio(ps, n).value == pytest.approx(1 - n / size, abs=1e-12)
    p, n = 1e-4, 3
    ps = PowerSums(4, (1.0, p, p**1.5, p**2))
    expected = 1 - n * p + n * n * p * (math.sqrt(p) - p)
    assert series_expansion_ratio(ps, n).value == pytest.approx(expected, rel=1e-6)


def test_series_expansion_accuracy_small_np():
    rng = np.random.default_rng(7)
    d = random_distribution(rng, 100)
    n = 2
    # shrink N P to 1e-4 by spreading mass onto a large flat tail
    tail = 50_000
    lam = np.r_[d.lambdas * 1e-3, np.full(tail, (1 - 1e-3) / tail)]
    d = make_distribution(lam, renormalize=True)
    ps = power_sums(d, 4)
    assert n * ps.purity < 2e-4
    exp = series_expansion_ratio(ps, n)
    assert abs(exp.value - chi_ratio(d, n)) <= 10 * exp.error_scale


def test_upper_expansion():
    assert upper_bound_expansion(0.4, 1) == pytest.approx(0.6, abs=1e-15)
    assert upper_bound_expansion(0.4, 1, order=5) == pytest.approx(0.6, abs=1e-15)
    with pytest.warns(OutsideConvergenceRadius):
        upper_bound_expansion(0.25, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        upper_bound_expansion(1e-6, 100)
    # order-2 truncation error is about N (N-1)^2 P^2 at small P
    err = abs(upper_bound_u(1e-6, 100) - upper_bound_expansion(1e-6, 100))
    assert err == pytest.approx(100 * 99**2 * 1e-12, rel=0.2)
    assert abs(upper_bound_u(1e-6, 100) - upper_bound_expansion(1e-6, 100, order=8)) <= 1e-10


def test_deviation_curves():
    rows = deviation_curves([1, 10], [1e-6, 1e-8])
    assert len(DEVIATION_HEADER) == len(rows[0])
    n1 = [r for r in rows if r[0] == 1]
    for _, p, a, b, c, d in n1:
        assert a == pytest.approx(p) and b == pytest.approx(p) and c == pytest.approx(p)
        assert d == p
    _, p, a, b, c, d = rows[2]
    assert c == pytest.approx(9.91e-6, rel=1e-3)
    assert a * (1 + 1e-12) >= b >= c >= d
    with pytest.raises(InfeasiblePurity):
        deviation_curves([2], [0.0])


def test_band_narrows_relative_to_np():
    n = 1000
    widths = []
    for p in (1e-6, 1e-8):
        _, _, a, b, c, _ = deviation_curves([n], [p])[0]
        widths.append((b - c) / a)
    assert widths[1] < widths[0]
