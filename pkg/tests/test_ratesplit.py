import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from polarbounds.channels import BmsChannel, bec_tree
from polarbounds.exponents import INF, bsc_exponent, typical_exponent
from polarbounds.ratesplit import (
    FeasibleInterval,
    asymptotic_exponent,
    asymptotic_exponent_zero_plus,
    capacity_only_bound,
    exact_exponent,
    exponent_curve,
    split_objective,
)

from conftest import truncate


def enumerate_exact(eps, lam, n1, rate):
    """Flat exhaustive search over every integer allocation."""
    leaves = [BmsChannel.bec(1 - c) for c in bec_tree(eps, lam).leaf_capacities]
    total = int(Fraction(rate) * n1 * 2**lam)
    best = -INF
    for bits in itertools.product(range(n1 + 1), repeat=2**lam):
        if sum(bits) != total:
            continue
        terms = [math.exp(-n1 * typical_exponent(ch, b / n1, n1)) for ch, b in zip(leaves, bits) if b]
        s = math.fsum(terms)
        v = INF if s == 0 else -math.log(s) / (n1 * 2**lam)
        best = max(best, v)
    return best


def test_feasible_interval():
    a, b = FeasibleInterval.for_rate(0.3), FeasibleInterval.for_rate(0.8)
    assert (a.lo, a.hi) == pytest.approx((0.0, 0.6))
    assert (b.lo, b.hi) == pytest.approx((0.6, 1.0))
    assert 0.3 in a and 0.7 not in a
    assert list(FeasibleInterval.bit_range(10, 8)) == list(range(2, 9))


def test_exact_small_case():
    r = exact_exponent(bec_tree(0.5, 1), Fraction(1, 2), 4)
    assert r.value == pytest.approx(enumerate_exact(0.5, 1, 4, Fraction(1, 2)), abs=1e-12)
    assert sum(r.bits) == 4


def test_exact_flat_four_way():
    r = exact_exponent(bec_tree(0.4, 2), Fraction(1, 2), 8)
    assert r.value == pytest.approx(enumerate_exact(0.4, 2, 8, Fraction(1, 2)), abs=1e-12)
    assert split_objective(bec_tree(0.4, 2), r.bits, 8) == pytest.approx(r.value, abs=1e-12)


def test_exact_lambda_zero():
    t = bec_tree(0.3, 0)
    r = exact_exponent(t, Fraction(1, 2), 8)
    assert r.value == pytest.approx(typical_exponent(BmsChannel.bec(0.3), 0.5, 8), abs=1e-14)


def test_exact_rejects_fractional_budget():
    with pytest.raises(ValueError):
        exact_exponent(bec_tree(0.5, 1), 0.3, 4)


def test_asymptotic_grid_scan():
    t = bec_tree(0.5, 1)
    m, p = BmsChannel.bec(0.75), BmsChannel.bec(0.25)
    for rate in (0.5, 0.4, 0.25):
        r1 = np.arange(max(0, 2 * rate - 1), min(1, 2 * rate) + 1e-12, 1e-4)
        scan = max(0.5 * min(typical_exponent(m, a), typical_exponent(p, 2 * rate - a)) for a in r1)
        got = asymptotic_exponent(t, rate).value
        assert got >= scan - 1e-12
        assert got == pytest.approx(scan, abs=1e-4)


def test_asymptotic_zero_at_capacity():
    res = asymptotic_exponent(bec_tree(0.5, 1), 0.5)
    assert res.value == 0.0 and res.branch == "zero"


def test_asymptotic_rates_average():
    res = asymptotic_exponent(bec_tree(0.4, 2), 0.45)
    assert np.mean(res.rates) == pytest.approx(0.45, abs=1e-9)
    assert all(0 <= r <= 1 for r in res.rates)


def test_asymptotic_lambda_zero_is_typical(deep_trees):
    t = truncate(deep_trees["bsc"], 0)
    for r in (0.1, 0.3, 0.45):
        assert asymptotic_exponent(t, r).value == pytest.approx(typical_exponent(t.root.density, r), abs=1e-12)


def test_exact_below_asymptotic():
    t = bec_tree(0.4, 1)
    a = asymptotic_exponent(t, 0.5).value
    for n in (16, 32, 64):
        assert exact_exponent(t, Fraction(1, 2), n).value <= a + 1e-12


def test_zero_plus_limit():
    t = bec_tree(0.4, 1)
    zp = asymptotic_exponent_zero_plus(t)
    assert math.isfinite(zp)
    vals = [asymptotic_exponent(t, 10.0**-k).value for k in (4, 8, 12)]
    assert vals[0] < vals[1] < vals[2] <= zp
    assert zp - vals[2] < 1e-5


def test_capacity_only_lambda_zero_is_bsc():
    for r in (0.05, 0.2, 0.4):
        assert capacity_only_bound(0.5, r, 0) == bsc_exponent(0.5, r)


def test_capacity_only_dominated_bec_half():
    v = capacity_only_bound(0.5, 0.5, 1)
    assert v <= asymptotic_exponent(bec_tree(0.5, 1), 0.5).value + 1e-12
    for r in (0.2, 0.35):
        assert capacity_only_bound(0.5, r, 1) <= asymptotic_exponent(bec_tree(0.5, 1), r).value


def test_capacity_only_validation():
    with pytest.raises(ValueError):
        capacity_only_bound(1.5, 0.2, 1)
    with pytest.raises(ValueError):
        capacity_only_bound(0.5, 0.2, -1)
    with pytest.raises(ValueError):
        asymptotic_exponent(bec_tree(0.5, 1), 1.2)


def test_exponent_curve_naive_equals_polar_at_lambda_zero():
    chans = [BmsChannel.bec(e) for e in (0.2, 0.4)]
    a = exponent_curve("asymptotic", chans, 0.3, 0)
    b = exponent_curve("naive", chans, 0.3, 0)
    assert a.values == pytest.approx(b.values, abs=1e-14)
    text = a.to_csv("eps")
    assert text.startswith("#") and "eps" in text


def test_exponent_curve_unknown_kind():
    with pytest.raises(ValueError):
        exponent_curve("bogus", [BmsChannel.bec(0.3)], 0.3, 1)
