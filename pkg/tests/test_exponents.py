import math

import numpy as np
import pytest

from polarbounds.channels import BmsChannel, build_tree, density_from_channel, h2_inv
from polarbounds.exponents import (
    INF,
    bsc_exponent,
    expurgated_ex,
    expurgated_exponent,
    expurgated_solution,
    extremal_exponents,
    gallager_e0,
    gallager_e0_derivative,
    random_coding_exponent,
    typical_exponent,
)

LN2 = math.log(2)
BEC4 = BmsChannel.bec(0.4)
BSC11 = BmsChannel.bsc(0.11)


def bec_e0(eps, rho):
    return -math.log(eps + (1 - eps) * 2.0**-rho)


def bsc_e0(p, rho):
    s = 1 / (1 + rho)
    return rho * LN2 - (1 + rho) * math.log(p**s + (1 - p) ** s)


def grid_max(f, lo, hi, pitch=1e-6):
    x = np.arange(lo, hi + pitch / 2, pitch)
    return float(np.max(f(x)))


def test_e0_bec():
    assert gallager_e0(BEC4, 1.0) == pytest.approx(0.35667, abs=1e-5)
    for rho in (0.1, 0.5, 1.0, 3.0):
        assert gallager_e0(density_from_channel(BEC4), rho) == pytest.approx(bec_e0(0.4, rho), abs=1e-12)


def test_e0_bsc():
    # the direct two-atom sum gives 0.207160 at rho=1
    assert bsc_e0(0.11, 1.0) == pytest.approx(0.207160, abs=1e-6)
    for rho in (0.2, 1.0, 2.5):
        assert gallager_e0(density_from_channel(BSC11), rho) == pytest.approx(bsc_e0(0.11, rho), abs=1e-10)


def test_e0_zero_and_slope_at_zero():
    for ch in (BEC4, BSC11, BmsChannel.biawgn(0.9)):
        d = density_from_channel(ch)
        assert gallager_e0(d, 0.0) == pytest.approx(0.0, abs=1e-14)
        h = 1e-6
        fd = (gallager_e0(d, h) - gallager_e0(d, 0.0)) / h
        assert fd == pytest.approx(d.capacity * LN2, abs=1e-5)
        assert gallager_e0_derivative(d, 0.0) == pytest.approx(d.capacity * LN2, abs=1e-9)


def test_e0_concave():
    rng = np.random.default_rng(7)
    chans = [density_from_channel(c) for c in (BEC4, BSC11, BmsChannel.biawgn(1.1))]
    for _ in range(100):
        d = chans[rng.integers(3)]
        r1, r2 = rng.uniform(0, 4, 2)
        assert gallager_e0(d, (r1 + r2) / 2) >= (gallager_e0(d, r1) + gallager_e0(d, r2)) / 2 - 1e-9


def test_random_coding_bec_grid():
    oracle = grid_max(lambda r: -np.log(0.4 + 0.6 * 2.0**-r) - r * 0.3 * LN2, 0.0, 1.0)
    assert random_coding_exponent(BEC4, 0.3) == pytest.approx(oracle, abs=1e-10)


def test_random_coding_limits():
    assert random_coding_exponent(BEC4, 0.0) == INF
    assert random_coding_exponent(BEC4, 0.6) == 0.0
    assert random_coding_exponent(BEC4, 0.8) == 0.0


def test_ex_values():
    assert expurgated_ex(BEC4, 2.0) == pytest.approx(2 * LN2 - 2 * math.log(1 + math.sqrt(0.4)), abs=1e-14)
    assert expurgated_ex(BEC4, 2.0) == pytest.approx(0.406124, abs=1e-6)
    assert expurgated_ex(1.0, 3.0) == 0.0
    z = 2 * math.sqrt(0.11 * 0.89)
    assert expurgated_ex(BSC11, 1.0) == pytest.approx(math.log(2 / (1 + z)), abs=1e-12)


def test_expurgated_bec_grid():
    f = lambda r: -r * np.log((1 + 0.4 ** (1 / r)) / 2) - r * 0.05 * LN2
    oracle = grid_max(f, 1.0, 64.0, pitch=1e-4)
    assert expurgated_exponent(BEC4, 0.05) == pytest.approx(oracle, abs=1e-8)


@pytest.mark.parametrize("rate", [1e-4, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9])
@pytest.mark.parametrize("z", [0.05, 0.4, 0.6258, 0.95])
def test_expurgated_closed_form_matches_search(z, rate):
    assert expurgated_exponent(z, rate) == pytest.approx(expurgated_solution(z, rate).value, abs=1e-9)


def test_expurgated_small_rate_trend():
    vals = [expurgated_exponent(BEC4, 10.0**-k) for k in range(1, 5)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    # increasing toward the finite R -> 0 limit -ln(Z)/2
    assert vals[-1] < -0.5 * math.log(0.4) == expurgated_exponent(BEC4, 0.0)
    assert expurgated_exponent(0.0, 0.5) == INF


def test_expurgated_rho_one_regime():
    z = 0.4
    r = 0.8
    assert expurgated_exponent(z, r) == pytest.approx(math.log(2 / (1 + z)) - r * LN2, abs=1e-14)


def _midpoint_convex(f, grid):
    v = [f(r) for r in grid]
    dec = all(a >= b - 1e-12 for a, b in zip(v, v[1:]))
    conv = all(v[i] <= (v[i - 1] + v[i + 1]) / 2 + 1e-9 for i in range(1, len(v) - 1))
    return dec and conv


@pytest.mark.parametrize("ch", [BEC4, BSC11, BmsChannel.biawgn(0.9)])
def test_exponents_decreasing_convex(ch):
    d = density_from_channel(ch)
    grid = np.linspace(0.02, 0.98, 49)
    assert _midpoint_convex(lambda r: random_coding_exponent(d, r), grid)
    assert _midpoint_convex(lambda r: expurgated_exponent(d, r), grid)


def test_typical_composition():
    r = 0.3
    assert typical_exponent(BEC4, r) == max(random_coding_exponent(BEC4, r), expurgated_exponent(BEC4, r))
    assert typical_exponent(BEC4, 0.0) == INF
    for r in np.linspace(0.05, 0.9, 18):
        assert typical_exponent(BEC4, r, 64) <= typical_exponent(BEC4, r) + 1e-15


def test_typical_finite_length_sandwich():
    grid = np.linspace(0.05, 0.55, 11)
    gaps = {n: max(typical_exponent(BSC11, r) - typical_exponent(BSC11, r, n) for r in grid) for n in (32, 64, 128, 256)}
    assert all(g >= 0 for g in gaps.values())
    c = max(g * n for n, g in gaps.items())
    assert all(g <= c / n + 1e-15 for n, g in gaps.items())
    assert c < 10


def test_quantized_matches_analytic():
    d = density_from_channel(BSC11)
    assert expurgated_ex(d, 1.7) == pytest.approx(expurgated_ex(2 * math.sqrt(0.11 * 0.89), 1.7), abs=1e-10)
    t = build_tree(BEC4, 0)
    assert gallager_e0(t.root.density, 0.7) == pytest.approx(bec_e0(0.4, 0.7), abs=1e-10)


def test_extremal_half():
    assert h2_inv(0.5) == pytest.approx(0.1100, abs=1e-4)
    for r in (0.1, 0.3, 0.45, 0.5, 0.7):
        lo, hi = extremal_exponents(0.5, r)
        assert lo <= hi + 1e-12
    lo, hi = extremal_exponents(0.5, 0.6)
    assert random_coding_exponent(BmsChannel.bec(0.5), 0.6) == 0.0 and lo <= hi


def test_extremal_grows_near_one():
    vals = [extremal_exponents(i, 0.3) for i in (0.6, 0.8, 0.95, 0.999)]
    for a, b in zip(vals, vals[1:]):
        assert b[0] > a[0] and b[1] > a[1]


@pytest.mark.parametrize("cap", [0.2, 0.5, 0.8])
def test_bsc_exponent_matches_density_path(cap):
    ch = BmsChannel.with_capacity("BSC", cap)
    for r in np.linspace(0.01, 0.99, 15):
        assert bsc_exponent(cap, r) == pytest.approx(typical_exponent(ch, r), abs=1e-9)
        assert bsc_exponent(cap, r, 64) == pytest.approx(typical_exponent(ch, r, 64), abs=1e-9)


def test_negative_inputs():
    with pytest.raises(ValueError):
        random_coding_exponent(BEC4, -0.1)
    with pytest.raises(ValueError):
        expurgated_ex(BEC4, 0.5)
    with pytest.raises(ValueError):
        gallager_e0(BEC4, -1)
