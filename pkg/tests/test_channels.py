import math

import numpy as np
import pytest
from scipy import integrate, optimize

from polarbounds.channels import (
    BmsChannel,
    LlrDensity,
    SubchannelTree,
    bec_tree,
    bhattacharyya,
    biawgn_capacity,
    build_tree,
    capacity,
    density_from_channel,
    dispersion,
    epsilon_bounds,
    h2,
    h2_inv,
    polar_minus,
    polar_plus,
    sigma_for_capacity,
)


def h2_bisect(y):
    return optimize.bisect(lambda p: -p * math.log2(p) - (1 - p) * math.log2(1 - p) - y, 1e-300, 0.5, xtol=1e-300, rtol=1e-15)


def test_h2_values():
    assert h2(0.0) == 0.0 and h2(1.0) == 0.0
    assert h2(0.5) == pytest.approx(1.0, abs=1e-15)
    assert h2(0.11) == pytest.approx(-(0.11 * math.log2(0.11) + 0.89 * math.log2(0.89)), rel=1e-14)


@pytest.mark.parametrize("y", [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999])
def test_h2_inv_against_bisection(y):
    p = h2_inv(y)
    assert p == pytest.approx(h2_bisect(y), rel=1e-12)
    assert h2(p) == pytest.approx(y, rel=1e-12)


def test_h2_inv_endpoints():
    assert h2_inv(0.0) == 0.0
    assert h2_inv(1.0) == 0.5


def test_biawgn_moments():
    d = density_from_channel(BmsChannel.biawgn(1.0))
    mean = float(np.dot(d.mass, d.llr))
    var = float(np.dot(d.mass, d.llr**2)) - mean**2
    assert mean == pytest.approx(2.0, rel=0.01)
    assert var == pytest.approx(4.0, rel=0.01)
    assert d.mass_at_plus_infinity == 0.0


def test_capacity_values():
    assert capacity(density_from_channel(BmsChannel.bec(0.4))) == pytest.approx(0.6, abs=1e-12)
    oracle_bsc = 1 + 0.11 * math.log2(0.11) + 0.89 * math.log2(0.89)
    assert oracle_bsc == pytest.approx(0.500084, abs=1e-6)
    assert capacity(density_from_channel(BmsChannel.bsc(0.11))) == pytest.approx(oracle_bsc, abs=1e-12)
    # quadrature oracle for the BIAWGN
    s = 0.8
    f = lambda y: math.exp(-(y - 1) ** 2 / (2 * s * s)) / math.sqrt(2 * math.pi) / s * (1 - math.log2(1 + math.exp(-2 * y / s**2)))
    oracle = integrate.quad(f, -20, 20, limit=200)[0]
    assert biawgn_capacity(s) == pytest.approx(oracle, abs=1e-9)
    assert capacity(density_from_channel(BmsChannel.biawgn(s))) == pytest.approx(oracle, abs=1e-4)


def test_dispersion_values():
    assert dispersion(density_from_channel(BmsChannel.bec(0.3))) == pytest.approx(0.21, abs=1e-12)
    p = 0.11
    oracle = p * (1 - p) * math.log2((1 - p) / p) ** 2
    assert oracle == pytest.approx(0.8908, abs=1e-4)
    assert dispersion(density_from_channel(BmsChannel.bsc(p))) == pytest.approx(oracle, rel=1e-9)


def test_bhattacharyya_values():
    assert bhattacharyya(density_from_channel(BmsChannel.bec(0.37))) == pytest.approx(0.37, abs=1e-12)
    z = bhattacharyya(density_from_channel(BmsChannel.bsc(0.11)))
    assert z == pytest.approx(2 * math.sqrt(0.11 * 0.89), rel=1e-9)
    assert z == pytest.approx(0.6258, abs=1e-4)
    s = 0.9
    assert bhattacharyya(density_from_channel(BmsChannel.biawgn(s))) == pytest.approx(math.exp(-1 / (2 * s * s)), abs=1e-5)


def test_bec_transforms_stay_bec():
    d = density_from_channel(BmsChannel.bec(0.5), bins=201, grid_half_width=10)
    m, p = polar_minus(d), polar_plus(d)
    assert m.is_bec() and p.is_bec()
    assert 1 - m.capacity == pytest.approx(0.75, abs=1e-14)
    assert 1 - p.capacity == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("ch", [BmsChannel.biawgn(1.0), BmsChannel.bsc(0.11), BmsChannel.bec(0.3)])
def test_capacity_conservation(ch):
    d = density_from_channel(ch)
    m, p = polar_minus(d), polar_plus(d)
    assert m.capacity + p.capacity == pytest.approx(2 * d.capacity, abs=1e-4)
    assert m.capacity <= d.capacity <= p.capacity
    assert m.total_mass == pytest.approx(1.0, abs=1e-12)
    assert p.total_mass == pytest.approx(1.0, abs=1e-12)


def test_bsc_minus_is_bsc():
    # BSC(p)- is BSC(2p(1-p)); the aligned grid keeps it on a grid point
    d = density_from_channel(BmsChannel.bsc(0.11))
    q = 2 * 0.11 * 0.89
    assert polar_minus(d).capacity == pytest.approx(1 - h2(q), abs=1e-3)


def test_bec_tree_leaves():
    t = bec_tree(0.5, 2)
    eps = sorted(1 - t.leaf_capacities)
    assert eps == pytest.approx(sorted([0.9375, 0.5625, 0.4375, 0.0625]), abs=1e-15)
    assert t.leaf_paths() == ["--", "-+", "+-", "++"]


def test_bec_tree_conservation_and_agreement():
    t = bec_tree(0.4, 3)
    assert t.leaf_capacities.sum() == pytest.approx(8 * 0.6, abs=1e-12)
    g = build_tree(BmsChannel.bec(0.4), 3, bins=101, grid_half_width=5)
    assert g.leaf_capacities == pytest.approx(t.leaf_capacities, abs=1e-12)
    assert t.is_bec


def test_tree_structure_and_subtree():
    t = bec_tree(0.3, 3)
    assert len(t.nodes) == 15
    s = t.subtree("-")
    assert s.lam == 2 and s.root.capacity == t.nodes["-"].capacity
    a, b = t.children("")
    assert (a.path, b.path) == ("-", "+")


def test_epsilon_bounds_half():
    eps_l, eps_h = epsilon_bounds(0.5)
    p = h2_bisect(0.5)
    oracle = h2(p * (2 - 2 * p)) - 0.5
    assert eps_l == pytest.approx(oracle, abs=1e-12)
    assert eps_h == 0.25
    assert eps_l <= eps_h


def test_epsilon_bounds_attained():
    # gap of the BSC/BEC with capacity 0.5 equals the two ends
    lo, hi = epsilon_bounds(0.5)
    d = density_from_channel(BmsChannel.with_capacity("BSC", 0.5))
    assert polar_plus(d).capacity - d.capacity == pytest.approx(lo, abs=2e-3)
    t = bec_tree(0.5, 1)
    assert t.nodes["+"].capacity - 0.5 == pytest.approx(hi)


def test_sigma_for_capacity_roundtrip():
    s = sigma_for_capacity(0.5)
    assert biawgn_capacity(s) == pytest.approx(0.5, abs=1e-12)


def test_density_json_roundtrip():
    d = density_from_channel(BmsChannel.bsc(0.2), bins=31, grid_half_width=5)
    e = LlrDensity.from_json(d.to_json())
    assert np.array_equal(d.mass, e.mass) and e.meta == d.meta


def test_tree_save_load(tmp_path):
    t = build_tree(BmsChannel.bsc(0.2), 1, bins=51, grid_half_width=8)
    f = tmp_path / "t.json"
    t.save(f)
    u = SubchannelTree.load(f)
    assert u.leaf_capacities == pytest.approx(t.leaf_capacities, abs=0)


@pytest.mark.parametrize("kind,x", [("BEC", 1.2), ("BSC", 0.7), ("BIAWGN", -1.0), ("FOO", 0.1)])
def test_invalid_channels(kind, x):
    with pytest.raises(ValueError):
        BmsChannel(kind, x)


def test_invalid_density():
    with pytest.raises(ValueError):
        LlrDensity(1.0, 4, np.ones(4) / 4)
    with pytest.raises(ValueError):
        LlrDensity(1.0, 3, np.array([0.5, 0.2, 0.1]))
