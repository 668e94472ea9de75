"""Optimal outer-code rate splits over the polarized sub-channels.

Three recursions for the exponent of the concatenated scheme, all in nats:

* :func:`exact_exponent`: finite outer length ``n1`` and integer bit counts.
* :func:`asymptotic_exponent`: the ``n1 -> inf`` limit with real rates.
* :func:`capacity_only_bound`: a lower bound that only needs ``I(W)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .channels import BmsChannel, SubchannelTree, build_tree, epsilon_bounds, h2_inv
from .exponents import INF, bsc_exponent, typical_exponent, typical_exponent_zero_plus

R1_TOL = 1e-10
EPS_GRID = 64


@dataclass(frozen=True)
class FeasibleInterval:
    """Range of first-half rates ``R1`` compatible with total rate ``R``."""

    lo: float
    hi: float

    @classmethod
    def for_rate(cls, rate: float) -> "FeasibleInterval":
        return cls(max(0.0, 2.0 * rate - 1.0), min(1.0, 2.0 * rate))

    @staticmethod
    def bit_range(total_bits: int, half_size: int) -> range:
        """Integer version: bit counts ``k1`` of the first half."""
        return range(max(0, total_bits - half_size), min(half_size, total_bits) + 1)

    def __contains__(self, r: float) -> bool:
        return self.lo <= r <= self.hi


@dataclass(frozen=True)
class SplitResult:
    value: float
    rates: tuple
    lam: int
    n1: int | None
    total_rate: float
    bits: tuple | None = None
    split_rate: float | None = None
    branch: str = ""

    @property
    def lambda_(self) -> int:
        return self.lam


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate <= 1.0 or math.isnan(rate):
        raise ValueError(f"rate {rate} outside [0, 1]")


# ---------------------------------------------------------------------------
# finite n1
# ---------------------------------------------------------------------------

def _neg_logaddexp(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # -ln(e^-a + e^-b) with inf meaning "no error"
    with np.errstate(invalid="ignore"):
        return -np.logaddexp(-a, -b)


def leaf_table(node, n1: int) -> np.ndarray:
    """``n1 * E(W_i, k/n1, n1)`` for ``k = 0..n1``."""
    return np.array([INF] + [n1 * typical_exponent(node, k / n1, n1) for k in range(1, n1 + 1)])


def exact_exponent(tree: SubchannelTree, rate, n1: int) -> SplitResult:
    """Best exponent over integer allocations with ``rate * n1 * 2**lam`` bits.

    Each level scans every split of its bit budget, so the result is the
    global optimum of ``-ln(sum_i exp(-n1 E(W_i, R_i, n1))) / (n1 2**lam)``.
    Ties go to the smallest first-half bit count.
    """
    lam = tree.lam
    n1 = int(n1)
    if n1 < 1:
        raise ValueError("n1 must be positive")
    _check_rate(float(rate))
    total = Fraction(rate).limit_denominator(1 << 40) * n1 * 2**lam
    if total.denominator != 1:
        raise ValueError("rate * n1 * 2**lam must be an integer")
    total = int(total)
    leaves = {p: leaf_table(tree.nodes[p], n1) for p in tree.leaf_paths()}
    tables, choice = _combine(tree, "", leaves, n1)
    bits = _trace(tree, "", total, choice, n1)
    value = float(tables[total]) / (n1 * 2**lam)
    rates = tuple(Fraction(b, n1) for b in bits)
    k1 = sum(bits[: len(bits) // 2]) if lam else None
    return SplitResult(value, rates, lam, n1, float(rate), tuple(bits),
                       None if k1 is None else k1 / (n1 * 2 ** (lam - 1)))


def _combine(tree, path, leaves, n1):
    """Bottom-up tables ``T[path][k]`` = best ``-ln(error sum)`` with ``k`` bits."""
    choice: dict = {}

    def rec(p):
        depth = tree.lam - len(p)
        if depth == 0:
            return leaves[p]
        a, b = rec(p + "-"), rec(p + "+")
        half = n1 * 2 ** (depth - 1)
        out = np.empty(2 * half + 1)
        arg = np.empty(2 * half + 1, dtype=int)
        for k in range(2 * half + 1):
            k1 = np.arange(max(0, k - half), min(half, k) + 1)
            vals = _neg_logaddexp(a[k1], b[k - k1])
            j = int(np.argmax(vals))
            out[k], arg[k] = vals[j], k1[j]
        choice[p] = arg
        return out

    return rec(path), choice


def _trace(tree, path, k, choice, n1):
    if len(path) == tree.lam:
        return [k]
    k1 = int(choice[path][k])
    return _trace(tree, path + "-", k1, choice, n1) + _trace(tree, path + "+", k - k1, choice, n1)


def split_objective(tree: SubchannelTree, bits: Sequence[int], n1: int) -> float:
    """Re-evaluate the finite-``n1`` objective at a given allocation."""
    e = np.array([n1 * typical_exponent(node, b / n1, n1) if b else INF
                  for node, b in zip(tree.leaves, bits)])
    finite = e[np.isfinite(e)]
    if finite.size == 0:
        return INF
    m = finite.min()
    return float(m - math.log(np.exp(-(finite - m)).sum())) / (n1 * 2**tree.lam)


# ---------------------------------------------------------------------------
# n1 -> infinity
# ---------------------------------------------------------------------------

def _maxmin(fm: Callable, fp: Callable, rate: float, zero_plus: bool = False):
    """``max_{r1} min[fm(r1), fp(2R - r1)]`` over the feasible interval.

    ``fm(r, zp)``/``fp(r, zp)`` are decreasing; ``zp=True`` asks for the
    right limit at ``r = 0``, while ``r = 0`` itself means a frozen half
    (value ``inf``). Returns ``(value, r1, branch)``.
    """
    if rate > 1.0:
        return 0.0, min(1.0, rate), "above-one"
    if rate == 0.0:
        if not zero_plus:
            return INF, 0.0, "frozen"
        return max(fm(0.0, True), fp(0.0, True)), 0.0, "zero-plus"
    iv = FeasibleInterval.for_rate(rate)
    lo, hi = iv.lo, iv.hi

    def em(r1):
        return fm(r1, True) if r1 <= 0.0 else fm(r1, False)

    def ep(r1):
        r2 = 2.0 * rate - r1
        return fp(r2, True) if r2 <= 0.0 else fp(r2, False)

    cands = []
    if hi - lo <= 0.0:
        return min(fm(lo, False), fp(2.0 * rate - lo, False)), lo, "single"
    h_lo = em(lo) - ep(lo)
    h_hi = em(hi) - ep(hi)
    if h_lo <= 0.0:
        cands.append((em(lo), lo, "lower"))
    elif h_hi >= 0.0:
        cands.append((ep(hi), hi, "upper"))
    else:
        h = lambda r1: em(r1) - ep(r1)
        r1 = optimize.brentq(h, lo, hi, xtol=R1_TOL, rtol=1e-15)
        cands.append((min(em(r1), ep(r1)), r1, "intersection"))
    # frozen halves are exact points of the interval, not limits
    if lo == 0.0:
        cands.append((fp(2.0 * rate, False), 0.0, "frozen-minus"))
    if hi == 2.0 * rate:
        cands.append((fm(2.0 * rate, False), 2.0 * rate, "frozen-plus"))
    best = max(c[0] for c in cands)
    if best <= 0.0:
        # every feasible split is optimal; smallest R1 by the tie rule
        return 0.0, lo, "zero"
    return min((c for c in cands if c[0] == best), key=lambda c: c[1])


class _Asymptotic:
    def __init__(self, tree: SubchannelTree):
        self.tree = tree
        self.memo: dict = {}

    def value(self, path: str, r: float, zp: bool = False) -> float:
        return self.solve(path, r, zp)[0]

    def solve(self, path: str, r: float, zp: bool = False):
        key = (path, r, zp)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(path) == self.tree.lam:
            node = self.tree.nodes[path]
            if zp and r == 0.0:
                v = typical_exponent_zero_plus(node)
            elif r > 1.0:
                v = 0.0
            else:
                v = typical_exponent(node, r)
            out = (v, None, "leaf")
        else:
            fm = lambda x, z: self.value(path + "-", x, z)
            fp = lambda x, z: self.value(path + "+", x, z)
            v, r1, branch = _maxmin(fm, fp, r, zp)
            out = (0.5 * v, r1, branch)
        self.memo[key] = out
        return out

    def rates(self, path: str, r: float) -> list[float]:
        if len(path) == self.tree.lam:
            return [float(r)]
        _, r1, _ = self.solve(path, r)
        return self.rates(path + "-", r1) + self.rates(path + "+", 2.0 * r - r1)


def asymptotic_exponent(tree: SubchannelTree, rate: float) -> SplitResult:
    """``n1 -> inf`` exponent with the maximizing real rates.

    At each node the optimum is where the decreasing minus-branch curve
    meets the increasing plus-branch curve; if they do not cross inside the
    feasible interval, the better end point is returned.
    """
    _check_rate(rate)
    solver = _Asymptotic(tree)
    v, r1, branch = solver.solve("", rate)
    rates = tuple(solver.rates("", rate))
    return SplitResult(v, rates, tree.lam, None, rate, None, r1, branch)


def asymptotic_exponent_zero_plus(tree: SubchannelTree) -> float:
    """Right limit of :func:`asymptotic_exponent` at ``R -> 0+``."""
    return _Asymptotic(tree).value("", 0.0, True)


def branch_exponent(tree: SubchannelTree, path: str, rate: float) -> float:
    """Asymptotic exponent of the subtree rooted at ``path`` (scaled as its own scheme)."""
    return _Asymptotic(tree).value(path, rate)


# ---------------------------------------------------------------------------
# capacity-only bound
# ---------------------------------------------------------------------------

class _CapacityOnly:
    def __init__(self, eps_grid: int):
        self.eps_grid = eps_grid
        self.memo: dict = {}

    def value(self, lam: int, cap: float, r: float, zp: bool = False) -> float:
        cap = min(max(cap, 0.0), 1.0)
        key = (lam, cap, r, zp)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if lam == 0:
            if zp and r == 0.0:
                v = _bsc_zero_plus(cap)
            else:
                v = bsc_exponent(cap, r) if r <= 1.0 else 0.0
        elif r == 0.0 and not zp:
            v = INF
        else:
            v = 0.5 * self._outer_min(lam, cap, r, zp)
        self.memo[key] = v
        return v

    def split(self, lam, cap, eps, r, zp):
        fm = lambda x, z: self.value(lam - 1, cap - eps, x, z)
        fp = lambda x, z: self.value(lam - 1, cap + eps, x, z)
        return _maxmin(fm, fp, r, zp)[0]

    def _outer_min(self, lam, cap, r, zp):
        lo, hi = epsilon_bounds(cap)
        f = lambda e: self.split(lam, cap, e, r, zp)
        if hi - lo <= 1e-15:
            return f(lo)
        grid = np.linspace(lo, hi, self.eps_grid)
        vals = [f(e) for e in grid]
        j = int(np.argmin(vals))
        best = vals[j]
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        if math.isfinite(best) and b > a:
            res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-9 * max(hi - lo, 1e-12)})
            best = min(best, float(res.fun))
        return best


def _bsc_zero_plus(cap: float) -> float:
    # expurgated limit -ln(Z)/2 dominates the random-coding one
    if cap >= 1.0:
        return INF
    p = h2_inv(1.0 - cap)
    z = 2.0 * math.sqrt(p * (1.0 - p))
    return -0.5 * math.log(z) if z > 0 else INF


def capacity_only_bound(capacity: float, rate: float, lam: int, eps_grid: int = EPS_GRID) -> float:
    """Lower bound on the asymptotic exponent of any BMS channel with capacity ``capacity``.

    The unknown split ``I(W-) = I - eps``, ``I(W+) = I + eps`` is handled by
    minimizing over ``eps`` in its admissible range; leaves use the BSC,
    the worst channel of a given capacity.
    """
    _check_rate(rate)
    if not 0.0 <= capacity <= 1.0:
        raise ValueError("capacity must be in [0, 1]")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return _CapacityOnly(eps_grid).value(lam, capacity, rate)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

@dataclass
class BoundCurve:
    """Points ``(param, value)`` plus optional per-point extras (rates, bits)."""

    kind: str
    params: list
    values: list
    meta: dict = field(default_factory=dict)
    extras: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.params)

    def to_csv(self, param_name: str = "param") -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        width = max((len(e) for e in self.extras), default=0)
        w.writerow([param_name, "value"] + [f"x{i}" for i in range(width)])
        for i, (p, v) in enumerate(zip(self.params, self.values)):
            extra = list(self.extras[i]) if i < len(self.extras) else []
            w.writerow([_fmt(p), _fmt(v)] + [_fmt(x) for x in extra])
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return f"{float(x):.12g}"
    try:
        xf = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isinf(xf):
        return "inf" if xf > 0 else "-inf"
    return f"{xf:.12g}"


CURVE_KINDS = ("exact", "asymptotic", "capacity_only", "naive")


def exponent_curve(
    kind: str,
    channels: Sequence[BmsChannel],
    rate: float,
    lam: int,
    n1: int | None = None,
    params: Sequence | None = None,
    bins: int | None = None,
    grid_half_width: float | None = None,
    trees: Sequence[SubchannelTree] | None = None,
) -> BoundCurve:
    """Evaluate one exponent recursion along a sweep of channels.

    ``naive`` is the exponent of ``2**lam`` independent codewords,
    ``E(W, R) / 2**lam``.
    """
    if kind not in CURVE_KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    if kind == "exact" and n1 is None:
        raise ValueError("exact curves need n1")
    params = list(params) if params is not None else [ch.parameter for ch in channels]
    kw = {}
    if bins is not None:
        kw["bins"] = bins
    if grid_half_width is not None:
        kw["grid_half_width"] = grid_half_width
    values, extras = [], []
    for i, ch in enumerate(channels):
        if kind == "capacity_only":
            values.append(capacity_only_bound(ch.capacity, rate, lam))
            extras.append(())
            continue
        if kind == "naive":
            law = build_tree(ch, 0, **kw).root if ch.kind == "BIAWGN" else ch
            values.append(typical_exponent(law, rate, n1) / 2**lam)
            extras.append(())
            continue
        tree = trees[i] if trees is not None else _tree_for(ch, lam, kw)
        res = exact_exponent(tree, rate, n1) if kind == "exact" else asymptotic_exponent(tree, rate)
        values.append(res.value)
        extras.append(tuple(res.rates))
    meta = {"kind": kind, "rate": rate, "lambda": lam, "n1": n1 if n1 else "asymptotic"}
    return BoundCurve(kind, params, values, meta, extras)


def _tree_for(ch: BmsChannel, lam: int, kw: dict) -> SubchannelTree:
    from .channels import bec_tree

    if ch.kind == "BEC":
        return bec_tree(ch.parameter, lam)
    return build_tree(ch, lam, **kw)
