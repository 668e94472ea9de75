"""Finite-blocklength bounds and approximations for the concatenated scheme.

Allocations are integer bit counts ``k_i = N1 * R_i`` per sub-channel; all
minimizations over allocations go through :func:`dp_allocate`, which is exact
for separable costs.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .channels import SubchannelTree, sigma_for_capacity
from .exponents import typical_exponent

LOG_TINY = -745.0


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

class QFn:
    """Complementary Gaussian CDF and friends (thin wrappers over ``scipy.special``)."""

    @staticmethod
    def q(u):
        return special.ndtr(-np.asarray(u, dtype=float)) if np.ndim(u) else float(special.ndtr(-u))

    @staticmethod
    def log_q(u):
        return special.log_ndtr(-np.asarray(u, dtype=float)) if np.ndim(u) else float(special.log_ndtr(-u))

    @staticmethod
    def q_inv(p):
        return -special.ndtri(p) if np.ndim(p) else float(-special.ndtri(p))

    @staticmethod
    def q_inv_log(log_p: float) -> float:
        """``u`` with ``ln Q(u) = log_p``; stays accurate far in the tail."""
        if log_p >= 0.0:
            return -math.inf
        if log_p > -30.0:
            return float(-special.ndtri(math.exp(log_p)))
        # asymptotic start, then Newton on ln Q
        u = math.sqrt(-2.0 * log_p)
        for _ in range(60):
            lq = float(special.log_ndtr(-u))
            # d/du ln Q(u) = -phi(u)/Q(u)
            ratio = math.exp(-0.5 * u * u - 0.5 * math.log(2 * math.pi) - lq)
            step = (lq - log_p) / ratio
            u += step
            if abs(step) < 1e-15 * u:
                break
        return u


Q = QFn.q
Q_inv = QFn.q_inv


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalApproxConfig:
    """``correction`` is ``"auto"`` (by channel family) or an explicit ``C(N1)``.

    ``frozen_zero`` makes an empty sub-code cost nothing, since a block with
    no information bits cannot be decoded wrongly.
    """

    correction: object = "auto"
    frozen_zero: bool = True

    def correction_for(self, kind: str | None, n1: int) -> float:
        if self.correction != "auto":
            c = float(self.correction)
            if c < 0:
                raise ValueError("correction must be nonnegative")
            return c
        if kind in ("BIAWGN", "BSC"):
            return math.log2(n1) / (2.0 * n1)
        return 0.0


@dataclass(frozen=True)
class AllocationResult:
    value: float
    bits: tuple
    n1: int
    method: str
    clamped: bool = False
    raw_value: float | None = None

    @property
    def rates(self) -> tuple:
        return tuple(Fraction(b, self.n1) for b in self.bits)


@dataclass(frozen=True)
class ConverseResult:
    value: float
    bits: tuple
    n1: int
    method: str
    failures: tuple = ()

    @property
    def rates(self) -> tuple:
        return tuple(Fraction(b, self.n1) for b in self.bits)


# ---------------------------------------------------------------------------
# dynamic program
# ---------------------------------------------------------------------------

def _cost_table(cost, n1: int | None) -> np.ndarray:
    if callable(cost):
        if n1 is None:
            raise ValueError("callable costs need n1")
        return np.array([cost(k) for k in range(n1 + 1)], dtype=float)
    return np.asarray(cost, dtype=float)


def dp_allocate(costs: Sequence, total_bits: int, n1: int | None = None) -> tuple[float, tuple]:
    """Minimize ``sum_i costs[i][k_i]`` subject to ``sum_i k_i = total_bits``.

    ``costs`` holds arrays indexed by bit count (or callables, with ``n1``).
    Ties go to the smallest bit count for the later sub-channel.
    """
    tables = [_cost_table(c, n1) for c in costs]
    if not tables:
        raise ValueError("no sub-channels")
    total_bits = int(total_bits)
    cap = sum(len(t) - 1 for t in tables)
    if total_bits < 0 or total_bits > cap:
        raise ValueError(f"total_bits {total_bits} outside [0, {cap}]")
    width = total_bits + 1
    delta = np.full(width, np.inf)
    first = tables[0][:width]
    delta[: len(first)] = first
    choices = []
    for t in tables[1:]:
        m = min(len(t), width)
        # cand[rho, b] = delta[rho - b] + t[b]
        cand = np.full((width, m), np.inf)
        for b in range(m):
            cand[b:, b] = delta[: width - b] + t[b]
        arg = np.argmin(cand, axis=1)
        delta = cand[np.arange(width), arg]
        choices.append(arg)
    bits = []
    rho = total_bits
    for arg in reversed(choices):
        b = int(arg[rho])
        bits.append(b)
        rho -= b
    bits.append(rho)
    return float(delta[total_bits]), tuple(reversed(bits))


def _total_bits(rate, n1: int, lam: int, total_bits: int | None = None) -> int:
    if total_bits is not None:
        if not 0 <= int(total_bits) <= n1 * 2**lam:
            raise ValueError("total_bits outside [0, N]")
        return int(total_bits)
    total = Fraction(rate).limit_denominator(1 << 40) * n1 * 2**lam
    if total.denominator != 1:
        raise ValueError("rate * N must be an integer number of bits")
    if not 0 <= total <= n1 * 2**lam:
        raise ValueError("rate outside [0, 1]")
    return int(total)


# ---------------------------------------------------------------------------
# BEC achievable bound
# ---------------------------------------------------------------------------

def _require_bec(tree: SubchannelTree) -> None:
    if not all(n.density.is_bec() for n in tree.leaves):
        raise ValueError("this bound is only valid on BEC trees")


def _log_binom_pmf(n: int, eps: float) -> np.ndarray:
    """``ln[C(n,t) eps^t (1-eps)^(n-t)]`` for ``t = 0..n``."""
    t = np.arange(n + 1)
    logc = special.gammaln(n + 1) - special.gammaln(t + 1) - special.gammaln(n - t + 1)
    return logc + special.xlogy(t, eps) + special.xlog1py(n - t, -eps)


def bec_rcu_bound(eps: float, bits: int, n1: int) -> float:
    """Random linear code bound for ``bits`` information bits on BEC(eps), length ``n1``."""
    if bits == 0:
        return 0.0
    logp = _log_binom_pmf(n1, eps)
    t = np.arange(n1 + 1)
    # log2((2^k - 1)/2) = k - 1 + log2(1 - 2^-k)
    log2_m = bits - 1 + math.log1p(-(2.0**-bits)) / math.log(2.0)
    expo = np.maximum(n1 - t - log2_m, 0.0)
    terms = logp - expo * math.log(2.0)
    terms = terms[terms > LOG_TINY]
    if terms.size == 0:
        return 0.0
    return float(np.exp(special.logsumexp(np.sort(terms))))


def bec_achievable_costs(tree: SubchannelTree, n1: int) -> list[np.ndarray]:
    _require_bec(tree)
    out = []
    for node in tree.leaves:
        eps = 1.0 - node.capacity
        g = np.zeros(n1 + 1)
        for k in range(1, n1 + 1):
            ex = math.exp(-n1 * typical_exponent(node, k / n1, n1))
            g[k] = min(bec_rcu_bound(eps, k, n1), ex)
        out.append(g)
    return out


def _finish(costs, total, n1, method, bits=None) -> AllocationResult:
    if bits is None:
        raw, bits = dp_allocate(costs, total)
    else:
        raw = evaluate_allocation(costs, bits)
    return AllocationResult(min(raw, 1.0), bits, n1, method, raw > 1.0, raw)


def bec_achievable(tree: SubchannelTree, rate, n1: int, bits: Sequence[int] | None = None,
                   total_bits: int | None = None) -> AllocationResult:
    """Union bound of per-block random-code bounds, minimized over allocations.

    Pass ``bits`` to evaluate a fixed allocation instead of optimizing, and
    ``total_bits`` when ``rate * N`` is not an integer.
    """
    total = _total_bits(rate, n1, tree.lam, total_bits)
    costs = bec_achievable_costs(tree, n1)
    return _finish(costs, total, n1, "bec_achievable", None if bits is None else _check_bits(bits, total, tree))


def evaluate_allocation(costs: Sequence[np.ndarray], bits: Sequence[int]) -> float:
    return float(sum(c[b] for c, b in zip(costs, bits)))


def _check_bits(bits, total, tree):
    bits = tuple(int(b) for b in bits)
    if len(bits) != 2**tree.lam or sum(bits) != total:
        raise ValueError("allocation does not match the tree and total rate")
    return bits


# ---------------------------------------------------------------------------
# normal approximation
# ---------------------------------------------------------------------------

def normal_approx_costs(tree: SubchannelTree, n1: int, config: NormalApproxConfig | None = None) -> list[np.ndarray]:
    config = config or NormalApproxConfig()
    kind = tree.channel.kind if tree.channel is not None else None
    c = config.correction_for(kind, n1)
    k = np.arange(n1 + 1)
    out = []
    for node in tree.leaves:
        gap = node.capacity - k / n1 + c
        if node.dispersion > 0:
            g = special.ndtr(-gap * math.sqrt(n1 / node.dispersion))
        else:
            g = np.where(gap > 0, 0.0, np.where(gap < 0, 1.0, 0.5))
        if config.frozen_zero:
            g[0] = 0.0
        out.append(np.asarray(g, dtype=float))
    return out


def normal_approx(tree: SubchannelTree, rate, n1: int, config: NormalApproxConfig | None = None,
                  bits: Sequence[int] | None = None, total_bits: int | None = None) -> AllocationResult:
    """Sum of per-block normal approximations, minimized over integer allocations."""
    total = _total_bits(rate, n1, tree.lam, total_bits)
    costs = normal_approx_costs(tree, n1, config)
    res = _finish(costs, total, n1, "normal_approx", None if bits is None else _check_bits(bits, total, tree))
    # the sum can legitimately exceed 1 as an approximation; keep the raw value
    return AllocationResult(res.raw_value, res.bits, n1, "normal_approx", res.clamped, res.raw_value)


def relaxed_normal_approx(tree: SubchannelTree, rate: float, n1: int) -> tuple[float, np.ndarray]:
    """Real-valued rates, no correction term: ``min sum_i Q((I_i - R_i) sqrt(n1/V_i))``."""
    cap = tree.leaf_capacities
    sd = np.sqrt(tree.leaf_dispersions / n1)
    m = len(cap)
    target = m * rate
    x0 = cap - (cap.sum() - target) * sd / sd.sum()

    def f(r):
        return float(np.sum(special.ndtr(-(cap - r) / sd)))

    def grad(r):
        u = (cap - r) / sd
        return np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) / sd

    cons = {"type": "eq", "fun": lambda r: r.sum() - target, "jac": lambda r: np.ones(m)}
    res = optimize.minimize(f, x0, jac=grad, constraints=[cons], bounds=[(0.0, 1.0)] * m,
                            method="SLSQP", options={"ftol": 1e-16, "maxiter": 500})
    best = res.x if f(res.x) <= f(np.clip(x0, 0, 1)) else np.clip(x0, 0, 1)
    return f(best), best


# ---------------------------------------------------------------------------
# dispersion analysis
# ---------------------------------------------------------------------------

def effective_dispersion_v_lambda(tree: SubchannelTree) -> float:
    """``(sum_i sqrt(V_i))**2 / 2**lam`` over the leaves."""
    return float(np.sqrt(tree.leaf_dispersions).sum() ** 2 / 2**tree.lam)


def v_lambda_recursive(tree: SubchannelTree, path: str = "") -> float:
    """Same quantity via ``V_l(W) = (sqrt V_{l-1}(W-) + sqrt V_{l-1}(W+))**2 / 2``."""
    if len(path) == tree.lam:
        return tree.nodes[path].dispersion
    vm = v_lambda_recursive(tree, path + "-")
    vp = v_lambda_recursive(tree, path + "+")
    return 0.5 * (math.sqrt(vm) + math.sqrt(vp)) ** 2


def naive_dispersion(tree: SubchannelTree) -> float:
    return 2**tree.lam * tree.root.dispersion


def equalizing_rates(tree: SubchannelTree, rate: float) -> np.ndarray:
    """Rates that equalize ``(I_i - R_i)/sqrt(V_i)``; they sum to ``2**lam * R``."""
    s = np.sqrt(tree.leaf_dispersions)
    return tree.leaf_capacities - 2**tree.lam * (tree.root.capacity - rate) * s / s.sum()


def r_min(tree: SubchannelTree) -> float:
    """Smallest rate for which all equalizing rates are nonnegative."""
    v = tree.leaf_dispersions
    if np.any(v <= 0):
        raise ValueError("all leaf dispersions must be positive")
    vl = effective_dispersion_v_lambda(tree)
    return float(tree.root.capacity - np.min(tree.leaf_capacities * np.sqrt(vl / (2**tree.lam * v))))


def closed_form_pe(tree: SubchannelTree, rate: float, n: int, mode: str = "polar") -> float:
    """``2**lam Q((I - R) sqrt(N / V))`` with the polar or naive dispersion."""
    if mode == "polar":
        v = effective_dispersion_v_lambda(tree)
        if tree.lam and rate <= r_min(tree):
            warnings.warn("rate below R_min: equalizing allocation is infeasible", RuntimeWarning)
    elif mode == "naive":
        v = naive_dispersion(tree)
    else:
        raise ValueError("mode must be 'polar' or 'naive'")
    return 2**tree.lam * Q((tree.root.capacity - rate) * math.sqrt(n / v))


def effective_dispersion_hat(n: float, x: float, v_lambda: float, lam: int) -> float:
    """Dispersion ``V`` with ``Q(x sqrt(n/V)) = 2**lam Q(x sqrt(n/v_lambda))``."""
    if x <= 0 or v_lambda <= 0:
        raise ValueError("x and v_lambda must be positive")
    u = x * math.sqrt(n / v_lambda)
    if lam == 0:
        return v_lambda
    target = lam * math.log(2.0) + QFn.log_q(u)
    if target >= math.log(0.5):
        raise ValueError("2**lam Q(u) >= 1/2: no positive solution")
    # ln Q(w) is decreasing; bisect w in (0, u]
    g = lambda w: QFn.log_q(w) - target
    w = optimize.brentq(g, 0.0, u, xtol=1e-300, rtol=1e-15, maxiter=500)
    return n * x * x / (w * w)


# ---------------------------------------------------------------------------
# converses
# ---------------------------------------------------------------------------

def bec_correct_decoding_bound(eps: float, bits: int, n1: int) -> float:
    """Lower bound on the block error probability of any ``(n1, bits)`` code on BEC(eps)."""
    if bits == 0:
        return 0.0
    free = n1 - bits
    l = np.arange(free + 1, n1 + 1)
    if l.size == 0:
        return 0.0
    logp = _log_binom_pmf(n1, eps)[l]
    terms = logp + np.log1p(-np.exp2(free - l))
    terms = terms[terms > LOG_TINY]
    if terms.size == 0:
        return 0.0
    return float(min(np.exp(special.logsumexp(np.sort(terms))), 1.0))


def bec_converse_costs(tree: SubchannelTree, n1: int) -> list[np.ndarray]:
    _require_bec(tree)
    out = []
    for node in tree.leaves:
        eps = 1.0 - node.capacity
        pc = np.array([bec_correct_decoding_bound(eps, k, n1) for k in range(n1 + 1)])
        with np.errstate(divide="ignore"):
            out.append(-np.log1p(-pc))
    return out


def bec_converse(tree: SubchannelTree, rate, n1: int, bits: Sequence[int] | None = None,
                 total_bits: int | None = None) -> ConverseResult:
    """Genie-aided lower bound ``min 1 - prod_i (1 - P_i)`` over allocations."""
    total = _total_bits(rate, n1, tree.lam, total_bits)
    costs = bec_converse_costs(tree, n1)
    if bits is None:
        s, bits = dp_allocate(costs, total)
    else:
        bits = _check_bits(bits, total, tree)
        s = evaluate_allocation(costs, bits)
    return ConverseResult(float(-np.expm1(-s)), bits, n1, "bec_exact")


def cone_angle(rate: float, n: int) -> float:
    """Half-angle with ``2**(nR) = sqrt(2 pi n) sin(t) cos(t) / sin(t)**n``."""
    lhs = n * rate * math.log(2.0)
    c = 0.5 * math.log(2 * math.pi * n)

    def g(t):
        return c + math.log(math.cos(t)) + (1 - n) * math.log(math.sin(t)) - lhs

    lo, hi = 1e-300, math.pi / 2 - 1e-16
    if not (g(lo) > 0 > g(hi)):
        raise ArithmeticError("cone angle equation has no root in (0, pi/2)")
    return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def shannon_cone_pe(sigma: float, rate: float, n: int) -> float:
    """Approximate sphere-packing (cone) error probability on the AWGN channel."""
    if rate <= 0:
        return 0.0
    t = cone_angle(rate, n)
    st, ct = math.sin(t), math.cos(t)
    g = 0.5 * (ct / sigma + math.sqrt(ct * ct / sigma**2 + 4.0))
    denom = g * st * st / sigma - ct
    if denom <= 0:
        # outside the validity region of the expansion (rate above capacity)
        return 1.0
    log_pe = (-0.5 * math.log(n * math.pi) - 0.5 * math.log1p(g * g) - math.log(st)
              + n * (math.log(g) + math.log(st) - 0.5 / sigma**2 + g * ct / (2 * sigma))
              - math.log(denom))
    return min(math.exp(min(log_pe, 0.0)), 1.0)


def subchannel_sigmas(tree: SubchannelTree, rule: str = "capacity") -> list[float]:
    """Noise level of a BIAWGN stand-in for each leaf.

    ``capacity`` matches the leaf capacity; ``mean`` matches the mean LLR
    (``2 / sigma**2``).
    """
    out = []
    for node in tree.leaves:
        if rule == "capacity":
            i = node.capacity
            out.append(math.inf if i <= 0 else (0.0 if i >= 1 else sigma_for_capacity(i)))
        elif rule == "mean":
            m = node.law.mean_llr
            out.append(0.0 if not math.isfinite(m) else (math.inf if m <= 0 else math.sqrt(2.0 / m)))
        else:
            raise ValueError("rule must be 'capacity' or 'mean'")
    return out


def awgn_cone_converse(sigmas: Sequence[float], rate, n1: int, total_bits: int | None = None) -> ConverseResult:
    """Cone-bound converse for ``len(sigmas)`` Gaussian sub-channels."""
    m = len(sigmas)
    lam = int(round(math.log2(m)))
    if 2**lam != m:
        raise ValueError("number of sub-channels must be a power of two")
    total = _total_bits(rate, n1, lam, total_bits)
    costs, failures = [], []
    for i, s in enumerate(sigmas):
        if s <= 0:
            raise ValueError("sigma must be positive")
        row = np.zeros(n1 + 1)
        for k in range(1, n1 + 1):
            try:
                pe = shannon_cone_pe(s, k / n1, n1)
            except ArithmeticError:
                failures.append((i, k))
                pe = 1.0
            row[k] = math.inf if pe >= 1.0 else -math.log1p(-pe)
        costs.append(row)
    s, bits = dp_allocate(costs, total)
    return ConverseResult(float(-np.expm1(-s)), bits, n1, "awgn_cone", tuple(failures))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def results_to_csv(rows: Sequence[tuple], meta: dict | None = None, param_name: str = "param") -> str:
    """``param,value,method,rates`` rows; ``rates`` is ``;``-joined bit counts."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([param_name, "value", "method", "rates"])
    for param, res in rows:
        w.writerow([f"{param:.12g}" if isinstance(param, float) else param,
                    f"{res.value:.12g}", res.method, ";".join(str(b) for b in res.bits)])
    return buf.getvalue()
