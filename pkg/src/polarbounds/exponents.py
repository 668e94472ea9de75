"""Gallager random-coding and expurgated exponents of BMS channels.

Exponents are in nats, rates in bits per channel use. ``math.inf`` is the
value of an exponent when nothing can go wrong (zero rate, or a perfect
channel for the expurgated bound).

Every function takes a *source*: anything exposing a ``law`` attribute
(:class:`~polarbounds.channels.LlrDensity`, tree nodes, BEC/BSC channel
descriptors, or a :class:`~polarbounds.channels.FoldedLaw`).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .channels import LN2, BmsChannel, FoldedLaw, h2, h2_inv

INF = math.inf
RHO_CAP = 64.0
RHO_CAP_MAX = 2.0**40
RHO_TOL = 1e-12


def _law(src) -> FoldedLaw:
    return src.law


def _e0_parts(law: FoldedLaw, rho: float) -> tuple[float, float]:
    """Return ``S(rho)`` and ``S'(rho)`` with ``E0 = -ln S``."""
    a, w = law.finite_part
    s = 1.0 / (1.0 + rho)
    if len(a) <= 4:
        return _e0_parts_scalar(a.tolist(), w.tolist(), law.perfect_weight, rho, s)
    # g(a) = 2^-rho (1 + e^{-a s})^{1+rho} / (1 + e^{-a})
    log1p_as = np.log1p(np.exp(-a * s))
    log_g = -rho * LN2 + (1.0 + rho) * log1p_as - np.log1p(np.exp(-a))
    g = np.exp(log_g)
    dlog_g = -LN2 + log1p_as + a * s / (1.0 + np.exp(a * s))
    inf_w = law.perfect_weight
    g_inf = 2.0**-rho
    S = float(np.dot(w, g)) + inf_w * g_inf
    dS = float(np.dot(w, g * dlog_g)) - inf_w * g_inf * LN2
    return S, dS


def _e0_parts_scalar(a, w, inf_w, rho, s):
    # same as the vectorized path; numpy overhead dominates for 2-atom laws
    g_inf = 2.0**-rho
    S = inf_w * g_inf
    dS = -inf_w * g_inf * LN2
    for ai, wi in zip(a, w):
        l1 = math.log1p(math.exp(-ai * s))
        g = math.exp(-rho * LN2 + (1.0 + rho) * l1 - math.log1p(math.exp(-ai)))
        S += wi * g
        dS += wi * g * (-LN2 + l1 + ai * s / (1.0 + math.exp(ai * s)))
    return S, dS


def gallager_e0(src, rho: float) -> float:
    """Gallager's ``E0(W, rho)`` in nats for the uniform input."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    S, _ = _e0_parts(_law(src), rho)
    return -math.log(S)


def gallager_e0_derivative(src, rho: float) -> float:
    """``dE0/drho`` in nats; equals ``I(W) ln 2`` at ``rho = 0``."""
    S, dS = _e0_parts(_law(src), rho)
    return -dS / S


@dataclass(frozen=True)
class ExponentValue:
    value: float
    rho: float
    cap_active: bool = False


def random_coding_exponent(src, rate: float) -> float:
    """``E_r(W, R) = max_{0<=rho<=1} E0(W, rho) - rho R ln2`` (``inf`` at ``R = 0``)."""
    return random_coding_solution(src, rate).value


def random_coding_solution(src, rate: float) -> ExponentValue:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if rate == 0:
        return ExponentValue(INF, 1.0)
    law = _law(src)
    target = rate * LN2
    slope = lambda r: gallager_e0_derivative(law, r) - target
    if law.capacity <= rate or slope(0.0) <= 0.0:
        return ExponentValue(0.0, 0.0)
    if slope(1.0) >= 0.0:
        return ExponentValue(gallager_e0(law, 1.0) - target, 1.0)
    rho = optimize.brentq(slope, 0.0, 1.0, xtol=RHO_TOL)
    return ExponentValue(max(gallager_e0(law, rho) - rho * target, 0.0), rho)


def _z(src) -> float:
    if isinstance(src, (int, float)):
        z = float(src)
        if not 0.0 <= z <= 1.0:
            raise ValueError("Bhattacharyya parameter must be in [0, 1]")
        return z
    return _law(src).bhattacharyya


def expurgated_ex(src, rho: float) -> float:
    """``E_x(W, rho) = -rho ln[(1 + Z^(1/rho)) / 2]`` in nats.

    ``src`` may also be the Bhattacharyya parameter itself.
    """
    if rho < 1:
        raise ValueError("rho must be >= 1")
    z = _z(src)
    if z == 0.0:
        return rho * LN2
    t = math.log(z) / rho
    return -rho * math.log1p(math.expm1(t) / 2.0)


def _ex_slope(z: float, rho: float) -> float:
    t = math.log(z) / rho
    return -math.log1p(math.expm1(t) / 2.0) + t / (1.0 + math.exp(-t))


def expurgated_solution(src, rate: float, rho_cap: float = RHO_CAP_MAX) -> ExponentValue:
    """Maximizer of ``E_x(rho) - rho R ln2`` over ``rho >= 1``.

    The search bracket starts at ``[1, 64]`` and doubles while the objective
    is still increasing at its right end; ``cap_active`` is set if
    ``rho_cap`` is reached before the slope turns negative.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    z = _z(src)
    target = rate * LN2
    if z == 0.0:
        if rate < 1.0:
            return ExponentValue(INF, INF)
        return ExponentValue(LN2 * (1.0 - rate), 1.0)
    if z == 1.0:
        return ExponentValue(-target, 1.0)
    if rate == 0.0:
        # sup over rho is the limit rho -> inf
        return ExponentValue(-0.5 * math.log(z), INF, cap_active=True)
    slope = lambda r: _ex_slope(z, r) - target
    if slope(1.0) <= 0.0:
        return ExponentValue(expurgated_ex(z, 1.0) - target, 1.0)
    hi = RHO_CAP
    while slope(hi) > 0.0 and hi < rho_cap:
        hi *= 2.0
    if slope(hi) > 0.0:
        return ExponentValue(expurgated_ex(z, hi) - hi * target, hi, cap_active=True)
    rho = optimize.brentq(slope, 1.0, hi, xtol=RHO_TOL, rtol=1e-14)
    return ExponentValue(expurgated_ex(z, rho) - rho * target, rho)


def expurgated_exponent(src, rate: float) -> float:
    """``E_ex(W, R) = sup_{rho>=1} E_x(W, rho) - rho R ln2`` in nats.

    Since ``E_x`` depends on ``W`` only through ``Z``, the supremum has a
    closed form: with ``delta`` the root of ``1 - h2(delta) = R`` in
    ``[0, 1/2]``, the stationary point gives ``-delta ln Z`` whenever
    ``delta / (1 - delta) >= Z``; otherwise the optimum sits at ``rho = 1``.
    At ``R = 0`` this is ``-ln(Z)/2`` (``inf`` when ``Z = 0``).
    """
    return _ex_closed(_z(src), rate)


def _ex_closed(z: float, rate: float) -> float:
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if z == 0.0:
        return INF if rate < 1.0 else LN2 * (1.0 - rate)
    if rate == 0.0:
        return -0.5 * math.log(z)
    if z < 1.0 and rate < 1.0:
        delta = h2_inv(1.0 - rate)
        if delta >= z * (1.0 - delta):
            return -delta * math.log(z)
    return math.log(2.0 / (1.0 + z)) - rate * LN2


def typical_exponent(src, rate: float, n1: int | None = None) -> float:
    """Exponent of typical random linear codes.

    ``max[E_r(W,R), E_ex(W, R + 2/n1)]`` for finite ``n1``, and
    ``max[E_r, E_ex]`` at the same rate when ``n1`` is ``None``.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    if rate == 0:
        return INF
    law = _law(src)
    shifted = rate if n1 is None else rate + 2.0 / n1
    return max(random_coding_exponent(law, rate), expurgated_exponent(law, shifted))


def typical_exponent_zero_plus(src, n1: int | None = None) -> float:
    """Right limit of :func:`typical_exponent` at ``R -> 0+`` (finite unless Z = 0)."""
    law = _law(src)
    er = gallager_e0(law, 1.0)
    ex = expurgated_exponent(law, 0.0 if n1 is None else 2.0 / n1)
    return max(er, ex)


def extremal_channels(capacity: float) -> tuple[BmsChannel, BmsChannel]:
    """BSC and BEC with the given capacity."""
    if not 0.0 <= capacity <= 1.0:
        raise ValueError("capacity must be in [0, 1]")
    return BmsChannel.bsc(h2_inv(1.0 - capacity)), BmsChannel.bec(1.0 - capacity)


def extremal_exponents(capacity: float, rate: float, n1: int | None = None) -> tuple[float, float]:
    """Typical-code exponents of the BSC and BEC with capacity ``capacity``.

    Every BMS channel with that capacity lies between the two values.
    """
    bsc, bec = extremal_channels(capacity)
    return typical_exponent(bsc, rate, n1), typical_exponent(bec, rate, n1)


def bsc_exponent(capacity: float, rate: float, n1: int | None = None) -> float:
    """``E_BSC(I, R)``: typical-code exponent of the BSC with capacity ``I``.

    Closed forms only (sphere-packing branch above the critical rate,
    straight line below it, expurgated part through ``Z``). A capacity
    outside ``[0, 1]`` is clamped.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    capacity = min(max(capacity, 0.0), 1.0)
    if rate == 0:
        return INF
    if capacity >= 1.0:
        return INF if rate < 1.0 else 0.0
    if capacity <= 0.0:
        return 0.0
    p, q, z, r_crit, e0_one = _bsc_params(capacity)
    shifted = rate if n1 is None else rate + 2.0 / n1
    if rate >= capacity:
        er = 0.0
    elif rate <= r_crit:
        er = e0_one - rate * LN2
    else:
        d = h2_inv(1.0 - rate)
        er = d * math.log(d / p) + (1.0 - d) * math.log((1.0 - d) / q)
    return max(er, _ex_closed(z, shifted))


@functools.lru_cache(maxsize=1 << 16)
def _bsc_params(capacity: float) -> tuple[float, float, float, float, float]:
    """Crossover, Bhattacharyya value, critical rate and ``E0(1)`` of the BSC."""
    p = h2_inv(1.0 - capacity)
    q = 1.0 - p
    sp, sq = math.sqrt(p), math.sqrt(q)
    r_crit = 1.0 - h2(sp / (sp + sq))
    return p, q, 2.0 * sp * sq, r_crit, LN2 - 2.0 * math.log(sp + sq)
