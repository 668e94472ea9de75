"""Binary memoryless symmetric channels as quantized LLR densities.

Densities live on a uniform LLR grid (nats) with an explicit atom at
``+inf`` for perfectly known bits, and are always conditioned on the
all-zero input. Functionals (capacity, dispersion, Bhattacharyya) are
evaluated through the folded law of ``|L|``, which is how symmetric
densities are usually handled in density evolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np
from scipy import optimize, special, stats

LN2 = math.log(2.0)

DEFAULT_BINS = 2001
DEFAULT_HALF_WIDTH = 40.0

KINDS = ("BEC", "BSC", "BIAWGN")


# ---------------------------------------------------------------------------
# Scalar helpers
# ---------------------------------------------------------------------------

def h2(p: float) -> float:
    """Binary entropy in bits."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log1p(-p)) / LN2


def _h2_inv_newton(y: float, p: float, lo: float = 0.0, hi: float = 0.5) -> float:
    for _ in range(100):
        f = h2(p) - y
        if f > 0:
            hi = p
        else:
            lo = p
        if f == 0.0 or hi - lo <= 1e-16 * hi:
            break
        q = p - f / math.log2((1.0 - p) / p)
        if not lo < q < hi:
            q = 0.5 * (lo + hi)
        if abs(q - p) <= 1e-16 * p:
            return q
        p = q
    return p


_H2_TABLE_SIZE = 4096


def _h2_inv_cold(y: float) -> float:
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 0.5
    # h2(p) ~ p log2(e/p) for small p
    p = min(0.25, y / max(math.log2(1.0 / y) + 1.4427, 1.0))
    return _h2_inv_newton(y, p)


_H2_TABLE = [_h2_inv_cold(k / _H2_TABLE_SIZE) for k in range(_H2_TABLE_SIZE + 1)]


def h2_inv(y: float) -> float:
    """Inverse of :func:`h2` with values in ``[0, 1/2]``.

    Newton iteration seeded from a lookup table, with bisection fallback
    inside the bracket given by neighbouring table entries.
    """
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 0.5
    t = y * _H2_TABLE_SIZE
    k = int(t)
    a, b = _H2_TABLE[k], _H2_TABLE[k + 1]
    if k == 0:
        return _h2_inv_newton(y, min(b, y / max(math.log2(1.0 / y) + 1.4427, 1.0)), 0.0, b)
    return _h2_inv_newton(y, a + (b - a) * (t - k), a, b)


def epsilon_bounds(capacity: float) -> tuple[float, float]:
    """Bracket of the polarization gap ``I(W+) - I(W)`` for a BMS channel.

    Returns ``(eps_l, eps_h)``; the lower end is attained by the BSC and the
    upper end (``I - I**2``) by the BEC.
    """
    x = float(capacity)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"capacity must be in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0, 0.0
    p = h2_inv(1.0 - x)
    eps_l = x - 1.0 + h2(p * (2.0 - 2.0 * p))
    eps_h = x - x * x
    return max(eps_l, 0.0), eps_h


def biawgn_capacity(sigma: float) -> float:
    """Capacity (bits) of the BIAWGN channel with unit-energy BPSK, by quadrature."""
    return _gauss_functional(2.0 / sigma**2, "capacity")


def biawgn_dispersion(sigma: float) -> float:
    """Dispersion (bits^2) of the BIAWGN channel, by quadrature."""
    return _gauss_functional(2.0 / sigma**2, "dispersion")


def sigma_for_capacity(capacity: float) -> float:
    """Noise level of the BIAWGN channel whose capacity equals ``capacity``."""
    if not 0.0 < capacity < 1.0:
        raise ValueError("capacity must lie strictly inside (0, 1)")
    f = lambda log_s: biawgn_capacity(math.exp(log_s)) - capacity
    return math.exp(optimize.brentq(f, math.log(1e-2), math.log(1e3), xtol=1e-13))


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    """Noise std for unit-energy BPSK at the given Eb/N0 (dB) and code rate."""
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def ebn0_from_sigma(sigma: float, rate: float) -> float:
    return 10.0 * math.log10(1.0 / (2.0 * rate * sigma**2))


def _gauss_functional(mean: float, which: str) -> float:
    # LLR of BIAWGN ~ N(m, 2m); integrate the folded kernels over the real line
    sd = math.sqrt(2.0 * mean)
    info = lambda l: _info_kernels(np.abs(np.atleast_1d(l)))
    if which == "capacity":
        f = lambda l: info(l)[0][0] * stats.norm.pdf(l, mean, sd)
        return float(_quad(f, mean, sd))
    cap = _gauss_functional(mean, "capacity")
    f = lambda l: info(l)[1][0] * stats.norm.pdf(l, mean, sd)
    second = _quad(f, mean, sd)
    return float(max(second - cap * cap, 0.0))


def _quad(f, mean, sd):
    from scipy import integrate

    lo, hi = mean - 40 * sd, mean + 40 * sd
    pts = [x for x in (0.0, mean) if lo < x < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def _info_kernels(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-|l| first and second moments of the information density (bits).

    For a pair of outputs ``+a`` / ``-a`` the information density takes the
    values ``1 + log2(1-p)`` and ``1 + log2(p)`` with ``p = 1/(1+e^a)``.
    ``a`` may contain ``inf``.
    """
    a = np.asarray(a, dtype=float)
    finite = np.isfinite(a)
    af = np.where(finite, a, 0.0)
    log_q = -np.log1p(np.exp(-af))          # ln(1-p)
    log_p = -(af + np.log1p(np.exp(-af)))   # ln p
    p = np.exp(log_p)
    good = 1.0 + log_q / LN2
    bad = 1.0 + log_p / LN2
    first = (1.0 - p) * good + p * bad
    second = (1.0 - p) * good**2 + p * bad**2
    first = np.where(finite, first, 1.0)
    second = np.where(finite, second, 1.0)
    return first, second


# ---------------------------------------------------------------------------
# Folded law: distribution of |L|
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldedLaw:
    """Discrete distribution of ``|L|`` (nats), ``inf`` allowed."""

    abs_llr: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.abs_llr, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        if a.shape != w.shape or a.ndim != 1:
            raise ValueError("abs_llr and weight must be 1-D arrays of equal length")
        if np.any(w < 0) or np.any(a < 0):
            raise ValueError("weights and magnitudes must be nonnegative")
        keep = w > 0
        object.__setattr__(self, "abs_llr", a[keep])
        object.__setattr__(self, "weight", w[keep])

    @property
    def law(self) -> "FoldedLaw":
        return self

    @cached_property
    def finite_part(self) -> tuple[np.ndarray, np.ndarray]:
        keep = np.isfinite(self.abs_llr)
        return self.abs_llr[keep], self.weight[keep]

    @cached_property
    def perfect_weight(self) -> float:
        return float(self.weight[~np.isfinite(self.abs_llr)].sum())

    @cached_property
    def capacity(self) -> float:
        first, _ = _info_kernels(self.abs_llr)
        return float(np.clip(np.dot(self.weight, first), 0.0, 1.0))

    @cached_property
    def dispersion(self) -> float:
        a = self.abs_llr
        finite = np.isfinite(a)
        af = np.where(finite, a, 0.0)
        log_q = -np.log1p(np.exp(-af))
        log_p = -(af + np.log1p(np.exp(-af)))
        p = np.exp(log_p)
        cap = self.capacity
        dg = 1.0 + log_q / LN2 - cap
        db = 1.0 + log_p / LN2 - cap
        var = np.where(finite, (1.0 - p) * dg**2 + p * db**2, (1.0 - cap) ** 2)
        return float(max(np.dot(self.weight, var), 0.0))

    @cached_property
    def bhattacharyya(self) -> float:
        a = self.abs_llr
        sech = np.where(np.isfinite(a), 1.0 / np.cosh(np.where(np.isfinite(a), a, 0.0) / 2.0), 0.0)
        return float(np.clip(np.dot(self.weight, sech), 0.0, 1.0))

    @cached_property
    def mean_llr(self) -> float:
        """Mean of the signed LLR implied by symmetry (``inf`` if any atom is perfect)."""
        a = self.abs_llr
        if np.any(~np.isfinite(a)):
            return math.inf
        return float(np.dot(self.weight, a * np.tanh(a / 2.0)))


# ---------------------------------------------------------------------------
# Channel descriptor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BmsChannel:
    """Parametric BMS channel: ``BEC(eps)``, ``BSC(p)`` or ``BIAWGN(sigma)``."""

    kind: str
    parameter: float

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        x = float(self.parameter)
        object.__setattr__(self, "parameter", x)
        if kind == "BEC":
            ok = 0.0 <= x <= 1.0
        elif kind == "BSC":
            ok = 0.0 <= x <= 0.5
        elif kind == "BIAWGN":
            ok = x > 0.0 and math.isfinite(x)
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")
        if not ok:
            raise ValueError(f"parameter {x} out of range for {kind}")

    @classmethod
    def bec(cls, eps: float) -> "BmsChannel":
        return cls("BEC", eps)

    @classmethod
    def bsc(cls, p: float) -> "BmsChannel":
        return cls("BSC", p)

    @classmethod
    def biawgn(cls, sigma: float) -> "BmsChannel":
        return cls("BIAWGN", sigma)

    @classmethod
    def with_capacity(cls, kind: str, capacity: float) -> "BmsChannel":
        kind = kind.upper()
        if kind == "BEC":
            return cls.bec(1.0 - capacity)
        if kind == "BSC":
            return cls.bsc(h2_inv(1.0 - capacity))
        return cls.biawgn(sigma_for_capacity(capacity))

    @property
    def llr_magnitude(self) -> float:
        """|LLR| of a BSC output; ``inf`` for a noiseless BSC."""
        p = self.parameter
        return math.inf if p == 0.0 else math.log((1.0 - p) / p)

    @cached_property
    def law(self) -> FoldedLaw:
        """Exact folded law for BEC/BSC; a default-grid density for BIAWGN."""
        if self.kind == "BEC":
            return FoldedLaw(np.array([0.0, math.inf]), np.array([self.parameter, 1.0 - self.parameter]))
        if self.kind == "BSC":
            return FoldedLaw(np.array([self.llr_magnitude]), np.array([1.0]))
        return density_from_channel(self).law

    @property
    def capacity(self) -> float:
        if self.kind == "BEC":
            return 1.0 - self.parameter
        if self.kind == "BSC":
            return 1.0 - h2(self.parameter)
        return biawgn_capacity(self.parameter)

    def __str__(self) -> str:
        return f"{self.kind}({self.parameter:g})"


# ---------------------------------------------------------------------------
# Quantized density
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LlrDensity:
    """Probability mass on a uniform LLR grid plus an atom at ``+inf``.

    ``mass[j]`` sits at LLR ``(j - (bins-1)/2) * pitch``; the grid spans
    ``[-grid_half_width, +grid_half_width]``. ``meta`` records how the
    density was produced (quantization parameters, snapping error, ...).
    """

    grid_half_width: float
    bins: int
    mass: np.ndarray
    mass_at_plus_infinity: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.bins < 3 or self.bins % 2 == 0:
            raise ValueError(f"bins must be odd and >= 3, got {self.bins}")
        if not self.grid_half_width > 0:
            raise ValueError("grid_half_width must be positive")
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.bins,):
            raise ValueError(f"mass must have shape ({self.bins},), got {m.shape}")
        if np.any(m < -1e-15) or self.mass_at_plus_infinity < -1e-15:
            raise ValueError("masses must be nonnegative")
        m = np.clip(m, 0.0, None)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "mass_at_plus_infinity", float(max(self.mass_at_plus_infinity, 0.0)))
        total = m.sum() + self.mass_at_plus_infinity
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"total mass must be 1, got {total!r}")

    @property
    def pitch(self) -> float:
        return 2.0 * self.grid_half_width / (self.bins - 1)

    @property
    def center(self) -> int:
        return (self.bins - 1) // 2

    @property
    def llr(self) -> np.ndarray:
        return (np.arange(self.bins) - self.center) * self.pitch

    @cached_property
    def law(self) -> FoldedLaw:
        c = self.center
        folded = self.mass[c:].copy()
        folded[1:] += self.mass[c - 1::-1]
        a = np.arange(c + 1) * self.pitch
        return FoldedLaw(np.append(a, math.inf), np.append(folded, self.mass_at_plus_infinity))

    @property
    def capacity(self) -> float:
        return self.law.capacity

    @property
    def dispersion(self) -> float:
        return self.law.dispersion

    @property
    def bhattacharyya(self) -> float:
        return self.law.bhattacharyya

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum() + self.mass_at_plus_infinity)

    def same_grid(self, other: "LlrDensity") -> bool:
        return self.bins == other.bins and self.grid_half_width == other.grid_half_width

    def is_bec(self) -> bool:
        """True when all finite mass sits at LLR 0."""
        c = self.center
        return bool(np.all(np.delete(self.mass, c) == 0.0))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "llr-density/1",
            "grid_half_width": self.grid_half_width,
            "bins": self.bins,
            "mass": self.mass.tolist(),
            "mass_at_plus_infinity": self.mass_at_plus_infinity,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LlrDensity":
        if d.get("format") != "llr-density/1":
            raise ValueError("not an llr-density/1 record")
        return cls(
            grid_half_width=float(d["grid_half_width"]),
            bins=int(d["bins"]),
            mass=np.asarray(d["mass"], dtype=float),
            mass_at_plus_infinity=float(d["mass_at_plus_infinity"]),
            meta=dict(d.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LlrDensity":
        return cls.from_dict(json.loads(text))


def perfect_density(bins: int = DEFAULT_BINS, grid_half_width: float = DEFAULT_HALF_WIDTH) -> LlrDensity:
    return LlrDensity(grid_half_width, bins, np.zeros(bins), 1.0, meta={"channel": "perfect"})


def density_from_channel(
    ch: BmsChannel,
    bins: int = DEFAULT_BINS,
    grid_half_width: float = DEFAULT_HALF_WIDTH,
    align: bool = True,
) -> LlrDensity:
    """Discretize a channel's LLR density under the all-zero input.

    For the BSC with ``align=True`` the grid pitch is shrunk (never the
    atom moved) so that ``±ln((1-p)/p)`` fall exactly on bin centers; with
    ``align=False`` the atoms are snapped to the nearest bin and the
    snapping error is stored in ``meta["snap_error"]``.
    """
    if bins < 3 or bins % 2 == 0:
        raise ValueError(f"bins must be odd and >= 3, got {bins}")
    if not grid_half_width > 0:
        raise ValueError("grid_half_width must be positive")
    c = (bins - 1) // 2
    meta = {"channel": str(ch), "bins": bins, "grid_half_width": grid_half_width}
    mass = np.zeros(bins)

    if ch.kind == "BEC":
        mass[c] = ch.parameter
        meta["grid_half_width"] = grid_half_width
        return LlrDensity(grid_half_width, bins, mass, 1.0 - ch.parameter, meta=meta)

    if ch.kind == "BSC":
        p = ch.parameter
        if p == 0.0:
            return LlrDensity(grid_half_width, bins, mass, 1.0, meta=meta)
        mag = ch.llr_magnitude
        if mag > grid_half_width:
            raise ValueError(
                f"grid_half_width {grid_half_width} is smaller than the BSC atom {mag:.6g}"
            )
        pitch = 2.0 * grid_half_width / (bins - 1)
        if align and mag > 0:
            k = max(1, math.ceil(mag / pitch - 1e-12))
            pitch = mag / k
            grid_half_width = pitch * c
            snap = 0.0
        else:
            k = int(round(mag / pitch))
            snap = abs(k * pitch - mag)
        mass[c + k] += 1.0 - p
        mass[c - k] += p
        meta.update(grid_half_width=grid_half_width, snap_error=snap, aligned=bool(align))
        return LlrDensity(grid_half_width, bins, mass, 0.0, meta=meta)

    # BIAWGN: L ~ N(2/s^2, 4/s^2) integrated per bin, tails folded to the edges
    s = ch.parameter
    mean, sd = 2.0 / s**2, 2.0 / s
    pitch = 2.0 * grid_half_width / (bins - 1)
    edges = (np.arange(bins + 1) - c - 0.5) * pitch
    cdf = special.ndtr((edges - mean) / sd)
    mass = np.diff(cdf)
    mass[0] += cdf[0]
    mass[-1] += 1.0 - cdf[-1]
    mass /= mass.sum()
    return LlrDensity(grid_half_width, bins, mass, 0.0, meta=meta)


# ---------------------------------------------------------------------------
# Polar transforms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _box_table(bins: int, pitch: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Output placement for the check-node operation on |l| bin indices.

    Returns lower index, upper index and the weight of the upper index for
    linear splitting of each pair's output magnitude between its two
    neighbouring bin centers.
    """
    c = (bins - 1) // 2
    a = np.arange(c + 1) * pitch
    x, y = np.meshgrid(a, a, indexing="ij")
    out = np.minimum(x, y) + np.log1p(np.exp(-(x + y))) - np.log1p(np.exp(-np.abs(x - y)))
    out = np.clip(out, 0.0, None) / pitch
    lo = np.floor(out).astype(np.int64)
    frac = out - lo
    hi = np.minimum(lo + 1, c)
    lo.setflags(write=False)
    hi.setflags(write=False)
    frac.setflags(write=False)
    return lo.ravel(), hi.ravel(), frac.ravel()


def polar_minus(d: LlrDensity) -> LlrDensity:
    """Check-node (box) self-convolution: the density of ``W-``."""
    c, n = d.center, d.bins
    m, inf = d.mass, d.mass_at_plus_infinity
    pos = m[c:].copy()
    neg = np.concatenate(([0.0], m[c - 1::-1]))
    lo, hi, frac = _box_table(n, d.pitch)
    same = (np.outer(pos, pos) + np.outer(neg, neg)).ravel()
    diff = (np.outer(pos, neg) + np.outer(neg, pos)).ravel()
    size = c + 1
    out_pos = np.bincount(lo, same * (1.0 - frac), size) + np.bincount(hi, same * frac, size)
    out_neg = np.bincount(lo, diff * (1.0 - frac), size) + np.bincount(hi, diff * frac, size)
    out = np.zeros(n)
    out[c:] += out_pos
    out[c::-1] += out_neg
    # inf box l = l
    out += 2.0 * inf * m
    return LlrDensity(d.grid_half_width, n, out, inf * inf, meta=_child_meta(d, "-"))


def polar_plus(d: LlrDensity) -> LlrDensity:
    """Variable-node (ordinary) self-convolution: the density of ``W+``."""
    c, n = d.center, d.bins
    m, inf = d.mass, d.mass_at_plus_infinity
    full = np.convolve(m, m)  # index r <-> LLR (r - 2c) * pitch
    out = full[c:3 * c + 1].copy()
    out[0] += full[:c].sum()
    out[-1] += full[3 * c + 1:].sum()
    return LlrDensity(d.grid_half_width, n, out, 2.0 * inf - inf * inf, meta=_child_meta(d, "+"))


def _child_meta(d: LlrDensity, sign: str) -> dict:
    meta = dict(d.meta)
    meta["path"] = meta.get("path", "") + sign
    return meta


# ---------------------------------------------------------------------------
# Functionals (spec-level names)
# ---------------------------------------------------------------------------

def capacity(d) -> float:
    """Capacity in bits per channel use."""
    return d.law.capacity


def dispersion(d) -> float:
    """Dispersion (variance of the information density) in bits^2."""
    return d.law.dispersion


def bhattacharyya(d) -> float:
    return d.law.bhattacharyya


# ---------------------------------------------------------------------------
# Sub-channel tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Node:
    path: str
    density: LlrDensity
    capacity: float
    dispersion: float
    bhattacharyya: float

    @property
    def law(self) -> FoldedLaw:
        return self.density.law


@dataclass(frozen=True, eq=False)
class SubchannelTree:
    """All ``2**(lam+1) - 1`` nodes of ``lam`` polarization steps.

    Nodes are keyed by their sign path (``""`` is the root, ``"-+"`` is
    ``(W-)+``). Leaves are ordered with the all-minus leaf first, so leaf
    ``i`` descends from ``W-`` iff ``i < 2**(lam-1)``.
    """

    channel: BmsChannel | None
    lam: int
    nodes: dict
    bins: int
    grid_half_width: float

    @property
    def root(self) -> Node:
        return self.nodes[""]

    def leaf_paths(self) -> list[str]:
        return [_path_of(i, self.lam) for i in range(2**self.lam)]

    @property
    def leaves(self) -> list[Node]:
        return [self.nodes[p] for p in self.leaf_paths()]

    def subtree(self, path: str) -> "SubchannelTree":
        depth = self.lam - len(path)
        nodes = {k[len(path):]: v for k, v in self.nodes.items() if k.startswith(path)}
        return SubchannelTree(self.channel if path == "" else None, depth, nodes, self.bins, self.grid_half_width)

    def children(self, path: str) -> tuple[Node, Node]:
        return self.nodes[path + "-"], self.nodes[path + "+"]

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes.values())

    @property
    def leaf_capacities(self) -> np.ndarray:
        return np.array([n.capacity for n in self.leaves])

    @property
    def leaf_dispersions(self) -> np.ndarray:
        return np.array([n.dispersion for n in self.leaves])

    @property
    def is_bec(self) -> bool:
        return self.channel is not None and self.channel.kind == "BEC"

    @property
    def metadata(self) -> dict:
        return {
            "channel": str(self.channel) if self.channel else "custom",
            "lambda": self.lam,
            "bins": self.bins,
            "grid_half_width": self.grid_half_width,
        }

    # -- caching between CLI runs ----------------------------------------

    def save(self, path) -> None:
        record = {
            "format": "subchannel-tree/1",
            "channel": None if self.channel is None else [self.channel.kind, self.channel.parameter],
            "lambda": self.lam,
            "nodes": {k: n.density.to_dict() for k, n in self.nodes.items()},
        }
        with open(path, "w") as fh:
            json.dump(record, fh)

    @classmethod
    def load(cls, path) -> "SubchannelTree":
        with open(path) as fh:
            record = json.load(fh)
        if record.get("format") != "subchannel-tree/1":
            raise ValueError("not a subchannel-tree/1 record")
        ch = None if record["channel"] is None else BmsChannel(*record["channel"])
        nodes = {k: _make_node(k, LlrDensity.from_dict(v)) for k, v in record["nodes"].items()}
        root = nodes[""].density
        return cls(ch, int(record["lambda"]), nodes, root.bins, root.grid_half_width)


def _path_of(i: int, lam: int) -> str:
    return "".join("+" if (i >> (lam - 1 - b)) & 1 else "-" for b in range(lam))


def _make_node(path: str, d: LlrDensity) -> Node:
    law = d.law
    return Node(path, d, law.capacity, law.dispersion, law.bhattacharyya)


def build_tree(
    ch: BmsChannel | LlrDensity,
    lam: int,
    bins: int = DEFAULT_BINS,
    grid_half_width: float = DEFAULT_HALF_WIDTH,
) -> SubchannelTree:
    """Run density evolution for ``lam`` polarization steps."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if isinstance(ch, LlrDensity):
        root, channel = ch, None
    else:
        root, channel = density_from_channel(ch, bins, grid_half_width), ch
    nodes = {"": _make_node("", root)}
    frontier = [""]
    for _ in range(lam):
        nxt = []
        for path in frontier:
            d = nodes[path].density
            nodes[path + "-"] = _make_node(path + "-", polar_minus(d))
            nodes[path + "+"] = _make_node(path + "+", polar_plus(d))
            nxt += [path + "-", path + "+"]
        frontier = nxt
    return SubchannelTree(channel, lam, nodes, root.bins, root.grid_half_width)


def bec_tree(eps: float, lam: int, bins: int = 3, grid_half_width: float = 1.0) -> SubchannelTree:
    """Exact BEC tree using the closed-form erasure recursion (tiny grid)."""
    ch = BmsChannel.bec(eps)
    nodes = {}

    def add(path, e):
        mass = np.zeros(bins)
        mass[(bins - 1) // 2] = e
        d = LlrDensity(grid_half_width, bins, mass, 1.0 - e, meta={"channel": str(ch), "path": path})
        nodes[path] = _make_node(path, d)
        if len(path) < lam:
            add(path + "-", 2.0 * e - e * e)
            add(path + "+", e * e)

    add("", ch.parameter)
    return SubchannelTree(ch, lam, nodes, bins, grid_half_width)
