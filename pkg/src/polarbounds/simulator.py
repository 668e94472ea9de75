"""Monte-Carlo simulation of the concatenated scheme over the BEC.

``N1`` rows, each a length-``2**lam`` polar code; column ``i`` of the
``N1 x 2**lam`` input array is the codeword of outer code ``i``. Outer codes
are random linear codes decoded by exact ML (GF(2) elimination).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

MODES = ("genie", "true_sc")
TIE_BREAKS = ("error", "random")


# ---------------------------------------------------------------------------
# GF(2)
# ---------------------------------------------------------------------------

def _bits_to_int(bits) -> int:
    b = np.asarray(bits, dtype=np.uint8)
    return int.from_bytes(np.packbits(b, bitorder="little").tobytes(), "little")


def _int_to_bits(x: int, n: int) -> np.ndarray:
    raw = np.frombuffer(x.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n]


@dataclass(frozen=True)
class BinaryMatrix:
    """GF(2) matrix with each row packed into a Python int (bit ``j`` = column ``j``)."""

    rows: int
    cols: int
    data: tuple

    def __post_init__(self):
        if self.rows < 0 or self.cols <= 0:
            raise ValueError("cols must be positive and rows nonnegative")
        if len(self.data) != self.rows:
            raise ValueError("row count mismatch")
        limit = 1 << self.cols
        if any(not 0 <= r < limit for r in self.data):
            raise ValueError("row wider than cols")

    @classmethod
    def from_array(cls, a) -> "BinaryMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=np.uint8) & 1)
        return cls(a.shape[0], a.shape[1], tuple(_bits_to_int(r) for r in a))

    @classmethod
    def random(cls, rows: int, cols: int, rng: np.random.Generator) -> "BinaryMatrix":
        return cls.from_array(rng.integers(0, 2, size=(rows, cols), dtype=np.uint8)) if rows else cls(0, cols, ())

    def to_array(self) -> np.ndarray:
        if self.rows == 0:
            return np.zeros((0, self.cols), dtype=np.uint8)
        return np.stack([_int_to_bits(r, self.cols) for r in self.data])

    def rank(self, column_mask: int | None = None) -> int:
        """Rank, optionally of the sub-matrix on the columns set in ``column_mask``."""
        rows = self.data if column_mask is None else [r & column_mask for r in self.data]
        return _rank(rows)

    def encode(self, info: int) -> int:
        """Codeword ``info * G`` as a packed int (bit ``i`` of ``info`` picks row ``i``)."""
        out = 0
        for i, r in enumerate(self.data):
            if info >> i & 1:
                out ^= r
        return out

    def column(self, j: int) -> int:
        return sum(((r >> j) & 1) << i for i, r in enumerate(self.data))


def _rank(rows) -> int:
    basis: list[int] = []
    for r in rows:
        for b in basis:
            r = min(r, r ^ b)
        if r:
            basis.append(r)
    return len(basis)


def gf2_solve(equations: Sequence[int], rhs: Sequence[int], nvars: int, rng: np.random.Generator | None = None):
    """Solve ``<eq_j, x> = rhs_j`` over GF(2).

    Returns ``(x, nullity, consistent)``. Free variables are drawn from
    ``rng`` (zero without one); an inconsistent system yields ``x = None``.
    """
    pivots: dict[int, tuple[int, int]] = {}
    for eq, b in zip(equations, rhs):
        for p, (peq, pb) in pivots.items():
            if eq >> p & 1:
                eq ^= peq
                b ^= pb
        if eq == 0:
            if b:
                return None, nvars - len(pivots), False
            continue
        p = eq.bit_length() - 1
        # keep the pivot table reduced
        for q, (qeq, qb) in list(pivots.items()):
            if qeq >> p & 1:
                pivots[q] = (qeq ^ eq, qb ^ b)
        pivots[p] = (eq, b)
    free = [v for v in range(nvars) if v not in pivots]
    x = 0
    if rng is not None:
        for v in free:
            if rng.integers(0, 2):
                x |= 1 << v
    for p, (eq, b) in pivots.items():
        # eq has a single pivot p; the remaining bits are free variables
        val = b ^ (bin(eq & x & ~(1 << p)).count("1") & 1)
        if val:
            x |= 1 << p
    return x, len(free), True


def ml_decode_bec_subcode(g: BinaryMatrix, received, erased, rng: np.random.Generator | None = None):
    """Exact ML decoding of a linear code on the BEC.

    Returns ``(info_bits, status)`` with status ``"unique"``, ``"ambiguous"``
    (a random consistent solution if ``rng`` is given, otherwise the one with
    free bits zero) or ``"inconsistent"`` (``info_bits`` is ``None``).
    """
    received = np.asarray(received, dtype=np.uint8)
    erased = np.asarray(erased, dtype=bool)
    k = g.rows
    if k == 0:
        return np.zeros(0, dtype=np.uint8), "unique"
    cols = [g.column(j) for j in range(g.cols) if not erased[j]]
    rhs = [int(received[j]) for j in range(g.cols) if not erased[j]]
    x, nullity, ok = gf2_solve(cols, rhs, k, rng)
    if not ok:
        return None, "inconsistent"
    return _int_to_bits(x, k), "unique" if nullity == 0 else "ambiguous"


# ---------------------------------------------------------------------------
# polar transform
# ---------------------------------------------------------------------------

def polar_encode(u) -> np.ndarray:
    """Apply ``F^{(x)lam}`` (``F = [[1,0],[1,1]]``) along the last axis."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("last dimension must be a power of two")
    h = n // 2
    while h >= 1:
        v = x.reshape(x.shape[:-1] + (n // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h //= 2
    return x


def synthetic_erasures(e: np.ndarray) -> np.ndarray:
    """Erasure flags of each ``u_i`` given the true ``u_{<i}`` (last axis = ``2**lam``)."""
    n = e.shape[-1]
    if n == 1:
        return e.copy()
    h = n // 2
    a, b = e[..., :h], e[..., h:]
    return np.concatenate([synthetic_erasures(a | b), synthetic_erasures(a & b)], axis=-1)


# ---------------------------------------------------------------------------
# scheme and simulation
# ---------------------------------------------------------------------------

def _trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[stream, int(index), 0, 0]))


@dataclass(frozen=True)
class SchemeInstance:
    lam: int
    n1: int
    generators: tuple
    seed: int

    @property
    def bits(self) -> tuple:
        return tuple(g.rows for g in self.generators)

    @property
    def rank_deficient(self) -> tuple:
        return tuple(i for i, g in enumerate(self.generators) if g.rank() < g.rows)

    @classmethod
    def random(cls, lam: int, n1: int, bits: Sequence[int], seed: int = 0) -> "SchemeInstance":
        bits = tuple(int(b) for b in bits)
        if len(bits) != 2**lam or any(not 0 <= b <= n1 for b in bits):
            raise ValueError("need 2**lam bit counts in [0, n1]")
        gens = tuple(BinaryMatrix.random(b, n1, _trial_rng(seed, 1, i)) for i, b in enumerate(bits))
        return cls(lam, n1, gens, int(seed))


@dataclass
class TrialReport:
    mode: str
    eps: float
    seed: int
    trials: int
    frame_errors: int
    first_error_counts: list
    block_errors: list
    bits: list
    lam: int
    n1: int
    rank_deficient: list = field(default_factory=list)
    ensemble: bool = False
    tie_break: str = "error"

    @property
    def fer(self) -> float:
        return self.frame_errors / self.trials

    def interval(self, level: float = 0.95) -> tuple[float, float]:
        return clopper_pearson(self.frame_errors, self.trials, level)

    def to_dict(self) -> dict:
        d = asdict(self)
        lo, hi = self.interval()
        d.update(fer=self.fer, ci_low=lo, ci_high=hi, ci_level=0.95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def simulate_bec(scheme: SchemeInstance, eps: float, trials: int, mode: str = "genie",
                 ensemble: bool = False, tie_break: str = "error", batch: int = 4096) -> TrialReport:
    """Estimate the frame error rate of ``scheme`` on BEC(``eps``).

    Trial ``t`` draws everything from a Philox stream keyed by the scheme
    seed at counter ``t``, so results do not depend on batching. With
    ``ensemble=True`` every trial also draws fresh outer generators, which
    estimates the random-code ensemble average instead of one code.

    ``tie_break="error"`` counts every ambiguous outer block as a frame
    error; ``"random"`` picks a uniformly random consistent message (true
    ML with random tie resolution), which is right with probability
    ``2**-nullity``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if tie_break not in TIE_BREAKS:
        raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
    lucky = tie_break == "random"
    n, n1 = 2**scheme.lam, scheme.n1
    first = [0] * n
    blocks = [0] * n
    frame_errors = 0
    memo: dict = {}
    for start in range(0, trials, batch):
        idx = range(start, min(trials, start + batch))
        rngs = [_trial_rng(scheme.seed, 0, t) for t in idx]
        erased = np.stack([r.random((n1, n)) < eps for r in rngs])
        if mode == "genie":
            synth = synthetic_erasures(erased)
            for j, rng in enumerate(rngs):
                gens = _generators(scheme, rng) if ensemble else scheme.generators
                bad = _genie_trial(gens, synth[j], memo if not ensemble else None, rng if lucky else None)
                frame_errors += _tally(bad, first, blocks)
        else:
            for j, rng in enumerate(rngs):
                gens = _generators(scheme, rng) if ensemble else scheme.generators
                bad = _sc_trial(gens, erased[j], rng, lucky)
                frame_errors += _tally(bad, first, blocks)
    return TrialReport(mode, float(eps), scheme.seed, trials, frame_errors, first, blocks,
                       list(scheme.bits), scheme.lam, n1, list(scheme.rank_deficient), ensemble, tie_break)


def _generators(scheme: SchemeInstance, rng: np.random.Generator) -> tuple:
    return tuple(BinaryMatrix.random(g.rows, g.cols, rng) for g in scheme.generators)


def _tally(bad: list, first: list, blocks: list) -> int:
    for i, b in enumerate(bad):
        blocks[i] += b
    for i, b in enumerate(bad):
        if b:
            first[i] += 1
            return 1
    return 0


def _genie_trial(gens, synth: np.ndarray, memo: dict | None, rng=None) -> list:
    bad = []
    for i, g in enumerate(gens):
        if g.rows == 0:
            bad.append(False)
            continue
        mask = _bits_to_int(~synth[:, i])
        key = (i, mask)
        nullity = memo.get(key) if memo is not None else None
        if nullity is None:
            nullity = g.rows - g.rank(mask)
            if memo is not None:
                memo[key] = nullity
        if nullity and rng is not None:
            bad.append(bool(rng.random() >= 2.0**-nullity))
        else:
            bad.append(nullity > 0)
    return bad


def _sc_trial(gens, erased: np.ndarray, rng: np.random.Generator, lucky: bool = False) -> list:
    """Successive decoding with erasure propagation; returns per-block error flags."""
    n1, n = erased.shape
    info = [rng.integers(0, 2, size=g.rows, dtype=np.uint8) for g in gens]
    u = np.zeros((n1, n), dtype=np.uint8)
    for i, g in enumerate(gens):
        if g.rows:
            u[:, i] = _int_to_bits(g.encode(_bits_to_int(info[i])), n1)
    y = polar_encode(u)
    bad = [False] * n

    def decide(i, val, er):
        g = gens[i]
        if g.rows == 0:
            return np.zeros(n1, dtype=np.uint8)
        est, status = ml_decode_bec_subcode(g, val, er, rng)
        if est is None:
            est = rng.integers(0, 2, size=g.rows, dtype=np.uint8)
        wrong = not np.array_equal(est, info[i])
        bad[i] = wrong if lucky else (status != "unique" or wrong)
        return _int_to_bits(g.encode(_bits_to_int(est)), n1)

    _sc(y, erased.copy(), 0, decide)
    return bad


def _sc(val: np.ndarray, er: np.ndarray, offset: int, decide) -> np.ndarray:
    n = val.shape[1]
    if n == 1:
        return decide(offset, val[:, 0], er[:, 0])[:, None]
    h = n // 2
    v1, v2, e1, e2 = val[:, :h], val[:, h:], er[:, :h], er[:, h:]
    xa = _sc(v1 ^ v2, e1 | e2, offset, decide)
    w = v1 ^ xa
    # two looks at the same bit; disagreement (after a wrong decision) is an erasure
    conflict = ~e1 & ~e2 & (w != v2)
    vb = np.where(e2, w, v2)
    eb = (e1 & e2) | conflict
    xb = _sc(vb, eb, offset + h, decide)
    return np.concatenate([xa ^ xb, xb], axis=1)
