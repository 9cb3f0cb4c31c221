"""Exact finite-horizon computations for the lazy symmetric lattice walk.

The walk takes steps +1 and -1 with probability ``p`` each and stays put
with probability ``1 - 2p``, for ``p`` in (0, 1/2].  Everything here is
computed by exact dynamic programming (no Monte Carlo): free-walk marginals,
first-passage laws into the non-positive half-line, reflection-principle
identities, ruin probabilities and a local-CLT comparison against the
Gaussian density.

Floating DP tables are carried in extended precision (``np.longdouble``)
internally so that probability mass is conserved to ~1e-15 even at horizon
1e4; results are returned as ordinary floats.  An optional exact-rational
mode (``fractions.Fraction``) is available for small horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "WalkParams",
    "LatticePath",
    "step_distribution",
    "exact_pmf",
    "exact_pmf_row",
    "first_passage_pmf",
    "first_passage_series",
    "reflection_first_passage",
    "pinned_positive_pmf",
    "pinned_positive_row",
    "ruin_probability",
    "local_clt_deviation",
]


@dataclass(frozen=True)
class WalkParams:
    """Parameters of the lazy symmetric walk: up-step probability ``p``."""

    p: float

    def __post_init__(self) -> None:
        if not (0.0 < self.p <= 0.5):
            raise ValueError(f"up-step probability must lie in (0, 1/2], got {self.p}")

    @property
    def stay(self) -> float:
        return 1.0 - 2.0 * self.p

    @property
    def sigma(self) -> float:
        """Per-step standard deviation, sqrt(2p)."""
        return math.sqrt(2.0 * self.p)


@dataclass(frozen=True)
class LatticePath:
    """Integer path (y_1, ..., y_N) with the convention y_0 = 0.

    Increments must be lattice steps, i.e. successive differences in
    {-1, 0, +1} (including the implicit first step from 0).
    """

    values: tuple

    def __post_init__(self) -> None:
        vals = tuple(int(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("path must have positive length")
        prev = 0
        for v in vals:
            if abs(v - prev) > 1:
                raise ValueError(f"increment {v - prev} outside {{-1,0,+1}}")
            prev = v
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


def step_distribution(params: WalkParams) -> dict:
    """One-step law as a mapping {-1, 0, +1} -> probability."""
    return {+1: params.p, 0: params.stay, -1: params.p}


# ---------------------------------------------------------------------------
# free-walk marginals
# ---------------------------------------------------------------------------


def _free_row_float(p: float, k: int) -> np.ndarray:
    """P(S_k = b) for b = -k..k as a longdouble array of length 2k+1."""
    ld = np.longdouble
    pp = ld(p)
    r = ld(1) - ld(2) * pp
    v = np.array([ld(1)])
    for _ in range(k):
        new = np.zeros(v.shape[0] + 2, dtype=ld)
        new[2:] += pp * v
        new[1:-1] += r * v
        new[:-2] += pp * v
        v = new
    return v


def _free_row_rational(p: Fraction, k: int) -> list:
    r = 1 - 2 * p
    v = [Fraction(1)]
    for _ in range(k):
        new = [Fraction(0)] * (len(v) + 2)
        for i, w in enumerate(v):
            new[i + 2] += p * w
            new[i + 1] += r * w
            new[i] += p * w
        v = new
    return v


def exact_pmf_row(params: WalkParams, k: int, rational: bool = False):
    """Full marginal row P(S_k = b), b = -k..k.

    Returns a float array (or a list of Fractions in rational mode) indexed
    by b + k.
    """
    if k < 0:
        raise ValueError("horizon must be nonnegative")
    if rational:
        return _free_row_rational(Fraction(params.p), k)
    return _free_row_float(params.p, k).astype(float)


def exact_pmf(params: WalkParams, k: int, b: int, rational: bool = False):
    """P(S_k = b) for the free walk; 0 when |b| > k."""
    if k < 0:
        raise ValueError("horizon must be nonnegative")
    if abs(b) > k:
        return Fraction(0) if rational else 0.0
    row = exact_pmf_row(params, k, rational=rational)
    return row[b + k]


# ---------------------------------------------------------------------------
# first passage into the non-positive half-line
# ---------------------------------------------------------------------------


def _alive_rows_float(p: float, n: int):
    """Survival rows of the walk killed at <= 0, started from 0.

    Yields for each m = 1..n the longdouble vector v_m with v_m[x-1] =
    P(S_m = x, T > m) for x = 1..m, where T = inf{j > 0 : S_j <= 0}.
    """
    ld = np.longdouble
    pp = ld(p)
    r = ld(1) - ld(2) * pp
    v = np.array([pp])  # m = 1: only state 1, reached with prob p
    yield v
    m = 1
    while m < n:
        new = np.zeros(v.shape[0] + 1, dtype=ld)
        new[1:] += pp * v          # step +1
        new[: v.shape[0]] += r * v  # stay
        new[: v.shape[0] - 1] += pp * v[1:]  # step -1 (state 1 dies)
        v = new
        m += 1
        yield v


def first_passage_series(params: WalkParams, n_max: int) -> np.ndarray:
    """P(T = n) for n = 1..n_max in one DP sweep (index n-1)."""
    if n_max < 1:
        raise ValueError("horizon must be >= 1")
    p = params.p
    out = np.empty(n_max, dtype=np.longdouble)
    out[0] = np.longdouble(1) - np.longdouble(p)  # S_1 in {0, -1}
    if n_max >= 2:
        for m, v in enumerate(_alive_rows_float(p, n_max - 1), start=1):
            out[m] = np.longdouble(p) * v[0]  # from state 1, step -1
    return out.astype(float)


def _first_passage_rational(p: Fraction, n: int) -> Fraction:
    if n == 1:
        return 1 - p
    r = 1 - 2 * p
    v = {1: p}
    for _ in range(n - 2):
        new: dict = {}
        for x, w in v.items():
            new[x + 1] = new.get(x + 1, 0) + p * w
            new[x] = new.get(x, 0) + r * w
            if x - 1 >= 1:
                new[x - 1] = new.get(x - 1, 0) + p * w
        v = new
    return p * v.get(1, Fraction(0))


def first_passage_pmf(params: WalkParams, n: int, rational: bool = False):
    """P(T = n) with T = inf{m > 0 : S_m <= 0}, via absorbing DP."""
    if n < 1:
        raise ValueError("horizon must be >= 1")
    if rational:
        return _first_passage_rational(Fraction(params.p), n)
    return first_passage_series(params, n)[n - 1]


def reflection_first_passage(params: WalkParams, n: int, rational: bool = False):
    """P(T = n) for n >= 2 computed from free-walk marginals only.

    Counting paths by reflecting the first sub-zero visit gives
    p^2 [P(S_{n-2} = 0) - P(S_{n-2} = 2)].
    """
    if n < 2:
        raise ValueError("the two-sided difference formula needs n >= 2")
    if rational:
        p = Fraction(params.p)
        row = _free_row_rational(p, n - 2)
        k = n - 2
        at0 = row[k]
        at2 = row[k + 2] if k >= 2 else Fraction(0)
        return p * p * (at0 - at2)
    row = _free_row_float(params.p, n - 2)
    k = n - 2
    at0 = row[k]
    at2 = row[k + 2] if k >= 2 else np.longdouble(0)
    return float(np.longdouble(params.p) ** 2 * (at0 - at2))


def pinned_positive_pmf(params: WalkParams, m: int, b: int, rational: bool = False):
    """P(S_m = b, T > m) for b >= 1, by the one-sided reflection difference.

    Equals p [P(S_{m-1} = b-1) - P(S_{m-1} = b+1)].
    """
    if m < 1:
        raise ValueError("horizon must be >= 1")
    if b < 1:
        raise ValueError("endpoint must be a positive level")
    if rational:
        p = Fraction(params.p)
        row = _free_row_rational(p, m - 1)
        k = m - 1
        lo = row[b - 1 + k] if abs(b - 1) <= k else Fraction(0)
        hi = row[b + 1 + k] if abs(b + 1) <= k else Fraction(0)
        return p * (lo - hi)
    row = _free_row_float(params.p, m - 1)
    k = m - 1
    lo = row[b - 1 + k] if abs(b - 1) <= k else np.longdouble(0)
    hi = row[b + 1 + k] if abs(b + 1) <= k else np.longdouble(0)
    return float(np.longdouble(params.p) * (lo - hi))


def pinned_positive_row(params: WalkParams, m: int) -> np.ndarray:
    """P(S_m = x, T > m) for x = 1..m via the absorbing DP (index x-1).

    Independent of :func:`pinned_positive_pmf`; used to cross-check it.
    """
    if m < 1:
        raise ValueError("horizon must be >= 1")
    for j, v in enumerate(_alive_rows_float(params.p, m), start=1):
        if j == m:
            return v.astype(float)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# ruin probability
# ---------------------------------------------------------------------------


def ruin_probability(params: WalkParams, b: int) -> float:
    """P(hit level b before level 0 | start at 1), absorbing at 0 and b.

    Solved exactly over the rationals (tridiagonal elimination); for the
    symmetric lazy walk the answer is 1/b for every p.
    """
    if b < 1:
        raise ValueError("barrier must be >= 1")
    if b == 1:
        return 1.0
    p = Fraction(params.p)
    r = 1 - 2 * p
    # h(x) = p h(x+1) + r h(x) + p h(x-1), h(0) = 0, h(b) = 1;
    # states x = 1..b-1, eliminate forward then back-substitute.
    n = b - 1
    diag = [Fraction(1) - r] * n
    rhs = [Fraction(0)] * n
    rhs[-1] = p  # coupling h(b-1) <- h(b) = 1
    # sub/super diagonals are all -p
    for i in range(1, n):
        f = (-p) / diag[i - 1]
        diag[i] -= f * (-p)
        rhs[i] -= f * rhs[i - 1]
    h = [Fraction(0)] * n
    h[-1] = rhs[-1] / diag[-1]
    for i in range(n - 2, -1, -1):
        h[i] = (rhs[i] + p * h[i + 1]) / diag[i]
    return float(h[0])


# ---------------------------------------------------------------------------
# local CLT comparison
# ---------------------------------------------------------------------------


def local_clt_deviation(params: WalkParams, k: int) -> float:
    """max_b | sigma sqrt(k) P(S_k = b) - phi(b / (sigma sqrt(k))) |.

    ``phi`` is the standard Gaussian density.  For p = 1/2 the walk has
    period 2, the pmf vanishes on half the sites and the deviation is
    dominated by the Gaussian term there; the scan still returns a finite
    value.
    """
    if k < 1:
        raise ValueError("horizon must be >= 1")
    row = _free_row_float(params.p, k).astype(float)
    b = np.arange(-k, k + 1, dtype=float)
    s = params.sigma * math.sqrt(k)
    gauss = np.exp(-(b * b) / (2.0 * s * s)) / math.sqrt(2.0 * math.pi)
    return float(np.max(np.abs(s * row - gauss)))
