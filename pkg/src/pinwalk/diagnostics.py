"""Verifiable functionals of the rescaled path measures.

Continuity moduli (plain and same-excursion-restricted), the truncated
uniform-integrability functional C(a) with its per-length values c_n(a), the
conditioned tail bound f_n(a) with its (1 + a^2) envelope, the first-passage
series n^{3/2} P(T = n), and Monte Carlo tightness sweeps over ensembles.

Height thresholds of the form max y^2 >= n*a are decided in integer
arithmetic (exact rational comparison), never by floating square roots.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _fast
from .assembly import RescaledPath, replica_rng, sample_polymer
from .contacts import make_law
from .excursions import build_kernel
from .walk import WalkParams, first_passage_series

__all__ = [
    "modulus",
    "modified_modulus",
    "moduli_grid",
    "c_of_a",
    "C_functional",
    "c_table",
    "lemma_bound",
    "lemma_table",
    "ck_series",
    "tightness_sweep",
    "modulus_curves",
    "CTable",
    "LemmaTable",
    "CkTable",
    "TightnessGrid",
    "ModulusCurves",
]


# ---------------------------------------------------------------------------
# continuity moduli
# ---------------------------------------------------------------------------


def _prep(path: RescaledPath):
    x = np.abs(np.asarray(path.grid, dtype=float))
    zeros = path.zero_indices()
    return x, zeros


def modulus(path: RescaledPath, delta: float) -> float:
    """sup |x_t - x_s| over |t - s| <= delta, exactly, in O(N)."""
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    x, _ = _prep(path)
    return float(_fast._gamma_full(x, delta * path.n))


def modified_modulus(path: RescaledPath, delta: float) -> float:
    """Same sup restricted to s, t in the closure of one excursion."""
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    x, zeros = _prep(path)
    return float(_fast._gamma_tilde(x, delta * path.n, zeros))


def moduli_grid(path: RescaledPath, deltas) -> tuple:
    """(plain, restricted) moduli over a grid of deltas, sharing one pass."""
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0.0) or np.any(deltas > 1.0):
        raise ValueError("delta grid must lie in (0, 1]")
    x, zeros = _prep(path)
    g = np.empty(deltas.shape[0])
    gt = np.empty(deltas.shape[0])
    _fast._moduli_multi(x, deltas * path.n, zeros, g, gt)
    return g, gt


# ---------------------------------------------------------------------------
# exact height-threshold helpers
# ---------------------------------------------------------------------------


def _least_h_sq_ge(x: Fraction) -> int:
    """Smallest integer h >= 0 with h*h >= x."""
    if x <= 0:
        return 0
    h = math.isqrt(int(x))
    while h * h < x:
        h += 1
    return h


def _least_h_sq_gt(x: Fraction) -> int:
    """Smallest integer h >= 0 with h*h > x."""
    if x < 0:
        return 0
    h = math.isqrt(int(x))
    while h * h <= x:
        h += 1
    return h


# ---------------------------------------------------------------------------
# ceiling-constrained excursion masses
# ---------------------------------------------------------------------------


class CeilingMassTable:
    """Unnormalized bulk-excursion masses under a height ceiling.

    ``cdf_mass(n, h)`` is P(S_1 > 0, ..., S_{n-1} > 0, S_n = 0, max <= h)
    (for n = 1: the stay event, whose max is 0).  Dividing by ``mass(n)``
    gives the conditioned law of the excursion maximum; everything is a
    forward DP over levels 1..h, one sweep per ceiling.
    """

    def __init__(self, params: WalkParams, n_max: int):
        self.params = params
        self.n_max = 0
        self._mass = None
        self._cum2 = None
        self._bmat = None
        self.grow(n_max)

    def grow(self, n_max: int) -> None:
        if n_max <= self.n_max:
            return
        p = self.params.p
        r = self.params.stay
        hmax = n_max // 2
        mass = np.zeros(n_max + 1)
        mass[1] = r
        if n_max >= 2:
            fp = first_passage_series(self.params, n_max)
            mass[2:] = fp[1:]
        b = np.zeros((hmax + 1, n_max + 1))
        b[:, 1] = r
        for h in range(1, hmax + 1):
            w = np.zeros(h)
            w[0] = p
            for n in range(2, n_max + 1):
                b[h, n] = p * w[0]
                new = np.zeros(h)
                new += r * w
                new[1:] += p * w[:-1]
                new[:-1] += p * w[1:]
                w = new
        self._mass = mass
        self._bmat = b
        # the ceiling stops binding at h = floor(n/2); pin that region to the
        # unconstrained mass so the max-distribution is exactly normalized
        cdf = np.array(b)
        for n in range(n_max + 1):
            cap = min(n // 2, hmax)
            cdf[cap:, n] = mass[n]
        pmf = np.zeros_like(b)
        pmf[0] = cdf[0]
        pmf[1:] = cdf[1:] - cdf[:-1]
        # cum2[h, n] = sum_{h' >= h} h'^2 (cdf(n,h') - cdf(n,h'-1))
        h2 = (np.arange(hmax + 1, dtype=float) ** 2)[:, None]
        self._cum2 = np.cumsum((h2 * pmf)[::-1], axis=0)[::-1]
        self._cdf = cdf
        self.n_max = n_max

    def mass(self, n: int) -> float:
        return float(self._mass[n])

    def cdf_mass(self, n: int, h: int) -> float:
        """Mass of {bulk event, max <= h}."""
        if h < 0:
            return 0.0
        h = min(h, min(n // 2, self._bmat.shape[0] - 1))
        return float(self._cdf[h, n])

    def tail_second_moment(self, n: int, h_min: int) -> float:
        """sum_{h >= h_min} h^2 * (unnormalized P(max = h))."""
        if h_min > min(n // 2, self._cum2.shape[0] - 1):
            return 0.0
        return float(self._cum2[max(h_min, 0), n])


_CEIL_TABLES: dict = {}


def _ceiling_table(params: WalkParams, n_max: int) -> CeilingMassTable:
    tab = _CEIL_TABLES.get(params.p)
    if tab is None:
        tab = CeilingMassTable(params, n_max)
        _CEIL_TABLES[params.p] = tab
    else:
        tab.grow(n_max)
    return tab


# ---------------------------------------------------------------------------
# c_n(a), C(a), the conditioned tail bound
# ---------------------------------------------------------------------------

_DP_LIMIT = 500
_ENUM_LIMIT = 14


def c_of_a(walk: WalkParams, n: int, a: float, mode: str = "exact",
           samples: int = 10_000, rng=None):
    """c_n(a) = E[(max_i y_i^2 / n) 1{max_i y_i^2 / n > a}] under the bulk law.

    ``mode``: "exact" (level-indexed DP, n <= 500), "enum" (3^n sum,
    n <= 14), or "mc" (kernel sampling; returns (estimate, stderr)).
    """
    if n < 1:
        raise ValueError("excursion length must be >= 1")
    if a < 0.0:
        raise ValueError("threshold must be >= 0")
    if mode == "mc":
        return _c_of_a_mc(walk, n, a, samples, rng)
    if mode == "enum":
        if n > _ENUM_LIMIT:
            raise ValueError(f"enumeration mode needs n <= {_ENUM_LIMIT}")
        from .enumeration import c_of_a_bruteforce

        return c_of_a_bruteforce(walk, n, a)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if n > _DP_LIMIT:
        raise ValueError(f"exact mode needs n <= {_DP_LIMIT}; use mode='mc'")
    if n == 1:
        return 0.0
    tab = _ceiling_table(walk, n)
    mass = tab.mass(n)
    if mass <= 0.0:
        raise ValueError(f"bulk event has probability 0 for t={n}, p={walk.p}")
    h_min = _least_h_sq_gt(Fraction(n) * Fraction(a))
    return tab.tail_second_moment(n, h_min) / (n * mass)


def _c_of_a_mc(walk: WalkParams, n: int, a: float, samples: int, rng):
    if rng is None:
        raise ValueError("mc mode needs a generator")
    kern = build_kernel(walk, n, "bulk")
    thr = Fraction(n) * Fraction(a)
    vals = np.empty(samples)
    for i in range(samples):
        m = int(kern.sample_values(rng).max(initial=0))
        vals[i] = (m * m / n) if m * m > thr else 0.0
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return est, stderr


@dataclass(frozen=True)
class CTable:
    """c_n(a) on a grid plus the running sup C(a) with its argmax."""

    p: float
    n_max: int
    a_grid: tuple
    values: np.ndarray  # shape (len(a_grid), n_max+1); values[ai, n] = c_n(a)
    sup: np.ndarray
    argmax_n: np.ndarray

    def rows(self):
        for ai, a in enumerate(self.a_grid):
            for n in range(1, self.n_max + 1):
                yield {"n": n, "a": a, "value": float(self.values[ai, n])}

    def sup_rows(self):
        for ai, a in enumerate(self.a_grid):
            yield {
                "a": a,
                "C": float(self.sup[ai]),
                "argmax_n": int(self.argmax_n[ai]),
            }


def c_table(walk: WalkParams, n_max: int, a_grid) -> CTable:
    """Exact c_n(a) for every n <= n_max over a grid of thresholds."""
    if n_max < 1 or n_max > _DP_LIMIT:
        raise ValueError(f"need 1 <= n_max <= {_DP_LIMIT}")
    a_grid = tuple(float(a) for a in a_grid)
    tab = _ceiling_table(walk, n_max)
    values = np.zeros((len(a_grid), n_max + 1))
    for ai, a in enumerate(a_grid):
        fa = Fraction(a)
        for n in range(2, n_max + 1):
            mass = tab.mass(n)
            if mass <= 0.0:
                continue
            h_min = _least_h_sq_gt(Fraction(n) * fa)
            values[ai, n] = tab.tail_second_moment(n, h_min) / (n * mass)
    sup = values.max(axis=1)
    argmax = values.argmax(axis=1)
    return CTable(p=walk.p, n_max=n_max, a_grid=a_grid, values=values,
                  sup=sup, argmax_n=argmax)


def C_functional(walk: WalkParams, n_max: int, a: float) -> tuple:
    """Truncated sup over n <= n_max of c_n(a); returns (value, argmax_n)."""
    ct = c_table(walk, n_max, [a])
    return float(ct.sup[0]), int(ct.argmax_n[0])


def lemma_bound(walk: WalkParams, n: int, a: float) -> tuple:
    """(f_n(a), f_n(a) * (1 + a^2)) where f_n(a) is the conditioned
    probability that max_i y_i^2 / n reaches a.

    For n = 1 the conditioned path is identically 0: f_1(a) = 0 for a > 0.
    """
    if n < 1:
        raise ValueError("excursion length must be >= 1")
    if a < 0.0:
        raise ValueError("threshold must be >= 0")
    if n == 1:
        f = 1.0 if a == 0.0 else 0.0
        return f, f * (1.0 + a * a)
    tab = _ceiling_table(walk, n)
    mass = tab.mass(n)
    if mass <= 0.0:
        raise ValueError(f"bulk event has probability 0 for t={n}, p={walk.p}")
    h = _least_h_sq_ge(Fraction(n) * Fraction(a))
    f = 1.0 - tab.cdf_mass(n, h - 1) / mass
    if f < 0.0:
        f = 0.0
    return f, f * (1.0 + a * a)


@dataclass(frozen=True)
class LemmaTable:
    p: float
    n_grid: tuple
    a_grid: tuple
    f: np.ndarray       # shape (len(n_grid), len(a_grid))
    bound: np.ndarray   # f * (1 + a^2)

    def rows(self):
        for ni, n in enumerate(self.n_grid):
            for ai, a in enumerate(self.a_grid):
                yield {"n": n, "a": a, "f": float(self.f[ni, ai]),
                       "bound": float(self.bound[ni, ai])}

    def max_bound(self) -> float:
        return float(self.bound.max())


def lemma_table(walk: WalkParams, n_grid, a_grid) -> LemmaTable:
    n_grid = tuple(int(n) for n in n_grid)
    a_grid = tuple(float(a) for a in a_grid)
    _ceiling_table(walk, max(n_grid))
    f = np.zeros((len(n_grid), len(a_grid)))
    for ni, n in enumerate(n_grid):
        for ai, a in enumerate(a_grid):
            f[ni, ai] = lemma_bound(walk, n, a)[0]
    asq = 1.0 + np.asarray(a_grid) ** 2
    return LemmaTable(p=walk.p, n_grid=n_grid, a_grid=a_grid, f=f,
                      bound=f * asq[None, :])


# ---------------------------------------------------------------------------
# first-passage asymptotics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CkTable:
    p: float
    n_grid: tuple
    values: np.ndarray  # n^{3/2} P(T = n)

    def rows(self):
        for n, v in zip(self.n_grid, self.values):
            yield {"n": n, "value": float(v)}

    def doubling_ratios(self):
        by_n = dict(zip(self.n_grid, self.values))
        for n in self.n_grid:
            if 2 * n in by_n and by_n[2 * n] > 0:
                yield {"n": n, "ratio": float(by_n[n] / by_n[2 * n])}


def ck_series(walk: WalkParams, n_grid) -> CkTable:
    """n^{3/2} P(T = n) along a grid, from one exact DP sweep."""
    n_grid = tuple(int(n) for n in n_grid)
    if min(n_grid) < 1:
        raise ValueError("horizons must be >= 1")
    fp = first_passage_series(walk, max(n_grid))
    vals = np.array([n ** 1.5 * fp[n - 1] for n in n_grid])
    return CkTable(p=walk.p, n_grid=n_grid, values=vals)


# ---------------------------------------------------------------------------
# ensemble sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TightnessGrid:
    gamma: float
    replicas: int
    rows_gamma: tuple    # dicts: N, delta, gamma, exceedance, stderr
    rows_tilde: tuple


@dataclass(frozen=True)
class ModulusCurves:
    quantiles: tuple
    rows: tuple  # dicts: N, delta, quantile, gamma, gamma_tilde


def _binom_stderr(phat: float, m: int) -> float:
    return math.sqrt(phat * (1.0 - phat) / m)


def _sweep_chunk(args):
    (p, family, n, lo, hi, master_seed, deltas, gamma, signed, keep_values) = args
    walk = WalkParams(p)
    law = make_law(n, family, walk)
    deltas = np.asarray(deltas, dtype=float)
    ws = deltas * n
    cnt_g = np.zeros(deltas.shape[0], dtype=np.int64)
    cnt_t = np.zeros(deltas.shape[0], dtype=np.int64)
    vals_g = np.empty((hi - lo, deltas.shape[0])) if keep_values else None
    vals_t = np.empty((hi - lo, deltas.shape[0])) if keep_values else None
    g = np.empty(deltas.shape[0])
    gt = np.empty(deltas.shape[0])
    sqrt_n = math.sqrt(n)
    for r in range(lo, hi):
        path = sample_polymer(law, walk, replica_rng(master_seed, r), signed)
        src = np.concatenate([[0], np.abs(path)])
        x = src / sqrt_n
        zeros = np.nonzero(src == 0)[0].astype(np.int64)
        _fast._moduli_multi(x.astype(float), ws, zeros, g, gt)
        cnt_g += g > gamma
        cnt_t += gt > gamma
        if keep_values:
            vals_g[r - lo] = g
            vals_t[r - lo] = gt
    return n, lo, cnt_g, cnt_t, hi - lo, vals_g, vals_t


def _run_chunks(tasks, workers: int):
    if workers <= 1 or len(tasks) == 1:
        for t in tasks:
            yield _sweep_chunk(t)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_sweep_chunk, tasks)


def tightness_sweep(
    walk: WalkParams,
    family,
    n_list,
    replicas: int,
    deltas,
    gamma: float,
    master_seed: int,
    workers: int = 1,
    signed: bool = False,
    chunk: int = 2_500,
) -> TightnessGrid:
    """Empirical exceedance of both moduli over seeded ensembles.

    For each N and delta, the fraction of rescaled paths whose modulus
    exceeds gamma, with binomial standard errors; worker count and chunking
    do not affect the result.
    """
    deltas = tuple(float(d) for d in deltas)
    if not deltas or not tuple(n_list):
        raise ValueError("delta grid and N list must be nonempty")
    if min(deltas) <= 0.0 or max(deltas) > 1.0:
        raise ValueError("delta grid must lie in (0, 1]")
    rows_g = []
    rows_t = []
    for n in n_list:
        tasks = [
            (walk.p, family, int(n), lo, min(lo + chunk, replicas),
             master_seed, deltas, gamma, signed, False)
            for lo in range(0, replicas, chunk)
        ]
        cnt_g = np.zeros(len(deltas), dtype=np.int64)
        cnt_t = np.zeros(len(deltas), dtype=np.int64)
        total = 0
        for _, _, cg, ct, m, _, _ in _run_chunks(tasks, workers):
            cnt_g += cg
            cnt_t += ct
            total += m
        for di, d in enumerate(deltas):
            pg = cnt_g[di] / total
            pt = cnt_t[di] / total
            rows_g.append({"N": int(n), "delta": d, "gamma": gamma,
                           "exceedance": float(pg),
                           "stderr": _binom_stderr(pg, total)})
            rows_t.append({"N": int(n), "delta": d, "gamma": gamma,
                           "exceedance": float(pt),
                           "stderr": _binom_stderr(pt, total)})
    return TightnessGrid(gamma=float(gamma), replicas=replicas,
                         rows_gamma=tuple(rows_g), rows_tilde=tuple(rows_t))


def modulus_curves(
    walk: WalkParams,
    family,
    n_list,
    replicas: int,
    deltas,
    master_seed: int,
    quantiles=(0.5, 0.9, 0.99, 1.0),
    workers: int = 1,
    signed: bool = False,
    chunk: int = 2_500,
) -> ModulusCurves:
    """Quantiles of both moduli per delta over seeded ensembles."""
    deltas = tuple(float(d) for d in deltas)
    quantiles = tuple(float(q) for q in quantiles)
    rows = []
    for n in n_list:
        tasks = [
            (walk.p, family, int(n), lo, min(lo + chunk, replicas),
             master_seed, deltas, 0.0, signed, True)
            for lo in range(0, replicas, chunk)
        ]
        parts_g = []
        parts_t = []
        order = []
        for nn, lo, _, _, _, vg, vt in _run_chunks(tasks, workers):
            order.append((lo, vg, vt))
        order.sort(key=lambda it: it[0])
        for _, vg, vt in order:
            parts_g.append(vg)
            parts_t.append(vt)
        vg = np.concatenate(parts_g, axis=0)
        vt = np.concatenate(parts_t, axis=0)
        for di, d in enumerate(deltas):
            for q in quantiles:
                rows.append({
                    "N": int(n), "delta": d, "quantile": q,
                    "gamma": float(np.quantile(vg[:, di], q)),
                    "gamma_tilde": float(np.quantile(vt[:, di], q)),
                })
    return ModulusCurves(quantiles=quantiles, rows=tuple(rows))
