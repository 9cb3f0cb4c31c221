"""Conditioned excursion laws of the lazy walk, evaluated and sampled exactly.

Two families of conditioned laws are supported, both defined relative to the
free walk started at 0:

* ``bulk``:  (S_1, ..., S_t) conditioned on S_1 > 0, ..., S_{t-1} > 0, S_t = 0
  (for t = 1 the conditioning event degenerates to S_1 = 0);
* ``final``: (S_1, ..., S_t) conditioned on S_1 > 0, ..., S_t > 0.

Sampling goes through backward survival tables: the chance of completing the
conditioning event in ``m`` more steps from level ``x`` depends only on
``(m, x)``, so a single pair of length-indexed tables (first passage to zero
in exactly m steps; staying positive for m steps) serves every kernel built
for the same walk.  Rows are rescaled so their maximum is 1, with the scale
carried separately in log space; one-step conditioned weights are ratios
within consecutive rows, so the scales cancel where it matters.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import _fast
from .walk import WalkParams

__all__ = [
    "Excursion",
    "ConditionedKernel",
    "SurvivalTables",
    "build_kernel",
    "sample_excursion",
    "path_probability",
    "event_probability",
    "return_law",
    "clear_kernel_cache",
]

_H_TRIM = 1e-120  # drop scaled bulk-survival entries below this (row max is 1)
_G_TRIM = 1.0 - 1e-16  # beyond this the stay-positive probability is stored as 1


class SurvivalTables:
    """Length-indexed survival rows shared by every kernel of one walk.

    ``h`` rows: scaled P(first passage to 0 in exactly m steps | level x),
    with per-row log scale factors.  ``g`` rows: P(stay positive for m steps
    | level x), unscaled (these sit in [K̄-ish, 1], no underflow).  Row m
    covers levels x = 1..width; getters supply the boundary conventions.
    """

    def __init__(self, params: WalkParams):
        self.params = params
        self._lock = threading.RLock()
        self._h_rows: list = [None, np.array([1.0])]  # m = 1: only x = 1
        self._h_logscale = [0.0, math.log(params.p)]
        self._g_rows: list = [None, np.array([1.0 - params.p])]
        self._flat = None  # (hflat, hoff, hwid, gflat, goff, gwid)

    @property
    def max_m(self) -> int:
        return len(self._h_rows) - 1

    def ensure(self, m: int) -> None:
        """Grow both tables so rows up to m exist."""
        if m <= self.max_m:
            return
        p = self.params.p
        r = self.params.stay
        with self._lock:
            while len(self._h_rows) - 1 < m:
                prev = self._h_rows[-1]
                wp = prev.shape[0]
                raw = np.zeros(wp + 1)
                raw[:wp] += r * prev  # stay at x
                raw[: wp - 1] += p * prev[1:]  # down from x+1
                raw[1:] += p * prev  # up from x-1 (x >= 2)
                mx = raw.max()
                # mx > 0 always: level 1 can repeat its passage time profile
                raw /= mx
                keep = np.nonzero(raw >= _H_TRIM)[0]
                raw = raw[: keep[-1] + 1] if keep.size else raw[:1]
                self._h_rows.append(raw)
                self._h_logscale.append(self._h_logscale[-1] + math.log(mx))

                gprev = self._g_rows[-1]
                wg = gprev.shape[0]
                graw = np.empty(wg + 1)
                for x in range(1, wg + 2):
                    up = gprev[x] if x < wg else 1.0  # g_{m}(x+1), index x+1-1
                    st = gprev[x - 1] if x - 1 < wg else 1.0
                    dn = 0.0 if x == 1 else (gprev[x - 2] if x - 2 < wg else 1.0)
                    graw[x - 1] = p * up + r * st + p * dn
                keep = np.nonzero(graw < _G_TRIM)[0]
                graw = graw[: keep[-1] + 1] if keep.size else graw[:1]
                self._g_rows.append(graw)
                self._flat = None

    # -- getters (Python mirror of the jitted ones) -------------------------

    def h_scaled(self, m: int, x: int) -> float:
        if m == 0:
            return 1.0 if x == 0 else 0.0
        row = self._h_rows[m]
        if x < 1 or x > row.shape[0]:
            return 0.0
        return float(row[x - 1])

    def g_value(self, m: int, x: int) -> float:
        if x <= 0:
            return 0.0
        if m == 0:
            return 1.0
        row = self._g_rows[m]
        if x > row.shape[0]:
            return 1.0
        return float(row[x - 1])

    def h_log(self, m: int, x: int) -> float:
        """log of the true (unscaled) first-passage mass."""
        v = self.h_scaled(m, x)
        if v == 0.0:
            return -math.inf
        return math.log(v) + self._h_logscale[m]

    # -- event probabilities ------------------------------------------------

    def log_bulk_event(self, t: int) -> float:
        """log P(S_1 > 0, ..., S_{t-1} > 0, S_t = 0)."""
        if t < 1:
            raise ValueError("excursion length must be >= 1")
        if t == 1:
            r = self.params.stay
            return math.log(r) if r > 0.0 else -math.inf
        self.ensure(t - 1)
        return math.log(self.params.p) + self.h_log(t - 1, 1)

    def log_final_event(self, t: int) -> float:
        """log P(S_1 > 0, ..., S_t > 0)."""
        if t < 1:
            raise ValueError("excursion length must be >= 1")
        self.ensure(max(t - 1, 1))
        g = self.g_value(t - 1, 1)
        return math.log(self.params.p) + math.log(g)

    def flat_arrays(self):
        """Flattened copies of both tables for the jitted samplers."""
        with self._lock:
            if self._flat is None:
                h = self._h_rows[1:]
                g = self._g_rows[1:]
                hwid = np.array([0] + [row.shape[0] for row in h], dtype=np.int64)
                gwid = np.array([0] + [row.shape[0] for row in g], dtype=np.int64)
                hoff = np.zeros(hwid.shape[0], dtype=np.int64)
                goff = np.zeros(gwid.shape[0], dtype=np.int64)
                hoff[1:] = np.cumsum(hwid[:-1])[0:]
                goff[1:] = np.cumsum(gwid[:-1])[0:]
                hflat = np.concatenate(h) if h else np.zeros(0)
                gflat = np.concatenate(g) if g else np.zeros(0)
                self._flat = (hflat, hoff, hwid, gflat, goff, gwid)
            return self._flat

    def trim(self, m: int) -> None:
        """Drop rows above m (cache eviction support)."""
        with self._lock:
            if m + 1 < len(self._h_rows):
                keep = max(m, 1)
                del self._h_rows[keep + 1 :]
                del self._h_logscale[keep + 1 :]
                del self._g_rows[keep + 1 :]
                self._flat = None


@dataclass(frozen=True)
class Excursion:
    """A realized excursion; bulk ends at 0, final stays positive."""

    values: tuple
    kind: str

    def __post_init__(self) -> None:
        vals = tuple(int(v) for v in self.values)
        t = len(vals)
        if t == 0:
            raise ValueError("excursion must have positive length")
        if self.kind == "bulk":
            if t == 1:
                ok = vals[0] == 0
            else:
                ok = all(v > 0 for v in vals[:-1]) and vals[-1] == 0
        elif self.kind == "final":
            ok = all(v > 0 for v in vals)
        else:
            raise ValueError(f"unknown excursion kind {self.kind!r}")
        if not ok:
            raise ValueError(f"values violate the {self.kind} constraints")
        object.__setattr__(self, "values", vals)

    @property
    def t(self) -> int:
        return len(self.values)


class ConditionedKernel:
    """Step-by-step sampler/evaluator for one conditioned law.

    Survival values are views into the shared :class:`SurvivalTables`: with
    ``m = t - j`` steps remaining, the bulk table row ``m`` plays the role of
    the backward success probability at time ``j``.
    """

    def __init__(self, params: WalkParams, t: int, kind: str, tables: SurvivalTables):
        if t < 1:
            raise ValueError("excursion length must be >= 1")
        if kind not in ("bulk", "final"):
            raise ValueError(f"unknown kernel kind {kind!r}")
        self.params = params
        self.t = t
        self.kind = kind
        self._tables = tables
        tables.ensure(max(t - 1, 1))
        if kind == "bulk":
            self._log_event = tables.log_bulk_event(t)
            if self._log_event == -math.inf:
                raise ValueError(
                    f"bulk conditioning event has probability 0 for t={t}, p={params.p}"
                )
        else:
            self._log_event = tables.log_final_event(t)

    # -- survival table view -------------------------------------------------

    def survival_scaled(self, j: int, x: int) -> float:
        """Row-rescaled backward success probability at time j, level x."""
        if not (0 <= j <= self.t):
            raise ValueError("time index out of range")
        m = self.t - j
        if j == 0:
            # starting point: nonzero only at the origin
            return 1.0 if x == 0 else 0.0
        if self.kind == "bulk":
            return self._tables.h_scaled(m, x)
        return self._tables.g_value(m, x)

    def step_probs(self, j: int, x: int) -> dict:
        """Conditioned one-step law out of (j, x); keys are target levels."""
        if not (0 <= j <= self.t - 1):
            raise ValueError("time index out of range")
        p = self.params.p
        r = self.params.stay
        m = self.t - j - 1
        tab = self._tables
        if self.kind == "bulk":
            w = {x + 1: p * tab.h_scaled(m, x + 1), x: r * tab.h_scaled(m, x),
                 x - 1: p * tab.h_scaled(m, x - 1)}
        else:
            w = {x + 1: p * tab.g_value(m, x + 1), x: r * tab.g_value(m, x),
                 x - 1: p * tab.g_value(m, x - 1)}
        s = w[x + 1] + w[x] + w[x - 1]
        if s <= 0.0:
            raise ValueError(f"state (j={j}, x={x}) is unreachable for this kernel")
        return {k: v / s for k, v in w.items()}

    # -- sampling and evaluation ---------------------------------------------

    def sample_values(self, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(self.t)
        out = np.empty(self.t, dtype=np.int64)
        hflat, hoff, hwid, gflat, goff, gwid = self._tables.flat_arrays()
        if self.kind == "bulk":
            _fast._sample_conditioned(
                hflat, hoff, hwid, self.t, self.params.p, self.params.stay, True, u, out
            )
        else:
            _fast._sample_conditioned(
                gflat, goff, gwid, self.t, self.params.p, self.params.stay, False, u, out
            )
        return out

    def path_logprob(self, values) -> float:
        vals = np.asarray(values, dtype=np.int64)
        if vals.shape[0] != self.t:
            raise ValueError(f"path length {vals.shape[0]} != kernel length {self.t}")
        logp = 0.0
        x = 0
        for j in range(self.t):
            nxt = int(vals[j])
            if abs(nxt - x) > 1:
                return -math.inf
            probs = self.step_probs(j, x)
            q = probs[nxt]
            if q <= 0.0:
                return -math.inf
            logp += math.log(q)
            x = nxt
        return logp

    @property
    def log_event_probability(self) -> float:
        return self._log_event


# ---------------------------------------------------------------------------
# kernel cache
# ---------------------------------------------------------------------------

_CACHE_LOCK = threading.RLock()
_TABLES: dict = {}
_KERNELS: dict = {}
_CACHE_BUDGET = 300_000  # bound on the summed t of cached kernels


def _get_tables(params: WalkParams) -> SurvivalTables:
    with _CACHE_LOCK:
        tab = _TABLES.get(params.p)
        if tab is None:
            tab = SurvivalTables(params)
            _TABLES[params.p] = tab
        return tab


def build_kernel(params: WalkParams, t: int, kind: str) -> ConditionedKernel:
    """Memoized kernel for (p, t, kind); large-t entries are evicted first."""
    key = (params.p, t, kind)
    with _CACHE_LOCK:
        k = _KERNELS.get(key)
        if k is not None:
            return k
    kernel = ConditionedKernel(params, t, kind, _get_tables(params))
    with _CACHE_LOCK:
        _KERNELS.setdefault(key, kernel)
        total = sum(key_t for (_, key_t, _) in _KERNELS)
        while total > _CACHE_BUDGET and len(_KERNELS) > 1:
            largest = max(_KERNELS, key=lambda kk: kk[1])
            if largest == key:
                break
            total -= largest[1]
            del _KERNELS[largest]
        return _KERNELS[key]


def clear_kernel_cache() -> None:
    with _CACHE_LOCK:
        _KERNELS.clear()
        _TABLES.clear()


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def sample_excursion(kernel: ConditionedKernel, rng: np.random.Generator) -> Excursion:
    """Draw one excursion; never rejects, the kernel is exact."""
    return Excursion(tuple(kernel.sample_values(rng)), kernel.kind)


def path_probability(kernel: ConditionedKernel, path) -> float:
    """Exact conditional probability of a concrete excursion path."""
    values = path.values if isinstance(path, Excursion) else path
    lp = kernel.path_logprob(values)
    return 0.0 if lp == -math.inf else math.exp(lp)


def event_probability(params: WalkParams, t: int, kind: str) -> float:
    """Probability of the raw conditioning event for the walk started at 0."""
    tab = _get_tables(params)
    if kind == "bulk":
        return math.exp(tab.log_bulk_event(t))
    if kind == "final":
        return math.exp(tab.log_final_event(t))
    raise ValueError(f"unknown kernel kind {kind!r}")


def return_law(params: WalkParams, t_max: int):
    """First-return law of |S| to zero, as renewal weights.

    Returns ``(kren, kbar)`` where ``kren[t]`` (t = 1..t_max) is the
    probability that |S| first returns to 0 at time t, and ``kbar[t]`` is the
    probability it has not returned by time t (``kbar[0] = 1``).  Relative to
    the raw conditioning events, returns and survivals of |S| count both
    signs, hence the factor 2 on everything except the stay-at-zero return.
    These are the weights for which sum_{t<=M} kren[t] + kbar[M] = 1.
    """
    if t_max < 1:
        raise ValueError("horizon must be >= 1")
    tab = _get_tables(params)
    tab.ensure(max(t_max - 1, 1))
    kren = np.zeros(t_max + 1)
    kbar = np.zeros(t_max + 1)
    kren[1] = params.stay
    kbar[0] = 1.0
    for t in range(1, t_max + 1):
        if t >= 2:
            kren[t] = 2.0 * math.exp(tab.log_bulk_event(t))
        kbar[t] = 2.0 * math.exp(tab.log_final_event(t))
    return kren, kbar
