"""Brute-force references: exhaustive sums over all 3^t step sequences.

Everything here recomputes laws from first principles (enumerate, weigh,
normalize) without touching the DP kernels, so it can serve as an
independent oracle for them.  Horizons are therefore capped around 3^14.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import stats

from .contacts import ContactSetLaw
from .walk import WalkParams

__all__ = [
    "step_matrix",
    "sequence_weights",
    "excursion_law_bruteforce",
    "event_probability_bruteforce",
    "first_return_law_bruteforce",
    "contact_law_bruteforce",
    "polymer_law_bruteforce",
    "c_of_a_bruteforce",
    "lemma_f_bruteforce",
    "pmf_bruteforce",
    "multinomial_chi2",
]

_MAX_T = 14
_CACHED_STEPS: dict = {}


def step_matrix(t: int) -> np.ndarray:
    """All 3^t increment sequences as an int8 matrix (rows are sequences)."""
    if t < 1:
        raise ValueError("horizon must be >= 1")
    if t > _MAX_T:
        raise ValueError(f"enumeration capped at t <= {_MAX_T}")
    m = _CACHED_STEPS.get(t)
    if m is None:
        cols = [
            np.tile(np.repeat(np.array([-1, 0, 1], dtype=np.int8), 3 ** (t - 1 - j)), 3**j)
            for j in range(t)
        ]
        m = np.stack(cols, axis=1)
        _CACHED_STEPS[t] = m
    return m


def sequence_weights(params: WalkParams, steps: np.ndarray) -> np.ndarray:
    """Free-walk probability of each increment sequence."""
    t = steps.shape[1]
    moves = np.count_nonzero(steps, axis=1)
    p = params.p
    r = params.stay
    if r == 0.0:
        w = np.where(moves == t, p**t, 0.0)
    else:
        w = p ** moves.astype(float) * r ** (t - moves).astype(float)
    return w


def _masks(steps: np.ndarray):
    paths = np.cumsum(steps.astype(np.int64), axis=1)
    interior_pos = np.all(paths[:, :-1] > 0, axis=1)
    bulk = interior_pos & (paths[:, -1] == 0)
    final = interior_pos & (paths[:, -1] > 0)
    return paths, bulk, final


def excursion_law_bruteforce(params: WalkParams, t: int, kind: str) -> dict:
    """{path tuple: conditional probability} by exhaustive normalization."""
    steps = step_matrix(t)
    w = sequence_weights(params, steps)
    paths, bulk, final = _masks(steps)
    mask = bulk if kind == "bulk" else final
    if kind not in ("bulk", "final"):
        raise ValueError(f"unknown kind {kind!r}")
    total = float(w[mask].sum())
    if total <= 0.0:
        raise ValueError(f"conditioning event has probability 0 (t={t}, p={params.p})")
    return {
        tuple(int(v) for v in paths[i]): float(w[i]) / total
        for i in np.nonzero(mask)[0]
    }


def event_probability_bruteforce(params: WalkParams, t: int, kind: str) -> float:
    steps = step_matrix(t)
    w = sequence_weights(params, steps)
    _, bulk, final = _masks(steps)
    mask = bulk if kind == "bulk" else final
    return float(w[mask].sum())


def first_return_law_bruteforce(params: WalkParams, m_max: int):
    """First-return law of |S| to 0: (P(R = t) for t = 1..m_max, P(R > m_max))."""
    steps = step_matrix(m_max)
    w = sequence_weights(params, steps)
    paths = np.abs(np.cumsum(steps.astype(np.int64), axis=1))
    ret = np.zeros(m_max + 1)
    alive = np.ones(steps.shape[0], dtype=bool)
    for t in range(1, m_max + 1):
        hit = alive & (paths[:, t - 1] == 0)
        ret[t] = float(w[hit].sum())
        alive &= paths[:, t - 1] != 0
    return ret, float(w[alive].sum())


def contact_law_bruteforce(law: ContactSetLaw) -> dict:
    """{contact tuple: probability} over all 2^N subsets, renormalized."""
    n = law.n
    if n > 16:
        raise ValueError("subset enumeration capped at N <= 16")
    weights = {}
    for mask in range(1 << n):
        contacts = tuple(i + 1 for i in range(n) if mask >> i & 1)
        w = 1.0
        prev = 0
        for c in contacts:
            w *= law.bulk_weight(prev, c)
            prev = c
        w *= law.final_weight(prev)
        weights[contacts] = w
    total = sum(weights.values())
    if total <= 0.0:
        raise ValueError("all contact configurations have zero weight")
    return {k: v / total for k, v in weights.items()}


def polymer_law_bruteforce(law: ContactSetLaw, walk: WalkParams) -> dict:
    """{path tuple: probability} for the composite measure, from scratch.

    Uses only weight tables and enumerated excursion laws; infeasible paths
    (negative or non-positive interior segments) are omitted (mass 0).
    """
    n = law.n
    contact_probs = contact_law_bruteforce(law)
    exc_bulk = {}
    exc_final = {}
    out = {}
    steps = step_matrix(n)
    paths = np.cumsum(steps.astype(np.int64), axis=1)
    for row in paths:
        vals = tuple(int(v) for v in row)
        contacts = tuple(i + 1 for i, v in enumerate(vals) if v == 0)
        prob = contact_probs.get(contacts, 0.0)
        if prob == 0.0:
            continue
        prev = 0
        ok = True
        for c in contacts:
            t = c - prev
            if t not in exc_bulk:
                exc_bulk[t] = excursion_law_bruteforce(walk, t, "bulk")
            seg = tuple(v - 0 for v in vals[prev:c])
            q = exc_bulk[t].get(seg, 0.0)
            if q == 0.0:
                ok = False
                break
            prob *= q
            prev = c
        if ok and prev < n:
            t = n - prev
            if t not in exc_final:
                exc_final[t] = excursion_law_bruteforce(walk, t, "final")
            seg = tuple(vals[prev:])
            q = exc_final[t].get(seg, 0.0)
            if q == 0.0:
                ok = False
            else:
                prob *= q
        if ok and prob > 0.0:
            out[vals] = out.get(vals, 0.0) + prob
    return out


def c_of_a_bruteforce(walk: WalkParams, n: int, a: float) -> float:
    """E[(max y^2/n) 1{max y^2/n > a}] under the bulk law, by 3^n sum."""
    if n == 1:
        return 0.0
    steps = step_matrix(n)
    w = sequence_weights(walk, steps)
    paths, bulk, _ = _masks(steps)
    if not bulk.any():
        raise ValueError("conditioning event has probability 0")
    mx = paths[bulk].max(axis=1)
    mx = np.maximum(mx, 0)
    wb = w[bulk]
    thr = Fraction(n) * Fraction(a)
    keep = np.array([m * m > thr for m in mx.tolist()])
    return float((wb[keep] * (mx[keep] ** 2 / n)).sum() / wb.sum())


def lemma_f_bruteforce(walk: WalkParams, n: int, a: float) -> float:
    """P(max y^2/n >= a | bulk event) by 3^n sum."""
    if n == 1:
        return 1.0 if a == 0.0 else 0.0
    steps = step_matrix(n)
    w = sequence_weights(walk, steps)
    paths, bulk, _ = _masks(steps)
    mx = np.maximum(paths[bulk].max(axis=1), 0)
    wb = w[bulk]
    thr = Fraction(n) * Fraction(a)
    keep = np.array([m * m >= thr for m in mx.tolist()])
    return float(wb[keep].sum() / wb.sum())


def pmf_bruteforce(params: WalkParams, k: int, b: int) -> float:
    steps = step_matrix(k)
    w = sequence_weights(params, steps)
    paths = np.cumsum(steps.astype(np.int64), axis=1)
    return float(w[paths[:, -1] == b].sum())


def multinomial_chi2(probs: dict, counts: dict, total: int, min_expected: float = 5.0):
    """Goodness-of-fit p-value with small expected cells pooled.

    ``probs`` maps outcomes to exact probabilities (summing to ~1), ``counts``
    holds observed frequencies keyed the same way.
    """
    items = sorted(probs.items(), key=lambda kv: (-kv[1], kv[0]))
    obs = []
    exp = []
    pool_o = 0.0
    pool_e = 0.0
    for key, pr in items:
        e = pr * total
        o = counts.get(key, 0)
        if e >= min_expected:
            obs.append(o)
            exp.append(e)
        else:
            pool_o += o
            pool_e += e
    seen = sum(counts.values())
    pool_o += total - seen  # outcomes with exact probability ~0, if any
    if pool_e > 0.0 or pool_o > 0.0:
        obs.append(pool_o)
        exp.append(pool_e)
    obs = np.asarray(obs, dtype=float)
    exp = np.asarray(exp, dtype=float)
    exp = exp * obs.sum() / exp.sum()
    if len(obs) < 2:
        return 1.0
    res = stats.chisquare(obs, exp)
    return float(res.pvalue)
