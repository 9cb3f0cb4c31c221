"""Assembly of the full path measure and the diffusive rescaling map.

A polymer path of length N is drawn by sampling a contact set, then filling
each gap with an independent bulk excursion and the stretch after the last
contact with a final excursion.  The zero set of the assembled path equals
the drawn contact set by construction.  Assembled paths are nonnegative;
an optional flag flips each bulk excursion to a fair random sign for
plotting-style output, which diagnostics undo by taking absolute values.

Ensembles are reproducible and scheduler-independent: replica r always uses
the generator seeded by SeedSequence((master_seed, r)) and consumes it in a
fixed order (contact draws first, then one uniform per lattice step).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .contacts import ContactSet, ContactSetLaw, sample_contact_set, set_probability
from .excursions import build_kernel, path_probability
from .walk import LatticePath, WalkParams

__all__ = [
    "RescaledPath",
    "sample_polymer",
    "exact_path_probability",
    "rescale",
    "zero_set",
    "replica_rng",
    "iter_ensemble",
]

ORACLE_MAX_N = 16


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """The per-replica stream; identical regardless of worker layout."""
    return np.random.default_rng(np.random.SeedSequence((int(master_seed), int(replica))))


def _check_consistent(law: ContactSetLaw, walk: WalkParams) -> None:
    if law.walk.p != walk.p:
        raise ValueError(
            f"law was built for p={law.walk.p}, polymer sampling asked for p={walk.p}"
        )


def sample_polymer(
    law: ContactSetLaw,
    walk: WalkParams,
    rng: np.random.Generator,
    signed: bool = False,
) -> np.ndarray:
    """One path (y_1, ..., y_N) under the composite measure."""
    _check_consistent(law, walk)
    contacts = sample_contact_set(law, rng)
    return _fill_excursions(law.n, walk, contacts, rng, signed)


def _fill_excursions(
    n: int,
    walk: WalkParams,
    contacts: ContactSet,
    rng: np.random.Generator,
    signed: bool,
) -> np.ndarray:
    path = np.empty(n, dtype=np.int64)
    prev = 0
    for c in contacts.contacts:
        t = c - prev
        kern = build_kernel(walk, t, "bulk")
        seg = kern.sample_values(rng)
        if signed and rng.random() < 0.5:
            seg = -seg
        path[prev:c] = seg
        prev = c
    if prev < n:
        kern = build_kernel(walk, n - prev, "final")
        path[prev:n] = kern.sample_values(rng)
    return path


def zero_set(path) -> ContactSet:
    """The contact set A(y) = {l : y_l = 0} of a lattice path."""
    vals = path.as_array() if isinstance(path, LatticePath) else np.asarray(path)
    idx = np.nonzero(vals == 0)[0] + 1
    return ContactSet(tuple(int(i) for i in idx))


def exact_path_probability(law: ContactSetLaw, walk: WalkParams, path) -> float:
    """Probability of one concrete path under the composite measure.

    Enumeration-scale only (N <= 16): reads off the zero set, multiplies its
    law by every gap excursion's conditional probability.  Paths whose
    segments violate the positivity/endpoint constraints get 0.
    """
    _check_consistent(law, walk)
    vals = path.as_array() if isinstance(path, LatticePath) else np.asarray(path, dtype=np.int64)
    if vals.shape[0] != law.n:
        raise ValueError(f"path length {vals.shape[0]} != N={law.n}")
    if law.n > ORACLE_MAX_N:
        raise ValueError(f"exact path probability is enumeration-scale (N <= {ORACLE_MAX_N})")
    prev = 0
    if np.any(np.abs(np.diff(np.concatenate([[0], vals]))) > 1):
        raise ValueError("increments outside {-1,0,+1}")
    contacts = zero_set(vals)
    prob = set_probability(law, contacts)
    if prob == 0.0:
        return 0.0
    for c in contacts.contacts:
        seg = vals[prev:c]
        if np.any(seg[:-1] <= 0):
            return 0.0
        kern = build_kernel(walk, c - prev, "bulk")
        prob *= path_probability(kern, seg)
        if prob == 0.0:
            return 0.0
        prev = c
    if prev < law.n:
        seg = vals[prev:]
        if np.any(seg <= 0):
            return 0.0
        kern = build_kernel(walk, law.n - prev, "final")
        prob *= path_probability(kern, seg)
    return prob


# ---------------------------------------------------------------------------
# diffusive rescaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RescaledPath:
    """Piecewise-linear X on [0, 1] through (i/N, y_i / sqrt(N)).

    ``source`` keeps the integer breakpoints (with the leading y_0 = 0) so
    the excursion relation can be decided exactly from integer zeros.
    """

    n: int
    grid: np.ndarray
    source: np.ndarray

    def evaluate(self, t: float) -> float:
        if not (0.0 <= t <= 1.0):
            raise ValueError("evaluation time must lie in [0, 1]")
        u = t * self.n
        i = int(math.floor(u))
        if i >= self.n:
            return float(self.grid[self.n])
        return float(self.grid[i] + (u - i) * (self.grid[i + 1] - self.grid[i]))

    __call__ = evaluate

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.grid)))

    def zero_indices(self) -> np.ndarray:
        """Breakpoint indices (including 0) where the source path is 0."""
        return np.nonzero(self.source == 0)[0].astype(np.int64)


def rescale(path) -> RescaledPath:
    """Apply the map y -> y_{floor(Nt)} / sqrt(N) with linear interpolation."""
    vals = path.as_array() if isinstance(path, LatticePath) else np.asarray(path, dtype=np.int64)
    if vals.shape[0] == 0:
        raise ValueError("cannot rescale an empty path")
    n = vals.shape[0]
    source = np.concatenate([[0], vals])
    grid = source / math.sqrt(n)
    return RescaledPath(n=n, grid=grid, source=source)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def _sample_range(args):
    law, walk, master_seed, lo, hi, signed = args
    out = np.empty((hi - lo, law.n), dtype=np.int64)
    for r in range(lo, hi):
        out[r - lo] = sample_polymer(law, walk, replica_rng(master_seed, r), signed)
    return lo, out


def iter_ensemble(
    law: ContactSetLaw,
    walk: WalkParams,
    replicas: int,
    master_seed: int,
    workers: int = 1,
    signed: bool = False,
    batch: int = 10_000,
):
    """Yield (first_replica_index, paths_matrix) batches in replica order.

    The batch decomposition and worker count never change the sampled paths,
    only how they are produced.
    """
    if replicas < 1:
        raise ValueError("replica count must be >= 1")
    law.partition()  # fail fast on degenerate laws, share the table
    spans = [(lo, min(lo + batch, replicas)) for lo in range(0, replicas, batch)]
    if workers <= 1 or len(spans) == 1:
        for lo, hi in spans:
            yield _sample_range((law, walk, master_seed, lo, hi, signed))
    else:
        tasks = [(law, walk, master_seed, lo, hi, signed) for lo, hi in spans]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_sample_range, tasks):
                yield res
