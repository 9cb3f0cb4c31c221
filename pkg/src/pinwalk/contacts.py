"""Zero-level-set laws from pluggable excursion-weight families.

A law on subsets of {1, ..., N} is specified through a gap weight
``bulk_weight(prev, next) = exp(beta_next) * kren[next - prev]`` and a tail
weight ``final_weight(last) = kbar[N - last]``, where ``kren``/``kbar`` are
the first-return weights of the folded walk (see
:func:`pinwalk.excursions.return_law`).  With all site rewards beta = 0 the
weights are an honest renewal law and the partition function is exactly 1;
site-dependent rewards implement homogeneous, periodic and disordered
pinning, and fully custom weight tables are accepted as well.

The forward partition table runs in linear space by default and switches to
log space when the reward magnitudes could overflow a double.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .excursions import return_law
from .walk import WalkParams

__all__ = [
    "Homogeneous",
    "Periodic",
    "Disordered",
    "CustomWeights",
    "ContactSet",
    "ContactSetLaw",
    "PartitionTable",
    "DegenerateLawError",
    "make_law",
    "partition_function",
    "sample_contact_set",
    "set_probability",
    "draw_charges",
    "save_charges",
    "load_charges",
    "load_custom_weights",
]


class DegenerateLawError(ValueError):
    """All contact configurations carry zero weight."""


@dataclass(frozen=True)
class Homogeneous:
    beta: float = 0.0


@dataclass(frozen=True)
class Periodic:
    """Site rewards repeat with period len(betas); site l gets betas[l % P]."""

    betas: tuple

    def __post_init__(self) -> None:
        bs = tuple(float(b) for b in self.betas)
        if len(bs) < 1:
            raise ValueError("periodic family needs at least one reward")
        object.__setattr__(self, "betas", bs)


@dataclass(frozen=True)
class Disordered:
    """Site reward beta + lam * omega_l with quenched charges omega.

    Charges are drawn once from ``seed`` as i.i.d. fair signs (or standard
    Gaussians with ``gaussian=True``) unless given explicitly.
    """

    beta: float = 0.0
    lam: float = 0.0
    seed: int = 0
    gaussian: bool = False
    charges: tuple | None = None


@dataclass(frozen=True)
class CustomWeights:
    """Explicit weight tables: bulk[(prev, next)] and final[last]."""

    bulk: dict
    final: dict


@dataclass(frozen=True)
class ContactSet:
    """Sorted contact positions T_1 < ... < T_k in {1, ..., N}; may be empty."""

    contacts: tuple

    def __post_init__(self) -> None:
        cs = tuple(int(c) for c in self.contacts)
        for a, b in zip(cs, cs[1:]):
            if b <= a:
                raise ValueError("contacts must be strictly increasing")
        if cs and cs[0] < 1:
            raise ValueError("contacts must be >= 1")
        object.__setattr__(self, "contacts", cs)

    @property
    def k(self) -> int:
        return len(self.contacts)


def draw_charges(n: int, seed: int, gaussian: bool = False) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x0C1A26E5)))
    if gaussian:
        return rng.standard_normal(n)
    return rng.integers(0, 2, size=n).astype(float) * 2.0 - 1.0


@dataclass
class ContactSetLaw:
    """Resolved weight family for one system size, ready to sample.

    ``beta_site[l]`` is the log reward collected when l is a contact
    (index 1..N); ``kren``/``kbar`` are the renewal weights; ``custom``
    overrides both when present.
    """

    n: int
    walk: WalkParams
    family: object
    beta_site: np.ndarray
    kren: np.ndarray
    kbar: np.ndarray
    custom: CustomWeights | None = None
    log_mode: bool = False
    _ptable: object = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # -- weights -------------------------------------------------------------

    def bulk_weight(self, prev: int, nxt: int) -> float:
        if not (0 <= prev < nxt <= self.n):
            raise ValueError("bulk weight needs 0 <= prev < next <= N")
        if self.custom is not None:
            return float(self.custom.bulk.get((prev, nxt), 0.0))
        return math.exp(self.beta_site[nxt]) * self.kren[nxt - prev]

    def log_bulk_weight(self, prev: int, nxt: int) -> float:
        if self.custom is not None:
            w = self.custom.bulk.get((prev, nxt), 0.0)
            return math.log(w) if w > 0.0 else -math.inf
        kr = self.kren[nxt - prev]
        if kr <= 0.0:
            return -math.inf
        return self.beta_site[nxt] + math.log(kr)

    def final_weight(self, last: int) -> float:
        if not (0 <= last <= self.n):
            raise ValueError("final weight needs 0 <= last <= N")
        if last == self.n:
            return 1.0
        if self.custom is not None:
            return float(self.custom.final.get(last, 0.0))
        return self.kbar[self.n - last]

    def log_final_weight(self, last: int) -> float:
        w = self.final_weight(last)
        return math.log(w) if w > 0.0 else -math.inf

    def partition(self) -> "PartitionTable":
        with self._lock:
            if self._ptable is None:
                self._ptable = _build_partition(self)
            return self._ptable

    # locks don't pickle; worker processes get a fresh one
    def __getstate__(self):
        state = self.__dict__.copy()
        state["_lock"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()


@dataclass(frozen=True)
class PartitionTable:
    """Forward table Z(0..N) plus the full normalizer Z_N.

    In log mode ``z`` holds exp(log_z) clipped into double range; ``log_z``
    and ``log_total`` are always valid.
    """

    z: np.ndarray
    log_z: np.ndarray
    total: float
    log_total: float
    log_mode: bool
    last_cumulative: np.ndarray  # cumulative of Z(i) * final_weight(i), linear mode


def _resolve_betas(n: int, family) -> np.ndarray:
    beta = np.zeros(n + 1)
    if isinstance(family, Homogeneous):
        beta[1:] = family.beta
    elif isinstance(family, Periodic):
        per = len(family.betas)
        for site in range(1, n + 1):
            beta[site] = family.betas[site % per]
    elif isinstance(family, Disordered):
        charges = family.charges
        if charges is None:
            charges = draw_charges(n, family.seed, family.gaussian)
        charges = np.asarray(charges, dtype=float)
        if charges.shape[0] < n:
            raise ValueError(f"need {n} charges, got {charges.shape[0]}")
        if not np.all(np.isfinite(charges)):
            raise ValueError("disorder charges must be finite")
        beta[1:] = family.beta + family.lam * charges[:n]
    else:
        raise TypeError(f"unsupported family {family!r}")
    return beta


def make_law(n: int, family, walk: WalkParams) -> ContactSetLaw:
    """Resolve a weight family into a sampleable law on contact sets."""
    if n < 1:
        raise ValueError("system size must be >= 1")
    if isinstance(family, CustomWeights):
        for key, w in family.bulk.items():
            if not (np.isfinite(w) and w >= 0.0):
                raise ValueError(f"bulk weight {key} must be finite and nonnegative")
        for key, w in family.final.items():
            if not (np.isfinite(w) and w >= 0.0):
                raise ValueError(f"final weight at {key} must be finite and nonnegative")
        return ContactSetLaw(
            n=n, walk=walk, family=family,
            beta_site=np.zeros(n + 1), kren=np.zeros(n + 1), kbar=np.ones(n + 1),
            custom=family, log_mode=False,
        )
    beta = _resolve_betas(n, family)
    kren, kbar = return_law(walk, n)
    bmax = float(np.max(np.abs(beta[1:]))) if n >= 1 else 0.0
    bpos = float(np.max(beta[1:])) if n >= 1 else 0.0
    log_mode = bmax > 30.0 or n * max(bpos, 0.0) > 600.0
    return ContactSetLaw(
        n=n, walk=walk, family=family,
        beta_site=beta, kren=kren, kbar=kbar, log_mode=log_mode,
    )


def _build_partition(law: ContactSetLaw) -> PartitionTable:
    n = law.n
    if law.log_mode and law.custom is None:
        logkren = np.full(n + 1, -np.inf)
        pos = law.kren > 0.0
        logkren[pos] = np.log(law.kren[pos])
        logz = np.full(n + 1, -np.inf)
        logz[0] = 0.0
        for j in range(1, n + 1):
            v = logz[:j] + logkren[j:0:-1] + law.beta_site[j]
            m = np.max(v)
            logz[j] = m + math.log(np.sum(np.exp(v - m))) if m > -np.inf else -np.inf
        logfin = np.array([law.log_final_weight(i) for i in range(n + 1)])
        v = logz + logfin
        m = float(np.max(v))
        log_total = m + math.log(np.sum(np.exp(v - m))) if m > -np.inf else -np.inf
        if log_total == -np.inf:
            raise DegenerateLawError("partition function vanishes")
        with np.errstate(over="ignore"):
            z = np.exp(logz)
        return PartitionTable(
            z=z, log_z=logz, total=float(np.exp(log_total)) if log_total < 700 else math.inf,
            log_total=log_total, log_mode=True,
            last_cumulative=np.zeros(0),
        )
    # linear mode
    if law.custom is not None:
        z = np.zeros(n + 1)
        z[0] = 1.0
        for j in range(1, n + 1):
            z[j] = sum(z[i] * law.bulk_weight(i, j) for i in range(j))
    else:
        expbeta = np.exp(law.beta_site)
        z = _fast._forward_partition(law.kren, expbeta)
    fin = np.array([law.final_weight(i) for i in range(n + 1)])
    last_terms = z * fin
    total = float(last_terms.sum())
    if not (total > 0.0):
        raise DegenerateLawError("partition function vanishes")
    logz = np.full(n + 1, -np.inf)
    pos = z > 0.0
    logz[pos] = np.log(z[pos])
    return PartitionTable(
        z=z, log_z=logz, total=total, log_total=math.log(total),
        log_mode=False, last_cumulative=np.cumsum(last_terms),
    )


def partition_function(law: ContactSetLaw) -> PartitionTable:
    """Z_N and the forward table; raises DegenerateLawError when Z_N = 0."""
    return law.partition()


def sample_contact_set(law: ContactSetLaw, rng: np.random.Generator) -> ContactSet:
    """Exact draw from the law: last contact first, then gaps backward."""
    pt = law.partition()
    if pt.log_mode or law.custom is not None:
        last = _draw_categorical_log(
            np.array([pt.log_z[i] + law.log_final_weight(i) for i in range(law.n + 1)]),
            rng.random(),
        )
    else:
        cum = pt.last_cumulative
        last = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        last = min(last, law.n)
    contacts = []
    j = last
    while j > 0:
        contacts.append(j)
        if pt.log_mode or law.custom is not None:
            logw = np.array(
                [pt.log_z[i] + law.log_bulk_weight(i, j) for i in range(j)]
            )
            i = _draw_categorical_log(logw, rng.random())
        else:
            i = int(_fast._prev_contact(pt.z, law.kren, j, rng.random()))
        j = i
    contacts.reverse()
    return ContactSet(tuple(contacts))


def _draw_categorical_log(logw: np.ndarray, u: float) -> int:
    m = np.max(logw)
    if m == -np.inf:
        raise DegenerateLawError("no admissible configuration to sample")
    w = np.exp(logw - m)
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(idx, logw.shape[0] - 1)


def set_probability(law: ContactSetLaw, contact_set) -> float:
    """p_N of one contact configuration, via the log product formula."""
    cs = contact_set if isinstance(contact_set, ContactSet) else ContactSet(tuple(contact_set))
    if cs.k and cs.contacts[-1] > law.n:
        raise ValueError("contact beyond system size")
    pt = law.partition()
    logp = -pt.log_total
    prev = 0
    for c in cs.contacts:
        logp += law.log_bulk_weight(prev, c)
        prev = c
    logp += law.log_final_weight(prev)
    return 0.0 if logp == -math.inf else math.exp(logp)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------


def save_charges(charges, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["charge"])
        for c in charges:
            wr.writerow([repr(float(c))])


def load_charges(path) -> np.ndarray:
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or "charge" not in rd.fieldnames:
            raise ValueError(f"{path}: expected a 'charge' column")
        for row in rd:
            out.append(float(row["charge"]))
    return np.asarray(out)


def load_custom_weights(path) -> CustomWeights:
    """Read a weight table: bulk rows fill (prev, next, weight), tail rows
    fill (last, final_weight); the other columns stay empty."""
    bulk: dict = {}
    final: dict = {}
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        need = {"prev", "next", "weight", "last", "final_weight"}
        if rd.fieldnames is None or not need.issubset(set(rd.fieldnames)):
            raise ValueError(f"{path}: expected columns {sorted(need)}")
        for row in rd:
            if row["prev"] not in (None, "") and row["next"] not in (None, ""):
                bulk[(int(row["prev"]), int(row["next"]))] = float(row["weight"])
            elif row["last"] not in (None, ""):
                final[int(row["last"])] = float(row["final_weight"])
    return CustomWeights(bulk=bulk, final=final)


def save_custom_weights(weights: CustomWeights, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["prev", "next", "weight", "last", "final_weight"])
        for (a, b), w in sorted(weights.bulk.items()):
            wr.writerow([a, b, repr(float(w)), "", ""])
        for last, w in sorted(weights.final.items()):
            wr.writerow(["", "", "", last, repr(float(w))])
