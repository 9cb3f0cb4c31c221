import math

import numpy as np
import pytest

from pinwalk import (
    Excursion,
    WalkParams,
    build_kernel,
    event_probability,
    first_passage_pmf,
    path_probability,
    return_law,
    sample_excursion,
)
from pinwalk.enumeration import (
    event_probability_bruteforce,
    excursion_law_bruteforce,
    first_return_law_bruteforce,
)

P_GRID = (0.1, 0.3, 0.45)


def test_forced_kernels():
    w = WalkParams(0.3)
    assert path_probability(build_kernel(w, 2, "bulk"), (1, 0)) == pytest.approx(1.0, abs=1e-14)
    assert path_probability(build_kernel(w, 3, "bulk"), (1, 1, 0)) == pytest.approx(1.0, abs=1e-14)
    assert path_probability(build_kernel(w, 1, "bulk"), (0,)) == pytest.approx(1.0, abs=1e-14)
    assert path_probability(build_kernel(w, 1, "final"), (1,)) == pytest.approx(1.0, abs=1e-14)


def test_bulk_t4_path_probabilities():
    w = WalkParams(0.3)
    kern = build_kernel(w, 4, "bulk")
    assert path_probability(kern, (1, 1, 1, 0)) == pytest.approx(0.64, abs=1e-13)
    assert path_probability(kern, (1, 2, 1, 0)) == pytest.approx(0.36, abs=1e-13)
    assert path_probability(kern, (1, -1, 1, 0)) == 0.0


def test_path_probability_length_mismatch():
    kern = build_kernel(WalkParams(0.3), 4, "bulk")
    with pytest.raises(ValueError):
        path_probability(kern, (1, 0))


def test_infeasible_kernels_raise():
    with pytest.raises(ValueError):
        build_kernel(WalkParams(0.5), 1, "bulk")  # S_1 = 0 has probability 0
    with pytest.raises(ValueError):
        build_kernel(WalkParams(0.5), 3, "bulk")  # parity: no return at odd t
    build_kernel(WalkParams(0.5), 4, "bulk")
    build_kernel(WalkParams(0.5), 3, "final")


@pytest.mark.parametrize("p", P_GRID)
@pytest.mark.parametrize("kind", ["bulk", "final"])
def test_kernel_total_variation_vs_enumeration(p, kind):
    w = WalkParams(p)
    for t in range(1, 11):
        ref = excursion_law_bruteforce(w, t, kind)
        kern = build_kernel(w, t, kind)
        tv = 0.5 * sum(abs(path_probability(kern, k) - v) for k, v in ref.items())
        assert tv < 1e-12, (p, kind, t, tv)
        total = sum(path_probability(kern, k) for k in ref)
        assert abs(total - 1.0) < 1e-10


def test_step_probs_sum_to_one_at_reachable_states():
    for p in P_GRID:
        w = WalkParams(p)
        for kind in ("bulk", "final"):
            for t in (1, 2, 3, 7, 24):
                kern = build_kernel(w, t, kind)
                assert abs(sum(kern.step_probs(0, 0).values()) - 1.0) < 1e-12
                for j in range(1, t):
                    xmax = min(j, t - j) if kind == "bulk" else j
                    for x in range(1, xmax + 1):
                        if kern.survival_scaled(j, x) > 0.0:
                            s = sum(kern.step_probs(j, x).values())
                            assert abs(s - 1.0) < 1e-12


def test_survival_boundary_rows():
    w = WalkParams(0.3)
    bulk = build_kernel(w, 5, "bulk")
    assert bulk.survival_scaled(5, 0) == 1.0
    assert all(bulk.survival_scaled(5, x) == 0.0 for x in (-1, 1, 2))
    assert all(bulk.survival_scaled(j, 0) == 0.0 for j in range(1, 5))
    assert all(bulk.survival_scaled(j, -3) == 0.0 for j in range(1, 5))
    fin = build_kernel(w, 5, "final")
    assert all(fin.survival_scaled(5, x) == 1.0 for x in (1, 2, 7))
    assert fin.survival_scaled(5, 0) == 0.0


def test_sampling_determinism():
    w = WalkParams(0.3)
    kern = build_kernel(w, 9, "bulk")
    a = kern.sample_values(np.random.default_rng(5))
    b = kern.sample_values(np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_sampled_excursions_satisfy_constraints(rng):
    w = WalkParams(0.1)
    for kind in ("bulk", "final"):
        for t in (1, 2, 3, 8, 31):
            kern = build_kernel(w, t, kind)
            for _ in range(40):
                exc = sample_excursion(kern, rng)  # Excursion validates
                assert exc.t == t and exc.kind == kind


def test_bulk_sampling_frequencies():
    w = WalkParams(0.3)
    kern = build_kernel(w, 4, "bulk")
    rng = np.random.default_rng(123)
    n = 100_000
    hits = 0
    for _ in range(n):
        if kern.sample_values(rng)[1] == 1:  # (1,1,1,0) vs (1,2,1,0)
            hits += 1
    sigma = math.sqrt(0.64 * 0.36 / n)
    assert abs(hits / n - 0.64) < 3 * sigma


def test_final_sampling_frequencies():
    w = WalkParams(0.3)
    kern = build_kernel(w, 2, "final")
    rng = np.random.default_rng(99)
    n = 100_000
    ones = 0
    for _ in range(n):
        if kern.sample_values(rng)[1] == 1:
            ones += 1
    target = 4.0 / 7.0
    sigma = math.sqrt(target * (1 - target) / n)
    assert abs(ones / n - target) < 3 * sigma


def test_event_probability_examples():
    w = WalkParams(0.3)
    assert event_probability(w, 1, "bulk") == pytest.approx(0.4, abs=1e-14)
    assert event_probability(w, 2, "bulk") == pytest.approx(0.09, abs=1e-14)
    assert event_probability(w, 2, "final") == pytest.approx(0.21, abs=1e-14)
    with pytest.raises(ValueError):
        event_probability(w, 0, "bulk")


@pytest.mark.parametrize("p", P_GRID)
def test_event_probability_vs_enumeration(p):
    w = WalkParams(p)
    for t in range(1, 11):
        for kind in ("bulk", "final"):
            assert event_probability(w, t, kind) == pytest.approx(
                event_probability_bruteforce(w, t, kind), abs=1e-13
            )


@pytest.mark.parametrize("p", P_GRID)
def test_bulk_event_equals_first_passage(p):
    w = WalkParams(p)
    for t in range(2, 60):
        assert abs(event_probability(w, t, "bulk") - first_passage_pmf(w, t)) < 1e-13


@pytest.mark.parametrize("p", P_GRID)
def test_folded_return_law_vs_enumeration(p):
    # the renewal decomposition must be validated by enumeration before use
    w = WalkParams(p)
    m = 9
    kren, kbar = return_law(w, m)
    ret, surv = first_return_law_bruteforce(w, m)
    assert np.max(np.abs(kren[1:] - ret[1:])) < 1e-13
    assert abs(kbar[m] - surv) < 1e-13


@pytest.mark.parametrize("p", P_GRID + (0.5,))
def test_return_law_partition_identity(p):
    w = WalkParams(p)
    kren, kbar = return_law(w, 400)
    run = np.cumsum(kren[1:])
    for m in range(1, 401):
        assert abs(run[m - 1] + kbar[m] - 1.0) < 1e-12


def test_excursion_type_invariants():
    Excursion((1, 2, 1, 0), "bulk")
    Excursion((0,), "bulk")
    Excursion((1, 1), "final")
    with pytest.raises(ValueError):
        Excursion((1, 0, 1, 0), "bulk")  # interior zero
    with pytest.raises(ValueError):
        Excursion((1, 1, 1), "bulk")  # does not end at zero
    with pytest.raises(ValueError):
        Excursion((1, 0), "final")
    with pytest.raises(ValueError):
        Excursion((), "bulk")
    with pytest.raises(ValueError):
        Excursion((1, 1), "sideways")


def test_kernel_cache_memoizes():
    w = WalkParams(0.3)
    assert build_kernel(w, 6, "bulk") is build_kernel(w, 6, "bulk")
    assert build_kernel(w, 6, "bulk") is not build_kernel(w, 6, "final")
