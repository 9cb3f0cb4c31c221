import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinwalk import (
    LatticePath,
    WalkParams,
    exact_pmf,
    first_passage_pmf,
    local_clt_deviation,
    pinned_positive_pmf,
    reflection_first_passage,
    ruin_probability,
    step_distribution,
)
from pinwalk.walk import (
    exact_pmf_row,
    first_passage_series,
    pinned_positive_row,
)

P_GRID = (0.1, 0.3, 0.45)


def test_step_distribution_values():
    d = step_distribution(WalkParams(0.3))
    assert d == {1: 0.3, 0: 0.4, -1: 0.3}
    d = step_distribution(WalkParams(0.5))
    assert d == {1: 0.5, 0: 0.0, -1: 0.5}
    assert sum(d.values()) == 1.0


@pytest.mark.parametrize("p", [0.6, 0.0, -0.1, 1.0])
def test_invalid_p_rejected(p):
    with pytest.raises(ValueError):
        WalkParams(p)


def test_sigma_is_one_step_std(walk):
    var = 2.0 * walk.p  # (+1)^2 p + (-1)^2 p
    assert abs(walk.sigma**2 - var) < 1e-15


def test_lattice_path_validation():
    LatticePath((1, 2, 1, 0))
    with pytest.raises(ValueError):
        LatticePath((2, 1))  # first step from 0 jumps by 2
    with pytest.raises(ValueError):
        LatticePath((1, 3))
    with pytest.raises(ValueError):
        LatticePath(())


def test_exact_pmf_examples():
    w = WalkParams(0.3)
    assert exact_pmf(w, 1, 1) == pytest.approx(0.3, abs=1e-15)
    assert exact_pmf(w, 2, 0) == pytest.approx(0.34, abs=1e-15)
    assert exact_pmf(w, 2, 2) == pytest.approx(0.09, abs=1e-15)
    assert exact_pmf(w, 3, 5) == 0.0  # |b| > k
    with pytest.raises(ValueError):
        exact_pmf(w, -1, 0)


def test_exact_pmf_mass_and_symmetry(walk):
    for k in (0, 1, 7, 150):
        row = exact_pmf_row(walk, k)
        assert abs(row.sum() - 1.0) < 1e-14
        assert np.allclose(row, row[::-1], rtol=0, atol=0)


@pytest.mark.slow
def test_exact_pmf_mass_at_large_horizon():
    row = exact_pmf_row(WalkParams(0.3), 10_000)
    assert abs(row.sum() - 1.0) < 1e-14


def test_exact_pmf_rational_mass():
    w = WalkParams(0.3)
    row = exact_pmf_row(w, 25, rational=True)
    assert sum(row) == 1
    assert row[25] == exact_pmf(w, 25, 0, rational=True)


def test_first_passage_examples():
    w = WalkParams(0.3)
    assert first_passage_pmf(w, 1) == pytest.approx(0.7, abs=1e-15)
    assert first_passage_pmf(w, 2) == pytest.approx(0.09, abs=1e-15)
    assert first_passage_pmf(w, 3) == pytest.approx(0.036, abs=1e-15)
    with pytest.raises(ValueError):
        first_passage_pmf(w, 0)


def test_reflection_examples():
    assert reflection_first_passage(WalkParams(0.3), 2) == pytest.approx(0.09, abs=1e-15)
    assert reflection_first_passage(WalkParams(0.3), 3) == pytest.approx(0.036, abs=1e-15)
    assert reflection_first_passage(WalkParams(0.45), 2) == pytest.approx(0.2025, abs=1e-15)
    with pytest.raises(ValueError):
        reflection_first_passage(WalkParams(0.3), 1)


@pytest.mark.parametrize("p", P_GRID)
def test_reflection_identity_floats(p):
    w = WalkParams(p)
    for n in range(2, 41):
        assert abs(first_passage_pmf(w, n) - reflection_first_passage(w, n)) < 1e-12


@pytest.mark.parametrize("p", P_GRID + (0.5,))
def test_reflection_identity_exact_rationals(p):
    w = WalkParams(p)
    for n in range(2, 30):
        assert first_passage_pmf(w, n, rational=True) == reflection_first_passage(
            w, n, rational=True
        )


def test_pinned_positive_examples():
    w = WalkParams(0.3)
    assert pinned_positive_pmf(w, 1, 1) == pytest.approx(0.3, abs=1e-15)
    assert pinned_positive_pmf(w, 2, 1) == pytest.approx(0.12, abs=1e-15)
    assert pinned_positive_pmf(w, 2, 2) == pytest.approx(0.09, abs=1e-15)
    with pytest.raises(ValueError):
        pinned_positive_pmf(w, 2, 0)
    with pytest.raises(ValueError):
        pinned_positive_pmf(w, 0, 1)


def test_pinned_positive_vs_absorbing_dp(walk):
    for m in (1, 2, 5, 17, 40):
        row = pinned_positive_row(walk, m)
        for b in range(1, m + 1):
            assert abs(pinned_positive_pmf(walk, m, b) - row[b - 1]) < 1e-12


def test_paths_partition_at_horizon(walk):
    m = 40
    fp = first_passage_series(walk, m)
    alive = pinned_positive_row(walk, m).sum()
    assert abs(fp.sum() + alive - 1.0) < 1e-12


def test_ruin_examples_and_identity():
    assert ruin_probability(WalkParams(0.3), 1) == 1.0
    assert ruin_probability(WalkParams(0.3), 2) == 0.5
    assert ruin_probability(WalkParams(0.45), 5) == pytest.approx(0.2, abs=0)
    with pytest.raises(ValueError):
        ruin_probability(WalkParams(0.3), 0)
    for b in range(1, 21):
        vals = [ruin_probability(WalkParams(p), b) for p in P_GRID]
        for v in vals:
            assert abs(v * b - 1.0) < 1e-12
        assert max(vals) - min(vals) < 1e-15  # p plays no role


def test_local_clt_deviation_decreases(walk):
    d = [local_clt_deviation(walk, k) for k in (100, 1000)]
    assert d[0] > d[1]


@pytest.mark.slow
def test_local_clt_deviation_small_at_large_horizon():
    d100 = local_clt_deviation(WalkParams(0.3), 100)
    d10k = local_clt_deviation(WalkParams(0.3), 10_000)
    assert d10k < d100
    assert d10k < 0.01


def test_local_clt_degenerate_cases():
    assert local_clt_deviation(WalkParams(0.3), 1) >= 0.0
    # period-2 walk: parity-forbidden sites dominated by the Gaussian term
    assert math.isfinite(local_clt_deviation(WalkParams(0.5), 2))
    with pytest.raises(ValueError):
        local_clt_deviation(WalkParams(0.3), 0)


def test_first_passage_tail_stabilizes():
    fp = first_passage_series(WalkParams(0.3), 6000)
    a = 3000**1.5 * fp[2999]
    b = 6000**1.5 * fp[5999]
    assert abs(a / b - 1.0) < 0.02


@settings(max_examples=25, deadline=None)
@given(
    p=st.sampled_from(P_GRID),
    k=st.integers(min_value=0, max_value=40),
)
def test_pmf_row_properties(p, k):
    row = exact_pmf_row(WalkParams(p), k)
    assert row.shape[0] == 2 * k + 1
    assert np.all(row >= 0)
    assert abs(row.sum() - 1.0) < 1e-13
    assert np.array_equal(row, row[::-1])


@settings(max_examples=20, deadline=None)
@given(p=st.floats(min_value=0.05, max_value=0.5), n=st.integers(2, 25))
def test_reflection_identity_random_p(p, n):
    w = WalkParams(p)
    assert first_passage_pmf(w, n, rational=True) == reflection_first_passage(
        w, n, rational=True
    )
