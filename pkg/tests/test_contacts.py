import itertools
import math

import numpy as np
import pytest

from pinwalk import (
    ContactSet,
    CustomWeights,
    DegenerateLawError,
    Disordered,
    Homogeneous,
    Periodic,
    WalkParams,
    make_law,
    partition_function,
    sample_contact_set,
    set_probability,
)
from pinwalk.contacts import (
    draw_charges,
    load_charges,
    load_custom_weights,
    save_charges,
    save_custom_weights,
)
from pinwalk.enumeration import contact_law_bruteforce, multinomial_chi2

P_GRID = (0.1, 0.3, 0.45)


def all_subsets(n):
    for k in range(n + 1):
        yield from itertools.combinations(range(1, n + 1), k)


def test_two_cell_split_at_n1():
    # enumeration of the two-cell partition: a contact at 1 means the walk
    # (or equally its absolute value) sits at 0, probability 1 - 2p
    w = WalkParams(0.3)
    law = make_law(1, Homogeneous(0.0), w)
    assert set_probability(law, (1,)) == pytest.approx(0.4, abs=1e-14)
    assert set_probability(law, ()) == pytest.approx(0.6, abs=1e-14)


def test_z1_two_term_sum():
    w = WalkParams(0.3)
    beta = 0.7
    law = make_law(1, Homogeneous(beta), w)
    expected = math.exp(beta) * 0.4 + 0.6
    assert partition_function(law).total == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("p", P_GRID)
def test_renewal_normalization(p):
    w = WalkParams(p)
    for n in (1, 2, 5, 20, 80, 200):
        pt = partition_function(make_law(n, Homogeneous(0.0), w))
        assert abs(pt.total - 1.0) < 1e-12


def test_custom_all_ones():
    w = WalkParams(0.3)
    weights = CustomWeights(
        bulk={(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0},
        final={0: 1.0, 1: 1.0},
    )
    law = make_law(2, weights, w)
    assert partition_function(law).total == pytest.approx(4.0, abs=1e-12)
    for s in [(), (1,), (2,), (1, 2)]:
        assert set_probability(law, s) == pytest.approx(0.25, abs=1e-12)


def test_large_reward_forces_full_contact():
    w = WalkParams(0.3)
    law = make_law(3, Homogeneous(20.0), w)
    assert set_probability(law, (1, 2, 3)) > 0.999


@pytest.mark.parametrize(
    "family",
    [
        Homogeneous(0.5),
        Homogeneous(-0.8),
        Periodic((0.4, -0.2, 1.0)),
        Disordered(beta=0.2, lam=0.7, seed=11),
    ],
)
def test_set_probability_sums_to_one(family):
    w = WalkParams(0.3)
    for n in (1, 2, 3, 6, 10):
        law = make_law(n, family, w)
        total = sum(set_probability(law, s) for s in all_subsets(n))
        assert abs(total - 1.0) < 1e-10


def test_set_probability_matches_enumeration():
    w = WalkParams(0.1)
    law = make_law(9, Homogeneous(0.5), w)
    ref = contact_law_bruteforce(law)
    dev = max(abs(set_probability(law, s) - pr) for s, pr in ref.items())
    assert dev < 1e-13


def test_malformed_sets_rejected():
    law = make_law(4, Homogeneous(0.0), WalkParams(0.3))
    with pytest.raises(ValueError):
        set_probability(law, (2, 1))
    with pytest.raises(ValueError):
        set_probability(law, (0, 1))
    with pytest.raises(ValueError):
        set_probability(law, (3, 9))
    with pytest.raises(ValueError):
        ContactSet((1, 1))


def test_sampler_determinism():
    law = make_law(30, Homogeneous(0.3), WalkParams(0.3))
    a = sample_contact_set(law, np.random.default_rng(4))
    b = sample_contact_set(law, np.random.default_rng(4))
    assert a == b


def test_sampler_concentrates_under_large_reward(rng):
    law = make_law(5, Homogeneous(20.0), WalkParams(0.3))
    hits = sum(
        sample_contact_set(law, rng).contacts == (1, 2, 3, 4, 5) for _ in range(2000)
    )
    assert hits / 2000 > 0.999


def test_sampler_chi2_against_exact(rng):
    w = WalkParams(0.3)
    law = make_law(8, Homogeneous(0.5), w)
    probs = {s: set_probability(law, s) for s in all_subsets(8)}
    n = 100_000
    counts = {}
    for _ in range(n):
        key = sample_contact_set(law, rng).contacts
        counts[key] = counts.get(key, 0) + 1
    assert multinomial_chi2(probs, counts, n) >= 1e-3


def test_periodic_period_one_matches_homogeneous_bitwise():
    w = WalkParams(0.3)
    a = partition_function(make_law(40, Homogeneous(0.37), w))
    b = partition_function(make_law(40, Periodic((0.37,)), w))
    assert np.array_equal(a.z, b.z)
    assert a.total == b.total


def test_disordered_lambda_zero_matches_homogeneous():
    w = WalkParams(0.3)
    a = partition_function(make_law(40, Homogeneous(0.2), w))
    b = partition_function(make_law(40, Disordered(beta=0.2, lam=0.0, seed=3), w))
    assert np.array_equal(a.z, b.z)


def test_log_mode_matches_linear():
    w = WalkParams(0.3)
    lin = make_law(12, Homogeneous(25.0), w)  # stays linear
    assert not lin.log_mode
    log = make_law(12, Homogeneous(25.0), w)
    log.log_mode = True
    log_pt = partition_function(log)
    lin_pt = partition_function(lin)
    assert log_pt.log_mode and not lin_pt.log_mode
    assert log_pt.log_total == pytest.approx(lin_pt.log_total, rel=1e-11)
    for s in [(), (3,), (1, 5, 12), tuple(range(1, 13))]:
        assert set_probability(log, s) == pytest.approx(
            set_probability(lin, s), rel=1e-10, abs=1e-300
        )


def test_log_mode_handles_huge_rewards():
    w = WalkParams(0.3)
    law = make_law(60, Homogeneous(40.0), w)
    assert law.log_mode
    pt = partition_function(law)
    assert math.isfinite(pt.log_total)
    assert set_probability(law, tuple(range(1, 61))) > 0.999
    cs = sample_contact_set(law, np.random.default_rng(0))
    assert cs.contacts == tuple(range(1, 61))


def test_degenerate_law_raises():
    # empty tables: no configuration carries weight
    law = make_law(2, CustomWeights(bulk={}, final={}), WalkParams(0.3))
    with pytest.raises(DegenerateLawError):
        partition_function(law)


def test_negative_custom_weight_rejected():
    with pytest.raises(ValueError):
        make_law(2, CustomWeights(bulk={(0, 1): -1.0}, final={}), WalkParams(0.3))


def test_charges_roundtrip(tmp_path):
    ch = draw_charges(50, seed=9)
    assert set(np.unique(ch)) <= {-1.0, 1.0}
    assert np.array_equal(ch, draw_charges(50, seed=9))
    f = tmp_path / "charges.csv"
    save_charges(ch, f)
    back = load_charges(f)
    assert np.array_equal(ch, back)
    g = draw_charges(50, seed=9, gaussian=True)
    assert not set(np.unique(g)) <= {-1.0, 1.0}


def test_charges_reused_through_family(tmp_path):
    w = WalkParams(0.3)
    ch = draw_charges(10, seed=77)
    f = tmp_path / "charges.csv"
    save_charges(ch, f)
    fam_file = Disordered(beta=0.1, lam=0.5, charges=tuple(load_charges(f)))
    fam_seed = Disordered(beta=0.1, lam=0.5, seed=77)
    a = partition_function(make_law(10, fam_file, w))
    b = partition_function(make_law(10, fam_seed, w))
    assert np.array_equal(a.z, b.z)


def test_custom_weights_csv_roundtrip(tmp_path):
    weights = CustomWeights(bulk={(0, 2): 1.5, (2, 3): 0.25}, final={0: 0.5, 2: 2.0})
    f = tmp_path / "weights.csv"
    save_custom_weights(weights, f)
    back = load_custom_weights(f)
    assert back == weights


def test_contact_set_validation():
    ContactSet(())
    ContactSet((2, 5, 9))
    with pytest.raises(ValueError):
        ContactSet((0, 1))
    with pytest.raises(ValueError):
        ContactSet((3, 2))
