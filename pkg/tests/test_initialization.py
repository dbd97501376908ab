import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longmix import (
    AllStartsFailedError,
    FitConfig,
    InitSpec,
    InvalidRequestError,
    adjusted_rand_index,
    fit,
    kmeans_init,
    multi_start_fit,
    random_init,
    sample_dataset,
    simulation1_spec,
)
from longmix.initialization import kmeans_labels, make_starts

from oracles import random_params, sample


def test_kmeans_two_blobs_split_at_midpoint():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.normal(-20, 1, 30), rng.normal(20, 1, 30)])
    data = np.column_stack([x, np.zeros_like(x)])
    labels = kmeans_init(data, 2, 0).hard()
    assert adjusted_rand_index(labels, (x > 0).astype(int)) == 1.0


def test_kmeans_trivial_cases():
    x = np.random.default_rng(1).normal(size=(7, 3))
    assert np.all(kmeans_init(x, 1, 0).z_hat == 1.0)
    assert sorted(kmeans_labels(x, 7, 0)) == list(range(7))
    with pytest.raises(InvalidRequestError):
        kmeans_init(x, 8, 0)


def test_kmeans_labels_numbered_by_first_appearance():
    x = np.random.default_rng(2).normal(size=(40, 3))
    labels = kmeans_init(x, 4, 3).hard()
    _, first = np.unique(labels, return_index=True)
    assert list(labels[np.sort(first)]) == [0, 1, 2, 3]


def test_random_init_examples():
    assert sorted(random_init(4, 4, 0).hard()) == [0, 1, 2, 3]
    assert np.all(random_init(5, 1, 0).z_hat == 1.0)
    assert np.all(random_init(100, 3, 9).n_g >= 1)
    with pytest.raises(InvalidRequestError):
        random_init(2, 3, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 6), st.integers(0, 2**31))
def test_inits_are_one_hot_and_nonempty(n, g, seed):
    if g > n:
        return
    x = np.random.default_rng(seed).normal(size=(n, 2))
    for init in (random_init(n, g, seed), kmeans_init(x, g, seed)):
        z = init.z_hat
        assert np.all((z == 0) | (z == 1)) and np.all(z.sum(axis=1) == 1)
        assert np.all(z.sum(axis=0) >= 1)


def test_start_plan():
    spec = InitSpec("mixed", 10, 0)
    assert spec.start_kinds() == ["kmeans"] * 5 + ["random"] * 5
    x = np.random.default_rng(0).normal(size=(30, 3))
    a = make_starts(x, 3, spec)
    b = make_starts(x, 3, spec)
    assert all(np.array_equal(u.z_hat, v.z_hat) for (_, u), (_, v) in zip(a, b))
    with pytest.raises(InvalidRequestError):
        InitSpec("bogus")
    with pytest.raises(InvalidRequestError):
        InitSpec(n_starts=0)


def _toy():
    rng = np.random.default_rng(4)
    par = random_params(rng, 3, 6, 2)
    return sample(rng, par, 150)[0]


def test_single_start_equals_plain_fit():
    x = _toy()
    spec = InitSpec("random", 1, 5)
    (_, init), = make_starts(x, 3, spec)
    assert multi_start_fit(x, 3, 2, "VVA", spec).params == fit(x, 3, 2, "VVA", init).params


def test_best_start_dominates_and_is_deterministic():
    x = _toy()
    spec = InitSpec("mixed", 5, 11)
    best, results, _ = multi_start_fit(x, 3, 2, "VVA", spec, return_all=True)
    ok = [r for r in results if r is not None]
    pool = [r for r in ok if r.converged] or ok
    assert all(best.loglik >= r.loglik for r in pool)
    assert best.loglik == max(r.loglik for r in pool)
    again = multi_start_fit(x, 3, 2, "VVA", spec)
    assert again.params == best.params and np.array_equal(again.loglik_trace, best.loglik_trace)


def test_all_starts_failed():
    x = np.random.default_rng(5).normal(size=(12, 4))
    # a mass threshold no component can meet
    with pytest.raises(AllStartsFailedError):
        multi_start_fit(x, 3, 1, "VVA", InitSpec("random", 3, 0), FitConfig(min_responsibility_mass=100.0))


def test_simulation1_multi_start_classifies_perfectly():
    ds = sample_dataset(simulation1_spec(0))
    best = multi_start_fit(ds, 4, 3, "VVA", InitSpec("mixed", 10, 0))
    assert adjusted_rand_index(ds.labels, best.assignments) == 1.0
