from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lddp.evaluation import (SCENARIOS, as_partition, compare_report, rand_index,
                             synth_image, synth_spatial_gmm, usage_histogram, write_scores)
from lddp.pipeline import kmeans


def rand_by_pairs(p, q):
    """O(N^2) enumeration over all point pairs."""
    pairs = list(combinations(range(len(p)), 2))
    agree = sum((p[i] == p[j]) == (q[i] == q[j]) for i, j in pairs)
    return agree / len(pairs)


def test_rand_examples():
    assert rand_index([3, 3, 1, 0], [3, 3, 1, 0]) == 1.0
    assert rand_index([1, 1, 2], [1, 2, 2]) == pytest.approx(1 / 3, abs=1e-15)
    assert rand_index([1, 1, 2], [7, 5, 5]) == rand_index([1, 1, 2], [1, 2, 2])
    assert rand_index([4], [9]) == 1.0


def test_rand_errors():
    with pytest.raises(ValueError):
        rand_index([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        as_partition([])
    with pytest.raises(ValueError):
        as_partition([0.5, 1.0])


def test_rand_matches_pair_enumeration(rng):
    for _ in range(200):
        n = int(rng.integers(1, 13))
        p = rng.integers(0, rng.integers(1, 5), n)
        q = rng.integers(0, rng.integers(1, 5), n)
        expect = 1.0 if n < 2 else rand_by_pairs(p, q)
        assert rand_index(p, q) == expect


labels = st.lists(st.integers(0, 5), min_size=2, max_size=30)


@given(labels, st.data())
def test_rand_properties(p, data):
    q = data.draw(st.lists(st.integers(0, 5), min_size=len(p), max_size=len(p)))
    r = rand_index(p, q)
    assert 0.0 <= r <= 1.0
    assert r == rand_index(q, p)
    perm = data.draw(st.permutations(range(6)))
    renamed = [perm[v] for v in q]
    assert rand_index(p, renamed) == r
    same_partition = rand_by_pairs(p, q) == 1.0
    assert (r == 1.0) == same_partition


def test_rand_large_n_uses_exact_counts():
    n = 200_000
    p = np.arange(n) % 2
    assert rand_index(p, p) == 1.0
    assert 0.49 < rand_index(p, np.zeros(n, dtype=int)) < 0.51


def test_usage_histogram_examples():
    assert usage_histogram([2, 2, 2]).counts == [3]
    h = usage_histogram([0, 1, 1, 2])
    assert h.counts == [2, 1, 1]
    assert h.active == 3
    assert h.occupied(0.3) == 1
    phi = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    assert usage_histogram(phi).counts == [2, 1]


@given(st.lists(st.integers(0, 9), min_size=1, max_size=50), st.permutations(range(10)))
def test_usage_histogram_properties(lab, perm):
    h = usage_histogram(lab)
    assert sum(h.counts) == len(lab)
    assert h.counts == sorted(h.counts, reverse=True)
    assert usage_histogram([perm[v] for v in lab]).counts == h.counts


def test_synth_quadrants_construction():
    pixels, truth = synth_image(64, 64, "quadrants", seed=0)
    assert pixels.shape == (64, 64, 3) and pixels.dtype == np.uint8
    assert sorted(np.bincount(truth).tolist()) == [1024] * 4
    grid = truth.reshape(64, 64)
    assert len(np.unique(grid[:32, :32])) == 1


def test_synth_stripes_and_halves():
    _, truth = synth_image(20, 40, "stripes", seed=0)
    assert np.bincount(truth).tolist() == [160] * 5
    _, truth = synth_image(10, 10, "halves-overlap", seed=0)
    assert truth.reshape(10, 10)[:, :5].max() == 0
    assert truth.reshape(10, 10)[:, 5:].min() == 1


def test_synth_deterministic_and_validated():
    a, _ = synth_image(16, 16, "halves-overlap", seed=3)
    b, _ = synth_image(16, 16, "halves-overlap", seed=3)
    c, _ = synth_image(16, 16, "halves-overlap", seed=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        synth_image(8, 8, "checkerboard")
    ds, truth = synth_spatial_gmm(8, 6, SCENARIOS[1], seed=0)
    assert ds.source_shape == (8, 6) and len(truth) == 48


def test_colour_alone_fails_on_overlapping_halves():
    scores = []
    for seed in range(10):
        ds, truth = synth_spatial_gmm(64, 64, "halves-overlap", seed)
        scores.append(rand_index(kmeans(ds.features, 2, seed), truth))
    assert np.median(scores) <= 0.7


def test_compare_report_and_scores(tmp_path):
    truth = [0, 0, 1, 1]
    rows, text = compare_report([("same", [5, 5, 2, 2]), ("off", [0, 1, 0, 1])], truth)
    assert rows[0] == ("same", 100.0)
    assert "100.00" in text.splitlines()[1]
    write_scores(rows, tmp_path / "scores.tsv")
    lines = (tmp_path / "scores.tsv").read_text().splitlines()
    assert lines[0] == "method\trand_index_percent"
    assert lines[1] == "same\t100.00"
