import numpy as np
import pytest

from circuitflow.circuit import CircuitConfig
from circuitflow.data import (
    DiscreteDistribution,
    SampleSet,
    histogram,
    make_1d_pair,
    make_2d_pair,
    read_distribution_csv,
    read_samples_csv,
    total_variation,
    write_distribution_csv,
    write_samples_csv,
)


def test_1d_source_is_uniform():
    p, q, _, _ = make_1d_pair(S=50, seed=0, n_samples=10)
    assert np.allclose(p.mass, 0.02)
    assert abs(q.mass.sum() - 1.0) <= 1e-12


def test_1d_target_peaks_at_center_and_is_symmetric():
    _, q, _, _ = make_1d_pair(S=50, seed=0, n_samples=10)
    top = np.argsort(q.mass)[-2:]
    assert set(top) == {24, 25}
    assert q.mass[24] == pytest.approx(q.mass[25], rel=1e-12)


def test_1d_sample_sets_match_provenance():
    _, _, src, tgt = make_1d_pair(S=50, seed=3, n_samples=1234)
    assert src.size == tgt.size == 1234
    assert src.provenance["seed"] == 3
    assert src.rows.shape == (1234, 1)


def test_total_variation_basics():
    p = DiscreteDistribution(np.array([1.0, 0.0]))
    q = DiscreteDistribution(np.array([0.0, 1.0]))
    assert total_variation(p, p) == 0.0
    assert total_variation(p, q) == 1.0
    with pytest.raises(ValueError):
        total_variation(p, DiscreteDistribution(np.ones(3) / 3))


def test_total_variation_matches_bruteforce_loop():
    rng = np.random.default_rng(5)
    p = DiscreteDistribution.from_weights(rng.random(40))
    q = DiscreteDistribution.from_weights(rng.random(40))
    brute = 0.0
    for a, b in zip(p.mass, q.mass):
        brute += abs(a - b)
    brute *= 0.5
    assert abs(total_variation(p, q) - brute) <= 1e-15


def test_histogram_basics():
    cfg = CircuitConfig(L=1, S=4, D=2, r=1.0, R=1.0)
    single = histogram(np.array([[1, 2]]), cfg)
    assert single.mass[1 + 2 * 4] == 1.0
    rows = np.array([[0, 0], [1, 2], [1, 2], [3, 3]])
    h1 = histogram(rows, cfg)
    h2 = histogram(np.vstack([rows, rows]), cfg)
    assert np.allclose(h1.mass, h2.mass)
    counts = h1.mass * rows.shape[0]
    assert counts.sum() == rows.shape[0]
    with pytest.raises(ValueError):
        histogram(np.empty((0, 2), dtype=int), cfg)


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([0.5, 0.4]))  # sums to 0.9
    with pytest.raises(ValueError):
        DiscreteDistribution(np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        DiscreteDistribution.from_weights(np.zeros(3))


def test_inverse_cdf_sampling_reproduces_table():
    _, q, _, _ = make_1d_pair(S=50, seed=0, n_samples=10)
    rng = np.random.default_rng(123)
    draws = q.sample(rng, 1_000_000)
    emp = np.bincount(draws, minlength=50) / draws.size
    assert 0.5 * np.abs(emp - q.mass).sum() <= 0.005


def test_sampling_is_deterministic():
    p = DiscreteDistribution.from_weights(np.arange(1.0, 6.0))
    a = p.sample(np.random.default_rng(9), 100)
    b = p.sample(np.random.default_rng(9), 100)
    assert np.array_equal(a, b)


def test_2d_tables_are_normalized_grids():
    p, q, src, tgt = make_2d_pair(S=50, seed=0, n_points=20_000, n_samples=100)
    assert p.mass.shape == (2500,)
    assert q.mass.shape == (2500,)
    assert abs(p.mass.sum() - 1.0) <= 1e-12
    assert abs(q.mass.sum() - 1.0) <= 1e-12
    assert src.rows.shape == (100, 2)


def test_2d_determinism():
    p1, q1, _, _ = make_2d_pair(S=50, seed=4, n_points=5_000, n_samples=10)
    p2, q2, _, _ = make_2d_pair(S=50, seed=4, n_points=5_000, n_samples=10)
    assert np.array_equal(p1.mass, p2.mass)
    assert np.array_equal(q1.mass, q2.mass)


def test_2d_resampling_self_consistency():
    # measured multinomial noise floor for the 1e5-point table is ~0.03 TV
    # (spread over ~1e3 occupied bins), so agreement below 0.05 is as tight
    # as independent clouds can be
    p_small, q_small, _, _ = make_2d_pair(S=50, seed=0, n_points=100_000, n_samples=10)
    p_big, q_big, _, _ = make_2d_pair(S=50, seed=1, n_points=1_000_000, n_samples=10)
    assert total_variation(p_small, p_big) <= 0.05
    assert total_variation(q_small, q_big) <= 0.05


def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet(np.array([[-1, 0]]), {})
    with pytest.raises(ValueError):
        SampleSet(np.empty((0, 2), dtype=int), {})


def test_csv_roundtrips(tmp_path):
    _, q, src, _ = make_1d_pair(S=20, seed=0, n_samples=50)
    dpath = tmp_path / "dist.csv"
    write_distribution_csv(dpath, q)
    back = read_distribution_csv(dpath)
    assert np.array_equal(back.mass, q.mass)

    spath = tmp_path / "samples.csv"
    write_samples_csv(spath, src.rows)
    assert np.array_equal(read_samples_csv(spath), src.rows)
