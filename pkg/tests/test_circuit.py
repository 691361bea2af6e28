import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from circuitflow.circuit import (
    CircuitConfig,
    categories_matrix,
    config_from_json,
    config_to_json,
    flatten,
    gamma_of,
    resistance,
    unflatten,
)


def test_resistance_cases():
    cfg = CircuitConfig(L=2, S=10, D=1, r=0.1, R=100.0)
    assert resistance(cfg, 7, 7) == 0.1
    assert resistance(cfg, 7, 8) == 100.0
    cfg_eq = CircuitConfig(L=2, S=10, D=1, r=5.0, R=5.0)
    assert resistance(cfg_eq, 3, 9) == 5.0
    assert resistance(cfg_eq, 4, 4) == 5.0


def test_resistance_symmetry():
    cfg = CircuitConfig(L=1, S=6, D=2, r=0.3, R=7.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.integers(0, cfg.n, 2)
        assert resistance(cfg, int(x), int(y)) == resistance(cfg, int(y), int(x))


def test_gamma_values():
    assert gamma_of(CircuitConfig(L=10, S=50, D=1, r=0.1, R=100.0)) == pytest.approx(1.05)
    assert gamma_of(CircuitConfig(L=4, S=50, D=2, r=0.1, R=10.0)) == pytest.approx(26.0)
    # r -> 0 limit
    assert gamma_of(CircuitConfig(L=1, S=50, D=1, r=1e-300, R=1.0)) == pytest.approx(1.0)


def test_gamma_strictly_above_one():
    cfg = CircuitConfig(L=1, S=3, D=2, r=0.5, R=2.0)
    assert cfg.gamma > 1.0


def test_flatten_corners():
    cfg = CircuitConfig(L=1, S=50, D=2, r=1.0, R=1.0)
    assert flatten([0, 0], cfg).flat == 0
    assert flatten([49, 49], cfg).flat == 2499
    assert unflatten(50, cfg).categories == (0, 1)


def test_flatten_matches_loop_enumeration():
    cfg = CircuitConfig(L=1, S=4, D=3, r=1.0, R=1.0)
    # dimension 0 varies fastest
    flat = 0
    for c2 in range(4):
        for c1 in range(4):
            for c0 in range(4):
                assert flatten([c0, c1, c2], cfg).flat == flat
                assert unflatten(flat, cfg).categories == (c0, c1, c2)
                flat += 1


@given(st.integers(0, 6**3 - 1))
def test_roundtrip(flat):
    cfg = CircuitConfig(L=1, S=6, D=3, r=1.0, R=1.0)
    assert flatten(unflatten(flat, cfg).categories, cfg).flat == flat


def test_categories_matrix_agrees_with_unflatten():
    cfg = CircuitConfig(L=1, S=5, D=2, r=1.0, R=1.0)
    flats = np.arange(cfg.n)
    mat = categories_matrix(flats, cfg)
    for f in flats:
        assert tuple(mat[f]) == unflatten(int(f), cfg).categories


def test_validation_errors():
    cfg = CircuitConfig(L=1, S=5, D=2, r=1.0, R=1.0)
    with pytest.raises(ValueError):
        flatten([5, 0], cfg)
    with pytest.raises(ValueError):
        flatten([0], cfg)
    with pytest.raises(ValueError):
        unflatten(25, cfg)
    with pytest.raises(ValueError):
        CircuitConfig(L=0, S=5, D=1, r=1.0, R=1.0)
    with pytest.raises(ValueError):
        CircuitConfig(L=1, S=5, D=1, r=0.0, R=1.0)
    with pytest.raises(ValueError):
        CircuitConfig(L=1, S=10, D=25, r=1.0, R=1.0)  # 10^25 states


def test_config_json_roundtrip():
    cfg = CircuitConfig(L=10, S=50, D=1, r=0.1, R=100.0)
    parsed = config_from_json(config_to_json(cfg))
    assert parsed == cfg
    assert json.loads(config_to_json(cfg)) == {"L": 10, "S": 50, "D": 1, "r": 0.1, "R": 100.0}
    with pytest.raises(ValueError):
        config_from_json('{"L": 1, "S": 2}')
