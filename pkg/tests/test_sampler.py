import numpy as np
import pytest

from circuitflow.circuit import CircuitConfig
from circuitflow.currents import AnalyticExactCurrent, OracleDenseCurrent
from circuitflow.data import DiscreteDistribution, make_1d_pair
from circuitflow.errors import CycleSuspicionError, DegenerateNodeError, SizeCapError
from circuitflow.oracle import build_system, edge_currents, solve
from circuitflow.potentials import IndependentCoupling
from circuitflow.sampler import (
    Trajectory,
    absorption_distribution,
    step_general,
    transport,
    transport_forward,
    transport_forward_batch,
    transport_many,
    write_forward_trajectories_csv,
    write_trajectories_csv,
)


def identity_field(cfg, p):
    """Current only on same-state edges, proportional to p."""
    table = np.zeros((cfg.L, cfg.n, cfg.n))
    for ell in range(cfg.L):
        np.fill_diagonal(table[ell], p.mass)
    return OracleDenseCurrent(cfg, table, sinks=p)


def oracle_field(cfg, p, q):
    table = edge_currents(solve(build_system(cfg, p, q)), cfg)
    return OracleDenseCurrent(cfg, table, sinks=q)


def count_step_outcomes(field, node, n_draws, seed):
    outcomes = {}
    rng = np.random.default_rng(seed)
    for _ in range(n_draws):
        mv = step_general(field, node, rng)
        key = mv if mv is None else tuple(mv)
        outcomes[key] = outcomes.get(key, 0) + 1
    return outcomes


def test_step_probabilities_proportional_to_currents():
    # two outgoing currents 0.3 and 0.1 -> probabilities 0.75 / 0.25
    cfg = CircuitConfig(L=1, S=2, D=1, r=1.0, R=1.0)
    table = np.zeros((1, 2, 2))
    table[0, 0, 0] = 0.3
    table[0, 0, 1] = 0.1
    field = OracleDenseCurrent(cfg, table, sinks=DiscreteDistribution(np.array([0.75, 0.25])))
    out = count_step_outcomes(field, (0, 0), 40_000, seed=0)
    assert out[(1, 0)] / 40_000 == pytest.approx(0.75, abs=0.01)
    assert out[(1, 1)] / 40_000 == pytest.approx(0.25, abs=0.01)


def test_sink_terminates_with_extraction_ratio():
    # sink extraction 0.5 against one outgoing backward current 0.5
    cfg = CircuitConfig(L=1, S=2, D=1, r=1.0, R=1.0)
    table = np.zeros((1, 2, 2))
    table[0, 1, 0] = -0.5  # flows backward from (1,0) to (0,1)
    field = OracleDenseCurrent(cfg, table, sinks=DiscreteDistribution(np.array([0.5, 0.5])))
    out = count_step_outcomes(field, (1, 0), 40_000, seed=1)
    assert out[None] / 40_000 == pytest.approx(0.5, abs=0.01)
    assert out[(0, 1)] / 40_000 == pytest.approx(0.5, abs=0.01)


def test_single_outgoing_edge_is_deterministic():
    cfg = CircuitConfig(L=2, S=3, D=1, r=1.0, R=1.0)
    table = np.zeros((2, 3, 3))
    table[0, 1, 2] = 0.7
    field = OracleDenseCurrent(cfg, table)
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert step_general(field, (0, 1), rng) == (1, 2)


def test_degenerate_node_raises():
    cfg = CircuitConfig(L=2, S=2, D=1, r=1.0, R=1.0)
    field = OracleDenseCurrent(cfg, np.zeros((2, 2, 2)))
    with pytest.raises(DegenerateNodeError):
        step_general(field, (0, 0), np.random.default_rng(0))


def test_sink_without_extraction_data_is_an_error():
    cfg = CircuitConfig(L=1, S=2, D=1, r=1.0, R=1.0)
    table = np.zeros((1, 2, 2))
    table[0, 0, 0] = 1.0
    field = OracleDenseCurrent(cfg, table)  # no sinks provided
    with pytest.raises(ValueError, match="sink"):
        step_general(field, (1, 0), np.random.default_rng(0))


def test_identity_field_transport_is_diagonal():
    cfg = CircuitConfig(L=4, S=5, D=1, r=1.0, R=1.0)
    p = DiscreteDistribution.from_weights(np.ones(5))
    field = identity_field(cfg, p)
    traj = transport(field, 3, np.random.default_rng(0))
    assert traj.terminated
    assert traj.steps == cfg.L
    assert traj.nodes == [(ell, 3) for ell in range(cfg.L + 1)]
    assert transport_forward(field, 3, np.random.default_rng(1)) == 3


def test_general_walks_terminate_and_recover_target():
    rng = np.random.default_rng(7)
    cfg = CircuitConfig(L=3, S=5, D=1, r=0.3, R=2.0)
    p = DiscreteDistribution.from_weights(rng.random(5) + 0.05)
    q = DiscreteDistribution.from_weights(rng.random(5) + 0.05)
    field = oracle_field(cfg, p, q)
    N = 100_000
    starts = p.sample(np.random.default_rng(1), N)
    finals, steps = transport_many(field, starts, seed=3)
    assert steps.max() <= cfg.L + 10
    hist = np.bincount(finals, minlength=5) / N
    for x in range(5):
        assert abs(hist[x] - q.mass[x]) <= 3.0 * np.sqrt(q.mass[x] / N) + 1e-12


def test_absorption_identity_field_returns_start():
    cfg = CircuitConfig(L=3, S=4, D=1, r=1.0, R=1.0)
    p = DiscreteDistribution.from_weights(np.array([0.4, 0.3, 0.2, 0.1]))
    field = identity_field(cfg, p)
    absorbed = absorption_distribution(field, p)
    assert np.abs(absorbed.mass - p.mass).max() <= 1e-12


def test_absorption_recovers_target_exactly():
    rng = np.random.default_rng(11)
    cfg = CircuitConfig(L=3, S=5, D=1, r=0.4, R=3.0)
    p = DiscreteDistribution.from_weights(rng.random(5) + 0.05)
    q = DiscreteDistribution.from_weights(rng.random(5) + 0.05)
    field = oracle_field(cfg, p, q)
    absorbed, info = absorption_distribution(field, p, return_info=True)
    assert np.abs(absorbed.mass - q.mass).max() <= 1e-6
    assert info["max_mass_drift"] <= 1e-12


def test_absorption_size_cap():
    cfg = CircuitConfig(L=3, S=40, D=2, r=1.0, R=1.0)
    p = DiscreteDistribution.from_weights(np.ones(1600))
    field = OracleDenseCurrent(cfg, np.zeros((3, 1600, 1600)), sinks=p)
    with pytest.raises(SizeCapError):
        absorption_distribution(field, p)


def test_forward_only_trajectories_have_length_L():
    p, q, _, _ = make_1d_pair(S=20, seed=0, n_samples=10)
    cfg = CircuitConfig(L=5, S=20, D=1, r=0.1, R=40.0)
    field = AnalyticExactCurrent(cfg, IndependentCoupling(p, q))
    states = transport_forward_batch(field, p.sample(np.random.default_rng(0), 200), seed=1)
    assert states.shape == (200, 6)
    assert states.min() >= 0 and states.max() < 20


def test_forward_uniform_positive_rows_give_uniform_layer():
    cfg = CircuitConfig(L=1, S=6, D=1, r=1.0, R=1.0)
    table = np.full((1, 6, 6), 0.5)
    field = OracleDenseCurrent(cfg, table)
    states = transport_forward_batch(field, np.zeros(60_000, dtype=np.int64), seed=0)
    hist = np.bincount(states[:, 1], minlength=6) / 60_000
    assert np.abs(hist - 1.0 / 6.0).max() <= 0.01


def test_forward_clamps_negative_currents():
    cfg = CircuitConfig(L=1, S=3, D=1, r=1.0, R=1.0)
    table = np.zeros((1, 3, 3))
    table[0, 0] = [-5.0, 1.0, -2.0]  # only the middle edge survives clamping
    field = OracleDenseCurrent(cfg, table)
    states = transport_forward_batch(field, np.zeros(50, dtype=np.int64), seed=0)
    assert (states[:, 1] == 1).all()


def test_forward_all_clamped_falls_back_to_same_state(caplog):
    cfg = CircuitConfig(L=2, S=3, D=1, r=1.0, R=1.0)
    table = np.zeros((2, 3, 3))
    table[:, :, :] = -1.0  # everything backward: degenerate after clamping
    field = OracleDenseCurrent(cfg, table)
    with caplog.at_level("WARNING"):
        states = transport_forward_batch(field, np.array([2, 0]), seed=0)
    assert (states[:, 2] == np.array([2, 0])).all()
    assert "falling back" in caplog.text
    assert transport_forward(field, 1, np.random.default_rng(0)) == 1


def test_batch_transport_is_threading_invariant():
    p, q, _, _ = make_1d_pair(S=15, seed=2, n_samples=10)
    cfg = CircuitConfig(L=4, S=15, D=1, r=0.1, R=30.0)
    field = AnalyticExactCurrent(cfg, IndependentCoupling(p, q))
    starts = p.sample(np.random.default_rng(5), 5_000)
    a = transport_forward_batch(field, starts, seed=9, threads=1)
    b = transport_forward_batch(field, starts, seed=9, threads=4)
    assert np.array_equal(a, b)


def test_batch_transport_order_independence():
    p, q, _, _ = make_1d_pair(S=15, seed=2, n_samples=10)
    cfg = CircuitConfig(L=4, S=15, D=1, r=0.1, R=30.0)
    field = AnalyticExactCurrent(cfg, IndependentCoupling(p, q))
    starts = p.sample(np.random.default_rng(5), 1_000)
    full = transport_many(field, starts, seed=9)[0]
    # per-trajectory seeds: any sub-batch reproduces its own walks
    sub = transport_many(field, starts[:100], seed=9)[0]
    assert np.array_equal(full[:100], sub)


def test_transport_safety_bound_raises_on_cycling_field():
    # an unphysical hand-built field with a genuine 4-node circulation:
    # (0,0) -> (1,0) -> (0,1) -> (1,1) -> (0,0) -> ...
    cfg = CircuitConfig(L=1, S=3, D=1, r=1.0, R=1.0)
    table = np.zeros((1, 3, 3))
    table[0, 0, 0] = 1.0   # forward (0,0) -> (1,0)
    table[0, 1, 0] = -1.0  # backward (1,0) -> (0,1)
    table[0, 1, 1] = 1.0   # forward (0,1) -> (1,1)
    table[0, 0, 1] = -1.0  # backward (1,1) -> (0,0)
    sinks = DiscreteDistribution(np.array([0.0, 0.0, 1.0]))
    field = OracleDenseCurrent(cfg, table, sinks=sinks)
    with pytest.raises(CycleSuspicionError):
        transport(field, 0, np.random.default_rng(0), max_steps=50)
    with pytest.raises(CycleSuspicionError):
        transport_many(field, np.array([0]), seed=0, max_steps=50)


def test_trajectory_csv_dumps(tmp_path):
    cfg = CircuitConfig(L=2, S=3, D=1, r=1.0, R=1.0)
    p = DiscreteDistribution.from_weights(np.ones(3))
    field = identity_field(cfg, p)
    states = transport_forward_batch(field, np.array([0, 2]), seed=0)
    fpath = tmp_path / "fwd.csv"
    write_forward_trajectories_csv(fpath, states)
    lines = fpath.read_text().splitlines()
    assert lines[0] == "sample_id,step,layer,state_flat"
    assert len(lines) == 1 + 2 * 3

    traj = transport(field, 1, np.random.default_rng(0))
    tpath = tmp_path / "gen.csv"
    write_trajectories_csv(tpath, [traj])
    tlines = tpath.read_text().splitlines()
    assert tlines[0] == "sample_id,step,layer,state_flat"
    assert len(tlines) == 1 + len(traj.nodes)
