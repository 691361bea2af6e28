"""Stochastic transport through the circuit with current-proportional steps.

General mode follows the movement rule exactly: from any node, move along an
outgoing-current edge with probability proportional to that current; at a
layer-L node, additionally terminate with probability proportional to the
extraction current. Forward-only mode is the inference simplification:
exactly L steps, negative forward currents clamped to zero, termination
always at layer L.

Edge ordering for inverse-CDF draws is fixed (forward targets by ascending
flat index, then backward targets, then terminate) so runs are seed-stable.
"""

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .circuit import _flat_of
from .currents import CurrentField
from .data import DiscreteDistribution
from .errors import CycleSuspicionError, DegenerateNodeError, SizeCapError

log = logging.getLogger(__name__)

EPS_CURRENT = 1e-12
ABSORPTION_STATE_CAP = 4_000


@dataclass
class Trajectory:
    nodes: list          # [(layer, state_flat), ...] in visit order
    terminated: bool
    steps: int


def _node_moves(field: CurrentField, layer: int, x: int):
    """Outgoing targets, their current magnitudes, and the termination weight."""
    cfg = field.cfg
    targets = []
    weights = []
    if layer < cfg.L:
        row = field.current_row(layer, x)
        for y in np.flatnonzero(row > 0.0):
            targets.append((layer + 1, int(y)))
            weights.append(float(row[y]))
    if layer > 0:
        col = field.current_col(layer - 1, x)
        for y in np.flatnonzero(col < 0.0):
            targets.append((layer - 1, int(y)))
            weights.append(float(-col[y]))
    term = 0.0
    if layer == cfg.L:
        sink = field.sink_current(x)
        if sink is None:
            raise ValueError(
                "field provides no sink currents; general-mode termination "
                "probabilities are undefined")
        term = float(sink)
    return targets, np.asarray(weights), term


def step_general(field: CurrentField, node, rng: np.random.Generator):
    """One movement-rule step from node (layer, state).

    Returns the next (layer, state) node, or None when the walk terminates
    at a sink. Raises DegenerateNodeError when a non-sink node has no
    outgoing current to normalize.
    """
    layer, x = node
    x = _flat_of(x)
    targets, weights, term = _node_moves(field, layer, x)
    total = weights.sum() + term
    if total <= EPS_CURRENT:
        raise DegenerateNodeError(
            f"node (layer={layer}, state={x}) has outgoing current {total:.3e}")
    u = rng.random() * total
    if targets:
        cum = np.cumsum(weights)
        k = int(np.searchsorted(cum, u, side="right"))
        if k < len(targets):
            return targets[k]
    return None


def transport(field: CurrentField, x0, rng: np.random.Generator,
              max_steps: int = None) -> Trajectory:
    """Walk the movement rule from layer 0 until termination.

    Physical fields terminate in finitely many steps; max_steps (default
    100*L) is a safety net that raises instead of silently truncating.
    """
    cfg = field.cfg
    if max_steps is None:
        max_steps = 100 * cfg.L
    node = (0, _flat_of(x0))
    nodes = [node]
    for _ in range(max_steps):
        nxt = step_general(field, node, rng)
        if nxt is None:
            return Trajectory(nodes, True, len(nodes) - 1)
        node = nxt
        nodes.append(node)
    raise CycleSuspicionError(
        f"trajectory from state {_flat_of(x0)} exceeded {max_steps} steps; "
        f"last nodes: {nodes[-5:]}")


def transport_many(field: CurrentField, x0_flats, seed: int,
                   max_steps: int = None):
    """Independent general-mode walks with per-trajectory seeds.

    Node move tables are computed once and shared, so batches are cheap.
    Returns (final_states, step_counts).
    """
    cfg = field.cfg
    if max_steps is None:
        max_steps = 100 * cfg.L
    cache = {}

    def moves(layer, x):
        key = (layer, x)
        entry = cache.get(key)
        if entry is None:
            targets, weights, term = _node_moves(field, layer, x)
            total = weights.sum() + term
            if total <= EPS_CURRENT:
                raise DegenerateNodeError(
                    f"node (layer={layer}, state={x}) has outgoing current {total:.3e}")
            entry = cache[key] = (targets, np.cumsum(weights), total)
        return entry

    x0_flats = np.asarray(x0_flats, dtype=np.int64)
    finals = np.empty(x0_flats.shape[0], dtype=np.int64)
    steps = np.empty(x0_flats.shape[0], dtype=np.int64)
    for i, x0 in enumerate(x0_flats):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((int(seed), int(i)))))
        node = (0, int(x0))
        for count in range(max_steps + 1):
            targets, cum, total = moves(*node)
            u = rng.random() * total
            k = int(np.searchsorted(cum, u, side="right")) if len(targets) else 0
            if not targets or k >= len(targets):
                finals[i] = node[1]
                steps[i] = count
                break
            node = targets[k]
        else:
            raise CycleSuspicionError(
                f"trajectory {i} exceeded {max_steps} steps at node {node}")
    return finals, steps


# ---------------------------------------------------------------------------
# Forward-only inference

def _forward_step_group(field: CurrentField, ell: int, states, us) -> np.ndarray:
    """Advance all samples of one layer, grouped by their current state."""
    out = np.empty_like(states)
    uniques = np.unique(states)
    rows = field.current_rows(ell, uniques)
    for x, row in zip(uniques, rows):
        idx = np.flatnonzero(states == x)
        clamped = np.maximum(row, 0.0)
        total = clamped.sum()
        if total <= EPS_CURRENT:
            log.warning(
                "all forward currents ~0 at layer %d state %d; "
                "falling back to the same-category edge", ell, x)
            out[idx] = x
        else:
            cum = np.cumsum(clamped)
            out[idx] = np.minimum(
                np.searchsorted(cum, us[idx] * total, side="right"), clamped.size - 1)
    return out


def transport_forward(field: CurrentField, x0, rng: np.random.Generator) -> int:
    """Forward-only walk: exactly L steps, clamped currents, ends at layer L."""
    cfg = field.cfg
    x = _flat_of(x0)
    for ell in range(cfg.L):
        row = np.maximum(field.current_row(ell, x), 0.0)
        total = row.sum()
        if total <= EPS_CURRENT:
            log.warning("all forward currents ~0 at layer %d state %d; "
                        "falling back to the same-category edge", ell, x)
            continue
        cum = np.cumsum(row)
        x = min(int(np.searchsorted(cum, rng.random() * total, side="right")),
                cfg.n - 1)
    return x


def transport_forward_batch(field: CurrentField, x0_flats, seed: int,
                            threads: int = None) -> np.ndarray:
    """Forward-only transport of a batch; returns states at every layer (N, L+1).

    Sample i consumes only its own row of pre-drawn uniforms, so results are
    independent of batching and thread count.
    """
    cfg = field.cfg
    x0_flats = np.asarray(x0_flats, dtype=np.int64)
    N = x0_flats.shape[0]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), 2))))
    us = rng.random((N, cfg.L))
    states = np.empty((N, cfg.L + 1), dtype=np.int64)
    states[:, 0] = x0_flats
    if threads is None:
        threads = int(os.environ.get("ECDG_THREADS", "1") or 1)
    for ell in range(cfg.L):
        cur = states[:, ell]
        if threads > 1:
            chunks = [c for c in np.array_split(np.arange(N), threads) if c.size]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(_forward_step_group, field, ell, cur[c], us[c, ell])
                    for c in chunks
                ]
                for c, fut in zip(chunks, futures):
                    states[c, ell + 1] = fut.result()
        else:
            states[:, ell + 1] = _forward_step_group(field, ell, cur, us[:, ell])
    return states


# ---------------------------------------------------------------------------
# Exact absorption oracle

def absorption_distribution(field: CurrentField, p: DiscreteDistribution,
                            tol: float = 1e-12, state_cap: int = ABSORPTION_STATE_CAP,
                            return_info: bool = False):
    """Exact sink-termination distribution of the movement rule started from p.

    Builds movement-rule probabilities node by node and propagates mass until
    the transient remainder falls below tol. The current direction strictly
    decreases potential, so the chain is acyclic and the sweep count is
    bounded by the state count.
    """
    cfg = field.cfg
    n_states = (cfg.L + 1) * cfg.n
    if n_states > state_cap:
        raise SizeCapError(f"{n_states} chain states exceeds the cap {state_cap}")
    if p.n != cfg.n:
        raise ValueError("start distribution lives on the wrong state space")

    cache = {}

    def probs(layer, x):
        key = (layer, x)
        entry = cache.get(key)
        if entry is None:
            targets, weights, term = _node_moves(field, layer, x)
            total = weights.sum() + term
            if total <= EPS_CURRENT:
                raise DegenerateNodeError(
                    f"node (layer={layer}, state={x}) has outgoing current {total:.3e}")
            entry = cache[key] = (targets, weights / total, term / total)
        return entry

    mass = {(0, int(x)): float(p.mass[x]) for x in p.support()}
    absorbed = np.zeros(cfg.n)
    max_drift = 0.0
    sweeps = 0
    while mass:
        sweeps += 1
        if sweeps > n_states + 5:
            raise CycleSuspicionError(
                f"absorption did not converge in {sweeps - 1} sweeps; "
                f"residual transient mass {sum(mass.values()):.3e}")
        before = absorbed.sum() + sum(mass.values())
        nxt = {}
        for (layer, x), m in mass.items():
            targets, move_p, term_p = probs(layer, x)
            if term_p > 0.0:
                absorbed[x] += m * term_p
            for tgt, pr in zip(targets, move_p):
                nxt[tgt] = nxt.get(tgt, 0.0) + m * pr
        mass = {k: v for k, v in nxt.items() if v > 0.0}
        residual = sum(mass.values())
        max_drift = max(max_drift, abs(absorbed.sum() + residual - before))
        if residual < tol:
            mass = {}
    dist = DiscreteDistribution.from_weights(absorbed)
    if return_info:
        return dist, {"sweeps": sweeps, "max_mass_drift": max_drift}
    return dist


# ---------------------------------------------------------------------------
# Trajectory dumps

def write_forward_trajectories_csv(path, states: np.ndarray):
    """(sample_id, step, layer, state_flat) rows; forward walks have layer == step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "step", "layer", "state_flat"])
        for i, layers in enumerate(states):
            for step, state in enumerate(layers):
                writer.writerow([i, step, step, int(state)])


def write_trajectories_csv(path, trajectories):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "step", "layer", "state_flat"])
        for i, traj in enumerate(trajectories):
            for step, (layer, state) in enumerate(traj.nodes):
                writer.writerow([i, step, int(layer), int(state)])
