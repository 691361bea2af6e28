"""Ground-truth and estimated electric currents behind one evaluator interface.

A current field answers I(l, x, y), the current on the edge between state x
at layer l and state y at layer l+1, with the sign convention that positive
values flow toward layer l+1. Realizations:

- AnalyticExactCurrent: exact superposition of the closed-form pair
  potentials over a coupling, precomputed into per-layer potential tables.
- MonteCarloCurrent: unbiased pair-sampled estimate with per-edge seeds.
- OracleDenseCurrent: wraps a dense table from the node-voltage oracle.
- LearnedCurrent: the trained regressor.
"""

import csv

import numpy as np

from .circuit import CircuitConfig, _flat_of
from .errors import SizeCapError
from .potentials import Coupling, DEFAULT_SUPPORT_CAP, potential_table

_SUM_CHUNK = 1_000_000


class CurrentField:
    """Evaluator interface shared by exact, sampled, oracle and learned currents."""

    cfg: CircuitConfig

    def current(self, ell: int, x, y) -> float:
        raise NotImplementedError

    def current_row(self, ell: int, x) -> np.ndarray:
        """I(ell, x, y) for every y; default is the per-edge loop."""
        x = _flat_of(x)
        return np.array([self.current(ell, x, y) for y in range(self.cfg.n)])

    def current_col(self, ell: int, y) -> np.ndarray:
        """I(ell, x, y) for every x."""
        y = _flat_of(y)
        return np.array([self.current(ell, x, y) for x in range(self.cfg.n)])

    def current_rows(self, ell: int, xs) -> np.ndarray:
        return np.stack([self.current_row(ell, x) for x in xs])

    def sink_current(self, x):
        """Extraction current at a layer-L state, or None if the field has no sinks."""
        return None

    def _check_edge(self, ell: int, x: int, y: int):
        if not 0 <= ell < self.cfg.L:
            raise ValueError(f"edge layer {ell} out of range [0, {self.cfg.L})")
        if not (0 <= x < self.cfg.n and 0 <= y < self.cfg.n):
            raise ValueError("edge state out of range")


def _edge_resistances(cfg: CircuitConfig, x: int) -> np.ndarray:
    res = np.full(cfg.n, cfg.R)
    res[x] = cfg.r
    return res


class AnalyticExactCurrent(CurrentField):
    """Exact currents of a coupling via superposed closed-form potentials.

    The superposition over the support is regrouped through the indicator
    structure of the pair potentials: only the marginals and the diagonal of
    the coupling enter, which makes every evaluation O(1) after an O(n)
    setup. This is an exact rearrangement of the support sum, not an
    approximation (see the agreement test against exact_current).
    """

    def __init__(self, cfg: CircuitConfig, coupling: Coupling):
        if coupling.n != cfg.n:
            raise ValueError("coupling state space does not match the circuit")
        self.cfg = cfg
        self.coupling = coupling
        table = potential_table(cfg)
        d = coupling.diagonal()
        p = coupling.source.mass
        q = coupling.target.mass
        self.phi = (table.src[:, None] * (p - d)[None, :]
                    + table.snk[:, None] * (q - d)[None, :]
                    + table.same[:, None] * d[None, :])

    def current(self, ell: int, x, y) -> float:
        x, y = _flat_of(x), _flat_of(y)
        self._check_edge(ell, x, y)
        res = self.cfg.r if x == y else self.cfg.R
        return float((self.phi[ell, x] - self.phi[ell + 1, y]) / res)

    def current_row(self, ell: int, x) -> np.ndarray:
        x = _flat_of(x)
        self._check_edge(ell, x, 0)
        return (self.phi[ell, x] - self.phi[ell + 1]) / _edge_resistances(self.cfg, x)

    def current_col(self, ell: int, y) -> np.ndarray:
        y = _flat_of(y)
        self._check_edge(ell, 0, y)
        return (self.phi[ell] - self.phi[ell + 1, y]) / _edge_resistances(self.cfg, y)

    def sink_current(self, x):
        return float(self.coupling.target.mass[_flat_of(x)])


class MonteCarloCurrent(CurrentField):
    """Pair-sampled current estimates; per-edge seeds keep parallel use stable."""

    def __init__(self, cfg: CircuitConfig, coupling: Coupling, batch: int, seed: int):
        if batch < 1:
            raise ValueError("batch must be >= 1")
        self.cfg = cfg
        self.coupling = coupling
        self.batch = int(batch)
        self.seed = int(seed)

    def current(self, ell: int, x, y) -> float:
        return mc_current(self.cfg, self.coupling, ell, x, y, self.batch, self.seed)

    def sink_current(self, x):
        return float(self.coupling.target.mass[_flat_of(x)])


class OracleDenseCurrent(CurrentField):
    """Dense current table, typically oracle.edge_currents output."""

    def __init__(self, cfg: CircuitConfig, table: np.ndarray, sinks=None):
        table = np.asarray(table, dtype=float)
        if table.shape != (cfg.L, cfg.n, cfg.n):
            raise ValueError(f"expected table shape {(cfg.L, cfg.n, cfg.n)}, "
                             f"got {table.shape}")
        self.cfg = cfg
        self.table = table
        self.sinks = sinks

    def current(self, ell: int, x, y) -> float:
        x, y = _flat_of(x), _flat_of(y)
        self._check_edge(ell, x, y)
        return float(self.table[ell, x, y])

    def current_row(self, ell: int, x) -> np.ndarray:
        return self.table[ell, _flat_of(x)]

    def current_col(self, ell: int, y) -> np.ndarray:
        return self.table[ell, :, _flat_of(y)]

    def sink_current(self, x):
        return None if self.sinks is None else float(self.sinks.mass[_flat_of(x)])


class LearnedCurrent(CurrentField):
    """Regressor-backed field with per-(layer, state) row caching."""

    def __init__(self, cfg: CircuitConfig, params):
        self.cfg = cfg
        self.params = params
        self._rows: dict = {}

    def current(self, ell: int, x, y) -> float:
        x, y = _flat_of(x), _flat_of(y)
        self._check_edge(ell, x, y)
        return float(self.current_row(ell, x)[y])

    def current_row(self, ell: int, x) -> np.ndarray:
        x = _flat_of(x)
        key = (ell, x)
        row = self._rows.get(key)
        if row is None:
            row = self.current_rows(ell, np.array([x]))[0]
        return row

    def current_rows(self, ell: int, xs) -> np.ndarray:
        from .regressor import predict_rows

        xs = np.asarray(xs, dtype=np.int64)
        out = predict_rows(self.params, self.cfg, ell, xs)
        for i, x in enumerate(xs):
            self._rows[(ell, int(x))] = out[i]
        return out

    def current_col(self, ell: int, y) -> np.ndarray:
        from .regressor import predict_edges

        y = _flat_of(y)
        self._check_edge(ell, 0, y)
        xs = np.arange(self.cfg.n, dtype=np.int64)
        return predict_edges(self.params, self.cfg,
                             np.full(self.cfg.n, ell), xs, np.full(self.cfg.n, y))


# ---------------------------------------------------------------------------
# Functional API

def pair_current_targets(cfg: CircuitConfig, ells, xs, ys, x0s, xLs) -> np.ndarray:
    """Mean Ohm integrand of E edges over one shared batch of B pairs -> (E,)."""
    table = potential_table(cfg)
    ells = np.asarray(ells)
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    phi_x = table.phi_pairs(ells, xs, x0s, xLs)
    phi_y = table.phi_pairs(ells + 1, ys, x0s, xLs)
    res = np.where(xs == ys, cfg.r, cfg.R)
    return ((phi_x - phi_y) / res[:, None]).mean(axis=1)


def exact_current(cfg: CircuitConfig, coupling: Coupling, ell: int, x, y,
                  support_cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Exact summation of the Ohm integrand over the coupling support."""
    x, y = _flat_of(x), _flat_of(y)
    if not 0 <= ell < cfg.L:
        raise ValueError(f"edge layer {ell} out of range [0, {cfg.L})")
    size = coupling.support_size()
    if size > support_cap:
        raise SizeCapError(f"coupling support {size} exceeds the cap {support_cap}")
    x0, xL, w = coupling.support_arrays()
    res = cfg.r if x == y else cfg.R
    table = potential_table(cfg)
    total = 0.0
    for start in range(0, x0.size, _SUM_CHUNK):
        sl = slice(start, start + _SUM_CHUNK)
        phi_x = table.phi_pairs([ell], [x], x0[sl], xL[sl])[0]
        phi_y = table.phi_pairs([ell + 1], [y], x0[sl], xL[sl])[0]
        total += float(((phi_x - phi_y) / res) @ w[sl])
    return total


def mc_current(cfg: CircuitConfig, coupling: Coupling, ell: int, x, y,
               batch: int, seed: int) -> float:
    """Unbiased Monte Carlo estimate of exact_current from `batch` pair draws.

    The stream is seeded by (seed, ell, x, y), so concurrent evaluation over
    edges reproduces the sequential results exactly.
    """
    x, y = _flat_of(x), _flat_of(y)
    if batch < 1:
        raise ValueError("batch must be >= 1")
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence((int(seed), int(ell), int(x), int(y)))))
    x0s, xLs = coupling.sample_pairs(rng, batch)
    return float(pair_current_targets(cfg, [ell], [x], [y], x0s, xLs)[0])


def write_currents_csv(path, field: CurrentField):
    """Dump (ell, x_flat, y_flat, current) rows for the whole circuit."""
    cfg = field.cfg
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ell", "x_flat", "y_flat", "current"])
        for ell in range(cfg.L):
            for x in range(cfg.n):
                row = field.current_row(ell, x)
                for y in range(cfg.n):
                    writer.writerow([ell, x, y, repr(float(row[y]))])
