"""Closed-form single source-sink potentials and their superposition.

For one unit of current entering the circuit at column x0 (layer 0) and
leaving at column xL (layer L), the potential at layer l is, with
denom = gamma*T_L - T_{L-1} and the gauge phi(generic column) = 0:

    x0 != xL:  phi_l(x0) =  r * T_{L-l} / denom
               phi_l(xL) = -r * T_l     / denom
               phi_l(x') =  0
    x0 == xL:  phi_l(x0) =  r * (T_l * (gamma*U_{L-1} - U_{L-2} - 1) / denom
                                 - U_{l-1})
               phi_l(x') =  0

These are the large-n closed forms; the exact finite-n ground truth lives in
the oracle module, and the gap between the two is measured, not assumed.

A coupling is a joint distribution over (x0, xL) pairs; superposing the pair
potentials over a coupling gives the potential of the full injection pattern.
"""

from dataclasses import dataclass

import numpy as np

from .chebyshev import ChebyshevTable
from .circuit import CircuitConfig, State, _flat_of
from .data import DiscreteDistribution
from .errors import SizeCapError

DEFAULT_SUPPORT_CAP = 10_000_000


@dataclass(frozen=True)
class PairPotentialQuery:
    ell: int
    x_ell: State
    x0: State
    xL: State


class PairPotentialTable:
    """Per-config memo of the closed-form potential coefficients.

    src[l], snk[l] are the x0/xL coefficients of the distinct-pair case and
    same[l] the coefficient of the coincident case, all including the factor
    r, so phi_l(x | x0, xL) is a pure indicator combination of these arrays.
    """

    def __init__(self, cfg: CircuitConfig):
        self.cfg = cfg
        table = ChebyshevTable(cfg.gamma, cfg.L)
        L, gamma, r = cfg.L, cfg.gamma, cfg.r
        denom = gamma * table.T(L) - table.T(L - 1)
        t = np.array([table.T(l) for l in range(L + 1)])
        u_shift = np.array([table.U(l - 1) for l in range(L + 1)])
        self.denom = denom
        self.src = r * t[::-1] / denom                     # r*T_{L-l}/denom
        self.snk = -r * t / denom                          # -r*T_l/denom
        # The coincident-pair column r*(T_l*(gamma*U_{L-1} - U_{L-2} - 1)/denom
        # - U_{l-1}) is algebraically identical to src + snk but cancels
        # catastrophically for large gamma*L; evaluate the stable form.
        self.same = self.src + self.snk
        self.same_literal = r * (
            t * (gamma * table.U(L - 1) - table.U(L - 2) - 1.0) / denom - u_shift)

    def phi(self, ell: int, x_flat: int, x0_flat: int, xL_flat: int) -> float:
        if not 0 <= ell <= self.cfg.L:
            raise ValueError(f"layer {ell} out of range [0, {self.cfg.L}]")
        if x0_flat == xL_flat:
            return float(self.same[ell]) if x_flat == x0_flat else 0.0
        if x_flat == x0_flat:
            return float(self.src[ell])
        if x_flat == xL_flat:
            return float(self.snk[ell])
        return 0.0

    def phi_pairs(self, ells, x_flats, x0_flats, xL_flats) -> np.ndarray:
        """Vectorized phi for edge queries (E,) against a pair batch (B,) -> (E, B)."""
        ells = np.asarray(ells)
        x = np.asarray(x_flats)[:, None]
        x0 = np.asarray(x0_flats)[None, :]
        xL = np.asarray(xL_flats)[None, :]
        same = x0 == xL
        distinct = (self.src[ells][:, None] * (x == x0)
                    + self.snk[ells][:, None] * (x == xL))
        coincident = self.same[ells][:, None] * (x == x0)
        return np.where(same, coincident, distinct)


_TABLE_CACHE: dict = {}


def potential_table(cfg: CircuitConfig) -> PairPotentialTable:
    key = (cfg.L, cfg.S, cfg.D, cfg.r, cfg.R)
    tab = _TABLE_CACHE.get(key)
    if tab is None:
        tab = _TABLE_CACHE[key] = PairPotentialTable(cfg)
    return tab


def pair_potential(cfg: CircuitConfig, query: PairPotentialQuery) -> float:
    """phi_ell(x_ell | x0, xL) for a unit source-sink pair."""
    return potential_table(cfg).phi(
        query.ell, query.x_ell.flat, query.x0.flat, query.xL.flat
    )


# ---------------------------------------------------------------------------
# Couplings

class Coupling:
    """Joint distribution over (x0, xL) with accessible marginals.

    Support enumeration is in ascending (x0, xL) flat-pair order so exact
    summations are bit-reproducible.
    """

    source: DiscreteDistribution
    target: DiscreteDistribution

    @property
    def n(self) -> int:
        return self.source.n

    def support_size(self) -> int:
        raise NotImplementedError

    def support_arrays(self):
        """(x0_flats, xL_flats, weights) in ascending pair order."""
        raise NotImplementedError

    def diagonal(self) -> np.ndarray:
        """d[x] = pi(x, x), the mass on coincident pairs."""
        raise NotImplementedError

    def sample_pairs(self, rng: np.random.Generator, size: int):
        raise NotImplementedError


class IndependentCoupling(Coupling):
    """pi(x0, xL) = p(x0) * q(xL)."""

    def __init__(self, source: DiscreteDistribution, target: DiscreteDistribution):
        if source.n != target.n:
            raise ValueError("source and target must share a state space")
        self.source = source
        self.target = target

    def support_size(self) -> int:
        return int(self.source.support().size) * int(self.target.support().size)

    def support_arrays(self):
        s = self.source.support()
        t = self.target.support()
        x0 = np.repeat(s, t.size)
        xL = np.tile(t, s.size)
        w = self.source.mass[x0] * self.target.mass[xL]
        return x0, xL, w

    def diagonal(self) -> np.ndarray:
        return self.source.mass * self.target.mass

    def sample_pairs(self, rng, size):
        return self.source.sample(rng, size), self.target.sample(rng, size)


class PairedCoupling(Coupling):
    """Uniform weight over an explicit list of (x0, xL) pairs (duplicates allowed)."""

    def __init__(self, pairs, n: int):
        pairs = np.array([(_flat_of(a), _flat_of(b)) for a, b in pairs], dtype=np.int64)
        if pairs.size == 0:
            raise ValueError("pair list must be non-empty")
        if pairs.min() < 0 or pairs.max() >= n:
            raise ValueError("pair indices out of range")
        self.pairs = pairs
        self._n = int(n)
        m = pairs.shape[0]
        self.source = DiscreteDistribution.from_weights(
            np.bincount(pairs[:, 0], minlength=n))
        self.target = DiscreteDistribution.from_weights(
            np.bincount(pairs[:, 1], minlength=n))
        keys = pairs[:, 0] * n + pairs[:, 1]
        uniq, counts = np.unique(keys, return_counts=True)
        self._x0 = uniq // n
        self._xL = uniq % n
        self._w = counts / m

    @property
    def n(self) -> int:
        return self._n

    def support_size(self) -> int:
        return int(self._x0.size)

    def support_arrays(self):
        return self._x0, self._xL, self._w

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self._n)
        eq = self._x0 == self._xL
        d[self._x0[eq]] = self._w[eq]
        return d

    def sample_pairs(self, rng, size):
        idx = rng.integers(0, self.pairs.shape[0], size=size)
        return self.pairs[idx, 0], self.pairs[idx, 1]


class ExplicitCoupling(Coupling):
    """Dense joint table pi[x0, xL]; marginals are its row and column sums."""

    def __init__(self, table, source: DiscreteDistribution = None,
                 target: DiscreteDistribution = None):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError("joint table must be square")
        if np.any(table < 0):
            raise ValueError("joint weights must be non-negative")
        total = float(table.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"joint table sums to {total}, not 1")
        self.table = table
        self.source = DiscreteDistribution.from_weights(table.sum(axis=1))
        self.target = DiscreteDistribution.from_weights(table.sum(axis=0))
        for given, computed, name in ((source, self.source, "row"),
                                      (target, self.target, "column")):
            if given is not None:
                gap = float(np.abs(given.mass - computed.mass).max())
                if gap > 1e-12:
                    raise ValueError(f"{name} sums deviate from declared marginal by {gap}")

    def support_size(self) -> int:
        return int(np.count_nonzero(self.table))

    def support_arrays(self):
        x0, xL = np.nonzero(self.table)  # row-major: ascending pair order
        return x0, xL, self.table[x0, xL]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.table).copy()

    def sample_pairs(self, rng, size):
        if not hasattr(self, "_flat"):
            self._flat = DiscreteDistribution.from_weights(self.table.ravel())
        idx = self._flat.sample(rng, size)
        return idx // self.table.shape[1], idx % self.table.shape[1]


def comonotone_coupling(p: DiscreteDistribution, q: DiscreteDistribution) -> ExplicitCoupling:
    """Monotone (northwest-corner) rearrangement of p and q in flat-index order."""
    if p.n != q.n:
        raise ValueError("marginals must share a state space")
    table = np.zeros((p.n, q.n))
    i = j = 0
    remaining_p = p.mass.copy()
    remaining_q = q.mass.copy()
    while i < p.n and j < q.n:
        move = min(remaining_p[i], remaining_q[j])
        table[i, j] += move
        remaining_p[i] -= move
        remaining_q[j] -= move
        # min side is exactly zero after the move, so we always advance
        if remaining_p[i] <= 1e-15:
            i += 1
        if remaining_q[j] <= 1e-15:
            j += 1
    return ExplicitCoupling(table / table.sum())


def superposed_potential(cfg: CircuitConfig, ell: int, x_ell, coupling: Coupling,
                         support_cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Sum of pair potentials over the coupling support (ascending pair order)."""
    if coupling.n != cfg.n:
        raise ValueError("coupling state space does not match the circuit")
    size = coupling.support_size()
    if size > support_cap:
        raise SizeCapError(
            f"coupling support {size} exceeds the cap {support_cap}")
    table = potential_table(cfg)
    x0, xL, w = coupling.support_arrays()
    phi = table.phi_pairs([ell], [_flat_of(x_ell)], x0, xL)[0]
    return float(phi @ w)
