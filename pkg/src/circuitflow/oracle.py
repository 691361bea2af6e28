"""Exact node-voltage solver for the full layered circuit.

This is the brute-force ground truth the closed-form potentials are checked
against. Nodes are indexed layer-major: node (l, x) -> l*n + x. The
conductance matrix is a graph Laplacian, so one node is grounded to make the
system nonsingular; all physically meaningful outputs are potential
differences and currents, which do not depend on that choice.

The inter-layer coupling block B (B[x, x] = -1/r, B[x, y] = -1/R) and the
diagonal degree blocks are never needed entrywise except in the dense path:
the block-elimination path for large instances works with one materialized
copy of B and scalar degree terms.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .circuit import CircuitConfig, _flat_of
from .data import DiscreteDistribution
from .errors import NumericalError, SizeCapError

DENSE_PATH_MAX_NODES = 2_000
DEFAULT_NODE_CAP = 20_000
MATRIX_MATERIALIZE_CAP = 4_000
RESIDUAL_TOL = 1e-9


@dataclass
class ConductanceSystem:
    """Laplacian system G*phi = i for a layered circuit.

    The full dense G is exposed through the `matrix` property for small
    systems; large systems keep only the layer structure and injections
    (materializing (L+1)n x (L+1)n doubles would defeat the block path).
    """

    cfg: CircuitConfig
    injection: np.ndarray  # ((L+1)*n,) net injected current per node

    @property
    def size(self) -> int:
        return (self.cfg.L + 1) * self.cfg.n

    def degree(self, layer: int) -> float:
        """Diagonal entry of every node in `layer`."""
        cfg = self.cfg
        per_side = 1.0 / cfg.r + (cfg.n - 1) / cfg.R
        return per_side if layer in (0, cfg.L) else 2.0 * per_side

    def coupling_apply(self, v: np.ndarray) -> np.ndarray:
        """B @ v without materializing B: (1/R - 1/r) v - sum(v)/R."""
        cfg = self.cfg
        return (1.0 / cfg.R - 1.0 / cfg.r) * v - v.sum(axis=0) / cfg.R

    def coupling_matrix(self) -> np.ndarray:
        cfg = self.cfg
        B = np.full((cfg.n, cfg.n), -1.0 / cfg.R)
        np.fill_diagonal(B, -1.0 / cfg.r)
        return B

    @property
    def matrix(self) -> np.ndarray:
        """Dense G; only available for small systems."""
        if self.size > MATRIX_MATERIALIZE_CAP:
            raise SizeCapError(
                f"refusing to materialize a {self.size}x{self.size} dense matrix; "
                f"cap is {MATRIX_MATERIALIZE_CAP} nodes")
        cfg = self.cfg
        n, L = cfg.n, cfg.L
        G = np.zeros((self.size, self.size))
        B = self.coupling_matrix()
        for layer in range(L + 1):
            sl = slice(layer * n, (layer + 1) * n)
            G[sl, sl] = np.eye(n) * self.degree(layer)
            if layer < L:
                nxt = slice((layer + 1) * n, (layer + 2) * n)
                G[sl, nxt] = B
                G[nxt, sl] = B.T
        return G

    def residual(self, phi: np.ndarray) -> float:
        """max |G phi - i| computed blockwise in O((L+1) n)."""
        cfg = self.cfg
        n, L = cfg.n, cfg.L
        layers = phi.reshape(L + 1, n)
        inj = self.injection.reshape(L + 1, n)
        worst = 0.0
        for layer in range(L + 1):
            res = self.degree(layer) * layers[layer] - inj[layer]
            if layer > 0:
                res += self.coupling_apply(layers[layer - 1])
            if layer < L:
                res += self.coupling_apply(layers[layer + 1])
            worst = max(worst, float(np.abs(res).max()))
        return worst


@dataclass
class PotentialSolution:
    phi: np.ndarray
    grounded_node: int
    residual: float
    cfg: CircuitConfig

    def phi_layers(self) -> np.ndarray:
        return self.phi.reshape(self.cfg.L + 1, self.cfg.n)

    def gap(self, ell: int, x, x_ref) -> float:
        """Gauge-invariant per-layer difference phi_l(x) - phi_l(x_ref)."""
        layers = self.phi_layers()
        return float(layers[ell, _flat_of(x)] - layers[ell, _flat_of(x_ref)])


def build_system(cfg: CircuitConfig, sources: DiscreteDistribution,
                 sinks: DiscreteDistribution,
                 node_cap: int = DEFAULT_NODE_CAP) -> ConductanceSystem:
    """Assemble injections +p on layer 0 and -q on layer L."""
    if sources.n != cfg.n or sinks.n != cfg.n:
        raise ValueError("source/sink tables must live on the circuit state space")
    size = (cfg.L + 1) * cfg.n
    if size > node_cap:
        raise SizeCapError(
            f"{size} nodes exceeds the solver cap {node_cap}; "
            "use a smaller instance or the analytic current field")
    injection = np.zeros(size)
    injection[:cfg.n] = sources.mass
    injection[cfg.L * cfg.n:] -= sinks.mass
    return ConductanceSystem(cfg, injection)


def system_from_injection(cfg: CircuitConfig, injection) -> ConductanceSystem:
    """Low-level constructor for superposition experiments; injections must balance."""
    injection = np.asarray(injection, dtype=float)
    if injection.shape != ((cfg.L + 1) * cfg.n,):
        raise ValueError("injection vector has the wrong length")
    if abs(injection.sum()) > 1e-9:
        raise ValueError("injections must sum to zero")
    return ConductanceSystem(cfg, injection)


def _pick_ground(system: ConductanceSystem) -> int:
    """Ground a generic-column node (no source/sink mass) when one exists."""
    cfg = system.cfg
    inj = system.injection.reshape(cfg.L + 1, cfg.n)
    column_load = np.abs(inj).sum(axis=0)
    quiet = np.flatnonzero(column_load == 0)
    return int(quiet[0]) if quiet.size else 0


def _solve_dense(system: ConductanceSystem, grounded: int) -> np.ndarray:
    G = system.matrix
    keep = np.arange(system.size) != grounded
    reduced = G[np.ix_(keep, keep)]
    rhs = system.injection[keep]
    try:
        factor = cho_factor(reduced)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - connected graphs only
        raise NumericalError(f"singular reduced system: {exc}") from exc
    phi = np.zeros(system.size)
    phi[keep] = cho_solve(factor, rhs)
    return phi


def _solve_block(system: ConductanceSystem, grounded: int) -> np.ndarray:
    """Block-tridiagonal forward elimination over layers, then back substitution."""
    cfg = system.cfg
    n, L = cfg.n, cfg.L
    g_layer, g_state = divmod(grounded, n)
    keep = [np.arange(n)] * (L + 1)
    keep[g_layer] = np.delete(np.arange(n), g_state)

    B = system.coupling_matrix()
    inj = system.injection.reshape(L + 1, n)

    def coupling(src_layer: int, dst_layer: int) -> np.ndarray:
        if keep[src_layer].size == n and keep[dst_layer].size == n:
            return B
        return B[np.ix_(keep[src_layer], keep[dst_layer])]

    factors = []
    zs = []
    prev_x = None  # S_{l-1}^{-1} B_{l-1->l}
    for layer in range(L + 1):
        a = np.eye(keep[layer].size) * system.degree(layer)
        z = inj[layer][keep[layer]].copy()
        if layer > 0:
            c = coupling(layer, layer - 1)  # rows: this layer, cols: previous
            a -= c @ prev_x
            z -= c @ cho_solve(factors[-1], zs[-1])
        try:
            factor = cho_factor(a)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"singular block at layer {layer}: {exc}") from exc
        factors.append(factor)
        zs.append(z)
        if layer < L:
            prev_x = cho_solve(factor, coupling(layer, layer + 1))

    phi = np.zeros((L + 1, n))
    tail = cho_solve(factors[L], zs[L])
    phi[L, keep[L]] = tail
    for layer in range(L - 1, -1, -1):
        rhs = zs[layer] - coupling(layer, layer + 1) @ phi[layer + 1, keep[layer + 1]]
        phi[layer, keep[layer]] = cho_solve(factors[layer], rhs)
    return phi.ravel()


def solve(system: ConductanceSystem, method: str = "auto",
          grounded: int = None) -> PotentialSolution:
    """Ground one node and solve the reduced nonsingular system.

    Parameters
    ----------
    system : ConductanceSystem
        Assembled circuit with balanced injections.
    method : {"auto", "dense", "block"}
        "auto" uses the dense factorization up to 2 000 nodes and the
        block-tridiagonal elimination beyond that.
    grounded : int, optional
        Node index to pin at potential zero. Defaults to a node in a column
        carrying no source or sink mass, when one exists.

    Returns
    -------
    PotentialSolution
        Potentials with `phi[grounded] == 0`; construction fails if the
        residual exceeds 1e-9 * max(1, |i|_inf).
    """
    if grounded is None:
        grounded = _pick_ground(system)
    if not 0 <= grounded < system.size:
        raise ValueError(f"grounded node {grounded} out of range")
    if method == "auto":
        method = "dense" if system.size <= DENSE_PATH_MAX_NODES else "block"
    if method == "dense":
        phi = _solve_dense(system, grounded)
    elif method == "block":
        phi = _solve_block(system, grounded)
    else:
        raise ValueError(f"unknown solve method {method!r}")

    residual = system.residual(phi)
    tol = RESIDUAL_TOL * max(1.0, float(np.abs(system.injection).max()))
    if not np.isfinite(residual) or residual > tol:
        raise NumericalError(
            f"solve residual {residual:.3e} exceeds the acceptance gate {tol:.3e}")
    return PotentialSolution(phi, grounded, residual, system.cfg)


def edge_currents(solution: PotentialSolution, cfg: CircuitConfig) -> np.ndarray:
    """Ohm's law on every inter-layer edge: I[l, x, y] = (phi_l(x) - phi_{l+1}(y)) / R(x, y)."""
    layers = solution.phi_layers()
    rmat = np.full((cfg.n, cfg.n), cfg.R)
    np.fill_diagonal(rmat, cfg.r)
    table = np.empty((cfg.L, cfg.n, cfg.n))
    for layer in range(cfg.L):
        table[layer] = (layers[layer][:, None] - layers[layer + 1][None, :]) / rmat
    return table


def conservation_report(currents: np.ndarray, sources: DiscreteDistribution,
                        sinks: DiscreteDistribution) -> dict:
    """Kirchhoff bookkeeping for a dense current table."""
    out0 = currents[0].sum(axis=1)
    inL = currents[-1].sum(axis=0)
    interior = 0.0
    for layer in range(1, currents.shape[0]):
        net = currents[layer - 1].sum(axis=0) - currents[layer].sum(axis=1)
        interior = max(interior, float(np.abs(net).max()))
    return {
        "max_interior_kirchhoff": interior,
        "max_source_mismatch": float(np.abs(out0 - sources.mass).max()),
        "max_sink_mismatch": float(np.abs(inL - sinks.mass).max()),
        "total_out_of_sources": float(out0.sum()),
        "total_into_sinks": float(inL.sum()),
    }


# ---------------------------------------------------------------------------
# Symmetry-reduced single-pair solver

@dataclass
class ReducedSolution:
    """Exact potentials of a single source-sink pair, by column class.

    tracks maps "source" / "sink" / "generic" to an (L+1,) potential array;
    "sink" aliases "source" when x0 == xL and "generic" is absent for n <= 2.
    """

    tracks: dict
    cfg: CircuitConfig
    x0: int
    xL: int

    def to_full(self) -> np.ndarray:
        """(L+1, n) potential table; generic columns share one track."""
        cfg = self.cfg
        full = np.zeros((cfg.L + 1, cfg.n))
        if "generic" in self.tracks:
            full[:] = self.tracks["generic"][:, None]
        full[:, self.x0] = self.tracks["source"]
        full[:, self.xL] = self.tracks["sink"]
        return full


def solve_reduced(cfg: CircuitConfig, x0, xL) -> ReducedSolution:
    """Solve the single-pair problem on the column-class quotient graph.

    All generic columns carry identical potentials by symmetry, so the
    (L+1)*n node system collapses to at most 3 tracks per layer. This is
    exact for every n (no large-n approximation) and costs O((L K)^3) with
    K <= 3, so it scales to arbitrarily large n.
    """
    x0 = _flat_of(x0)
    xL = _flat_of(xL)
    n, L = cfg.n, cfg.L
    if not (0 <= x0 < n and 0 <= xL < n):
        raise ValueError("source/sink state out of range")

    labels = ["source"]
    sizes = [1]
    if xL != x0:
        labels.append("sink")
        sizes.append(1)
    n_generic = n - len(labels)
    if n_generic > 0:
        labels.append("generic")
        sizes.append(n_generic)
    K = len(labels)
    idx = {lab: k for k, lab in enumerate(labels)}

    def weight(c: int, c2: int) -> float:
        if c == c2:
            return 1.0 / cfg.r + (sizes[c] - 1) / cfg.R
        return sizes[c2] / cfg.R

    per_side = 1.0 / cfg.r + (n - 1) / cfg.R
    dim = (L + 1) * K
    M = np.zeros((dim, dim))
    rhs = np.zeros(dim)
    for layer in range(L + 1):
        deg = per_side if layer in (0, L) else 2.0 * per_side
        for c in range(K):
            row = layer * K + c
            M[row, row] = deg
            for adj in (layer - 1, layer + 1):
                if 0 <= adj <= L:
                    for c2 in range(K):
                        M[row, adj * K + c2] -= weight(c, c2)
    rhs[0 * K + idx["source"]] = 1.0
    rhs[L * K + idx["sink" if xL != x0 else "source"]] -= 1.0

    ground = 0 * K + idx.get("generic", idx["source"])
    M[ground, :] = 0.0
    M[ground, ground] = 1.0
    rhs[ground] = 0.0
    sol = np.linalg.solve(M, rhs).reshape(L + 1, K)

    tracks = {"source": sol[:, idx["source"]].copy()}
    tracks["sink"] = sol[:, idx["sink"]].copy() if xL != x0 else tracks["source"]
    if "generic" in idx:
        tracks["generic"] = sol[:, idx["generic"]].copy()
    return ReducedSolution(tracks, cfg, x0, xL)


# ---------------------------------------------------------------------------
# Debug dumps

def dump_matrix_csv(path, system: ConductanceSystem):
    """(row, col, value) triplets of the dense conductance matrix."""
    G = system.matrix
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        rows, cols = np.nonzero(G)
        for i, j in zip(rows, cols):
            writer.writerow([int(i), int(j), repr(float(G[i, j]))])


def dump_potentials_csv(path, solution: PotentialSolution):
    layers = solution.phi_layers()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "state_flat", "potential"])
        for layer in range(layers.shape[0]):
            for x in range(layers.shape[1]):
                writer.writerow([layer, x, repr(float(layers[layer, x]))])
