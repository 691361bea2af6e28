"""Distributions, synthetic datasets, and evaluation metrics.

The two experiment pairs are a discretized uniform -> Gaussian task on a
single axis and a two-moons -> swiss-roll task on a 50x50 grid. The paper
datasets are named, not parameterized, so the generator constants here are
fixed and versioned: changing them changes every downstream table.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .circuit import CircuitConfig, categories_matrix

log = logging.getLogger(__name__)

_NORMALIZATION_TOL = 1e-12

# fixed generator constants for the 2D clouds
MOONS_NOISE = 0.05
SWISS_NOISE = 0.05
SWISS_T_RANGE = (1.5 * np.pi, 4.5 * np.pi)


class DiscreteDistribution:
    """Probability table over flat state indices with exact inverse-CDF sampling."""

    def __init__(self, mass):
        mass = np.asarray(mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("mass must be a non-empty 1-D table")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("mass entries must be finite and non-negative")
        total = float(mass.sum())
        if abs(total - 1.0) > _NORMALIZATION_TOL:
            raise ValueError(f"mass sums to {total}, not 1 within {_NORMALIZATION_TOL}")
        self.mass = mass
        self._cdf = np.cumsum(mass)
        self._cdf[-1] = 1.0

    @classmethod
    def from_weights(cls, weights) -> "DiscreteDistribution":
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValueError("weights must have a positive finite sum")
        return cls(weights / total)

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mass)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw flat indices by inverse CDF; bit-reproducible for a fixed rng."""
        u = rng.random(size)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64)


@dataclass(frozen=True)
class SampleSet:
    """Rows of category vectors plus the provenance needed to regenerate them."""

    rows: np.ndarray  # (N, D) integer categories
    provenance: dict

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise ValueError("rows must be a non-empty (N, D) array")
        if rows.min() < 0:
            raise ValueError("negative category in sample set")
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]


def total_variation(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """0.5 * sum |p - q|; requires equal support size."""
    if p.n != q.n:
        raise ValueError(f"support size mismatch: {p.n} vs {q.n}")
    return 0.5 * float(np.abs(p.mass - q.mass).sum())


def histogram(samples, cfg: CircuitConfig) -> DiscreteDistribution:
    """Empirical distribution of a sample set (or raw rows) on cfg's state space."""
    rows = samples.rows if isinstance(samples, SampleSet) else np.asarray(samples)
    if rows.size == 0:
        raise ValueError("cannot build a histogram from an empty sample set")
    rows = rows.reshape(rows.shape[0], -1).astype(np.int64)
    if rows.shape[1] != cfg.D:
        raise ValueError(f"samples have {rows.shape[1]} dims, config has {cfg.D}")
    if rows.min() < 0 or rows.max() >= cfg.S:
        raise ValueError("sample categories out of range for config")
    flats = np.zeros(rows.shape[0], dtype=np.int64)
    for d in reversed(range(cfg.D)):
        flats = flats * cfg.S + rows[:, d]
    counts = np.bincount(flats, minlength=cfg.n)
    return DiscreteDistribution.from_weights(counts)


def flats_from_rows(rows: np.ndarray, S: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int64)
    flats = np.zeros(rows.shape[0], dtype=np.int64)
    for d in reversed(range(rows.shape[1])):
        flats = flats * S + rows[:, d]
    return flats


def _rng(seed, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), tag))))


def make_1d_pair(S: int = 50, seed: int = 0, n_samples: int = 100_000):
    """Uniform source over S bins and a bin-integrated N(S/2, 1) target.

    The Gaussian is discretized by CDF differences over unit bins [k, k+1)
    and renormalized over [0, S), which keeps the tails exact instead of
    sampling the density at midpoints.
    """
    p = DiscreteDistribution.from_weights(np.ones(S))
    edges = np.arange(S + 1, dtype=float)
    cdf = norm.cdf(edges, loc=S / 2.0, scale=1.0)
    q = DiscreteDistribution.from_weights(np.diff(cdf))

    src_rng, tgt_rng = _rng(seed, 1), _rng(seed, 2)
    src = SampleSet(
        p.sample(src_rng, n_samples)[:, None],
        {"generator": "uniform_1d", "seed": int(seed), "size": int(n_samples)},
    )
    tgt = SampleSet(
        q.sample(tgt_rng, n_samples)[:, None],
        {"generator": "gaussian_1d", "seed": int(seed), "size": int(n_samples)},
    )
    return p, q, src, tgt


def _moons_cloud(rng: np.random.Generator, n_points: int, noise: float) -> np.ndarray:
    n_outer = n_points // 2
    n_inner = n_points - n_outer
    t_outer = rng.uniform(0.0, np.pi, n_outer)
    t_inner = rng.uniform(0.0, np.pi, n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    cloud = np.concatenate([outer, inner])
    return cloud + rng.normal(0.0, noise, cloud.shape)


def _swiss_roll_cloud(rng: np.random.Generator, n_points: int, noise: float) -> np.ndarray:
    lo, hi = SWISS_T_RANGE
    t = rng.uniform(lo, hi, n_points)
    cloud = np.column_stack([t * np.cos(t), t * np.sin(t)]) / hi
    return cloud + rng.normal(0.0, noise, cloud.shape)


# fixed binning windows (generator geometry plus 4 sigma of noise): using the
# sample bounding box instead would shift every bin with the sample count
MOONS_BOUNDS = ((-1.0 - 4 * MOONS_NOISE, 2.0 + 4 * MOONS_NOISE),
                (-0.5 - 4 * MOONS_NOISE, 1.0 + 4 * MOONS_NOISE))
SWISS_BOUNDS = ((-1.0 - 4 * SWISS_NOISE, 1.0 + 4 * SWISS_NOISE),
                (-1.0 - 4 * SWISS_NOISE, 1.0 + 4 * SWISS_NOISE))


def discretize_cloud(points: np.ndarray, S: int, bounds=None):
    """Affine-map a 2D cloud onto [0, S)^2 and floor-bin it.

    bounds is ((xlo, xhi), (ylo, yhi)); the per-axis sample bounding box is
    used when omitted. Out-of-range points are clamped to boundary bins and
    the clamped fraction is returned alongside the table.
    """
    points = np.asarray(points, dtype=float)
    if bounds is None:
        lo = points.min(axis=0)
        hi = points.max(axis=0)
    else:
        lo = np.array([bounds[0][0], bounds[1][0]], dtype=float)
        hi = np.array([bounds[0][1], bounds[1][1]], dtype=float)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (points - lo) / span * S
    idx = np.floor(scaled).astype(np.int64)
    inside = (scaled >= 0).all(axis=1) & (idx <= S - 1).all(axis=1)
    clamped = float(1.0 - inside.mean())
    idx = np.clip(idx, 0, S - 1)
    flats = idx[:, 0] + S * idx[:, 1]
    counts = np.bincount(flats, minlength=S * S)
    return DiscreteDistribution.from_weights(counts), clamped


def make_2d_pair(S: int = 50, seed: int = 0, n_points: int = 100_000,
                 n_samples: int = 100_000):
    """Two-moons source and 2D swiss-roll target, binned onto an SxS grid."""
    p, clamped_p = discretize_cloud(
        _moons_cloud(_rng(seed, 3), n_points, MOONS_NOISE), S, MOONS_BOUNDS)
    q, clamped_q = discretize_cloud(
        _swiss_roll_cloud(_rng(seed, 4), n_points, SWISS_NOISE), S, SWISS_BOUNDS)
    if clamped_p or clamped_q:
        log.info("clamped fractions: source %.3g, target %.3g", clamped_p, clamped_q)

    cfg = CircuitConfig(L=1, S=S, D=2, r=1.0, R=1.0)  # only for index arithmetic
    src_rng, tgt_rng = _rng(seed, 5), _rng(seed, 6)
    src = SampleSet(
        categories_matrix(p.sample(src_rng, n_samples), cfg),
        {"generator": "moons_2d", "seed": int(seed), "size": int(n_samples)},
    )
    tgt = SampleSet(
        categories_matrix(q.sample(tgt_rng, n_samples), cfg),
        {"generator": "swiss_roll_2d", "seed": int(seed), "size": int(n_samples)},
    )
    return p, q, src, tgt


# ---------------------------------------------------------------------------
# CSV interfaces

def write_distribution_csv(path, dist: DiscreteDistribution):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state_flat", "mass"])
        for i, m in enumerate(dist.mass):
            writer.writerow([i, repr(float(m))])


def read_distribution_csv(path) -> DiscreteDistribution:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["state_flat", "mass"]:
            raise ValueError(f"unexpected distribution CSV header: {header}")
        pairs = [(int(row[0]), float(row[1])) for row in reader]
    if not pairs:
        raise ValueError("empty distribution CSV")
    mass = np.zeros(max(i for i, _ in pairs) + 1)
    for i, m in pairs:
        mass[i] = m
    return DiscreteDistribution.from_weights(mass)


def write_samples_csv(path, rows: np.ndarray):
    rows = np.asarray(rows, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"c{d}" for d in range(rows.shape[1])])
        for row in rows:
            writer.writerow([int(v) for v in row])


def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = [[int(v) for v in row] for row in reader]
    return np.asarray(rows, dtype=np.int64)
