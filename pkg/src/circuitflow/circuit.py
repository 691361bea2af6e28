"""Layered resistor circuit: configuration, state indexing, resistances.

The circuit has L+1 layers of n = S**D nodes each; every node in layer l
connects to every node in layer l+1. The edge between equal states has
resistance r ("forward"), all other inter-layer edges have resistance R
("lateral").
"""

import json
from dataclasses import dataclass, field

import numpy as np

_MAX_STATES = 2**63 - 1


@dataclass(frozen=True)
class CircuitConfig:
    """Immutable circuit description; n and gamma are derived on construction."""

    L: int
    S: int
    D: int
    r: float
    R: float
    n: int = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.L < 1 or self.S < 1 or self.D < 1:
            raise ValueError(f"need L, S, D >= 1, got L={self.L} S={self.S} D={self.D}")
        if not (self.r > 0 and self.R > 0):
            raise ValueError(f"resistances must be positive, got r={self.r} R={self.R}")
        n = self.S**self.D  # exact Python integer
        if n > _MAX_STATES:
            raise ValueError(f"state count S**D = {n} does not fit in 64 bits")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "gamma", 1.0 + self.r * n / self.R)


@dataclass(frozen=True)
class State:
    """A point of the category grid together with its flat index."""

    categories: tuple
    flat: int


def gamma_of(cfg: CircuitConfig) -> float:
    """Potential decay rate 1 + r*n/R."""
    return 1.0 + cfg.r * cfg.n / cfg.R


def flatten(categories, cfg: CircuitConfig) -> State:
    """Little-endian positional encoding: dimension 0 varies fastest."""
    cats = tuple(int(c) for c in categories)
    if len(cats) != cfg.D:
        raise ValueError(f"expected {cfg.D} categories, got {len(cats)}")
    flat = 0
    for d in reversed(range(cfg.D)):
        c = cats[d]
        if not 0 <= c < cfg.S:
            raise ValueError(f"category {c} out of range [0, {cfg.S}) in dim {d}")
        flat = flat * cfg.S + c
    return State(cats, flat)


def unflatten(flat: int, cfg: CircuitConfig) -> State:
    flat = int(flat)
    if not 0 <= flat < cfg.n:
        raise ValueError(f"flat index {flat} out of range [0, {cfg.n})")
    rem = flat
    cats = []
    for _ in range(cfg.D):
        cats.append(rem % cfg.S)
        rem //= cfg.S
    return State(tuple(cats), flat)


def _flat_of(x) -> int:
    return x.flat if isinstance(x, State) else int(x)


def resistance(cfg: CircuitConfig, x, y) -> float:
    """r between equal states, R otherwise; accepts State or flat index."""
    return cfg.r if _flat_of(x) == _flat_of(y) else cfg.R


def categories_matrix(flats: np.ndarray, cfg: CircuitConfig) -> np.ndarray:
    """Vectorized unflatten: (N,) flat indices -> (N, D) category matrix."""
    flats = np.asarray(flats, dtype=np.int64)
    out = np.empty((flats.shape[0], cfg.D), dtype=np.int64)
    rem = flats.copy()
    for d in range(cfg.D):
        out[:, d] = rem % cfg.S
        rem //= cfg.S
    return out


def config_to_json(cfg: CircuitConfig) -> str:
    return json.dumps({"L": cfg.L, "S": cfg.S, "D": cfg.D, "r": cfg.r, "R": cfg.R})


def config_from_json(text) -> CircuitConfig:
    """Parse the canonical experiment descriptor {"L","S","D","r","R"}."""
    obj = json.loads(text) if isinstance(text, (str, bytes)) else dict(text)
    missing = {"L", "S", "D", "r", "R"} - set(obj)
    if missing:
        raise ValueError(f"circuit config missing keys: {sorted(missing)}")
    return CircuitConfig(
        L=int(obj["L"]), S=int(obj["S"]), D=int(obj["D"]),
        r=float(obj["r"]), R=float(obj["R"]),
    )
