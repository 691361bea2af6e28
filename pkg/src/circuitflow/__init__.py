"""Discrete distribution transport via electric-current flows on layered circuits."""

from .chebyshev import ChebyshevTable, PolyKind, eval_T, eval_U
from .circuit import (
    CircuitConfig,
    State,
    config_from_json,
    config_to_json,
    flatten,
    gamma_of,
    resistance,
    unflatten,
)
from .currents import (
    AnalyticExactCurrent,
    CurrentField,
    LearnedCurrent,
    MonteCarloCurrent,
    OracleDenseCurrent,
    exact_current,
    mc_current,
)
from .data import (
    DiscreteDistribution,
    SampleSet,
    histogram,
    make_1d_pair,
    make_2d_pair,
    total_variation,
)
from .errors import (
    CycleSuspicionError,
    DegenerateNodeError,
    NumericalError,
    SizeCapError,
    TrainingDivergedError,
)
from .oracle import (
    build_system,
    conservation_report,
    edge_currents,
    solve,
    solve_reduced,
)
from .potentials import (
    Coupling,
    ExplicitCoupling,
    IndependentCoupling,
    PairedCoupling,
    PairPotentialQuery,
    comonotone_coupling,
    pair_potential,
    superposed_potential,
)
from .regressor import (
    RegressorParams,
    TrainConfig,
    encode,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .sampler import (
    Trajectory,
    absorption_distribution,
    step_general,
    transport,
    transport_forward,
    transport_forward_batch,
    transport_many,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
