"""Spectral theory and quantum dynamics of periodic and limit-periodic Jacobi matrices."""

__version__ = "0.1.0"

from .exceptions import (
    BallisticLabError,
    FiberDegeneracyError,
    NumericalToleranceError,
    OrderingError,
    ResolutionError,
    UndefinedFiberError,
    ValidationError,
    WindowOverflowError,
)
from .lattice import (
    LimitPeriodicFamily,
    PeriodicJacobi,
    TruncatedOperator,
    WavePacket,
    build_truncation,
    coefficient_distance,
    commutator_operator,
    packet_moment,
)
from .floquet import BandSet, FloquetFiber, band_structure, build_fiber, fiber_q
from .dynamics import (
    EvolutionPlan,
    build_ec_family,
    convergence_experiment,
    evolve,
    heisenberg_position,
    limit_q_diagnostics,
    make_plan,
    make_q_operator,
    moment_series,
    position_growth,
    q_apply,
    transport_exponents,
)
from .spectral import dirichlet_dos, hausdorff_distance, homogeneity_scan, lyapunov, transfer
from .xy_chain import (
    SpinChainSpec,
    build_many_body,
    commutator_norm,
    jordan_wigner_one_particle,
    light_cone_scan,
    lr_velocity_lower_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
