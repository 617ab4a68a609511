"""Finite-blocklength analysis of ORBGRAND decoding over binary-input channels."""

from .bounds import (
    BoundEstimate,
    Method,
    OperatingPoint,
    max_rate,
    min_blocklength,
    ml_na_epsilon,
    ml_rcu_relaxed,
    na_converse_rate,
    orb_na_epsilon,
    orb_na_rate,
    orb_rcu,
)
from .channel import (
    BinaryInputChannel,
    BpskAwgnChannel,
    DensityChannel,
    ReliabilityModel,
    capacity_and_dispersion,
    compute_a,
    compute_i_orb_v_orb,
    compute_mu,
    compute_sigma_sq,
    psi,
    reliability_model,
)
from .codes import (
    ErrorPattern,
    LinearCode,
    ep_stream,
    ml_decode,
    orbgrand_decode,
    simulate_ensemble_fer,
    simulate_linear_code,
)
from .errors import (
    DegenerateChannelError,
    DomainError,
    InfeasibleError,
    OrbfblError,
    QuadratureError,
    SaddlepointError,
    SearchCapError,
    SizeGuardError,
)
from .metric import MetricSample, hoeffding_diagnostics, orb_metric
from .saddlepoint import (
    cgf,
    cgf_d1,
    cgf_d2,
    finite_n_cgf,
    rate_derivatives,
    rate_function,
    solve_saddlepoint,
)
from .tail import TailTable, exact_cdf_table, ld_cdf, lookup, tail_table

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
