"""Regular invertible Gaussian Volterra price models: simulation, exact
conditional laws, frictionless valuation and discrete conditional-mean
hedging under proportional transaction costs."""

from .errors import (
    ConfigError,
    DegenerateCostError,
    ModelParameterError,
    NoSolutionError,
    NotPositiveDefiniteError,
    SingularHedgeError,
    SingularKernelError,
    UnboundedInitialPositionError,
    UnsupportedKernelError,
    VolhedgeError,
)
from .models import (
    MarketModel,
    NoiseModel,
    QuadraticVariation,
    beta,
    brownian_motion,
    constant_drift,
    custom_covariance,
    fractional_bm,
    gamma,
    mixed_fbm,
    piecewise_linear_drift,
    quadratic_variation,
)
from .kernels import (
    DiscreteKernel,
    TimeGrid,
    apply_Kstar,
    build_kernel,
    recover_innovations,
    reconstruct_noise,
    solve_Kstar,
)
from .paths import (
    PathSet,
    conditional_simulate,
    path_rng,
    realized_qv,
    simple_arbitrage_check,
    simulate_paths,
)
from .prediction import (
    PredictionLaw,
    conditional_cov,
    conditional_functional_expectation,
    conditional_mean_X,
    prediction_law,
    psi_weights,
    rho_hat,
)
from .valuation import (
    EuropeanPayoff,
    bs_closed_form,
    call,
    constant_payoff,
    custom_payoff,
    delta,
    frictionless_value,
    identity_payoff,
    put,
)
from .hedging import (
    ConditionalGains,
    CostSpec,
    HedgeStep,
    HedgeTrace,
    conditional_gains,
    hedge_step,
    initial_position,
    run_hedge,
    solve_position,
)
from .config import ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"
