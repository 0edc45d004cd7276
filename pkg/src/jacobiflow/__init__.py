"""Frozen and stochastic Jacobi particle systems and their many-particle limits."""

from .detflow import (ESPTrajectory, IntegratorOptions, Trajectory, discriminant, esp_closed_form,
                      esp_invert, integrate, integrate_interior, integrate_noncompact,
                      lyapunov_check, solve_from_boundary)
from .errors import (CollisionError, ConfigError, ConstraintError, DomainError, GrowthGuardError,
                     JacobiFlowError, NotInImageError, SingularConfigurationError,
                     SingularStartError)
from .freeprob import (cumulants_to_moments, evaluate, free_add, moments_to_cumulants, mp_moments,
                       predict_limit, semicircle_moments)
from .harness import Experiment, make_start, run_experiment, zeros_limit_experiment
from .jacobi_poly import JacobiParams, eval_jacobi, jacobi_zeros
from .kernels import BACKEND
from .model import (Domain, ModelParams, ParticleState, Regime, ScalingRegime, drift,
                    drift_compact, drift_noncompact, params_from_multiplicities)
from .moments import (MomentVector, RegimeLimitSpec, empirical_moments, limit_recursion,
                      moment_ode_oracle)
from .sde import Scheme, SdeConfig, martingale_diagnostic, simulate, simulate_compact, \
    simulate_noncompact

__all__ = [
    "BACKEND", "CollisionError", "ConfigError", "ConstraintError", "Domain", "DomainError",
    "ESPTrajectory", "Experiment", "GrowthGuardError", "IntegratorOptions", "JacobiFlowError",
    "JacobiParams", "ModelParams", "MomentVector", "NotInImageError", "ParticleState", "Regime",
    "RegimeLimitSpec", "ScalingRegime", "Scheme", "SdeConfig", "SingularConfigurationError",
    "SingularStartError", "Trajectory", "cumulants_to_moments", "discriminant", "drift",
    "drift_compact", "drift_noncompact", "empirical_moments", "esp_closed_form", "esp_invert",
    "eval_jacobi", "evaluate", "free_add", "integrate", "integrate_interior",
    "integrate_noncompact", "jacobi_zeros", "limit_recursion", "lyapunov_check", "make_start",
    "martingale_diagnostic", "moment_ode_oracle", "moments_to_cumulants", "mp_moments",
    "params_from_multiplicities", "predict_limit", "run_experiment", "semicircle_moments",
    "simulate", "simulate_compact", "simulate_noncompact", "solve_from_boundary",
    "zeros_limit_experiment",
]
