"""Simulation of perturbed inertial gradient flows

    x'' + (alpha / t**theta) x' + grad F(x) = g(t),

with Lyapunov-energy certification and empirical convergence rates."""

from .dynamics import (DivergenceError, IntegrationError, LogUniformGrid, SolverConfig, State,
                       StepSizeUnderflow, Trajectory, UniformGrid, integrate, mechanical_energy)
from .geometry import (GeometryClass, GeometryError, Objective, check_H1, check_H2,
                       finite_difference_gradient_check, make_anisotropic_objective,
                       make_power_objective, objective_from_config)
from .lyapunov import (LyapunovParams, Variant, certify_c_bound, certify_lemma_bound, certify_xi_bound,
                       eval_E, eval_G_series, monotonicity_report, select_params)
from .perturbation import (DampingSpec, ExpGamma, ExpWeight, PerturbationSchedule, PolyWeight, PowerLaw,
                           Zero, eval_g, gamma_integral, integrability_margin, schedule_from_config)
from .rates import (RateFit, TheoremCase, dispatch, fit_rate, fit_series, fit_velocity_rate,
                    predicted_exponent, verdict)

__version__ = "0.1.0"
