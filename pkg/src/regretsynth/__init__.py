"""Discrete-time regret-optimal and robust regret-optimal control synthesis."""

from .statespace import (StateSpace, static_gain, series, parallel, append,
                         invert, zoh_discretize, tf1_to_ss, UNIT)
from .plants import (GeneralizedPlant, UncertainPlant, lft_lower, lft_upper,
                     matrix_lft_upper, weight_disturbance, structural_prune)
from .signals import Signal, simulate, inner, random_signal, sinusoid_signal
from .norms import FrequencyGrid, LoopMargins, hinf_norm, loop_margins, l2_gain_curve
from .riccati import (DareProblem, DareSolution, DareAssumptionReport,
                      check_dare_assumptions, solve_dare, dare_residual)
from .noncausal import (NoncausalController, NoncausalClosedLoop,
                        build_noncausal, build_phat, eval_noncausal_cost,
                        noncausal_response)
from .spectral import (SpectralFactor, para_hermitian_apply,
                       spectral_factorize_general, spectral_factor_regret,
                       verify_factor, effective_gamma_d, EPS_CR)
from .hinf import SynthesisResult, synth_hinf, hinf_optimize
from .regret import (RegretLevel, ParetoFront, ParetoPoint, synth_regret,
                     optimize_special, pareto_front, verify_regret)
from .robust import (AugmentedOpenLoop, DScaling, DKOptions, UncertaintySample,
                     build_M, dk_iteration, dk_feasibility_oracle, fit_dscale,
                     matrix_rp_test, robust_pareto_front, robust_perf_test,
                     sample_uncertainty, verify_robust_regret,
                     worst_case_const_delta)
from .examples import (EXAMPLE_NAMES, ExampleSpec, build_example,
                       example_components, example_spec,
                       quartercar_response_plant, road_pulse)
from . import errors
from . import io

__version__ = "0.1.0"
