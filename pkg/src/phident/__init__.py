"""Passive port-Hamiltonian models identified from frequency response data."""

__version__ = "0.1.0"

from .benchmark import (ExperimentCell, ExperimentSpec, TTestResult, add_noise, error_profile,
                        make_rlc_ladder, paired_t_test, random_ph_system, run_experiment,
                        training_grid, validation_error, validation_grid)
from .config import IdentConfig, Variant, resolve_lambda
from .core import (Dimensions, Layout, ParamVector, PHSystem, assign, build_factors, param_vector,
                   realize, realize_fixed_feedthrough)
from .exceptions import (DimensionError, EvaluationError, FormatError, InputError, NumericalError,
                         PHIdentError, StructureError)
from .identify import IdentResult, identify, init_theta, multi_start
from .objective import ObjectiveReport, objective, penalty_gradient, sample_norm_gradient
from .optimizer import OptimizerSettings, OptTrace, Termination, check_strong_wolfe, minimize
from .passivity import PassivityReport, StructureReport, positive_real_sampled, schur_split, validate_ph_structure
from .transfer import FrdDataset, GeneralizedStateSpace, eval_gss, eval_ph, frequency_response, sample_frd

__all__ = [name for name in dir() if not name.startswith("_")]
