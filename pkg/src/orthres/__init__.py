"""Finite-filtration laboratory for martingale representation and
quadratic-growth BSDEs on scenario trees."""

from .errors import (ConfigError, ContractionError, InvariantViolation,
                     ModelError, NodeCapExceeded, OrthresError, SolverError)
from .ftree import (AdaptedProcess, ClockAndFactor, PredictableField,
                    ScenarioTree, TimeGrid, TreeBuilder, cond_exp,
                    is_martingale, pathwise_bracket, predictable_bracket,
                    tree_from_json, tree_to_json)
from .models import ModelConfig, build
from .gkw import gkw_decompose, martingale_from_terminal, residual_sweep
from .mollify import TerminalMap, clamp, l2_gap, lipschitz_scan, mollify
from .forward import SdeCoeffs, euler_forward, shift_start
from .bsde import (BsdeSolution, DriverSpec, DualControls, compare,
                   dual_value, inf_convolve, solve_lipschitz, solve_quadratic,
                   truncated_driver, vanishing_N_experiment)

__version__ = "0.1.0"
