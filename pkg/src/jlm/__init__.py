"""Jacobi last multipliers, Lagrangians and Noether integrals for planar ODE systems."""

from .errors import *  # noqa: F401,F403
from .expr import numeric_equiv, parse, simplify, to_latex, to_str
from .integrals import FirstIntegral, conservation_residual, is_conserved, verify_first_integral
from .model import ChangeOfVariables, OdeSystem, SecondOrderOde, apply_change, load_model, parse_model
from .multiplier import (AnsatzSpec, Multiplier, multiplier_from_integral, product_multiplier,
                         ratio_first_integral, residual, solve_ansatz, transform_multiplier)
from .noether import (SymmetryGenerator, TIME_TRANSLATION, multiplier_chain, noether_integral_2nd,
                      noether_integral_system)
from .numeric import Trajectory, compare_reduction, drift, integrate
from .reduction import eliminate, push_multiplier
from .variational import (Lagrangian, add_gauge, el_residual, lagrangian_equiv, lagrangian_multiplier,
                          linear_lagrangian, satisfies_el, second_order_lagrangian)

__version__ = "0.1.0"
