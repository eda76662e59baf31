"""Explicit sparse, weight-bounded deep ReLU networks for Hölder functions on manifolds."""

from .assembler import Assembly, BudgetError, ErrorBudget, assemble, build_chart_net, build_pullback_net, build_tau_net, error_budget
from .bench import ErrorReport, ExperimentConfig, emit_report, rate_fit, read_report, run_erm_experiment, sup_error, target_function
from .calculus import (canonical_width, compose, embed, identity_net, linear_net, map_outputs, pad_depth,
                       pad_depth_top, parallelize, sign_split)
from .holder import HolderFunction, HolderNet, LocalScheme, PreconditionError, build_holder_net, taylor_poly
from .manifold import (Chart, CoverageError, Manifold, PartitionOfUnity, build_partition, circle_embedded, in_margin,
                       make_circle, make_product, make_torus, manifold_by_name, smoothed_division)
from .network import (RELAXED, STRICT, Architecture, Network, NetworkError, deserialize, evaluate, load, save,
                      serialize, sparsity, validate)
from .primitives import build_hat_product, build_mult, build_mult_star, hat_net, mult_star_exponent

__version__ = "0.1.0"
