"""Feature selection by maximizing a variational lower bound on I(x_S; y)."""

import logging

from .data import (Dataset, TreeModelSpec, TreeNode, discretize, enumerate_joint,
                   gen_from_spec, gen_tree_synthetic, load_csv, write_csv)
from .estimators import (cmi_plugin, fit_cond_pmf, fit_kde, fit_pairwise_cond_pmf,
                         fit_prior, joint_mi_exact, kde_cond_density, mi_pair,
                         mi_plugin)
from .vmi import (QDistKind, SelectionResult, VmiConfig, init_state, lb_estimate,
                  score_candidate, select, step)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())
