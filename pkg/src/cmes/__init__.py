"""Constrained max-value entropy search for Bayesian optimization."""
from .gp import KernelParams, GpPosterior, fit_gp, fit_posterior, predict_marginal, predict_joint
from .constraint import ConstraintPosterior, fit_ep, local_laplace, feasibility_stats
from .acquisition import cmes_score
from .thompson import YstarSet, sample_ystar_joint, sample_ystar_marginal, sobol_points
from .loop import BOConfig, Trajectory, run
from .problems import get_problem, make_blackbox, toy2d

__version__ = "0.1.0"
