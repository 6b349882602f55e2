"""Bayesian multinomial probit regression with class-specific predictor selection."""
from .data import Dataset, load_csv, simulate_scenario1, simulate_scenario2
from .estimators import (average_squared_error, class_probabilities, conditional_beta_estimate,
                         inclusion_probabilities, median_probability_model, posterior_mean_beta,
                         predictive_distribution)
from .kernels import BACKEND
from .model import Hyperparameters, ProblemShape, default_intercept_mean
from .sampler import ChainConfig, ChainOutput, run_chain, run_chains

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChainConfig", "ChainOutput", "Dataset", "Hyperparameters", "ProblemShape",
    "average_squared_error", "class_probabilities", "conditional_beta_estimate",
    "default_intercept_mean", "inclusion_probabilities", "load_csv", "median_probability_model",
    "posterior_mean_beta", "predictive_distribution", "run_chain", "run_chains",
    "simulate_scenario1", "simulate_scenario2",
]
