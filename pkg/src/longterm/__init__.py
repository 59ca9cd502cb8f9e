"""Heterogeneous long-term causal effects from short-term experiments and
long-term observational data, via sequential confounding-bias extrapolation."""

from .data import CombinedDataset, DataSchema, UnitRecord, load_csv, select_time_subset, split_halves, write_csv
from .dynamics import BiasPanel, BiasTransition, assumption_r2, assumption_test, build_panel, fit_transition
from .estimator import (
    HorizonChoice,
    TauModel,
    estimate_caecb,
    estimate_fcaecb,
    estimate_tlearner_exp_idealized,
    estimate_tlearner_obs,
    predict_tau,
    select_horizon,
)
from .nuisance import NuisanceSet, confounding_bias, fit_nuisances, observed_outcome_difference
from .regress import FittedModel, RegressorSpec
from .sim import BiasBreak, SimConfig, TruthTable, generate, population_oracle, true_tau

__version__ = "0.1.0"
