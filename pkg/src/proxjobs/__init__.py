"""Proximity-service jobs per inhabitant from stratified first-percentile regression."""

from .quantreg import Observation, QuantileFit, brute_force_fit, check_loss, fit_quantile_line, predict
from .strata import (
    ComparisonTable,
    ModelSet,
    StratumId,
    StratumSpec,
    compare_populations,
    fit_all_strata,
    reference_modelset,
    stratum_of,
)

__version__ = "0.1.0"
