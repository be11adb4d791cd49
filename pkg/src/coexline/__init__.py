"""Exact sampling and limit-theorem checks for open TASEP stationary measures.

The stationary measure of the open TASEP with entry rate ``alpha`` and exit
rate ``beta`` is sampled through a decomposition of a weighted lazy random walk
at its first minimum.  Small systems are cross-checked against brute-force
enumeration and the Markov generator; large systems feed Monte Carlo tests of
the coexistence-line limit laws.
"""

from coexline.errors import ResourceLimitError, SolverError
from coexline.model import BoundaryRates, RepParams, kappa_pm, rep_from_rates, height, tau_star
from coexline.walks import step_law, weight_w, survival_table, sample_conditioned
from coexline.denisov import tn_law, sample_stationary, sample_batch

__all__ = [
    "BoundaryRates",
    "RepParams",
    "ResourceLimitError",
    "SolverError",
    "height",
    "kappa_pm",
    "rep_from_rates",
    "sample_batch",
    "sample_conditioned",
    "sample_stationary",
    "step_law",
    "survival_table",
    "tau_star",
    "tn_law",
    "weight_w",
]

__version__ = "0.1.0"
