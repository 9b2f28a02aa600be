"""Power-memory trade-off of cache-aided degraded Gaussian broadcast channels."""

__version__ = "0.1.0"

from .model import ConfigError, DemandClass, SystemConfig, leader_set, worst_class
from .combinatorics import binom, class_multiplicity, enumerate_classes
from .schemes import CENTRALIZED, DECENTRALIZED, centralized_rates, decentralized_rates, scheme_rates
from .power import average_power, min_power, peak_closed_form, peak_power, tradeoff_point
from .bounds import convexity_probe, gaps, lower_bound_average, lower_bound_peak
