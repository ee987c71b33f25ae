"""BER engine for uplink power-domain NOMA over a partitioned continuous RIS.

Analytical per-user BER from characteristic-function inversion, a
link-level Monte Carlo oracle, and a penalty-method optimizer over
transmit powers and partition widths.
"""

from .ber import BerQuadrature, NoiseModel, analytic_ber, ber_user, expected_q, max_ber, sum_ber
from .channel_stats import (
    ACCURATE,
    EffectiveChannelStats,
    PartitionLayout,
    QuadratureSpec,
    UserLinkParams,
    effective_stats,
    mean_gamma_kk,
    omega,
)
from .qterms import QTermTable, derive_qterm_table
from .scenario import ScenarioConfig, parse_scenario
from .special import CorrelationKind, CorrelationModel, correlation, gauss_2f1, kernel_gi, kernel_gk

__version__ = "0.1.0"
