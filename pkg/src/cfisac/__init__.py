"""Cell-free massive MIMO ISAC downlink: simulation and power optimization.

Submodules: scenario (geometry and association), channels (statistics and
realizations), estimation (pilots and MMSE filters), comm_metrics (SINR,
rates, Monte Carlo oracle), sensing (GLRT and effective SNR), socp (conic
solver), power_control (UPC / J-OPC / S-OPC), harness (experiments and
outputs).
"""

from .errors import (
    CfIsacError,
    ConfigurationError,
    DegenerateLinkError,
    DomainError,
    NumericalError,
)
from .scenario import Scenario, ScenarioConfig, build_scenario
from .comm_metrics import PowerAllocation
from .power_control import (
    OptimizationResult,
    QosProblemSpec,
    build_drop_stats,
    jopc,
    sopc,
    upc,
)
from .harness import (
    DropRecord,
    ExperimentConfig,
    cs_region,
    empirical_cdf,
    quantile,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "CfIsacError", "ConfigurationError", "DegenerateLinkError", "DomainError",
    "NumericalError", "Scenario", "ScenarioConfig", "build_scenario",
    "PowerAllocation", "OptimizationResult", "QosProblemSpec",
    "build_drop_stats", "jopc", "sopc", "upc", "DropRecord",
    "ExperimentConfig", "cs_region", "empirical_cdf", "quantile",
    "run_experiment", "__version__",
]
