"""Two-fluid flow in a three-vessel network: equilibria, linear stability,
bifurcation curves and direct simulation."""

from importlib.metadata import PackageNotFoundError, version

from .model import (
    ConfigError,
    DomainError,
    NetworkConfig,
    NetworkError,
    SingularityError,
    example_config,
    load_config,
)
from .equilibrium import continue_curve, detect_folds, solve_equilibria
from .stability import char_coefficients, classify_stability, count_unstable, find_eigenvalues
from .continuation import build_phase_diagram, hopf_branches, saddle_node_branches
from .simulator import SimConfig, analyze_cycle, run

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0+unknown"

__all__ = [
    "ConfigError",
    "DomainError",
    "NetworkConfig",
    "NetworkError",
    "SingularityError",
    "example_config",
    "load_config",
    "continue_curve",
    "detect_folds",
    "solve_equilibria",
    "char_coefficients",
    "classify_stability",
    "count_unstable",
    "find_eigenvalues",
    "build_phase_diagram",
    "hopf_branches",
    "saddle_node_branches",
    "SimConfig",
    "analyze_cycle",
    "run",
    "__version__",
]
