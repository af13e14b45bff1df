"""Layered-superconductor energetics toolkit.

Lightweight imports only: the array-heavy submodules (``lattice``,
``minimize``, ``trial``, ``interp``) are imported on first use so that the
CLI can pin thread counts before numpy loads.
"""

from .errors import ConfigError, LawdonError, PropertyError, SolverError, StallError
from .metric import AnisotropyMetric, FieldVector, horizontal_part, norm_g, norm_g_inv
from .limit import (
    ConvexBodyK,
    LimitParams,
    PhaseResult,
    PhaseRow,
    classify,
    eval_F,
    hc1,
    minimize_F_oracle,
    phase_diagram_sweep,
    project_onto_K_shifted,
    write_sweep_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AnisotropyMetric",
    "FieldVector",
    "norm_g",
    "norm_g_inv",
    "horizontal_part",
    "ConvexBodyK",
    "LimitParams",
    "PhaseResult",
    "PhaseRow",
    "classify",
    "eval_F",
    "hc1",
    "minimize_F_oracle",
    "phase_diagram_sweep",
    "project_onto_K_shifted",
    "write_sweep_csv",
    "LawdonError",
    "ConfigError",
    "SolverError",
    "StallError",
    "PropertyError",
    "__version__",
]
