"""Log-periodic power law (LPPL) bubble calibration with slaved linear parameters."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationError,
    CrossSection,
    FitConfig,
    FitResult,
    MwResult,
    ScanReport,
    TcProfile,
    WindowRecord,
    cross_section,
    f1,
    fit,
    grid_local_minima,
    grid_local_minima_2d,
    legacy_fit,
    minimize_mw,
    profile_tc,
    rolling_scan,
    s1,
)
from .core import (
    DomainError,
    HazardParams,
    LpplParams,
    PhaseParams,
    QualificationReport,
    Violation,
    cartesian_to_phase,
    eval_lppl,
    eval_lppl_phase,
    hazard_rate,
    implied_beta,
    phase_to_cartesian,
    qualify,
)
from .data import (
    CsvParseError,
    DuplicateDateError,
    EmptyWindowError,
    FitWindow,
    NonPositivePriceError,
    PriceSeries,
    SynthSpec,
    load_csv,
    slice_window,
    synth_generate,
    to_csv,
)
from .linear import (
    BasisColumns,
    LinearSolution,
    RankDeficiencyError,
    build_basis,
    cost_F,
    normal_equations,
    solve_linear3,
    solve_linear4,
)
from .optimize import LocalMinimum, OptimizerConfig, SearchBox, cluster_minima, local_minimize, multistart

__all__ = [name for name in dir() if not name.startswith("_") and name not in ("calibration", "cli", "core", "data", "linear", "optimize")]
