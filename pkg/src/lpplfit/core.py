"""LPPL model evaluation, parametrization changes and stylized-fact checks.

Time is a real-valued trading-day index. Both parametrizations are supported:

    cartesian:  A + B dt^m + C1 dt^m cos(w ln dt) + C2 dt^m sin(w ln dt)
    phase:      A + B dt^m + C dt^m cos(w ln dt - phi)

with ``dt = t_c - t``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

# minimum distance to the critical time for pow/log evaluation
EPS_T = 1e-8

# stylized bounds on a bubble-like fit
M_BOUNDS = (0.1, 0.9)
OMEGA_BOUNDS = (6.0, 13.0)
C_MAX = 1.0

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Raised when an evaluation time is not strictly before the critical time."""


def _check_finite(params) -> None:
    for name, value in asdict(params).items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class LpplParams:
    t_c: float
    m: float
    omega: float
    A: float
    B: float
    C1: float
    C2: float

    def __post_init__(self):
        _check_finite(self)

    @property
    def C(self) -> float:
        return math.hypot(self.C1, self.C2)

    def to_phase(self) -> "PhaseParams":
        C, phi = cartesian_to_phase(self.C1, self.C2)
        return PhaseParams(self.t_c, self.m, self.omega, self.A, self.B, C, phi)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhaseParams:
    t_c: float
    m: float
    omega: float
    A: float
    B: float
    C: float
    phi: float

    def __post_init__(self):
        _check_finite(self)
        if self.C < 0:
            raise ValueError(f"amplitude C must be >= 0, got {self.C}")
        object.__setattr__(self, "phi", normalize_phase(self.phi))

    def to_cartesian(self) -> LpplParams:
        C1, C2 = phase_to_cartesian(self.C, self.phi)
        return LpplParams(self.t_c, self.m, self.omega, self.A, self.B, C1, C2)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HazardParams:
    alpha: float
    beta: float
    m: float
    omega: float
    t_c: float
    phi_h: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class Violation:
    name: str
    value: float
    bound: float
    kind: str  # "below", "above", "not_below", "not_above"

    def describe(self) -> str:
        words = {
            "below": "below",
            "above": "above",
            "not_below": "not below",
            "not_above": "not above",
        }
        return f"{self.name} {words[self.kind]} {self.bound:g}"


@dataclass(frozen=True)
class QualificationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def qualified(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "qualified": self.qualified,
            "violations": [
                {"name": v.name, "value": v.value, "bound": v.bound, "description": v.describe()}
                for v in self.violations
            ],
        }


def _time_to_critical(t_c, t):
    dt = t_c - np.asarray(t, dtype=float)
    if np.any(~(dt >= EPS_T)):
        raise DomainError(f"evaluation time must precede t_c={t_c} by at least {EPS_T}")
    return dt


def _scalar_or_array(values, t):
    return float(values) if np.ndim(t) == 0 else values


def eval_lppl(params: LpplParams, t):
    """Cartesian-form LPPL value at time(s) ``t``."""
    dt = _time_to_critical(params.t_c, t)
    log_dt = np.log(dt)
    f = np.exp(params.m * log_dt)
    phase = params.omega * log_dt
    value = params.A + f * (params.B + params.C1 * np.cos(phase) + params.C2 * np.sin(phase))
    return _scalar_or_array(value, t)


def eval_lppl_phase(params: PhaseParams, t):
    """Phase-form LPPL value at time(s) ``t``."""
    dt = _time_to_critical(params.t_c, t)
    log_dt = np.log(dt)
    f = np.exp(params.m * log_dt)
    value = params.A + f * (params.B + params.C * np.cos(params.omega * log_dt - params.phi))
    return _scalar_or_array(value, t)


def phase_to_cartesian(C: float, phi: float) -> tuple[float, float]:
    return C * math.cos(phi), C * math.sin(phi)


def normalize_phase(phi: float) -> float:
    phi = math.fmod(phi, TWO_PI)
    if phi < 0:
        phi += TWO_PI
    # fmod of a tiny negative value can round up to exactly 2*pi
    return 0.0 if phi >= TWO_PI else phi


def cartesian_to_phase(C1: float, C2: float) -> tuple[float, float]:
    """Amplitude and phase in [0, 2*pi); (0, 0) maps to (0, 0)."""
    if C1 == 0.0 and C2 == 0.0:
        return 0.0, 0.0
    return math.hypot(C1, C2), normalize_phase(math.atan2(C2, C1))


def hazard_rate(params: HazardParams, t):
    """Crash hazard rate alpha dt^(m-1) (1 + beta cos(omega ln dt - phi_h))."""
    dt = _time_to_critical(params.t_c, t)
    log_dt = np.log(dt)
    value = params.alpha * np.exp((params.m - 1.0) * log_dt) * (
        1.0 + params.beta * np.cos(params.omega * log_dt - params.phi_h)
    )
    return _scalar_or_array(value, t)


def implied_beta(B: float, C: float, m: float, omega: float) -> float:
    """Relative hazard oscillation amplitude implied by fitted B and C.

    B = -k a / m and C = -k a beta / sqrt(m^2 + omega^2), so the unknown
    product k a cancels in the ratio C / B.
    """
    if B == 0:
        raise ZeroDivisionError("implied_beta requires B != 0")
    if m == 0:
        raise ZeroDivisionError("implied_beta requires m != 0")
    return (C / B) * math.sqrt(m * m + omega * omega) / m


def qualify(params: LpplParams, window_end: float) -> QualificationReport:
    violations = []
    if params.m < M_BOUNDS[0]:
        violations.append(Violation("m", params.m, M_BOUNDS[0], "below"))
    if params.m > M_BOUNDS[1]:
        violations.append(Violation("m", params.m, M_BOUNDS[1], "above"))
    if params.omega < OMEGA_BOUNDS[0]:
        violations.append(Violation("omega", params.omega, OMEGA_BOUNDS[0], "below"))
    if params.omega > OMEGA_BOUNDS[1]:
        violations.append(Violation("omega", params.omega, OMEGA_BOUNDS[1], "above"))
    if not params.C < C_MAX:
        violations.append(Violation("C", params.C, C_MAX, "not_below"))
    if not params.B < 0:
        violations.append(Violation("B", params.B, 0.0, "not_below"))
    if not params.t_c > window_end:
        violations.append(Violation("t_c", params.t_c, window_end, "not_above"))
    return QualificationReport(tuple(violations))


def in_stylized_box(m: float, omega: float) -> bool:
    return M_BOUNDS[0] <= m <= M_BOUNDS[1] and OMEGA_BOUNDS[0] <= omega <= OMEGA_BOUNDS[1]
