"""
Continuous-variable entanglement measures computed from a MomentSet

The local oscillator of mode j = +-1 is b_j = (a0 +- a_vac)/sqrt(2), split off
the pump by a two-port beam splitter whose second port holds the vacuum. The
vacuum port is eliminated analytically: <a_vac^dag a_vac> = 0 and
<a_vac a_vac^dag> = 1, so every expression below uses pump, signal and idler
moments only. All quadrature moments are evaluated at equal time.

With A_j = exp(i theta) a_j^dag b_j and N_b = <a0^dag a0>/2, the generalized
quadrature is X_j(theta) = (A_j + A_j^dag)/sqrt(N_b) and

    <X_j>       = 2 Re(exp(i theta) <a_j^dag a0>/sqrt(2)) / sqrt(N_b)
    <X_j^2>     = [Re(exp(2i theta) <a_j^dag^2 a0^2>) + <n_j n0> + N0/2 + <n_j>] / N_b
    <X_1 X_-1>  = [Re(exp(2i theta) <a1^dag a-1^dag a0^2>) + Re <a1^dag a-1 a0^dag a0>] / N_b

using b_1 b_-1 = (a0^2 - a_vac^2)/2 and <b_1 b_-1^dag> -> <a0^dag a0>/2.

Classes:
    InferredVariant
    Objective
    QuadratureConfig
    EntanglementReport

Functions:
    generalized_quadrature_mean
    generalized_quadrature_variance
    generalized_quadrature_covariance
    two_mode_variance
    inferred_variance
    epr_parameter
    correlation
    standard_quadrature_variance
    inseparability_ratio
    optimize_phase
    optimize_time
    entanglement_report
    report_at_theta
    time_optimized_report
"""
import dataclasses
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union, Any

import numpy as np
from scipy.optimize import minimize_scalar

from spinepr import model
from spinepr.exceptions import CriterionUndefinedException, DegenerateMeasureException, \
    DepletedLocalOscillatorException, InvalidParameterException
from spinepr.model import MomentSet

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

Theta = Union[float, np.ndarray]

DEFAULT_THETA_STEPS = 512
PHASE_XTOL = 1e-7
DEGENERATE_BOUND = 1e-12

_PAIR_POWER = {1: model.A1D_SQ_A0_SQ, -1: model.AM1D_SQ_A0_SQ}
_NUMBER_PUMP = {1: model.N1_N0, -1: model.NM1_N0}
_COHERENCE = {1: model.A1D_A0, -1: model.AM1D_A0}
_FIRST = {1: model.A1, -1: model.AM1}
_SQUARE = {1: model.A1_SQ, -1: model.AM1_SQ}


class InferredVariant(Enum):
    """
    How the partner mode is used to infer a quadrature
    """
    OPTIMAL = "optimal"
    SYMMETRIC_DIFFERENCE = "symdiff"


class Objective(Enum):
    """
    Quantity minimized over the local-oscillator phase or over time
    """
    EPR = "epr"
    TWO_MODE_MINUS = "xminus"
    INSEP = "insep"


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Attributes
    ----------
    theta: float
        Local-oscillator phase, reduced to [0, 2 pi)
    inferred_variant: InferredVariant
    """
    theta: float = 0.0
    inferred_variant: InferredVariant = InferredVariant.OPTIMAL

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % (2.0 * math.pi))


@dataclass(frozen=True)
class EntanglementReport:
    """
    Entanglement measures at one time point

    Attributes
    ----------
    tau: float
    n_signal: float
    n_idler: float
    n_pump: float
    theta0: float
        Phase minimizing the EPR parameter
    upsilon: float
        EPR parameter at theta0 (nan when the criterion is undefined)
    correlation_c: float
        Quadrature correlation at theta0
    theta_xminus: float
        Phase minimizing the two-mode variance Var(X_-)
    var_xminus_min: float
    var_xplus: float
        Var(X_+) at theta_xminus
    theta_insep: float
    insep_ratio: float
    tau_xminus, tau_insep: Optional[float]
        Times of the individual optima in time-optimized reports
    n_signal_err, upsilon_err, correlation_err, var_xminus_err, insep_err: float
        Standard errors (zero for exact backends)
    warnings: Tuple[str, ...]
    """
    tau: float
    n_signal: float
    n_idler: float
    n_pump: float
    theta0: float
    upsilon: float
    correlation_c: float
    theta_xminus: float
    var_xminus_min: float
    var_xplus: float
    theta_insep: float
    insep_ratio: float
    tau_xminus: Optional[float] = None
    tau_insep: Optional[float] = None
    n_signal_err: float = 0.0
    upsilon_err: float = 0.0
    correlation_err: float = 0.0
    var_xminus_err: float = 0.0
    insep_err: float = 0.0
    warnings: Tuple[str, ...] = ()

    def objective_value(self, objective: Objective) -> float:
        return {
            Objective.EPR: self.upsilon,
            Objective.TWO_MODE_MINUS: self.var_xminus_min,
            Objective.INSEP: self.insep_ratio,
        }[objective]

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out["warnings"] = list(self.warnings)
        return out


_OBJECTIVE_FIELDS = {
    Objective.EPR: ("upsilon", "upsilon_err", "tau"),
    Objective.TWO_MODE_MINUS: ("var_xminus_min", "var_xminus_err", "tau_xminus"),
    Objective.INSEP: ("insep_ratio", "insep_err", "tau_insep"),
}


def _lo_number(m: MomentSet) -> float:
    n_b = m.population(0) / 2.0
    if n_b <= 0:
        log.error("empty local oscillator (pump population %s)", m.population(0))
        raise DepletedLocalOscillatorException(
            f"the pump population {m.population(0)} leaves no local oscillator (depleted regime)"
        )
    return n_b


def _check_mode(j: int) -> None:
    if j not in (1, -1):
        log.error("%s is not a signal/idler mode", j)
        raise InvalidParameterException(f"quadratures are defined for modes +1 and -1, got {j}")


def generalized_quadrature_mean(m: MomentSet, theta: Theta, j: int) -> Theta:
    _check_mode(j)
    n_b = _lo_number(m)
    return 2.0 * np.real(np.exp(1j * np.asarray(theta)) * m.value(_COHERENCE[j]) / math.sqrt(2.0)) / math.sqrt(n_b)


def _second_moment(m: MomentSet, theta: Theta, j: int) -> Theta:
    n_b = _lo_number(m)
    phase = np.exp(2j * np.asarray(theta))
    # A A + h.c. -> Re(e^{2i theta} <a_j^dag^2 a0^2>); A^dag A + A A^dag -> <n_j n0> + N0/2 + <n_j>
    return (np.real(phase * m.value(_PAIR_POWER[j])) + m.value(_NUMBER_PUMP[j]).real
            + m.population(0) / 2.0 + m.population(j)) / n_b


def _cross_moment(m: MomentSet, theta: Theta) -> Theta:
    n_b = _lo_number(m)
    phase = np.exp(2j * np.asarray(theta))
    return (np.real(phase * m.value(model.PAIR_PUMP)) + m.value(model.A1D_AM1_N0).real) / n_b


def generalized_quadrature_variance(m: MomentSet, theta: Theta, j: int) -> Theta:
    _check_mode(j)
    return _second_moment(m, theta, j) - generalized_quadrature_mean(m, theta, j) ** 2


def generalized_quadrature_covariance(m: MomentSet, theta: Theta) -> Theta:
    return _cross_moment(m, theta) - generalized_quadrature_mean(m, theta, 1) * generalized_quadrature_mean(m, theta, -1)


def two_mode_variance(m: MomentSet, theta: Theta, sign: int) -> Theta:
    if sign not in (1, -1):
        log.error("two-mode sign must be +1 or -1, got %s", sign)
        raise InvalidParameterException(f"two-mode sign must be +1 or -1, got {sign}")
    return (generalized_quadrature_variance(m, theta, 1) + generalized_quadrature_variance(m, theta, -1)
            + 2.0 * sign * generalized_quadrature_covariance(m, theta))


def inferred_variance(m: MomentSet, theta: Theta, j: int,
                      variant: InferredVariant = InferredVariant.OPTIMAL, sign: int = -1) -> Theta:
    """Variance of X_j(theta) inferred from the partner mode.

    Args:
        m: moments.
        theta: local-oscillator phase (scalar or array).
        j: inferred mode, +1 or -1.
        variant: OPTIMAL conditions on the partner optimally; SYMMETRIC_DIFFERENCE
            returns Var(X_j + sign X_{-j}) (sign -1 for X, +1 for the conjugate Y).
        sign: combination sign, used by SYMMETRIC_DIFFERENCE only.

    Returns:
        The inferred variance.
    """
    _check_mode(j)
    if variant == InferredVariant.SYMMETRIC_DIFFERENCE:
        return two_mode_variance(m, theta, sign)
    conditioning = np.asarray(generalized_quadrature_variance(m, theta, -j))
    if np.any(conditioning <= DEGENERATE_BOUND):
        log.error("zero conditioning variance of mode %s", -j)
        raise DegenerateMeasureException(f"the conditioning variance of mode {-j} vanishes")
    covariance = generalized_quadrature_covariance(m, theta)
    return generalized_quadrature_variance(m, theta, j) - covariance ** 2 / conditioning


def epr_parameter(m: MomentSet, theta: Theta, variant: InferredVariant = InferredVariant.OPTIMAL,
                  j: int = 1) -> Theta:
    _check_mode(j)
    ratio = m.population(j) / _lo_number(m)
    if ratio >= 1:
        log.error("signal population %s reaches the local oscillator %s", m.population(j), _lo_number(m))
        raise CriterionUndefinedException(
            f"mode {j} population {m.population(j):.4g} is not below the local oscillator {_lo_number(m):.4g}"
        )
    denominator = (1.0 - ratio) ** 2
    if denominator < DEGENERATE_BOUND:
        log.error("EPR denominator %s below %s", denominator, DEGENERATE_BOUND)
        raise CriterionUndefinedException(f"EPR denominator {denominator:.3e} is degenerate")
    theta = np.asarray(theta)
    x = inferred_variance(m, theta, j, variant, -1)
    y = inferred_variance(m, theta + math.pi / 2.0, j, variant, 1)
    return x * y / denominator


def correlation(m: MomentSet, theta: Theta) -> Theta:
    second_p = np.asarray(_second_moment(m, theta, 1))
    second_m = np.asarray(_second_moment(m, theta, -1))
    if np.any(second_p <= 0) or np.any(second_m <= 0):
        log.error("vanishing quadrature second moment")
        raise DegenerateMeasureException("the quadrature second moments must be positive")
    return _cross_moment(m, theta) / np.sqrt(second_p * second_m)


def standard_quadrature_variance(m: MomentSet, theta: Theta, j: int) -> Theta:
    """Var(a_j e^{-i theta} + a_j^dag e^{i theta})."""
    _check_mode(j)
    phase = np.exp(-1j * np.asarray(theta))
    mean = 2.0 * np.real(phase * m.value(_FIRST[j]))
    second = 2.0 * np.real(phase ** 2 * m.value(_SQUARE[j])) + 2.0 * m.population(j) + 1.0
    return second - mean ** 2


def inseparability_ratio(m: MomentSet, theta: Theta) -> Theta:
    theta = np.asarray(theta)
    conjugate = theta + math.pi / 2.0
    single = 2.0 * (standard_quadrature_variance(m, theta, 1) + standard_quadrature_variance(m, conjugate, 1))
    single = np.asarray(single)
    if np.any(single <= DEGENERATE_BOUND):
        log.error("degenerate single-mode variance sum")
        raise DegenerateMeasureException("the single-mode variance sum vanishes")
    return (two_mode_variance(m, theta, -1) + two_mode_variance(m, conjugate, 1)) / single


def _objective_function(m: MomentSet, objective: Objective,
                        variant: InferredVariant) -> Callable[[Theta], Theta]:
    if objective == Objective.EPR:
        return lambda theta: epr_parameter(m, theta, variant)
    if objective == Objective.TWO_MODE_MINUS:
        return lambda theta: two_mode_variance(m, theta, -1)
    return lambda theta: inseparability_ratio(m, theta)


def optimize_phase(m: MomentSet, objective: Objective, variant: InferredVariant = InferredVariant.OPTIMAL,
                   scan_points: int = DEFAULT_THETA_STEPS) -> Tuple[float, float]:
    """Global minimum over theta in [0, pi) of a pi-periodic objective.

    A uniform scan locates the basin, a bounded Brent search refines it.

    Returns:
        (theta0, value)
    """
    func = _objective_function(m, objective, variant)
    step = math.pi / scan_points
    grid = np.arange(scan_points) * step
    values = np.asarray(func(grid), dtype=float)
    if not np.any(np.isfinite(values)):
        log.error("objective %s is not finite anywhere on the phase grid", objective.value)
        raise DegenerateMeasureException(f"objective {objective.value} is not finite on the phase grid")
    best = int(np.nanargmin(values))
    result = minimize_scalar(lambda t: float(func(t)), bounds=(grid[best] - step, grid[best] + step),
                             method="bounded", options={"xatol": PHASE_XTOL})
    if result.success and result.fun <= values[best]:
        return float(result.x % math.pi), float(result.fun)
    return float(grid[best]), float(values[best])


def _safe_phase(m: MomentSet, objective: Objective, variant: InferredVariant,
                scan_points: int, warnings: List[str]) -> Tuple[float, float]:
    try:
        return optimize_phase(m, objective, variant, scan_points)
    except (CriterionUndefinedException, DegenerateMeasureException) as e:
        warnings.append(f"{objective.value} undefined at tau={m.tau:.6g}: {e}")
        return math.nan, math.nan


def _spread(samples: Sequence[float]) -> float:
    finite = np.asarray([s for s in samples if np.isfinite(s)], dtype=float)
    if finite.size < 2:
        return 0.0
    return float(np.std(finite, ddof=1) / math.sqrt(finite.size))


def _group_errors(groups: Sequence[MomentSet], variant: InferredVariant, theta0: float, theta_x: float,
                  theta_i: float) -> Dict[str, float]:
    def evaluate(func: Callable[[MomentSet], float]) -> float:
        samples = []
        for g in groups:
            try:
                samples.append(float(func(g)))
            except (CriterionUndefinedException, DegenerateMeasureException, DepletedLocalOscillatorException):
                continue
        return _spread(samples)

    errors = {"upsilon_err": 0.0, "correlation_err": 0.0, "var_xminus_err": 0.0, "insep_err": 0.0}
    if len(groups) < 2:
        return errors
    if np.isfinite(theta0):
        errors["upsilon_err"] = evaluate(lambda g: epr_parameter(g, theta0, variant))
        errors["correlation_err"] = evaluate(lambda g: correlation(g, theta0))
    if np.isfinite(theta_x):
        errors["var_xminus_err"] = evaluate(lambda g: two_mode_variance(g, theta_x, -1))
    if np.isfinite(theta_i):
        errors["insep_err"] = evaluate(lambda g: inseparability_ratio(g, theta_i))
    return errors


def entanglement_report(m: MomentSet, variant: InferredVariant = InferredVariant.OPTIMAL,
                        scan_points: int = DEFAULT_THETA_STEPS,
                        groups: Sequence[MomentSet] = ()) -> EntanglementReport:
    """Phase-optimized measures at the time of m.

    Args:
        m: moments.
        variant: inferred-variance variant of the EPR parameter.
        scan_points: phase scan resolution.
        groups: batch-group moments of a Monte Carlo run; their spread at the
            optimal phases gives the standard errors.
    """
    warnings: List[str] = list(m.warnings)
    theta0, upsilon = _safe_phase(m, Objective.EPR, variant, scan_points, warnings)
    theta_x, var_x = _safe_phase(m, Objective.TWO_MODE_MINUS, variant, scan_points, warnings)
    theta_i, insep = _safe_phase(m, Objective.INSEP, variant, scan_points, warnings)
    corr = float(correlation(m, theta0)) if np.isfinite(theta0) else math.nan
    var_plus = float(two_mode_variance(m, theta_x, 1)) if np.isfinite(theta_x) else math.nan
    errors = _group_errors(groups, variant, theta0, theta_x, theta_i)
    return EntanglementReport(
        tau=m.tau,
        n_signal=m.population(1),
        n_idler=m.population(-1),
        n_pump=m.population(0),
        theta0=theta0,
        upsilon=upsilon,
        correlation_c=corr,
        theta_xminus=theta_x,
        var_xminus_min=var_x,
        var_xplus=var_plus,
        theta_insep=theta_i,
        insep_ratio=insep,
        n_signal_err=m.error(model.N1),
        warnings=tuple(dict.fromkeys(warnings)),
        **errors
    )


def report_at_theta(m: MomentSet, theta: float, variant: InferredVariant = InferredVariant.OPTIMAL,
                    groups: Sequence[MomentSet] = ()) -> EntanglementReport:
    """All measures at a fixed phase, without optimization; an undefined EPR parameter is nan."""
    warnings: List[str] = list(m.warnings)
    try:
        upsilon = float(epr_parameter(m, theta, variant))
    except (CriterionUndefinedException, DegenerateMeasureException) as e:
        warnings.append(f"epr undefined at tau={m.tau:.6g}: {e}")
        upsilon = math.nan
    errors = _group_errors(groups, variant, theta if np.isfinite(upsilon) else math.nan, theta, theta)
    return EntanglementReport(
        tau=m.tau,
        n_signal=m.population(1),
        n_idler=m.population(-1),
        n_pump=m.population(0),
        theta0=theta,
        upsilon=upsilon,
        correlation_c=float(correlation(m, theta)),
        theta_xminus=theta,
        var_xminus_min=float(two_mode_variance(m, theta, -1)),
        var_xplus=float(two_mode_variance(m, theta, 1)),
        theta_insep=theta,
        insep_ratio=float(inseparability_ratio(m, theta)),
        n_signal_err=m.error(model.N1),
        warnings=tuple(dict.fromkeys(warnings)),
        **errors
    )


def optimize_time(reports: Sequence[EntanglementReport], objective: Objective) -> EntanglementReport:
    """Report at the time minimizing the objective.

    The minimum is refined by a parabola through the best grid point and its
    neighbours; the objective value and its time are replaced by the vertex,
    the remaining fields come from the best grid point.
    """
    if not reports:
        log.error("no reports to optimize over")
        raise InvalidParameterException("optimize_time needs at least one report")
    values = np.array([r.objective_value(objective) for r in reports], dtype=float)
    if not np.any(np.isfinite(values)):
        log.error("objective %s undefined at every time", objective.value)
        raise InvalidParameterException(f"objective {objective.value} is undefined at every time")
    best = int(np.nanargmin(values))
    field, _, time_field = _OBJECTIVE_FIELDS[objective]
    chosen = reports[best]
    tau_best, value_best = chosen.tau, float(values[best])
    if 0 < best < len(reports) - 1 and np.all(np.isfinite(values[best - 1:best + 2])):
        taus = np.array([reports[best - 1].tau, chosen.tau, reports[best + 1].tau])
        a, b, c = np.polyfit(taus - chosen.tau, values[best - 1:best + 2], 2)
        if a > 0:
            shift = -b / (2.0 * a)
            if taus[0] - chosen.tau <= shift <= taus[2] - chosen.tau:
                tau_best = chosen.tau + shift
                value_best = min(value_best, float(c - b * b / (4.0 * a)))
    return dataclasses.replace(chosen, **{field: value_best, time_field: tau_best})


def time_optimized_report(reports: Sequence[EntanglementReport]) -> EntanglementReport:
    """Combines the time optima of every measure; tau and theta0 refer to the EPR optimum."""
    epr = optimize_time(reports, Objective.EPR)
    xminus = optimize_time(reports, Objective.TWO_MODE_MINUS)
    insep = optimize_time(reports, Objective.INSEP)
    return dataclasses.replace(
        epr,
        var_xminus_min=xminus.var_xminus_min,
        var_xminus_err=xminus.var_xminus_err,
        theta_xminus=xminus.theta_xminus,
        var_xplus=xminus.var_xplus,
        tau_xminus=xminus.tau_xminus,
        insep_ratio=insep.insep_ratio,
        insep_err=insep.insep_err,
        theta_insep=insep.theta_insep,
        tau_insep=insep.tau_insep,
    )
