"""
Closed-form undepleted-pump solutions

The pump is replaced by the constant classical amplitude sqrt(N0) and the
signal/idler dynamics reduce to parametric down-conversion with gain N0. The
formulas hold in the short-time limit (below roughly 10% depletion); outside it
they are still returned, with an advisory logged.

Classes:
    UndepletedParams

Functions:
    population_ud
    anomalous_ud
    epr_ud
    epr_min_ud
    tau_min_ud
    two_mode_var_ud
    insep_ud
    nth_max_ud
    moments_ud
    report_ud
"""
import logging
import math
from dataclasses import dataclass

from scipy.optimize import bisect

from spinepr import measures, model
from spinepr.exceptions import FormulaBreakdownException, InvalidParameterException, RootNotFoundException
from spinepr.measures import EntanglementReport
from spinepr.model import MomentSet

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

VALIDITY_ADVISORY = "undepleted-pump formulas are physically valid in the short-time limit only (< 10% depletion)"
SMALL_N0_ADVISORY = 50.0
FIT_RANGE = (100.0, 400.0)


@dataclass(frozen=True)
class UndepletedParams:
    """
    Attributes
    ----------
    n0: float
        Mean pump number N0 (the parametric gain)
    nbar: float
        Thermal occupation of each seeded mode
    """
    n0: float
    nbar: float = 0.0

    def __post_init__(self):
        if self.n0 <= 0 or self.nbar < 0:
            log.error("invalid undepleted parameters n0=%s nbar=%s", self.n0, self.nbar)
            raise InvalidParameterException(f"undepleted model needs n0 > 0 and nbar >= 0, got {self.n0}, {self.nbar}")

    @property
    def seed_factor(self) -> float:
        return 1.0 + 2.0 * self.nbar


def _check_tau(tau: float) -> None:
    if tau < 0:
        log.error("negative time %s", tau)
        raise InvalidParameterException(f"tau must be non-negative, got {tau}")


def population_ud(p: UndepletedParams, tau: float) -> float:
    _check_tau(tau)
    return math.sinh(p.n0 * tau) ** 2 * p.seed_factor + p.nbar


def anomalous_ud(p: UndepletedParams, tau: float) -> complex:
    """<a1 a-1> of the undepleted model; purely imaginary."""
    _check_tau(tau)
    return complex(0.0, -math.sinh(p.n0 * tau) * math.cosh(p.n0 * tau) * p.seed_factor)


def epr_ud(p: UndepletedParams, tau: float) -> float:
    _check_tau(tau)
    if p.n0 < SMALL_N0_ADVISORY:
        log.warning("EPR formula evaluated at N0=%s, which assumes N0 >> 1", p.n0)
    s = p.seed_factor
    c = math.cosh(2.0 * p.n0 * tau)
    sc = s * c
    numerator = s * s + (sc - 1.0) * (2.0 * sc - 1.0) / p.n0
    denominator = sc - (sc - 1.0) ** 2 / p.n0
    if denominator <= 0:
        log.error("EPR formula denominator %s at N0=%s tau=%s", denominator, p.n0, tau)
        raise FormulaBreakdownException(f"EPR formula breaks down at N0={p.n0}, tau={tau} (denominator {denominator})")
    return (numerator / denominator) ** 2


def _check_minimum_regime(p: UndepletedParams) -> None:
    if p.n0 <= p.seed_factor ** 2:
        log.error("N0=%s does not exceed (1+2nbar)^2=%s", p.n0, p.seed_factor ** 2)
        raise FormulaBreakdownException(
            f"the EPR minimum formulas need N0 > (1+2nbar)^2, got N0={p.n0}, nbar={p.nbar}"
        )


def epr_min_ud(p: UndepletedParams) -> float:
    _check_minimum_regime(p)
    s = p.seed_factor
    root = math.sqrt(2.0 * p.n0)
    inner = math.sqrt(p.n0 / 2.0) - s - (s ** 3 - (s * s + 1.0) * root) / (2.0 * p.n0)
    if inner <= 0:
        log.error("EPR minimum denominator %s at N0=%s nbar=%s", inner, p.n0, p.nbar)
        raise FormulaBreakdownException(f"EPR minimum formula breaks down at N0={p.n0}, nbar={p.nbar}")
    return (root / inner - 2.0) ** 2


def tau_min_ud(p: UndepletedParams) -> float:
    _check_minimum_regime(p)
    s = p.seed_factor
    argument = -s / 2.0 + 0.5 * math.sqrt(s * s + 2.0 * p.n0)
    if argument < 1.0:
        log.error("arccosh argument %s below 1 at N0=%s nbar=%s", argument, p.n0, p.nbar)
        raise FormulaBreakdownException(f"optimal-time formula breaks down at N0={p.n0}, nbar={p.nbar}")
    return math.acosh(argument) / (2.0 * p.n0)


def two_mode_var_ud(p: UndepletedParams, tau: float) -> float:
    _check_tau(tau)
    r = 2.0 * p.n0 * tau
    return 2.0 * p.seed_factor * (math.cosh(r) - math.sinh(r))


def insep_ud(p: UndepletedParams, tau: float) -> float:
    _check_tau(tau)
    return 1.0 - math.tanh(2.0 * p.n0 * tau)


def _excess_epr(nbar: float, n0: float) -> float:
    return epr_min_ud(UndepletedParams(n0, nbar)) - 1.0


def nth_max_ud(n0: float, tol: float = 1e-8) -> float:
    """Largest thermal seed keeping the undepleted EPR minimum below 1.

    Args:
        n0: mean pump number.
        tol: absolute tolerance on nbar.

    Returns:
        The root of epr_min_ud(nbar) = 1, found by bisection.
    """
    if tol <= 0:
        log.error("non-positive tolerance %s", tol)
        raise InvalidParameterException(f"tol must be positive, got {tol}")
    if not FIT_RANGE[0] <= n0 <= FIT_RANGE[1]:
        log.warning("N0=%s lies outside the range %s the threshold scaling was fitted on", n0, FIT_RANGE)
    try:
        if _excess_epr(0.0, n0) >= 0:
            raise RootNotFoundException(f"no EPR violation at nbar=0 for N0={n0}")
        # largest nbar with N0 > (1+2nbar)^2
        ceiling = (math.sqrt(n0) - 1.0) / 2.0
        lo, hi = 0.0, min(0.5, 0.999 * ceiling)
        while _excess_epr(hi, n0) < 0:
            lo = hi
            if hi >= 0.999 * ceiling:
                raise RootNotFoundException(f"no sign change of the EPR minimum below nbar={hi} for N0={n0}")
            hi = min(2.0 * hi, 0.999 * ceiling)
    except FormulaBreakdownException as e:
        log.error("threshold bracket left the formula's domain for N0=%s: %s", n0, e)
        raise RootNotFoundException(f"no sign change in the threshold bracket for N0={n0}") from e
    except RootNotFoundException as e:
        log.error("%s", e)
        raise
    root = bisect(_excess_epr, lo, hi, args=(n0,), xtol=tol)
    log.info("undepleted threshold for N0=%s: %s (scaling law 0.05 N0^(2/3) gives %s)",
             n0, root, 0.05 * n0 ** (2.0 / 3.0))
    return float(root)


def moments_ud(p: UndepletedParams, tau: float) -> MomentSet:
    """Moments of the undepleted model: classical pump and a Gaussian two-mode squeezed thermal state."""
    n = population_ud(p, tau)
    pair = anomalous_ud(p, tau)
    values = {
        model.A0: math.sqrt(p.n0),
        model.N0: p.n0,
        model.N1: n,
        model.NM1: n,
        model.A0_SQ: p.n0,
        model.A1_AM1: pair,
        model.PAIR_PUMP: p.n0 * pair.conjugate(),
        model.N1_N0: p.n0 * n,
        model.NM1_N0: p.n0 * n,
        model.N1_NM1: n * n + abs(pair) ** 2,
        model.N0_N0: p.n0 * p.n0,
    }
    return MomentSet.build(tau, values, origin="analytic", warnings=(VALIDITY_ADVISORY,))


def report_ud(p: UndepletedParams, tau: float) -> EntanglementReport:
    """Entanglement report of the undepleted model at the canonical phases pi/4 (EPR) and 3pi/4 (X-).

    An EPR formula breakdown yields nan and a warning instead of an exception.
    """
    warnings = [VALIDITY_ADVISORY]
    try:
        upsilon = epr_ud(p, tau)
    except FormulaBreakdownException as e:
        upsilon = math.nan
        warnings.append(str(e))
    theta0 = math.pi / 4.0
    theta_x = 3.0 * math.pi / 4.0
    m = moments_ud(p, tau)
    n = population_ud(p, tau)
    return EntanglementReport(
        tau=float(tau),
        n_signal=n,
        n_idler=n,
        n_pump=p.n0,
        theta0=theta0,
        upsilon=upsilon,
        correlation_c=float(measures.correlation(m, theta0)),
        theta_xminus=theta_x,
        var_xminus_min=two_mode_var_ud(p, tau),
        var_xplus=float(measures.two_mode_variance(m, theta_x, 1)),
        theta_insep=theta_x,
        insep_ratio=insep_ud(p, tau),
        warnings=tuple(warnings),
    )
