"""
Parameter sweeps, thermal-threshold searches, power-law fits and figure datasets

Classes:
    Backend
    SweepAxis
    FigureId
    ScanSettings
    SweepPoint
    SweepResult
    PowerLawFit

Functions:
    sweep_tau
    sweep_seed
    sweep_n0
    sweep_theta
    upsilon_min
    nth_threshold
    fit_power_law
    report_frame
    write_csv
    figure_dataset
"""
import dataclasses
import logging
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from spinepr import analytic, exact, measures, wigner, workers
from spinepr.analytic import UndepletedParams
from spinepr.exceptions import FormulaBreakdownException, InvalidDataException, InvalidParameterException, \
    NoEntanglementException, RootNotFoundException, RoutingException
from spinepr.manifest import RunManifest, write_manifest
from spinepr.measures import EntanglementReport, InferredVariant, Objective
from spinepr.model import MEASUREMENT_TAU, ModelParams, MomentSet, SeedKind, SeedSpec, phase_matched_q

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

DEFAULT_N0 = 175.0
DEFAULT_TAU_MAX = 0.012
DEFAULT_TAU_STEPS = 600
FIT_N0_GRID = (100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0)
DEFAULT_NBAR_GRID = tuple(0.25 * i for i in range(9))
THRESHOLD_CEILING = 16.0
CSV_FLOAT_FORMAT = "%.10e"


class Backend(Enum):
    EXACT = "exact"
    WIGNER = "wigner"
    ANALYTIC = "analytic"


class SweepAxis(Enum):
    TAU = "tau"
    NBAR_TH = "nbar_th"
    N0 = "n0"
    THETA = "theta"


class FigureId(Enum):
    F1A = "F1a"
    F1B = "F1b"
    F2A = "F2a"
    F2B = "F2b"
    F2C = "F2c"
    F2D = "F2d"
    F3A = "F3a"
    F3B = "F3b"
    F3C = "F3c"
    F4A = "F4a"
    F4B = "F4b"


@dataclass(frozen=True)
class ScanSettings:
    """
    Numerical settings shared by every sweep

    Attributes
    ----------
    tau_max: float
    tau_steps: int
        Uniform grid of tau_steps points on [0, tau_max]
    theta_steps: int
        Phase scan resolution
    trajectories: int
    rng_seed: int
    tol: float
        Wigner integration tolerance
    epsilon_cut: float
        Poisson weight dropped by the sector solver
    variant: InferredVariant
    workers: int
        Upper bound on worker processes
    groups: int
        Batch groups for Monte Carlo standard errors
    """
    tau_max: float = DEFAULT_TAU_MAX
    tau_steps: int = DEFAULT_TAU_STEPS
    theta_steps: int = measures.DEFAULT_THETA_STEPS
    trajectories: int = wigner.DEFAULT_TRAJECTORIES
    rng_seed: int = 0
    tol: float = wigner.DEFAULT_TOL
    epsilon_cut: float = exact.DEFAULT_EPSILON_CUT
    variant: InferredVariant = InferredVariant.OPTIMAL
    workers: int = 1
    groups: int = wigner.DEFAULT_GROUPS

    def __post_init__(self):
        if self.tau_max <= 0 or self.tau_steps < 1 or self.theta_steps < 8 or self.workers < 1:
            log.error("invalid scan settings %s", self)
            raise InvalidParameterException(f"invalid scan settings: {self}")

    def tau_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.tau_max, self.tau_steps)

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out["variant"] = self.variant.value
        return out


@dataclass(frozen=True)
class SweepPoint:
    x: float
    report: EntanglementReport
    params: ModelParams


@dataclass(frozen=True)
class SweepResult:
    """
    Ordered sweep data with its provenance

    Attributes
    ----------
    axis: SweepAxis
    points: Tuple[SweepPoint, ...]
        Strictly increasing in x
    backend: Backend
    params: ModelParams
        Base parameter snapshot
    rng_seed: Optional[int]
        Root seed of Monte Carlo runs
    metadata: Dict[str, Any]
    """
    axis: SweepAxis
    points: Tuple[SweepPoint, ...]
    backend: Backend
    params: ModelParams
    rng_seed: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def xs(self) -> np.ndarray:
        return np.array([p.x for p in self.points], dtype=float)

    def reports(self) -> List[EntanglementReport]:
        return [p.report for p in self.points]

    def warnings(self) -> List[str]:
        return list(dict.fromkeys(w for p in self.points for w in p.report.warnings))


@dataclass(frozen=True)
class PowerLawFit:
    """
    threshold = prefactor * N0^exponent, fitted in log-log coordinates
    """
    prefactor: float
    exponent: float
    residual: float
    n0_range: Tuple[float, float]

    def predict(self, n0: float) -> float:
        return self.prefactor * n0 ** self.exponent


def _require_backend(params: ModelParams, backend: Backend) -> None:
    kind = params.seed.kind
    if backend == Backend.EXACT and kind != SeedKind.VACUUM:
        log.error("the exact backend cannot run a %s seed", kind.value)
        raise RoutingException(f"the exact backend supports vacuum seeds only, got {kind.value}: use wigner")
    if backend == Backend.ANALYTIC and kind == SeedKind.COHERENT:
        log.error("no undepleted formulas exist for coherent seeds")
        raise RoutingException("the analytic backend has no coherent-seed solution: use wigner")


def _report_job(job: Tuple[MomentSet, Tuple[MomentSet, ...], InferredVariant, int]) -> EntanglementReport:
    m, groups, variant, theta_steps = job
    return measures.entanglement_report(m, variant, theta_steps, groups)


def _undepleted(params: ModelParams) -> UndepletedParams:
    return UndepletedParams(params.n0_mean, params.seed.nbar_th if params.seed.kind == SeedKind.THERMAL else 0.0)


def _moment_series(params: ModelParams, taus: np.ndarray, backend: Backend,
                   settings: ScanSettings) -> List[Tuple[MomentSet, Tuple[MomentSet, ...]]]:
    if backend == Backend.EXACT:
        state = exact.init_coherent_pump(params, settings.epsilon_cut)
        return [(exact.moments_exact(s), ()) for s in exact.iter_evolve_exact(state, taus, settings.workers)]
    if backend == Backend.WIGNER:
        series = wigner.moment_series(params, taus, settings.rng_seed, settings.trajectories, settings.tol,
                                      settings.workers, settings.groups)
        return [(w.moments, w.groups) for w in series]
    return [(analytic.moments_ud(_undepleted(params), float(t)), ()) for t in taus]


def _metadata(settings: ScanSettings, taus: np.ndarray) -> Dict[str, Any]:
    return {
        "measurement_tau": MEASUREMENT_TAU,
        "tau_min": float(taus[0]) if taus.size else None,
        "tau_max": float(taus[-1]) if taus.size else None,
        "tau_steps": int(taus.size),
        "settings": settings.to_dict(),
    }


def sweep_tau(params: ModelParams, tau_grid: Sequence[float], backend: Backend = Backend.EXACT,
              settings: Optional[ScanSettings] = None) -> SweepResult:
    """Full entanglement report at every time of tau_grid."""
    settings = settings if settings is not None else ScanSettings()
    _require_backend(params, backend)
    taus = np.asarray(tau_grid, dtype=float)
    rng_seed = settings.rng_seed if backend == Backend.WIGNER else None
    if taus.size == 0:
        return SweepResult(SweepAxis.TAU, (), backend, params, rng_seed, _metadata(settings, taus))
    if np.any(np.diff(taus) <= 0) or taus[0] < 0:
        log.error("tau grid must be strictly increasing and non-negative")
        raise InvalidParameterException("tau grid must be strictly increasing and non-negative")
    if backend == Backend.ANALYTIC:
        reports = [analytic.report_ud(_undepleted(params), float(t)) for t in taus]
    else:
        series = _moment_series(params, taus, backend, settings)
        jobs = [(m, groups, settings.variant, settings.theta_steps) for m, groups in series]
        reports = workers.parallel_map(_report_job, jobs, settings.workers)
    points = tuple(SweepPoint(float(t), r, params) for t, r in zip(taus, reports))
    log.info("tau sweep of %s points done (%s backend, N0=%s)", len(points), backend.value, params.n0_mean)
    return SweepResult(SweepAxis.TAU, points, backend, params, rng_seed, _metadata(settings, taus))


def _time_optimized(params: ModelParams, backend: Backend, settings: ScanSettings) -> EntanglementReport:
    result = sweep_tau(params, settings.tau_grid(), backend, settings)
    return measures.time_optimized_report(result.reports())


def _check_increasing(values: Sequence[float], name: str) -> np.ndarray:
    xs = np.asarray(values, dtype=float)
    if xs.size == 0 or np.any(np.diff(xs) <= 0):
        log.error("%s must be a non-empty strictly increasing list", name)
        raise InvalidParameterException(f"{name} must be a non-empty strictly increasing list")
    return xs


def _seed_for(kind: SeedKind, x: float) -> SeedSpec:
    if kind == SeedKind.THERMAL:
        return SeedSpec.thermal(x)
    if kind == SeedKind.COHERENT:
        return SeedSpec.coherent(x)
    log.error("a seed sweep needs a thermal or coherent seed, got %s", kind.value)
    raise InvalidParameterException(f"a seed sweep needs a thermal or coherent seed, got {kind.value}")


def sweep_seed(n0: float, nbar_list: Sequence[float], backend: Backend = Backend.WIGNER,
               settings: Optional[ScanSettings] = None, seed_kind: SeedKind = SeedKind.THERMAL,
               q_over_g: Optional[float] = None) -> SweepResult:
    """Time-optimized measures against the seed occupation.

    For coherent seeds the axis holds |alpha_{+-1}(0)|^2 instead of nbar_th.
    """
    settings = settings if settings is not None else ScanSettings()
    xs = _check_increasing(nbar_list, "nbar_list")
    q = phase_matched_q(n0) if q_over_g is None else q_over_g
    base = ModelParams(float(n0), q, seed=_seed_for(seed_kind, float(xs[0])))
    points = []
    for x in xs:
        params = base.with_seed(_seed_for(seed_kind, float(x)))
        points.append(SweepPoint(float(x), _time_optimized(params, backend, settings), params))
        log.info("seed sweep point %s=%s done", seed_kind.value, x)
    rng_seed = settings.rng_seed if backend == Backend.WIGNER else None
    metadata = _metadata(settings, settings.tau_grid())
    metadata["seed_kind"] = seed_kind.value
    return SweepResult(SweepAxis.NBAR_TH, tuple(points), backend, base, rng_seed, metadata)


def sweep_n0(n0_list: Sequence[float], seed: SeedSpec, backend: Backend = Backend.WIGNER,
             settings: Optional[ScanSettings] = None) -> SweepResult:
    """Time-optimized measures against the pump number, phase matched at every N0."""
    settings = settings if settings is not None else ScanSettings()
    xs = _check_increasing(n0_list, "n0_list")
    points = []
    for n0 in xs:
        params = ModelParams.matched(float(n0), seed)
        points.append(SweepPoint(float(n0), _time_optimized(params, backend, settings), params))
        log.info("N0 sweep point %s done", n0)
    rng_seed = settings.rng_seed if backend == Backend.WIGNER else None
    return SweepResult(SweepAxis.N0, tuple(points), backend, ModelParams.matched(float(xs[0]), seed), rng_seed,
                       _metadata(settings, settings.tau_grid()))


def sweep_theta(params: ModelParams, tau: float = MEASUREMENT_TAU, backend: Backend = Backend.EXACT,
                settings: Optional[ScanSettings] = None, offsets: Optional[Sequence[float]] = None) -> SweepResult:
    """Measures at fixed phases theta0 + x, with theta0 the EPR-optimal phase at tau."""
    settings = settings if settings is not None else ScanSettings()
    _require_backend(params, backend)
    xs = np.linspace(-math.pi / 2.0, math.pi / 2.0, 181) if offsets is None else _check_increasing(offsets, "offsets")
    taus = np.array([0.0, tau]) if tau > 0 else np.array([0.0])
    m, groups = _moment_series(params, taus, backend, settings)[-1]
    theta0, _ = measures.optimize_phase(m, Objective.EPR, settings.variant, settings.theta_steps)
    points = tuple(
        SweepPoint(float(x), measures.report_at_theta(m, theta0 + float(x), settings.variant, groups), params)
        for x in xs
    )
    metadata = _metadata(settings, taus)
    metadata["theta0"] = theta0
    rng_seed = settings.rng_seed if backend == Backend.WIGNER else None
    return SweepResult(SweepAxis.THETA, points, backend, params, rng_seed, metadata)


def upsilon_min(params: ModelParams, backend: Backend = Backend.WIGNER,
                settings: Optional[ScanSettings] = None) -> float:
    settings = settings if settings is not None else ScanSettings()
    return measures.optimize_time(sweep_tau(params, settings.tau_grid(), backend, settings).reports(),
                                  Objective.EPR).upsilon


def nth_threshold(n0: float, tol: float = 0.01, backend: Backend = Backend.WIGNER,
                  settings: Optional[ScanSettings] = None) -> float:
    """Thermal occupation at which the time-optimized EPR parameter reaches 1.

    The Monte Carlo objective reuses the same random substreams at every
    bisection iterate, which keeps it monotone in nbar.
    """
    settings = settings if settings is not None else ScanSettings()
    if tol <= 0:
        log.error("non-positive tolerance %s", tol)
        raise InvalidParameterException(f"tol must be positive, got {tol}")
    if backend == Backend.ANALYTIC:
        return analytic.nth_max_ud(n0, tol)
    if backend == Backend.EXACT:
        log.error("thermal thresholds need thermal seeds, which the exact backend cannot run")
        raise RoutingException("the exact backend cannot run thermal seeds: use wigner or analytic")
    cache: Dict[float, float] = {}

    def excess(nbar: float) -> float:
        if nbar not in cache:
            params = ModelParams.matched(n0, SeedSpec.thermal(nbar))
            cache[nbar] = upsilon_min(params, backend, settings) - 1.0
            log.info("threshold search N0=%s: Upsilon_min(nbar=%s) = %s", n0, nbar, cache[nbar] + 1.0)
        return cache[nbar]

    if excess(0.0) >= 0:
        log.error("no EPR violation at nbar=0 for N0=%s", n0)
        raise NoEntanglementException(f"no EPR violation at nbar=0 for N0={n0}")
    lo, hi = 0.0, 0.5
    while excess(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi > THRESHOLD_CEILING:
            log.error("no threshold below nbar=%s for N0=%s", THRESHOLD_CEILING, n0)
            raise RootNotFoundException(f"no threshold below nbar={THRESHOLD_CEILING} for N0={n0}")
    root = float(bisect(excess, lo, hi, xtol=tol))
    log.info("threshold for N0=%s: %s", n0, root)
    return root


def fit_power_law(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4 or data.shape[1] != 2:
        log.error("a power-law fit needs at least 4 (n0, value) points, got %s", len(points))
        raise InvalidDataException(f"a power-law fit needs at least 4 (n0, value) points, got {len(points)}")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        log.error("power-law fit input must be finite and positive")
        raise InvalidDataException("power-law fit input must be finite and positive")
    log_x, log_y = np.log(data[:, 0]), np.log(data[:, 1])
    exponent, intercept = np.polyfit(log_x, log_y, 1)
    residual = float(np.sqrt(np.mean((log_y - (exponent * log_x + intercept)) ** 2)))
    return PowerLawFit(float(np.exp(intercept)), float(exponent), residual,
                       (float(data[:, 0].min()), float(data[:, 0].max())))


REPORT_COLUMNS = {
    "n_signal": "n_signal [atoms]",
    "n_idler": "n_idler [atoms]",
    "n_pump": "n_pump [atoms]",
    "n_signal_err": "n_signal stderr [atoms]",
    "theta0": "theta0 [rad]",
    "upsilon": "upsilon [dimensionless]",
    "upsilon_err": "upsilon stderr [dimensionless]",
    "correlation_c": "correlation [dimensionless]",
    "correlation_err": "correlation stderr [dimensionless]",
    "theta_xminus": "theta_xminus [rad]",
    "var_xminus_min": "var_xminus [dimensionless]",
    "var_xminus_err": "var_xminus stderr [dimensionless]",
    "var_xplus": "var_xplus [dimensionless]",
    "theta_insep": "theta_insep [rad]",
    "insep_ratio": "insep_ratio [dimensionless]",
    "insep_err": "insep_ratio stderr [dimensionless]",
    "tau": "tau_opt [dimensionless]",
    "tau_xminus": "tau_xminus_opt [dimensionless]",
    "tau_insep": "tau_insep_opt [dimensionless]",
}
AXIS_COLUMNS = {
    SweepAxis.TAU: "tau [dimensionless]",
    SweepAxis.NBAR_TH: "seed occupation [atoms]",
    SweepAxis.N0: "N0 [atoms]",
    SweepAxis.THETA: "theta - theta0 [rad]",
}


def report_frame(result: SweepResult, fields: Optional[Sequence[str]] = None,
                 analytic_curves: bool = False) -> pd.DataFrame:
    """Tabulates a sweep; one row per point, unit-annotated headers.

    With analytic_curves, a tau sweep of a vacuum or thermal run also gets the
    undepleted-pump reference columns.
    """
    chosen = list(fields) if fields is not None else [f for f in REPORT_COLUMNS if f != "tau"]
    data: Dict[str, Any] = {AXIS_COLUMNS[result.axis]: result.xs()}
    for name in chosen:
        if name not in REPORT_COLUMNS:
            log.error("unknown report field %s", name)
            raise InvalidParameterException(f"unknown report field {name}")
        data[REPORT_COLUMNS[name]] = [_as_float(getattr(r, name)) for r in result.reports()]
    if analytic_curves and result.axis == SweepAxis.TAU and result.params.seed.kind != SeedKind.COHERENT:
        p = _undepleted(result.params)
        reference = [analytic.report_ud(p, float(x)) for x in result.xs()]
        data["analytic n_signal [atoms]"] = [r.n_signal for r in reference]
        data["analytic upsilon [dimensionless]"] = [r.upsilon for r in reference]
        data["analytic var_xminus [dimensionless]"] = [r.var_xminus_min for r in reference]
        data["analytic insep_ratio [dimensionless]"] = [r.insep_ratio for r in reference]
    return pd.DataFrame(data)


def _as_float(value: Optional[float]) -> float:
    return math.nan if value is None else float(value)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n", na_rep="nan")
    log.info("dataset written to %s", path)
    return path


def _analytic_or_nan(func: Callable[[], float]) -> float:
    try:
        return func()
    except FormulaBreakdownException:
        return math.nan


_FIGURE_OVERRIDES = ("n0", "n0_list", "nbar_list", "seed_list", "coherent_list", "offsets")


def _option(overrides: Mapping[str, Any], name: str, default: Any) -> Any:
    return overrides[name] if name in overrides else default


class _Figure:
    """Collects the columns, warnings and parameters of one figure dataset."""

    def __init__(self, axis_column: str, xs: Sequence[float]):
        self.columns: Dict[str, Any] = {axis_column: np.asarray(xs, dtype=float)}
        self.warnings: List[str] = []
        self.params: Dict[str, Any] = {}
        self.backends: List[str] = []

    def add(self, name: str, values: Sequence[float]) -> None:
        self.columns[name] = np.asarray(values, dtype=float)

    def absorb(self, label: str, result: SweepResult) -> None:
        self.warnings.extend(result.warnings())
        self.params[label] = result.params.to_dict()
        self.backends.append(result.backend.value)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.columns)


def _population_figure(overrides: Mapping[str, Any], settings: ScanSettings, thermal: bool) -> _Figure:
    taus = settings.tau_grid()
    figure = _Figure(AXIS_COLUMNS[SweepAxis.TAU], taus)
    if not thermal:
        for n0 in _option(overrides, "n0_list", [150.0, 175.0, 200.0]):
            result = sweep_tau(ModelParams.matched(n0), taus, Backend.EXACT, settings)
            figure.absorb(f"N0={n0:g}", result)
            figure.add(f"n_signal/N0 (N0={n0:g}) [fraction]", [r.n_signal / n0 for r in result.reports()])
        n0 = float(_option(overrides, "n0", DEFAULT_N0))
        result = sweep_tau(ModelParams(n0, 0.0), taus, Backend.EXACT, settings)
        figure.absorb(f"N0={n0:g}, q=0", result)
        figure.add(f"n_signal/N0 (N0={n0:g}, q=0) [fraction]", [r.n_signal / n0 for r in result.reports()])
        return figure
    n0 = float(_option(overrides, "n0", DEFAULT_N0))
    for nbar in _option(overrides, "nbar_list", [0.0, 0.5, 1.0, 2.0]):
        params = ModelParams.matched(n0, SeedSpec.thermal(nbar))
        result = sweep_tau(params, taus, Backend.WIGNER, settings)
        figure.absorb(f"nbar={nbar:g}", result)
        figure.add(f"n_signal/N0 (nbar={nbar:g}) [fraction]", [r.n_signal / n0 for r in result.reports()])
        figure.add(f"n_signal/N0 stderr (nbar={nbar:g}) [fraction]", [r.n_signal_err / n0 for r in result.reports()])
        p = UndepletedParams(n0, nbar)
        figure.add(f"analytic n_signal/N0 (nbar={nbar:g}) [fraction]",
                   [analytic.population_ud(p, t) / n0 for t in taus])
    figure.warnings.append(analytic.VALIDITY_ADVISORY)
    return figure


def _epr_time_figure(overrides: Mapping[str, Any], settings: ScanSettings, thermal: bool) -> _Figure:
    taus = settings.tau_grid()
    figure = _Figure(AXIS_COLUMNS[SweepAxis.TAU], taus)
    if thermal:
        n0 = float(_option(overrides, "n0", DEFAULT_N0))
        cases = [(f"nbar={x:g}", ModelParams.matched(n0, SeedSpec.thermal(x)), Backend.WIGNER, UndepletedParams(n0, x))
                 for x in _option(overrides, "nbar_list", [0.5, 1.0, 2.0])]
    else:
        cases = [(f"N0={x:g}", ModelParams.matched(x), Backend.EXACT, UndepletedParams(x, 0.0))
                 for x in _option(overrides, "n0_list", [150.0, 175.0, 200.0])]
    for label, params, backend, p in cases:
        result = sweep_tau(params, taus, backend, settings)
        figure.absorb(label, result)
        figure.add(f"upsilon ({label}) [dimensionless]", [r.upsilon for r in result.reports()])
        figure.add(f"theta0 ({label}) [rad]", [r.theta0 for r in result.reports()])
        if backend == Backend.WIGNER:
            figure.add(f"upsilon stderr ({label}) [dimensionless]", [r.upsilon_err for r in result.reports()])
        figure.add(f"analytic upsilon ({label}) [dimensionless]",
                   [_analytic_or_nan(lambda t=t: analytic.epr_ud(p, t)) for t in taus])
    figure.warnings.append(analytic.VALIDITY_ADVISORY)
    return figure


_MEASURES = {
    "upsilon": ("upsilon_min", "upsilon", "upsilon_err"),
    "xminus": ("var_xminus_min", "var_xminus_min", "var_xminus_err"),
    "insep": ("insep_ratio", "insep_ratio", "insep_err"),
}


def _seed_axis_figure(overrides: Mapping[str, Any], settings: ScanSettings, measure: str) -> _Figure:
    label, field_name, err_name = _MEASURES[measure]
    xs = list(_option(overrides, "seed_list", DEFAULT_NBAR_GRID))
    figure = _Figure(AXIS_COLUMNS[SweepAxis.NBAR_TH], xs)
    for n0 in _option(overrides, "n0_list", [150.0, 175.0, 200.0]):
        result = sweep_seed(n0, xs, Backend.WIGNER, settings, SeedKind.THERMAL)
        figure.absorb(f"thermal N0={n0:g}", result)
        figure.add(f"{label} thermal (N0={n0:g}) [dimensionless]", [getattr(r, field_name) for r in result.reports()])
        figure.add(f"{label} stderr thermal (N0={n0:g}) [dimensionless]", [getattr(r, err_name) for r in result.reports()])
        if measure == "upsilon":
            figure.add(f"analytic {label} (N0={n0:g}) [dimensionless]",
                       [_analytic_or_nan(lambda x=x: analytic.epr_min_ud(UndepletedParams(n0, x))) for x in xs])
    n0 = float(_option(overrides, "n0", DEFAULT_N0))
    coherent = list(_option(overrides, "coherent_list", xs))
    result = sweep_seed(n0, coherent, Backend.WIGNER, settings, SeedKind.COHERENT)
    figure.absorb(f"coherent N0={n0:g}", result)
    values = dict(zip(result.xs(), (getattr(r, field_name) for r in result.reports())))
    figure.add(f"{label} coherent (N0={n0:g}) [dimensionless]", [values.get(float(x), math.nan) for x in xs])
    return figure


def _n0_axis_figure(overrides: Mapping[str, Any], settings: ScanSettings, measure: str) -> _Figure:
    label, field_name, err_name = _MEASURES[measure]
    xs = list(_option(overrides, "n0_list", FIT_N0_GRID))
    figure = _Figure(AXIS_COLUMNS[SweepAxis.N0], xs)
    for nbar in _option(overrides, "nbar_list", [0.5, 1.0, 1.5]):
        result = sweep_n0(xs, SeedSpec.thermal(nbar), Backend.WIGNER, settings)
        figure.absorb(f"nbar={nbar:g}", result)
        figure.add(f"{label} (nbar={nbar:g}) [dimensionless]", [getattr(r, field_name) for r in result.reports()])
        figure.add(f"{label} stderr (nbar={nbar:g}) [dimensionless]", [getattr(r, err_name) for r in result.reports()])
        if measure == "upsilon":
            figure.add(f"analytic {label} (nbar={nbar:g}) [dimensionless]",
                       [_analytic_or_nan(lambda n=n: analytic.epr_min_ud(UndepletedParams(n, nbar))) for n in xs])
    return figure


def _theta_figure(overrides: Mapping[str, Any], settings: ScanSettings) -> _Figure:
    n0 = float(_option(overrides, "n0", DEFAULT_N0))
    offsets = _option(overrides, "offsets", None)
    cases = [
        ("vacuum", ModelParams.matched(n0), Backend.EXACT),
        ("thermal nbar=1", ModelParams.matched(n0, SeedSpec.thermal(1.0)), Backend.WIGNER),
        ("coherent |alpha|^2=1", ModelParams.matched(n0, SeedSpec.coherent(1.0)), Backend.WIGNER),
    ]
    figure: Optional[_Figure] = None
    for label, params, backend in cases:
        result = sweep_theta(params, MEASUREMENT_TAU, backend, settings, offsets)
        if figure is None:
            figure = _Figure(AXIS_COLUMNS[SweepAxis.THETA], result.xs())
        figure.absorb(label, result)
        figure.add(f"var_xminus ({label}) [dimensionless]", [r.var_xminus_min for r in result.reports()])
        figure.add(f"var_xplus ({label}) [dimensionless]", [r.var_xplus for r in result.reports()])
        if backend == Backend.WIGNER:
            figure.add(f"var_xminus stderr ({label}) [dimensionless]", [r.var_xminus_err for r in result.reports()])
    assert figure is not None
    return figure


_SEED_NAMES = {
    FigureId.F1A: "vacuum", FigureId.F2A: "vacuum", FigureId.F3A: "mixed",
}


def figure_dataset(figure_id: str, overrides: Optional[Mapping[str, Any]] = None, out_dir: str = ".",
                   settings: Optional[ScanSettings] = None, argv: Optional[Sequence[str]] = None) -> List[str]:
    """Writes the CSV and the JSON manifest reproducing one figure.

    Args:
        figure_id: one of F1a, F1b, F2a, F2b, F2c, F2d, F3a, F3b, F3c, F4a, F4b.
        overrides: n0, n0_list, nbar_list, seed_list, coherent_list, offsets.
        out_dir: destination directory (created if missing).
        settings: numerical settings.
        argv: command line recorded in the manifest.

    Returns:
        Paths of the CSV file and of its manifest.
    """
    try:
        figure = FigureId(figure_id)
    except ValueError as e:
        log.error("unknown figure id %s", figure_id)
        raise InvalidParameterException(
            f"unknown figure id {figure_id}, expected one of {[f.value for f in FigureId]}"
        ) from e
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(_FIGURE_OVERRIDES)
    if unknown:
        log.error("unknown figure overrides %s", sorted(unknown))
        raise InvalidParameterException(f"unknown figure overrides {sorted(unknown)}")
    settings = settings if settings is not None else ScanSettings()
    started = time.perf_counter()
    builders: Dict[FigureId, Callable[[], _Figure]] = {
        FigureId.F1A: lambda: _population_figure(overrides, settings, False),
        FigureId.F1B: lambda: _population_figure(overrides, settings, True),
        FigureId.F2A: lambda: _epr_time_figure(overrides, settings, False),
        FigureId.F2B: lambda: _epr_time_figure(overrides, settings, True),
        FigureId.F2C: lambda: _seed_axis_figure(overrides, settings, "upsilon"),
        FigureId.F2D: lambda: _n0_axis_figure(overrides, settings, "upsilon"),
        FigureId.F3A: lambda: _theta_figure(overrides, settings),
        FigureId.F3B: lambda: _seed_axis_figure(overrides, settings, "xminus"),
        FigureId.F3C: lambda: _n0_axis_figure(overrides, settings, "xminus"),
        FigureId.F4A: lambda: _seed_axis_figure(overrides, settings, "insep"),
        FigureId.F4B: lambda: _n0_axis_figure(overrides, settings, "insep"),
    }
    data = builders[figure]()
    os.makedirs(out_dir, exist_ok=True)
    n0 = float(overrides.get("n0", DEFAULT_N0))
    stem = f"{figure.value}_{n0:g}_{_SEED_NAMES.get(figure, 'thermal')}"
    csv_path = write_csv(data.frame(), os.path.join(out_dir, stem + ".csv"))
    backends = sorted(set(data.backends))
    manifest = RunManifest(
        command=f"figure {figure.value}",
        argv=list(argv) if argv is not None else ["figure", figure.value],
        params=data.params,
        backend=backends[0] if len(backends) == 1 else "mixed",
        rng_seed=settings.rng_seed if "wigner" in backends else None,
        trajectories=settings.trajectories if "wigner" in backends else None,
        grids={"overrides": overrides, "tau_max": settings.tau_max, "tau_steps": settings.tau_steps,
               "theta_steps": settings.theta_steps},
        tolerances={"tol": settings.tol, "epsilon_cut": settings.epsilon_cut, "phase_xtol": measures.PHASE_XTOL},
        outputs=[os.path.basename(csv_path)],
        warnings=data.warnings,
        wall_clock_seconds=time.perf_counter() - started,
    )
    manifest_path = write_manifest(manifest, os.path.join(out_dir, stem + ".json"))
    return [csv_path, manifest_path]
