#!/usr/bin/env python

import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import click
import numpy as np
import pandas as pd

from spinepr import analytic, config, exact, scans, wigner
from spinepr.analytic import UndepletedParams
from spinepr.exceptions import ConfigurationException, FormulaBreakdownException, InvalidDataException, \
    InvalidParameterException, RootNotFoundException, RoutingException, SpinEPRException, ValidationFailedException
from spinepr.manifest import RunManifest, load_manifest, write_manifest
from spinepr.measures import PHASE_XTOL
from spinepr.model import MEASUREMENT_TAU, ModelParams, SeedKind
from spinepr.scans import Backend, ScanSettings
from spinepr.validation import ValidationSuite

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

USAGE_ERRORS = (InvalidParameterException, ConfigurationException, RoutingException)
TAU_FIELDS = {
    "populations": ("n_signal", "n_idler", "n_pump", "n_signal_err"),
    "epr": ("theta0", "upsilon", "upsilon_err", "correlation_c", "correlation_err"),
    "squeezing": ("theta_xminus", "var_xminus_min", "var_xminus_err", "var_xplus"),
    "inseparability": ("theta_insep", "insep_ratio", "insep_err"),
}
MONTE_CARLO_DEFAULTS = {"backend": Backend.WIGNER.value}


@dataclass
class _Run:
    command: str
    argv: List[str]
    cfg: Dict[str, Any]
    params: ModelParams
    settings: ScanSettings
    backend: Backend
    out: str
    debug_dump: bool
    started: float

    def stem(self, label: Optional[str] = None) -> str:
        return f"{self.command}_{self.params.n0_mean:g}_{label or self.params.seed.kind.value}"

    def grids(self) -> Dict[str, Any]:
        return {
            "tau_max": self.settings.tau_max,
            "tau_steps": self.settings.tau_steps,
            "theta_steps": self.settings.theta_steps,
        }

    def manifest(self, outputs: Sequence[str], warnings: Sequence[str], params: Optional[Dict[str, Any]] = None,
                 grids: Optional[Dict[str, Any]] = None) -> RunManifest:
        monte_carlo = self.backend == Backend.WIGNER
        return RunManifest(
            command=self.command,
            argv=list(self.argv),
            params=params if params is not None else self.params.to_dict(),
            backend=self.backend.value,
            rng_seed=self.settings.rng_seed if monte_carlo else None,
            trajectories=self.settings.trajectories if monte_carlo else None,
            grids=grids if grids is not None else self.grids(),
            tolerances={"tol": self.settings.tol, "epsilon_cut": self.settings.epsilon_cut, "phase_xtol": PHASE_XTOL},
            outputs=[os.path.basename(o) for o in outputs],
            warnings=list(warnings),
            wall_clock_seconds=time.perf_counter() - self.started,
        )


def _setup_logging(verbose: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("spinepr").setLevel(level)


def _q_value(_ctx: click.Context, _param: click.Parameter, value: Optional[str]) -> Any:
    if value is None or value == config.MATCHED:
        return value
    try:
        return float(value)
    except ValueError as e:
        raise click.BadParameter(f"expected a number or '{config.MATCHED}', got {value}") from e


def _float_list(_ctx: click.Context, _param: click.Parameter, value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {value}") from e


def common_options(func: Callable) -> Callable:
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
                     help="key = value configuration file"),
        click.option("--n0", type=float, help="Mean initial pump atom number"),
        click.option("--q", callback=_q_value, help="q/g as a number or 'matched'"),
        click.option("--seed", "seed_kind", type=click.Choice([k.value for k in SeedKind]),
                     help="Signal/idler seed"),
        click.option("--nbar", type=float, help="Thermal seed occupation per mode"),
        click.option("--alpha-sq", type=float, help="Coherent seed population per mode"),
        click.option("--tau-max", type=float, help="End of the time grid"),
        click.option("--tau-steps", type=int, help="Points of the time grid"),
        click.option("--theta-steps", type=int, help="Points of the phase scan"),
        click.option("--trajectories", type=int, help="Wigner trajectories"),
        click.option("--rng-seed", type=int, help="Root seed of the random substreams"),
        click.option("--tol", type=float, help="Wigner integration tolerance"),
        click.option("--backend", type=click.Choice([b.value for b in Backend]), help="Solver backend"),
        click.option("--inferred", type=click.Choice(["optimal", "symdiff"]), help="Inferred-variance variant"),
        click.option("--threads", type=int, help="Upper bound on worker processes"),
        click.option("--out", type=click.Path(file_okay=False), envvar="SPINEPR_OUT",
                     help="Output directory [env: SPINEPR_OUT]"),
        click.option("--debug-dump", is_flag=True, help="Also write sector spectra or raw trajectories"),
        click.option("-v", "--verbose", count=True, help="Increase log verbosity"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _argv() -> List[str]:
    obj = click.get_current_context().find_root().obj
    if isinstance(obj, Mapping) and "argv" in obj:
        return list(obj["argv"])
    return sys.argv[1:]


def _prepare(command: str, options: Dict[str, Any], command_defaults: Optional[Mapping[str, Any]] = None) -> _Run:
    _setup_logging(options.pop("verbose", 0))
    config_file = options.pop("config_file", None)
    debug_dump = options.pop("debug_dump", False)
    flags = {
        "n0": options.pop("n0", None),
        "q": options.pop("q", None),
        "seed.kind": options.pop("seed_kind", None),
        "seed.nbar": options.pop("nbar", None),
        "seed.alpha_sq": options.pop("alpha_sq", None),
        "tau_max": options.pop("tau_max", None),
        "tau_steps": options.pop("tau_steps", None),
        "theta_steps": options.pop("theta_steps", None),
        "trajectories": options.pop("trajectories", None),
        "rng_seed": options.pop("rng_seed", None),
        "tol": options.pop("tol", None),
        "backend": options.pop("backend", None),
        "inferred": options.pop("inferred", None),
        "threads": options.pop("threads", None),
        "out": options.pop("out", None),
    }
    file_cfg = config.load_config(config_file) if config_file else {}
    cfg = config.merge_config(command_defaults, file_cfg, flags)
    log.debug("effective configuration: %s", cfg)
    return _Run(
        command=command,
        argv=_argv(),
        cfg=cfg,
        params=config.params_from_config(cfg),
        settings=config.settings_from_config(cfg),
        backend=config.backend_from_config(cfg),
        out=cfg["out"],
        debug_dump=debug_dump,
        started=time.perf_counter(),
    )


def _debug_dump(run_: _Run) -> List[str]:
    os.makedirs(run_.out, exist_ok=True)
    if run_.backend == Backend.EXACT:
        path = os.path.join(run_.out, run_.stem() + "_spectra.csv")
        state = exact.init_coherent_pump(run_.params, run_.settings.epsilon_cut)
        exact.dump_spectra(run_.params, state.n_values(), path)
        return [path]
    if run_.backend == Backend.WIGNER:
        path = os.path.join(run_.out, run_.stem() + "_trajectories.csv")
        ensemble = wigner.sample_initial(run_.params, run_.settings.rng_seed, run_.settings.trajectories,
                                         run_.settings.workers)
        ensemble = wigner.integrate_ensemble(ensemble, run_.params, [MEASUREMENT_TAU], run_.settings.tol,
                                             run_.settings.workers)
        wigner.dump_trajectories(ensemble, path)
        return [path]
    log.warning("the analytic backend has nothing to dump")
    return []


def _write_outputs(run_: _Run, frame: pd.DataFrame, warnings: Sequence[str], label: Optional[str] = None,
                   extra: Sequence[str] = (), **manifest_fields: Any) -> str:
    os.makedirs(run_.out, exist_ok=True)
    stem = run_.stem(label)
    csv_path = scans.write_csv(frame, os.path.join(run_.out, stem + ".csv"))
    manifest = run_.manifest([csv_path, *extra], warnings, **manifest_fields)
    write_manifest(manifest, os.path.join(run_.out, stem + ".json"))
    return csv_path


def _format(value: Any) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


def _tau_command(command: str, options: Dict[str, Any]) -> None:
    run_ = _prepare(command, options)
    result = scans.sweep_tau(run_.params, run_.settings.tau_grid(), run_.backend, run_.settings)
    fields = TAU_FIELDS[command]
    frame = scans.report_frame(result, fields, analytic_curves=run_.backend != Backend.ANALYTIC)
    extra = _debug_dump(run_) if run_.debug_dump else []
    path = _write_outputs(run_, frame, result.warnings(), extra=extra)
    xs = result.xs()
    if xs.size:
        report = result.points[int(np.argmin(np.abs(xs - MEASUREMENT_TAU)))].report
        click.echo(f"tau={report.tau:.6g} " + " ".join(f"{f}={_format(getattr(report, f))}" for f in fields))
    click.echo(path)


@click.group()
def main() -> None:
    """Spinor-condensate EPR entanglement toolkit."""


@main.command()
@common_options
def populations(**options: Any) -> None:
    """Signal, idler and pump populations over time."""
    _tau_command("populations", options)


@main.command()
@common_options
def epr(**options: Any) -> None:
    """Phase-optimized EPR parameter and quadrature correlation over time."""
    _tau_command("epr", options)


@main.command()
@common_options
def squeezing(**options: Any) -> None:
    """Two-mode quadrature variances over time."""
    _tau_command("squeezing", options)


@main.command()
@common_options
def inseparability(**options: Any) -> None:
    """Inseparability ratio over time."""
    _tau_command("inseparability", options)


@main.command(name="scan-seed")
@common_options
@click.option("--seed-list", callback=_float_list, help="Comma-separated seed occupations")
def scan_seed(seed_list: Optional[List[float]], **options: Any) -> None:
    """Time-optimized measures against the thermal (or coherent, with --seed coherent) seed occupation."""
    run_ = _prepare("scan-seed", options, MONTE_CARLO_DEFAULTS)
    kind = SeedKind.COHERENT if run_.params.seed.kind == SeedKind.COHERENT else SeedKind.THERMAL
    xs = seed_list if seed_list is not None else list(scans.DEFAULT_NBAR_GRID)
    result = scans.sweep_seed(run_.params.n0_mean, xs, run_.backend, run_.settings, kind, run_.params.q_over_g)
    grids = run_.grids()
    grids["seed_list"] = list(xs)
    click.echo(_write_outputs(run_, scans.report_frame(result), result.warnings(), kind.value,
                              params=result.params.to_dict(), grids=grids))


@main.command(name="scan-n0")
@common_options
@click.option("--n0-list", callback=_float_list, help="Comma-separated pump atom numbers")
def scan_n0(n0_list: Optional[List[float]], **options: Any) -> None:
    """Time-optimized measures against the pump atom number, phase matched at every point."""
    run_ = _prepare("scan-n0", options, MONTE_CARLO_DEFAULTS)
    xs = n0_list if n0_list is not None else list(scans.FIT_N0_GRID)
    result = scans.sweep_n0(xs, run_.params.seed, run_.backend, run_.settings)
    grids = run_.grids()
    grids["n0_list"] = list(xs)
    run_.params = result.params
    click.echo(_write_outputs(run_, scans.report_frame(result), result.warnings(), grids=grids,
                              params=result.params.to_dict()))


@main.command()
@common_options
@click.option("--threshold-tol", type=float, default=0.01, show_default=True,
              help="Absolute tolerance on the threshold occupation")
def threshold(threshold_tol: float, **options: Any) -> None:
    """Thermal occupation at which the time-optimized EPR parameter reaches 1."""
    run_ = _prepare("threshold", options, MONTE_CARLO_DEFAULTS)
    value = scans.nth_threshold(run_.params.n0_mean, threshold_tol, run_.backend, run_.settings)
    frame = pd.DataFrame({
        "N0 [atoms]": [run_.params.n0_mean],
        "nbar_th threshold [atoms]": [value],
        "tolerance [atoms]": [threshold_tol],
    })
    grids = run_.grids()
    grids["threshold_tol"] = threshold_tol
    path = _write_outputs(run_, frame, [], "thermal", grids=grids)
    click.echo(f"N0={run_.params.n0_mean:g} threshold={value:.6g}")
    click.echo(path)


def _read_points(path: str) -> List[List[float]]:
    frame = pd.read_csv(path)
    if frame.shape[1] < 2:
        log.error("%s needs an N0 column and a threshold column", path)
        raise InvalidDataException(f"{path} needs an N0 column and a threshold column")
    return frame.iloc[:, :2].astype(float).values.tolist()


@main.command()
@common_options
@click.option("--n0-list", callback=_float_list, help="Comma-separated pump atom numbers")
@click.option("--points", "points_file", type=click.Path(exists=True, dir_okay=False),
              help="CSV of (N0, threshold) rows to fit instead of computing thresholds")
@click.option("--threshold-tol", type=float, default=0.01, show_default=True)
def fit(n0_list: Optional[List[float]], points_file: Optional[str], threshold_tol: float, **options: Any) -> None:
    """Power-law fit of the thermal threshold against N0."""
    run_ = _prepare("fit", options, MONTE_CARLO_DEFAULTS)
    if points_file:
        points = _read_points(points_file)
    else:
        xs = n0_list if n0_list is not None else list(scans.FIT_N0_GRID)
        points = [[n0, scans.nth_threshold(n0, threshold_tol, run_.backend, run_.settings)] for n0 in xs]
    result = scans.fit_power_law(points)
    data = np.asarray(points, dtype=float)
    frame = pd.DataFrame({
        "N0 [atoms]": data[:, 0],
        "nbar_th threshold [atoms]": data[:, 1],
        "fitted threshold [atoms]": [result.predict(n0) for n0 in data[:, 0]],
    })
    fitted = {"prefactor": result.prefactor, "exponent": result.exponent, "residual": result.residual,
              "n0_range": list(result.n0_range)}
    grids = run_.grids()
    grids["threshold_tol"] = threshold_tol
    path = _write_outputs(run_, frame, [], "thermal", params={"model": run_.params.to_dict(), "fit": fitted},
                          grids=grids)
    click.echo(f"prefactor={result.prefactor:.6g} exponent={result.exponent:.6g} residual={result.residual:.3g}")
    click.echo(path)


def _or_none(func: Callable[[], Any]) -> Any:
    try:
        return func()
    except (FormulaBreakdownException, RootNotFoundException) as e:
        log.warning("%s", e)
        return None


@main.command(name="analytic")
@common_options
@click.option("--tau", type=float, default=MEASUREMENT_TAU, show_default=True, help="Evaluation time")
def analytic_command(tau: float, **options: Any) -> None:
    """Undepleted-pump closed forms, printed as JSON."""
    run_ = _prepare("analytic", options)
    seed = run_.params.seed
    if seed.kind == SeedKind.COHERENT:
        log.error("no undepleted formulas exist for coherent seeds")
        raise RoutingException("the undepleted-pump formulas cover vacuum and thermal seeds only")
    p = UndepletedParams(run_.params.n0_mean, seed.nbar_th if seed.kind == SeedKind.THERMAL else 0.0)
    anomalous = analytic.anomalous_ud(p, tau)
    values = {
        "n0": p.n0,
        "nbar_th": p.nbar,
        "tau": tau,
        "population": analytic.population_ud(p, tau),
        "anomalous_re": anomalous.real,
        "anomalous_im": anomalous.imag,
        "epr": _or_none(lambda: analytic.epr_ud(p, tau)),
        "two_mode_variance": analytic.two_mode_var_ud(p, tau),
        "inseparability": analytic.insep_ud(p, tau),
        "epr_min": _or_none(lambda: analytic.epr_min_ud(p)),
        "tau_min": _or_none(lambda: analytic.tau_min_ud(p)),
        "nth_max": _or_none(lambda: analytic.nth_max_ud(p.n0)),
        "advisory": analytic.VALIDITY_ADVISORY,
    }
    click.echo(json.dumps(values, indent=2, sort_keys=True))


@main.command()
@common_options
@click.argument("figure_id")
@click.option("--n0-list", callback=_float_list, help="Comma-separated pump atom numbers")
@click.option("--nbar-list", callback=_float_list, help="Comma-separated thermal occupations")
@click.option("--seed-list", callback=_float_list, help="Comma-separated seed occupations of the seed axis")
@click.option("--coherent-list", callback=_float_list, help="Comma-separated coherent seed populations")
def figure(figure_id: str, n0_list: Optional[List[float]], nbar_list: Optional[List[float]],
           seed_list: Optional[List[float]], coherent_list: Optional[List[float]], **options: Any) -> None:
    """Writes the dataset and manifest reproducing FIGURE_ID (F1a ... F4b)."""
    n0 = options.get("n0")
    run_ = _prepare(f"figure {figure_id}", options)
    overrides = {
        name: value
        for name, value in (("n0", n0), ("n0_list", n0_list), ("nbar_list", nbar_list), ("seed_list", seed_list),
                            ("coherent_list", coherent_list))
        if value is not None
    }
    for path in scans.figure_dataset(figure_id, overrides, run_.out, run_.settings, run_.argv):
        click.echo(path)


@main.command()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity")
def validate(verbose: int) -> None:
    """Runs the oracle-equivalence, exact-limit and symmetry checks."""
    _setup_logging(verbose)
    results = ValidationSuite.run()
    for result in results:
        click.echo(str(result))
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ValidationFailedException(f"validation failed: {', '.join(failed)}")


@main.command()
@click.argument("manifest_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="Write the outputs here instead")
def rerun(manifest_file: str, out: Optional[str]) -> None:
    """Replays the run recorded in MANIFEST_FILE."""
    argv = list(load_manifest(manifest_file).argv)
    if out is not None:
        argv += ["--out", out]
    code = run(argv)
    if code:
        raise click.exceptions.Exit(code)


def run(argv: Sequence[str]) -> int:
    """Executes one command line; returns 0 on success, 1 on usage errors, 2 on numerical or validation failures."""
    args = list(argv)
    try:
        rv = main.main(args=args, prog_name="spinepr", standalone_mode=False, obj={"argv": args})
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except USAGE_ERRORS as e:
        click.echo(f"Error: {e}", err=True)
        return 1
    except SpinEPRException as e:
        click.echo(f"Error: {e}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


def entry() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    entry()
