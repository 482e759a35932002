"""
Truncated-Wigner Monte Carlo backend

Every trajectory samples the initial Wigner distribution of the pump (coherent,
real amplitude sqrt(N0)), the signal/idler seed and the vacuum port of the
measurement beam splitter, and then follows the deterministic mean-field drift.
Ensemble averages of c-number monomials estimate symmetrically ordered moments;
each normally ordered moment is recovered from the exact finite ordering
correction of its operator string.

Per-trajectory random streams are derived from (rng_seed, trajectory index), so
results do not depend on how trajectories are split across processes.

Classes:
    Trajectory
    WignerEnsemble
    WignerMoments

Functions:
    sample_initial
    drift
    integrate_ensemble
    moments_wigner
    moment_series
    dump_trajectories
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from spinepr import workers
from spinepr.exceptions import InvalidParameterException, NumericalFailureException
from spinepr.model import CANONICAL_KEYS, ModelParams, MomentKey, MomentSet, SeedKind, require_evolvable

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

BLOCK_SIZE = 512
DEFAULT_TOL = 1e-10
DEFAULT_TRAJECTORIES = 20000
DEFAULT_GROUPS = 16
DEFAULT_QUALITY_BOUND = 0.1
WEYL_DRIFT_FACTOR = 10.0
TAU_MATCH = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """
    Phase-space amplitudes of one sample at one time

    Attributes
    ----------
    alpha0: complex
    alpha_p1: complex
    alpha_m1: complex
    alpha_vac: complex
        Vacuum-port amplitude, constant in time
    """
    alpha0: complex
    alpha_p1: complex
    alpha_m1: complex
    alpha_vac: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha_p1, self.alpha_m1, self.alpha_vac], dtype=complex)

    @staticmethod
    def from_array(values: Sequence[complex]) -> 'Trajectory':
        return Trajectory(complex(values[0]), complex(values[1]), complex(values[2]), complex(values[3]))

    def weyl_number(self) -> float:
        return abs(self.alpha0) ** 2 + abs(self.alpha_p1) ** 2 + abs(self.alpha_m1) ** 2


@dataclass(frozen=True, eq=False)
class WignerEnsemble:
    """
    Sampled amplitudes recorded on a time grid

    Attributes
    ----------
    params: ModelParams
    rng_seed: int
    count: int
    taus: np.ndarray
        Recorded times, shape (T,)
    samples: np.ndarray
        Complex amplitudes of shape (T, count, 4), columns (alpha0, alpha_p1, alpha_m1, alpha_vac)
    warnings: Tuple[str, ...]

    Methods
    ----------
    trajectory(index: int, time_index: int = -1) -> Trajectory
    trajectories(time_index: int = -1) -> List[Trajectory]
    time_index(tau: float) -> int
    """
    params: ModelParams
    rng_seed: int
    count: int
    taus: np.ndarray
    samples: np.ndarray
    warnings: Tuple[str, ...] = ()

    def trajectory(self, index: int, time_index: int = -1) -> Trajectory:
        return Trajectory.from_array(self.samples[time_index, index])

    def trajectories(self, time_index: int = -1) -> List[Trajectory]:
        return [self.trajectory(i, time_index) for i in range(self.count)]

    def time_index(self, tau: float) -> int:
        matches = np.flatnonzero(np.abs(self.taus - tau) <= TAU_MATCH)
        if matches.size == 0:
            log.error("tau=%s was not recorded by the ensemble", tau)
            raise InvalidParameterException(f"tau={tau} was not recorded by the ensemble")
        return int(matches[0])


@dataclass(frozen=True, eq=False)
class WignerMoments:
    """
    Moments of the full ensemble at one time, plus the same moments per batch
    group (used for batch-means standard errors of derived measures)
    """
    moments: MomentSet
    groups: Tuple[MomentSet, ...]


def _substream(rng_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_seed, spawn_key=(index,))))


def _seed_moments(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    seed = params.seed
    side_mean = math.sqrt(seed.alpha_seed_sq) if seed.kind == SeedKind.COHERENT else 0.0
    side_var = seed.nbar_th + 0.5 if seed.kind == SeedKind.THERMAL else 0.5
    mean = np.array([math.sqrt(params.n0_mean), side_mean, side_mean, 0.0], dtype=complex)
    width = np.sqrt(np.array([0.5, side_var, side_var, 0.5]))
    return mean, width


def _sample_block(params: ModelParams, rng_seed: int, start: int, stop: int) -> np.ndarray:
    normals = np.empty((stop - start, 8))
    for row, index in enumerate(range(start, stop)):
        normals[row] = _substream(rng_seed, index).standard_normal(8)
    xi = (normals[:, 0::2] + 1j * normals[:, 1::2]) / math.sqrt(2.0)
    mean, width = _seed_moments(params)
    return mean[None, :] + width[None, :] * xi


def _sample_job(job: Tuple[ModelParams, int, int, int]) -> np.ndarray:
    return _sample_block(*job)


def _blocks(count: int) -> List[Tuple[int, int]]:
    return [(start, min(start + BLOCK_SIZE, count)) for start in range(0, count, BLOCK_SIZE)]


def sample_initial(params: ModelParams, rng_seed: int, count: int, workers_count: int = 1) -> WignerEnsemble:
    require_evolvable(params)
    if count < 2:
        log.error("an ensemble needs at least 2 trajectories, got %s", count)
        raise InvalidParameterException(f"an ensemble needs at least 2 trajectories, got {count}")
    jobs = [(params, rng_seed, start, stop) for start, stop in _blocks(count)]
    samples = np.concatenate(workers.parallel_map(_sample_job, jobs, workers_count), axis=0)
    log.info("%s trajectories sampled for a %s seed (rng_seed=%s)", count, params.seed.kind.value, rng_seed)
    return WignerEnsemble(params, rng_seed, count, np.array([0.0]), samples[None, :, :])


def _drift_arrays(a0: np.ndarray, ap: np.ndarray, am: np.ndarray,
                  q_over_g: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # W(n) = |alpha|^2 - 1/2 is the symmetric-order image of the number operator
    w0 = np.abs(a0) ** 2 - 0.5
    wp = np.abs(ap) ** 2 - 0.5
    wm = np.abs(am) ** 2 - 0.5
    d0 = -1j * (2.0 * np.conj(a0) * ap * am + (wp + wm) * a0)
    pump_sq = a0 * a0
    dp = -1j * (pump_sq * np.conj(am) + (w0 - q_over_g) * ap)
    dm = -1j * (pump_sq * np.conj(ap) + (w0 - q_over_g) * am)
    return d0, dp, dm


def drift(traj: Trajectory, params: ModelParams) -> Trajectory:
    d0, dp, dm = _drift_arrays(np.array(traj.alpha0), np.array(traj.alpha_p1), np.array(traj.alpha_m1),
                               params.q_over_g)
    return Trajectory(complex(d0), complex(dp), complex(dm), 0j)


def _integrate_block(initial: np.ndarray, t0: float, taus: np.ndarray, q_over_g: float, tol: float,
                     start: int) -> Tuple[np.ndarray, float]:
    """Integrates a block of trajectories; returns samples of shape (T, B, 4) and the worst relative Weyl drift."""
    size = initial.shape[0]
    out = np.repeat(initial[None, :, :], len(taus), axis=0).astype(complex)
    later = taus > t0
    if np.any(later):
        def rhs(_, y):
            return np.concatenate(_drift_arrays(y[:size], y[size:2 * size], y[2 * size:], q_over_g))

        y0 = np.concatenate([initial[:, 0], initial[:, 1], initial[:, 2]])
        # the error norm is an RMS over all components: rescale so it bounds each trajectory
        scaled = tol / math.sqrt(3 * size)
        sol = solve_ivp(rhs, (t0, taus[later][-1]), y0, method="DOP853", t_eval=taus[later],
                        rtol=scaled, atol=scaled)
        if not sol.success:
            log.error("integration failed for trajectories %s..%s: %s", start, start + size - 1, sol.message)
            raise NumericalFailureException(
                f"integration failed for trajectories {start}..{start + size - 1} (trajectory {start}): {sol.message}"
            )
        for column in range(3):
            out[later, :, column] = sol.y[column * size:(column + 1) * size].T
    weyl = np.sum(np.abs(out[:, :, :3]) ** 2, axis=2)
    relative = np.abs(weyl - weyl[0][None, :]) / np.maximum(weyl[0][None, :], 1.0)
    return out, float(np.max(relative))


def _weyl_warning(worst: float, tol: float) -> Optional[str]:
    if worst > WEYL_DRIFT_FACTOR * tol:
        log.warning("Weyl-number drift %s exceeds %s", worst, WEYL_DRIFT_FACTOR * tol)
        return f"Weyl-number drift {worst:.2e} exceeds {WEYL_DRIFT_FACTOR:g} x tol"
    return None


def _check_grid(taus: np.ndarray, t0: float, tol: float) -> None:
    if tol <= 0:
        log.error("non-positive tolerance %s", tol)
        raise InvalidParameterException(f"tol must be positive, got {tol}")
    if taus.size and (np.any(np.diff(taus) <= 0) or taus[0] < t0):
        log.error("tau grid must be strictly increasing and start at or after %s", t0)
        raise InvalidParameterException(f"tau grid must be strictly increasing and start at or after {t0}")


def _integrate_job(job: Tuple[np.ndarray, float, np.ndarray, float, float, int]) -> Tuple[np.ndarray, float]:
    return _integrate_block(*job)


def integrate_ensemble(ensemble: WignerEnsemble, params: ModelParams, tau_grid: Sequence[float],
                       tol: float = DEFAULT_TOL, workers_count: int = 1) -> WignerEnsemble:
    """Integrates every trajectory from the ensemble's last recorded time over tau_grid.

    Args:
        ensemble: ensemble to continue.
        params: model parameters (q/g enters the drift).
        tau_grid: strictly increasing times, none earlier than the last recorded one.
        tol: local tolerance per trajectory.
        workers_count: processes used for trajectory blocks.

    Returns:
        A new ensemble recorded on tau_grid, or the same ensemble for an empty grid.
    """
    taus = np.asarray(tau_grid, dtype=float)
    t0 = float(ensemble.taus[-1])
    _check_grid(taus, t0, tol)
    if taus.size == 0:
        return ensemble
    initial = ensemble.samples[-1]
    jobs = [(initial[start:stop], t0, taus, params.q_over_g, tol, start) for start, stop in _blocks(ensemble.count)]
    results = workers.parallel_map(_integrate_job, jobs, workers_count)
    samples = np.concatenate([r[0] for r in results], axis=1)
    warning = _weyl_warning(max(r[1] for r in results), tol)
    log.info("%s trajectories integrated over %s times", ensemble.count, len(taus))
    warnings = ensemble.warnings + ((warning,) if warning else ())
    return WignerEnsemble(ensemble.params, ensemble.rng_seed, ensemble.count, taus, samples, warnings)


def _normal_factor(alpha: np.ndarray, creators: int, annihilators: int) -> np.ndarray:
    """Weyl-symbol estimator of a^dag^c a^a for one mode."""
    total = np.zeros(alpha.shape, dtype=complex)
    conj = np.conj(alpha)
    for k in range(min(creators, annihilators) + 1):
        weight = (-0.5) ** k * math.factorial(k) * math.comb(creators, k) * math.comb(annihilators, k)
        total = total + weight * conj ** (creators - k) * alpha ** (annihilators - k)
    return total


def _estimators(snapshot: np.ndarray) -> np.ndarray:
    """Per-trajectory estimators of all canonical moments; shape (K, B)."""
    out = np.empty((len(CANONICAL_KEYS), snapshot.shape[0]), dtype=complex)
    for i, key in enumerate(CANONICAL_KEYS):
        value = np.ones(snapshot.shape[0], dtype=complex)
        for mode in range(3):
            c, a = key.creators[mode], key.annihilators[mode]
            if c or a:
                value = value * _normal_factor(snapshot[:, mode], c, a)
        out[i] = value
    return out


def _quality_warnings(key_values: Dict[MomentKey, complex], key_errors: Dict[MomentKey, float],
                      bound: float) -> Tuple[str, ...]:
    warnings = []
    for key in CANONICAL_KEYS:
        if key.order() != 4 or key.magnetization_change() != 0:
            continue
        if key_errors[key] > bound * abs(key_values[key]):
            warnings.append(f"relative standard error of {key} exceeds {bound:g}")
    return tuple(warnings)


def _statistics(total: np.ndarray, re2: np.ndarray, im2: np.ndarray, count: int) -> Tuple[np.ndarray, np.ndarray]:
    mean = total / count
    var_re = np.clip(re2 - count * mean.real ** 2, 0, None) / (count - 1)
    var_im = np.clip(im2 - count * mean.imag ** 2, 0, None) / (count - 1)
    return mean, np.sqrt((var_re + var_im) / count)


def moments_wigner(ensemble: WignerEnsemble, at_tau: float, quality_bound: float = DEFAULT_QUALITY_BOUND) -> MomentSet:
    index = ensemble.time_index(at_tau)
    est = _estimators(ensemble.samples[index])
    mean, err = _statistics(est.sum(axis=1), np.sum(est.real ** 2, axis=1), np.sum(est.imag ** 2, axis=1),
                            ensemble.count)
    values = dict(zip(CANONICAL_KEYS, mean))
    errors = dict(zip(CANONICAL_KEYS, err))
    warnings = ensemble.warnings + _quality_warnings(values, errors, quality_bound)
    return MomentSet.build(float(ensemble.taus[index]), values, errors, origin="wigner", warnings=warnings)


def _series_block(job: Tuple[ModelParams, int, int, int, np.ndarray, float, int]) -> Dict[str, np.ndarray]:
    params, rng_seed, start, stop, taus, tol, groups = job
    initial = _sample_block(params, rng_seed, start, stop)
    samples, worst = _integrate_block(initial, 0.0, taus, params.q_over_g, tol, start)
    membership = np.arange(start, stop) % groups
    keys = len(CANONICAL_KEYS)
    total = np.zeros((keys, len(taus), groups), dtype=complex)
    re2 = np.zeros((keys, len(taus), groups))
    im2 = np.zeros((keys, len(taus), groups))
    for t in range(len(taus)):
        est = _estimators(samples[t])
        for g in range(groups):
            chosen = est[:, membership == g]
            total[:, t, g] = chosen.sum(axis=1)
            re2[:, t, g] = np.sum(chosen.real ** 2, axis=1)
            im2[:, t, g] = np.sum(chosen.imag ** 2, axis=1)
    counts = np.bincount(membership, minlength=groups)
    log.debug("trajectory block %s..%s reduced", start, stop - 1)
    return {"total": total, "re2": re2, "im2": im2, "counts": counts, "drift": np.array(worst)}


def moment_series(params: ModelParams, tau_grid: Sequence[float], rng_seed: int,
                  count: int = DEFAULT_TRAJECTORIES, tol: float = DEFAULT_TOL, workers_count: int = 1,
                  groups: int = DEFAULT_GROUPS, quality_bound: float = DEFAULT_QUALITY_BOUND) -> List[WignerMoments]:
    """Samples, integrates and reduces an ensemble block by block.

    Only per-time estimator sums are kept, so memory does not grow with the
    number of trajectories. Up to summation order the result matches
    moments_wigner applied to the corresponding full ensemble.

    Args:
        params: model parameters.
        tau_grid: strictly increasing non-negative times.
        rng_seed: root of the per-trajectory random streams.
        count: number of trajectories.
        tol: local integration tolerance.
        workers_count: processes used for trajectory blocks.
        groups: number of batch groups for batch-means errors.
        quality_bound: relative standard error above which fourth-order moments are flagged.

    Returns:
        One WignerMoments per time of tau_grid.
    """
    require_evolvable(params)
    taus = np.asarray(tau_grid, dtype=float)
    _check_grid(taus, 0.0, tol)
    if count < 2:
        log.error("an ensemble needs at least 2 trajectories, got %s", count)
        raise InvalidParameterException(f"an ensemble needs at least 2 trajectories, got {count}")
    if taus.size == 0:
        return []
    groups = max(2, min(groups, count // 2))
    jobs = [(params, rng_seed, start, stop, taus, tol, groups) for start, stop in _blocks(count)]
    blocks = workers.parallel_map(_series_block, jobs, workers_count)
    # block order is fixed, so the reduction is independent of the worker count
    total = np.sum(np.stack([b["total"] for b in blocks]), axis=0)
    re2 = np.sum(np.stack([b["re2"] for b in blocks]), axis=0)
    im2 = np.sum(np.stack([b["im2"] for b in blocks]), axis=0)
    counts = np.sum(np.stack([b["counts"] for b in blocks]), axis=0)
    drift_warning = _weyl_warning(max(float(b["drift"]) for b in blocks), tol)
    base_warnings = (drift_warning,) if drift_warning else ()
    series = []
    for t, tau in enumerate(taus):
        mean, err = _statistics(total[:, t].sum(axis=1), re2[:, t].sum(axis=1), im2[:, t].sum(axis=1), count)
        values = dict(zip(CANONICAL_KEYS, mean))
        errors = dict(zip(CANONICAL_KEYS, err))
        warnings = base_warnings + _quality_warnings(values, errors, quality_bound)
        full = MomentSet.build(float(tau), values, errors, origin="wigner", warnings=warnings)
        per_group = tuple(
            MomentSet.build(float(tau), dict(zip(CANONICAL_KEYS, total[:, t, g] / counts[g])), origin="wigner")
            for g in range(groups)
        )
        series.append(WignerMoments(full, per_group))
    log.info("moment series of %s trajectories on %s times (rng_seed=%s)", count, len(taus), rng_seed)
    return series


def dump_trajectories(ensemble: WignerEnsemble, path: str) -> None:
    frames = []
    for t, tau in enumerate(ensemble.taus):
        snap = ensemble.samples[t]
        frames.append(pd.DataFrame({
            "traj_id": np.arange(ensemble.count),
            "tau": np.full(ensemble.count, tau),
            "re_a0": snap[:, 0].real, "im_a0": snap[:, 0].imag,
            "re_ap": snap[:, 1].real, "im_ap": snap[:, 1].imag,
            "re_am": snap[:, 2].real, "im_am": snap[:, 2].imag,
        }))
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.12e")
    log.info("raw trajectories written to %s", path)
