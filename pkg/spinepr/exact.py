"""
Exact quantum evolution of the three-mode spin-mixing Hamiltonian

The coherent pump and vacuum signal/idler start in the zero-magnetization
manifold, where the Hamiltonian conserves the total atom number n and couples
only the kets |n-2k, k, k>. Every pump-number sector is a small real symmetric
tridiagonal matrix, diagonalized once and reused over the whole time grid.

A brute-force dense solver over the full truncated three-mode Fock space is
provided as an independent oracle.

Classes:
    SectorHamiltonian
    SectorState

Functions:
    build_sector
    diagonalize_sector
    init_coherent_pump
    evolve_exact
    iter_evolve_exact
    moments_exact
    dump_spectra
    dense_hamiltonian
    dense_oracle
    dense_quadrature_check
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import eigh_tridiagonal, LinAlgError
from scipy.sparse.linalg import expm_multiply
from scipy.stats import poisson

from spinepr import workers
from spinepr.exceptions import InvalidParameterException, NumericalFailureException, ResourceLimitException, \
    RoutingException
from spinepr.model import CANONICAL_KEYS, ModelParams, MomentKey, MomentSet, SeedKind, require_evolvable

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

DEFAULT_EPSILON_CUT = 1e-12
DEFAULT_SECTOR_CEILING = 5000
DEFAULT_DENSE_CEILING = 20000
RESIDUAL_BOUND = 1e-10
NORM_BOUND = 1e-10
DENSE_METHODS = ("expm", "ode")


@dataclass(frozen=True, eq=False)
class SectorHamiltonian:
    """
    Tridiagonal Hamiltonian of the sector with n atoms, in the basis |n-2k, k, k>

    Attributes
    ----------
    n: int
        Total atom number of the sector
    diag: np.ndarray
        d_k = 2k(n-2k) - 2k q/g, for k = 0..n//2
    offdiag: np.ndarray
        t_k = (k+1) sqrt((n-2k)(n-2k-1)), coupling k to k+1
    """
    n: int
    diag: np.ndarray
    offdiag: np.ndarray

    def dim(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


def build_sector(n: int, params: ModelParams) -> SectorHamiltonian:
    if n < 0:
        log.error("negative sector index %s", n)
        raise InvalidParameterException(f"sector index must be non-negative, got {n}")
    k = np.arange(n // 2 + 1, dtype=float)
    diag = 2.0 * k * (n - 2.0 * k) - 2.0 * k * params.q_over_g
    kk = k[:-1]
    offdiag = (kk + 1.0) * np.sqrt((n - 2.0 * kk) * (n - 2.0 * kk - 1.0))
    return SectorHamiltonian(n, diag, offdiag)


def diagonalize_sector(h: SectorHamiltonian) -> Tuple[np.ndarray, np.ndarray]:
    """Returns eigenvalues and orthonormal eigenvectors (as columns) of a sector.

    Raises NumericalFailureException when the eigensolver fails or a residual
    ||Hv - lambda v|| exceeds 1e-10 ||H||.
    """
    if h.dim() == 1:
        return h.diag.copy(), np.ones((1, 1))
    try:
        w, v = eigh_tridiagonal(h.diag, h.offdiag)
    except (LinAlgError, ValueError) as e:
        log.error("eigensolver failure in sector n=%s: %s", h.n, e)
        raise NumericalFailureException(f"eigensolver failure in sector n={h.n}") from e
    dense = h.dense()
    scale = max(np.linalg.norm(dense, 2), 1.0)
    residual = np.max(np.linalg.norm(dense @ v - v * w, axis=0))
    if not np.isfinite(residual) or residual > RESIDUAL_BOUND * scale:
        log.error("eigenpair residual %s too large in sector n=%s", residual, h.n)
        raise NumericalFailureException(f"eigenpair residual {residual:.3e} too large in sector n={h.n}")
    return w, v


def _sector_spectrum(job: Tuple[int, ModelParams]) -> Tuple[np.ndarray, np.ndarray]:
    n, params = job
    return diagonalize_sector(build_sector(n, params))


@dataclass(frozen=True, eq=False)
class SectorState:
    """
    Exact state stored as a padded amplitude array

    Row i holds the sector n = n_min + i; column k holds c_{n,k}. Entries with
    k > n//2 are structurally zero.

    Attributes
    ----------
    params: ModelParams
    n_min: int
    n_max: int
    amplitudes: np.ndarray
        Complex array of shape (n_max - n_min + 1, n_max//2 + 1)
    time: float

    Methods
    ----------
    sector(n: int) -> np.ndarray
    sectors() -> Dict[int, np.ndarray]
    k_max(n: int) -> int
    norm() -> float
    sector_norms() -> np.ndarray
    """
    params: ModelParams
    n_min: int
    n_max: int
    amplitudes: np.ndarray
    time: float = 0.0

    @staticmethod
    def from_sectors(params: ModelParams, sectors: Mapping[int, Sequence[complex]], time: float = 0.0) -> 'SectorState':
        if not sectors:
            log.error("a sector state needs at least one sector")
            raise InvalidParameterException("a sector state needs at least one sector")
        n_min, n_max = min(sectors), max(sectors)
        amplitudes = np.zeros((n_max - n_min + 1, n_max // 2 + 1), dtype=complex)
        for n, values in sectors.items():
            values = np.asarray(values, dtype=complex)
            if n < 0 or len(values) != n // 2 + 1:
                log.error("sector %s needs %s amplitudes, got %s", n, n // 2 + 1, len(values))
                raise InvalidParameterException(f"sector {n} needs {n // 2 + 1} amplitudes, got {len(values)}")
            amplitudes[n - n_min, :len(values)] = values
        return SectorState(params, n_min, n_max, amplitudes, time)

    def n_values(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @staticmethod
    def k_max(n: int) -> int:
        return n // 2

    def sector(self, n: int) -> np.ndarray:
        return self.amplitudes[n - self.n_min, :self.k_max(n) + 1]

    def sectors(self) -> Dict[int, np.ndarray]:
        return {int(n): self.sector(int(n)) for n in self.n_values()}

    def sector_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def norm(self) -> float:
        return float(np.sum(self.sector_norms()))


def _sector_range(n0_mean: float, epsilon_cut: float, n_max: Optional[int]) -> Tuple[int, int]:
    n_lo = int(poisson.ppf(epsilon_cut / 2.0, n0_mean))
    n_hi = int(poisson.isf(epsilon_cut / 2.0, n0_mean))
    if n_max is not None:
        n_hi = min(n_hi, n_max)
        n_lo = min(n_lo, n_hi)
    return n_lo, n_hi


def init_coherent_pump(params: ModelParams, epsilon_cut: float = DEFAULT_EPSILON_CUT, n_max: Optional[int] = None,
                       max_sector: int = DEFAULT_SECTOR_CEILING) -> SectorState:
    """Coherent pump with vacuum signal and idler, truncated to the Poisson bulk.

    Args:
        params: model parameters; the seed must be the vacuum.
        epsilon_cut: Poisson weight allowed outside [n_min, n_max].
        n_max: optional upper sector override (used to match a dense Fock cutoff).
        max_sector: hard ceiling on the largest retained sector.

    Returns:
        The normalized state at tau = 0.
    """
    require_evolvable(params)
    if params.seed.kind != SeedKind.VACUUM:
        log.error("the sector solver cannot represent a %s seed", params.seed.kind.value)
        raise RoutingException(
            f"the exact backend supports vacuum seeds only, got {params.seed.kind.value}: use the wigner backend"
        )
    if not 0 < epsilon_cut < 1:
        log.error("epsilon_cut %s out of (0, 1)", epsilon_cut)
        raise InvalidParameterException(f"epsilon_cut must lie in (0, 1), got {epsilon_cut}")
    n_lo, n_hi = _sector_range(params.n0_mean, epsilon_cut, n_max)
    if n_hi > max_sector:
        log.error("sector cutoff %s exceeds the ceiling %s", n_hi, max_sector)
        raise ResourceLimitException(f"sector cutoff {n_hi} exceeds the configured ceiling {max_sector}")
    n = np.arange(n_lo, n_hi + 1)
    weights = np.exp(0.5 * poisson.logpmf(n, params.n0_mean))
    weights /= np.linalg.norm(weights)
    amplitudes = np.zeros((len(n), n_hi // 2 + 1), dtype=complex)
    amplitudes[:, 0] = weights
    log.info("coherent pump N0=%s retained on sectors [%s, %s]", params.n0_mean, n_lo, n_hi)
    return SectorState(params, n_lo, n_hi, amplitudes, 0.0)


def iter_evolve_exact(state: SectorState, tau_grid: Sequence[float], workers_count: int = 1) -> Iterator[SectorState]:
    """Yields the state at every time of tau_grid, one at a time."""
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size == 0:
        return
    if np.any(np.diff(taus) <= 0) or taus[0] < state.time:
        log.error("tau grid must be strictly increasing and start at or after %s", state.time)
        raise InvalidParameterException(f"tau grid must be strictly increasing and start at or after {state.time}")
    n_values = [int(n) for n in state.n_values()]
    spectra = workers.parallel_map(_sector_spectrum, [(n, state.params) for n in n_values], workers_count)
    log.debug("%s sectors diagonalized", len(spectra))
    projections = [v.T @ state.sector(n) for n, (_, v) in zip(n_values, spectra)]
    initial_norms = state.sector_norms()
    for tau in taus:
        dt = tau - state.time
        if dt == 0:
            yield state
            continue
        amplitudes = np.zeros_like(state.amplitudes)
        for i, (n, (w, v), proj) in enumerate(zip(n_values, spectra, projections)):
            amplitudes[i, :n // 2 + 1] = v @ (np.exp(-1j * w * dt) * proj)
        evolved = SectorState(state.params, state.n_min, state.n_max, amplitudes, float(tau))
        drift = np.abs(evolved.sector_norms() - initial_norms)
        if np.max(drift) > NORM_BOUND:
            worst = n_values[int(np.argmax(drift))]
            log.error("norm drift %s in sector n=%s at tau=%s", np.max(drift), worst, tau)
            raise NumericalFailureException(f"norm drift {np.max(drift):.3e} in sector n={worst} at tau={tau}")
        yield evolved


def evolve_exact(state: SectorState, tau_grid: Sequence[float], workers_count: int = 1) -> List[SectorState]:
    return list(iter_evolve_exact(state, tau_grid, workers_count))


def _falling(x: np.ndarray, power: int) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for i in range(power):
        out = out * np.clip(x - i, 0, None)
    return np.sqrt(out)


def _rising(x: np.ndarray, power: int) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for i in range(1, power + 1):
        out = out * np.clip(x + i, 0, None)
    return np.sqrt(out)


def _sector_expectation(amplitudes: np.ndarray, n_values: np.ndarray, key: MomentKey) -> complex:
    if key.magnetization_change() != 0:
        return 0j
    c0, cp, cm = key.creators
    a0, ap, am = key.annihilators
    dn = key.number_change()
    dk = cp - ap
    rows, cols = amplitudes.shape
    n = n_values[:, None].astype(float)
    k = np.arange(cols, dtype=float)[None, :]
    pump = n - 2.0 * k
    # annihilators act first, then creators on the lowered occupations
    coef = _falling(pump, a0) * _falling(k, ap) * _falling(k, am)
    coef = coef * _rising(pump - a0, c0) * _rising(k - ap, cp) * _rising(k - am, cm)
    r_lo, r_hi = max(0, -dn), min(rows, rows - dn)
    k_lo, k_hi = max(0, -dk), min(cols, cols - dk)
    if r_lo >= r_hi or k_lo >= k_hi:
        return 0j
    source = amplitudes[r_lo:r_hi, k_lo:k_hi] * coef[r_lo:r_hi, k_lo:k_hi]
    target = amplitudes[r_lo + dn:r_hi + dn, k_lo + dk:k_hi + dk]
    return complex(np.sum(np.conj(target) * source))


def moments_exact(state: SectorState) -> MomentSet:
    n_values = state.n_values()
    values = {key: _sector_expectation(state.amplitudes, n_values, key) for key in CANONICAL_KEYS}
    return MomentSet.build(state.time, values, origin="exact")


def dump_spectra(params: ModelParams, n_values: Sequence[int], path: str) -> None:
    rows = []
    for n in n_values:
        w, _ = diagonalize_sector(build_sector(int(n), params))
        rows.extend({"n": int(n), "k": k, "eigenvalue": float(e)} for k, e in enumerate(w))
    pd.DataFrame(rows, columns=["n", "k", "eigenvalue"]).to_csv(path, index=False, float_format="%.12e")
    log.info("sector spectra written to %s", path)


def _annihilator(dim: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1, shape=(dim, dim), format="csr")


def _mode_string(dim: int, creators: int, annihilators: int) -> sparse.csr_matrix:
    a = _annihilator(dim)
    op = sparse.identity(dim, format="csr")
    for _ in range(creators):
        op = op @ a.T
    for _ in range(annihilators):
        op = op @ a
    return op.tocsr()


def _kron_all(ops: Sequence[sparse.spmatrix]) -> sparse.csr_matrix:
    out = ops[0]
    for op in ops[1:]:
        out = sparse.kron(out, op, format="csr")
    return out.tocsr()


def _key_operator(key: MomentKey, dims: Sequence[int]) -> sparse.csr_matrix:
    ops = [_mode_string(dims[i], key.creators[i], key.annihilators[i]) for i in range(3)]
    ops.extend(sparse.identity(d, format="csr") for d in dims[3:])
    return _kron_all(ops)


def dense_hamiltonian(params: ModelParams, n_cut: int) -> sparse.csr_matrix:
    """Full three-mode Hamiltonian on the Fock box with per-mode cutoff n_cut.

    H = a0^dag^2 a1 a-1 + h.c. + n0 (n1 + n-1) - q/g (n1 + n-1)
    """
    d = n_cut + 1
    eye = sparse.identity(d, format="csr")
    a = _annihilator(d)
    num = (a.T @ a).tocsr()
    pair = _kron_all([(a.T @ a.T).tocsr(), a, a])
    side = _kron_all([num, num, eye]) + _kron_all([num, eye, num])
    detuning = _kron_all([eye, num, eye]) + _kron_all([eye, eye, num])
    return (pair + pair.T + side - params.q_over_g * detuning).tocsr().astype(complex)


def _coherent(amplitude: float, dim: int) -> np.ndarray:
    if amplitude == 0:
        out = np.zeros(dim)
        out[0] = 1.0
        return out
    n = np.arange(dim)
    out = np.exp(0.5 * poisson.logpmf(n, amplitude ** 2))
    return out / np.linalg.norm(out)


def _fock(n: int, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[n] = 1.0
    return out


def _thermal_weights(nbar: float, cut: int) -> np.ndarray:
    if nbar == 0:
        return np.array([1.0])
    ratio = nbar / (1.0 + nbar)
    needed = int(math.ceil(math.log(1e-12) / math.log(ratio)))
    n = np.arange(min(cut, needed) + 1)
    weights = ratio ** n / (1.0 + nbar)
    return weights / weights.sum()


def _initial_components(params: ModelParams, n_cut: int, pump_number: Optional[int],
                        thermal_cut: Optional[int]) -> List[Tuple[float, np.ndarray]]:
    d = n_cut + 1
    if pump_number is not None:
        if not 0 <= pump_number <= n_cut:
            log.error("pump number %s outside the Fock box [0, %s]", pump_number, n_cut)
            raise InvalidParameterException(f"pump number {pump_number} outside the Fock box [0, {n_cut}]")
        pump = _fock(pump_number, d)
    else:
        pump = _coherent(math.sqrt(params.n0_mean), d)
    seed = params.seed
    if seed.kind == SeedKind.VACUUM:
        vac = _fock(0, d)
        return [(1.0, np.kron(np.kron(pump, vac), vac))]
    if seed.kind == SeedKind.COHERENT:
        side = _coherent(math.sqrt(seed.alpha_seed_sq), d)
        return [(1.0, np.kron(np.kron(pump, side), side))]
    weights = _thermal_weights(seed.nbar_th, thermal_cut if thermal_cut is not None else n_cut)
    components = []
    for n_p, w_p in enumerate(weights):
        for n_m, w_m in enumerate(weights):
            if w_p * w_m < 1e-14:
                continue
            components.append((w_p * w_m, np.kron(np.kron(pump, _fock(n_p, d)), _fock(n_m, d))))
    return components


def _propagate(h: sparse.csr_matrix, psi: np.ndarray, tau: float, method: str) -> np.ndarray:
    if tau == 0:
        return psi.astype(complex)
    if method == "expm":
        return expm_multiply(-1j * tau * h, psi.astype(complex))
    sol = solve_ivp(lambda _, y: -1j * (h @ y), (0.0, tau), psi.astype(complex), method="DOP853",
                    rtol=1e-12, atol=1e-14)
    if not sol.success:
        log.error("dense integration failed: %s", sol.message)
        raise NumericalFailureException(f"dense integration failed: {sol.message}")
    return sol.y[:, -1]


def _evolved_components(params: ModelParams, tau: float, n_cut: int, method: str, max_dimension: int,
                        pump_number: Optional[int], thermal_cut: Optional[int],
                        extra_dims: int = 1) -> Tuple[List[Tuple[float, np.ndarray]], int]:
    require_evolvable(params)
    if method not in DENSE_METHODS:
        log.error("unknown dense integrator %s", method)
        raise InvalidParameterException(f"unknown dense integrator {method}, expected one of {DENSE_METHODS}")
    if tau < 0 or n_cut < 1:
        log.error("invalid dense request tau=%s n_cut=%s", tau, n_cut)
        raise InvalidParameterException(f"dense oracle needs tau >= 0 and n_cut >= 1, got {tau}, {n_cut}")
    dim = (n_cut + 1) ** 3 * extra_dims
    if dim > max_dimension:
        log.error("dense dimension %s exceeds the ceiling %s", dim, max_dimension)
        raise ResourceLimitException(f"dense dimension {dim} exceeds the configured ceiling {max_dimension}")
    h = dense_hamiltonian(params, n_cut)
    components = _initial_components(params, n_cut, pump_number, thermal_cut)
    log.debug("dense oracle: dimension %s, %s mixture components", dim, len(components))
    return [(w, _propagate(h, psi, tau, method)) for w, psi in components], n_cut + 1


def dense_oracle(params: ModelParams, tau: float, n_cut: int, method: str = "expm",
                 max_dimension: int = DEFAULT_DENSE_CEILING, pump_number: Optional[int] = None,
                 thermal_cut: Optional[int] = None) -> MomentSet:
    """Brute-force moments in the full Fock box with per-mode cutoff n_cut.

    Args:
        params: model parameters; vacuum, coherent and thermal seeds are supported.
        tau: evolution time.
        n_cut: per-mode Fock cutoff.
        method: "expm" (Krylov exponential action) or "ode" (adaptive Runge-Kutta).
        max_dimension: hard ceiling on the Hilbert-space dimension.
        pump_number: start the pump in this Fock state instead of a coherent state.
        thermal_cut: largest number state kept in the thermal mixture.

    Returns:
        The MomentSet of the evolved state (mixture).
    """
    components, d = _evolved_components(params, tau, n_cut, method, max_dimension, pump_number, thermal_cut)
    values = {}
    for key in CANONICAL_KEYS:
        op = _key_operator(key, (d, d, d))
        values[key] = sum(w * np.vdot(psi, op @ psi) for w, psi in components)
    return MomentSet.build(tau, values, origin="dense")


def dense_quadrature_check(params: ModelParams, tau: float, n_cut: int, theta: float, method: str = "expm",
                           max_dimension: int = DEFAULT_DENSE_CEILING) -> Dict[str, float]:
    """Evaluates the generalized quadratures literally with an explicit vacuum port.

    The three-mode state is evolved in the box n_cut, embedded in a box two
    levels larger, and tensored with a vacuum-port mode holding up to two atoms.
    Both local oscillators b_{+-1} = (a0 +- a_vac)/sqrt(2) are built explicitly.
    """
    components, d = _evolved_components(params, tau, n_cut, method, max_dimension, None, None)
    big = d + 2
    port = 3
    dims = (big, big, big, port)
    ops = [sparse.identity(x, format="csr") for x in dims]

    def single(position: int, op: sparse.spmatrix) -> sparse.csr_matrix:
        return _kron_all([op if i == position else ops[i] for i in range(4)])

    a0 = single(0, _annihilator(big))
    av = single(3, _annihilator(port))
    quadratures = {}
    lo_numbers = {}
    for j, position, sign in ((1, 1, 1.0), (-1, 2, -1.0)):
        b = (a0 + sign * av) / math.sqrt(2.0)
        a_j = single(position, _annihilator(big))
        amp = np.exp(1j * theta) * (a_j.T @ b)
        quadratures[j] = (amp + amp.conj().T).tocsr()
        lo_numbers[j] = (b.conj().T @ b).tocsr()
    vac = _fock(0, port)
    acc = {"nb_p1": 0.0, "nb_m1": 0.0, "x_p1": 0.0, "x_m1": 0.0, "xx_p1": 0.0, "xx_m1": 0.0, "x_cross": 0.0}
    for w, psi in components:
        padded = np.zeros((big, big, big), dtype=complex)
        padded[:d, :d, :d] = psi.reshape(d, d, d)
        state = np.kron(padded.ravel(), vac)
        xp, xm = quadratures[1] @ state, quadratures[-1] @ state
        acc["nb_p1"] += w * np.vdot(state, lo_numbers[1] @ state).real
        acc["nb_m1"] += w * np.vdot(state, lo_numbers[-1] @ state).real
        acc["x_p1"] += w * np.vdot(state, xp).real
        acc["x_m1"] += w * np.vdot(state, xm).real
        acc["xx_p1"] += w * np.vdot(xp, xp).real
        acc["xx_m1"] += w * np.vdot(xm, xm).real
        acc["x_cross"] += w * np.vdot(xp, xm).real
    mean_p = acc["x_p1"] / math.sqrt(acc["nb_p1"])
    mean_m = acc["x_m1"] / math.sqrt(acc["nb_m1"])
    second_p = acc["xx_p1"] / acc["nb_p1"]
    second_m = acc["xx_m1"] / acc["nb_m1"]
    cross = acc["x_cross"] / math.sqrt(acc["nb_p1"] * acc["nb_m1"])
    return {
        "nb_p1": acc["nb_p1"],
        "nb_m1": acc["nb_m1"],
        "mean_x_p1": mean_p,
        "mean_x_m1": mean_m,
        "second_x_p1": second_p,
        "second_x_m1": second_m,
        "cross": cross,
        "var_x_p1": second_p - mean_p ** 2,
        "var_x_m1": second_m - mean_m ** 2,
        "cov": cross - mean_p * mean_m,
    }
