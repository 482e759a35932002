"""Self-checks of the solvers: oracle equivalence, exact limits and symmetries

Classes:
    CheckResult
    ValidationSuite
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from spinepr import analytic, exact, measures
from spinepr.analytic import UndepletedParams
from spinepr.measures import Objective
from spinepr.model import CANONICAL_KEYS, ModelParams

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

ORACLE_N0 = 4.0
ORACLE_CUTOFF = 16
ORACLE_TAUS = (0.05, 0.2, 0.5)
ORACLE_TOLERANCE = 1e-8
RABI_TOLERANCE = 1e-10
LIMIT_N0 = 175.0
POPULATION_WINDOW = 0.004
EPR_WINDOW = 0.003
POPULATION_TOLERANCE = 0.05
EPR_TOLERANCE = 0.10
SYMMETRY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


class ValidationSuite:
    @staticmethod
    def oracle_equivalence() -> CheckResult:
        """Sector solver against the dense brute force in the same Fock box, both integrators."""
        params = ModelParams.matched(ORACLE_N0)
        state = exact.init_coherent_pump(params, n_max=ORACLE_CUTOFF)
        worst = 0.0
        for evolved in exact.iter_evolve_exact(state, ORACLE_TAUS):
            sector = exact.moments_exact(evolved)
            for method in exact.DENSE_METHODS:
                dense = exact.dense_oracle(params, evolved.time, ORACLE_CUTOFF, method)
                worst = max(worst, max(abs(sector.value(k) - dense.value(k)) for k in CANONICAL_KEYS))
        return CheckResult("oracle-equivalence", worst <= ORACLE_TOLERANCE,
                           f"max moment deviation {worst:.3e} (tolerance {ORACLE_TOLERANCE:g})")

    @staticmethod
    def pair_rabi_oscillation() -> CheckResult:
        """Two atoms without phase mismatch oscillate as sin^2(sqrt(2) tau) between |2,0,0> and |0,1,1>."""
        params = ModelParams(2.0, 0.0)
        state = exact.SectorState.from_sectors(params, {2: [1.0, 0.0]})
        taus = np.linspace(0.0, 3.0, 31)
        deviations = [abs(abs(s.sector(2)[1]) ** 2 - math.sin(math.sqrt(2.0) * s.time) ** 2)
                      for s in exact.iter_evolve_exact(state, taus)]
        worst = max(deviations)
        return CheckResult("pair-rabi", worst <= RABI_TOLERANCE,
                           f"max deviation {worst:.3e} (tolerance {RABI_TOLERANCE:g})")

    @staticmethod
    def short_time_limits() -> CheckResult:
        """Exact populations, EPR parameter and inseparability against the undepleted-pump forms."""
        params = ModelParams.matched(LIMIT_N0)
        p = UndepletedParams(LIMIT_N0)
        taus = np.linspace(0.0, POPULATION_WINDOW, 9)[1:]
        state = exact.init_coherent_pump(params)
        failures = []
        norm_drift = 0.0
        for evolved in exact.iter_evolve_exact(state, taus):
            norm_drift = max(norm_drift, abs(evolved.norm() - 1.0))
            m = exact.moments_exact(evolved)
            tau = evolved.time
            expected = analytic.population_ud(p, tau)
            if abs(m.population(1) - expected) > POPULATION_TOLERANCE * expected:
                failures.append(f"population at tau={tau:g}")
            if tau <= EPR_WINDOW:
                squeeze = 2.0 * LIMIT_N0 * tau
                _, upsilon = measures.optimize_phase(m, Objective.EPR)
                if abs(upsilon - 1.0 / math.cosh(squeeze) ** 2) > EPR_TOLERANCE / math.cosh(squeeze) ** 2:
                    failures.append(f"EPR parameter at tau={tau:g}")
                _, insep = measures.optimize_phase(m, Objective.INSEP)
                if abs(insep - (1.0 - math.tanh(squeeze))) > EPR_TOLERANCE * (1.0 - math.tanh(squeeze)):
                    failures.append(f"inseparability at tau={tau:g}")
        if norm_drift > exact.NORM_BOUND:
            failures.append(f"norm drift {norm_drift:.3e}")
        return CheckResult("short-time-limits", not failures, ", ".join(failures) or f"N0={LIMIT_N0:g} within bounds")

    @staticmethod
    def mode_symmetry() -> CheckResult:
        """Exchanging signal and idler leaves the EPR parameter unchanged, and quadrature means vanish."""
        params = ModelParams.matched(LIMIT_N0)
        state = exact.init_coherent_pump(params)
        m = exact.moments_exact(exact.evolve_exact(state, [0.0073])[-1])
        theta0, _ = measures.optimize_phase(m, Objective.EPR)
        asymmetry = abs(measures.epr_parameter(m, theta0, j=1) - measures.epr_parameter(m, theta0, j=-1))
        thetas = np.linspace(0.0, math.pi, 16)
        mean = max(float(np.max(np.abs(measures.generalized_quadrature_mean(m, thetas, j)))) for j in (1, -1))
        passed = asymmetry <= SYMMETRY_TOLERANCE and mean <= SYMMETRY_TOLERANCE
        return CheckResult("mode-symmetry", passed, f"|Y1 - Y-1| = {asymmetry:.3e}, max |<X_j>| = {mean:.3e}")

    @staticmethod
    def checks() -> List[Callable[[], CheckResult]]:
        return [
            ValidationSuite.oracle_equivalence,
            ValidationSuite.pair_rabi_oscillation,
            ValidationSuite.short_time_limits,
            ValidationSuite.mode_symmetry,
        ]

    @staticmethod
    def run() -> List[CheckResult]:
        results = []
        for check in ValidationSuite.checks():
            result = check()
            log.info("%s", result)
            results.append(result)
        return results
