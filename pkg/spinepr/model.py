"""
Domain types shared by every solver backend: parameters, seeds and moments

All quantities are dimensionless: time is tau = g*t and energies are in units
of hbar*g. Modes are indexed 0 (pump), +1 (signal) and -1 (idler); inside
operator strings they occupy positions 0, 1 and 2 respectively.

Classes:
    SeedKind
    SeedSpec
    ModelParams
    MomentKey
    MomentSet

Functions:
    phase_matched_q
    squeezing_parameter
    require_evolvable
    mode_position
"""
import cmath
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple, Any

from spinepr.exceptions import InvalidParameterException

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

MEASUREMENT_TAU = 0.0073
MODES = (0, 1, -1)


def mode_position(j: int) -> int:
    if j not in MODES:
        log.error("%s is not a valid mode index", j)
        raise InvalidParameterException(f"{j} is not a valid mode index (expected one of {MODES})")
    return MODES.index(j)


class SeedKind(Enum):
    """
    Initial state of the signal and idler modes
    """
    VACUUM = "vacuum"
    THERMAL = "thermal"
    COHERENT = "coherent"


@dataclass(frozen=True)
class SeedSpec:
    """
    Attributes
    ----------
    kind: SeedKind
        Vacuum, thermal or coherent signal/idler seed
    nbar_th: float
        Mean thermal occupation of each of the two modes (thermal only)
    alpha_seed_sq: float
        Coherent seed population |alpha_{+-1}(0)|^2, sharing the pump phase (coherent only)
    """
    kind: SeedKind = SeedKind.VACUUM
    nbar_th: float = 0.0
    alpha_seed_sq: float = 0.0

    def __post_init__(self):
        if self.nbar_th < 0 or self.alpha_seed_sq < 0:
            log.error("negative seed occupation (nbar_th=%s, alpha_seed_sq=%s)", self.nbar_th, self.alpha_seed_sq)
            raise InvalidParameterException("seed occupations must be non-negative")

    @staticmethod
    def vacuum() -> 'SeedSpec':
        return SeedSpec(SeedKind.VACUUM)

    @staticmethod
    def thermal(nbar_th: float) -> 'SeedSpec':
        return SeedSpec(SeedKind.THERMAL, nbar_th=float(nbar_th))

    @staticmethod
    def coherent(alpha_seed_sq: float) -> 'SeedSpec':
        return SeedSpec(SeedKind.COHERENT, alpha_seed_sq=float(alpha_seed_sq))

    def is_unpolarized(self) -> bool:
        return self.kind in (SeedKind.VACUUM, SeedKind.THERMAL)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "nbar_th": self.nbar_th, "alpha_seed_sq": self.alpha_seed_sq}


@dataclass(frozen=True)
class ModelParams:
    """
    Dimensionless physical configuration of a run

    Attributes
    ----------
    n0_mean: float
        Initial mean pump atom number N0
    q_over_g: float
        Quadratic Zeeman plus dressing shift in units of g (phase matched when equal to N0)
    p_over_g: float
        Linear Zeeman shift; kept for completeness, solvers reject non-zero values
    seed: SeedSpec
        Signal/idler initial state
    """
    n0_mean: float
    q_over_g: float
    p_over_g: float = 0.0
    seed: SeedSpec = field(default_factory=SeedSpec)

    def __post_init__(self):
        if self.n0_mean < 0:
            log.error("negative mean pump number %s", self.n0_mean)
            raise InvalidParameterException(f"the mean pump number must be non-negative, got {self.n0_mean}")

    @staticmethod
    def matched(n0_mean: float, seed: Optional[SeedSpec] = None) -> 'ModelParams':
        return ModelParams(
            n0_mean=float(n0_mean),
            q_over_g=phase_matched_q(n0_mean),
            seed=seed if seed is not None else SeedSpec.vacuum()
        )

    def with_seed(self, seed: SeedSpec) -> 'ModelParams':
        return replace(self, seed=seed)

    def is_phase_matched(self) -> bool:
        return self.q_over_g == self.n0_mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n0_mean": self.n0_mean,
            "q_over_g": self.q_over_g,
            "p_over_g": self.p_over_g,
            "seed": self.seed.to_dict(),
        }


def phase_matched_q(n0_mean: float) -> float:
    if n0_mean <= 0:
        log.error("phase matching needs a positive pump number, got %s", n0_mean)
        raise InvalidParameterException(f"the mean pump number must be positive, got {n0_mean}")
    return float(n0_mean)


def squeezing_parameter(n0_mean: float, tau: float) -> float:
    if tau < 0:
        log.error("negative time %s", tau)
        raise InvalidParameterException(f"tau must be non-negative, got {tau}")
    return n0_mean * tau


def require_evolvable(params: ModelParams) -> None:
    if params.n0_mean <= 0:
        log.error("evolution requested with n0_mean=%s", params.n0_mean)
        raise InvalidParameterException(f"evolution needs n0_mean > 0, got {params.n0_mean}")
    if params.p_over_g != 0:
        log.error("non-zero linear Zeeman term p/g=%s", params.p_over_g)
        raise InvalidParameterException(f"p_over_g must be 0, got {params.p_over_g}")


@dataclass(frozen=True, order=True)
class MomentKey:
    """
    A normally ordered operator string
    a0^dag^c0 a1^dag^c1 a-1^dag^c2 a0^a0 a1^a1 a-1^a2, stored as exponent triples

    Attributes
    ----------
    creators: Tuple[int, int, int]
        Powers of the creation operators of modes (0, +1, -1)
    annihilators: Tuple[int, int, int]
        Powers of the annihilation operators of modes (0, +1, -1)
    """
    creators: Tuple[int, int, int]
    annihilators: Tuple[int, int, int]

    @staticmethod
    def of(c0: int = 0, cp: int = 0, cm: int = 0, a0: int = 0, ap: int = 0, am: int = 0) -> 'MomentKey':
        return MomentKey((c0, cp, cm), (a0, ap, am))

    def partner(self) -> 'MomentKey':
        return MomentKey(self.annihilators, self.creators)

    def magnetization_change(self) -> int:
        return (self.creators[1] - self.annihilators[1]) - (self.creators[2] - self.annihilators[2])

    def number_change(self) -> int:
        return sum(self.creators) - sum(self.annihilators)

    def order(self) -> int:
        return sum(self.creators) + sum(self.annihilators)

    def is_self_adjoint(self) -> bool:
        return self.creators == self.annihilators

    def label(self) -> str:
        names = ("a0", "a1", "am1")
        parts = []
        for name, power in zip(names, self.creators):
            if power:
                parts.append(f"{name}+" if power == 1 else f"{name}+^{power}")
        for name, power in zip(names, self.annihilators):
            if power:
                parts.append(name if power == 1 else f"{name}^{power}")
        return "<" + " ".join(parts) + ">"

    def __str__(self) -> str:
        return self.label()


# first moments
A0 = MomentKey.of(a0=1)
A1 = MomentKey.of(ap=1)
AM1 = MomentKey.of(am=1)
# populations
N0 = MomentKey.of(c0=1, a0=1)
N1 = MomentKey.of(cp=1, ap=1)
NM1 = MomentKey.of(cm=1, am=1)
# normal coherences
A1D_A0 = MomentKey.of(cp=1, a0=1)
AM1D_A0 = MomentKey.of(cm=1, a0=1)
A1D_AM1 = MomentKey.of(cp=1, am=1)
# anomalous second moments
A0_SQ = MomentKey.of(a0=2)
A1_SQ = MomentKey.of(ap=2)
AM1_SQ = MomentKey.of(am=2)
A1_AM1 = MomentKey.of(ap=1, am=1)
A0_A1 = MomentKey.of(a0=1, ap=1)
A0_AM1 = MomentKey.of(a0=1, am=1)
# fourth order
PAIR_PUMP = MomentKey.of(cp=1, cm=1, a0=2)
A1D_SQ_A0_SQ = MomentKey.of(cp=2, a0=2)
AM1D_SQ_A0_SQ = MomentKey.of(cm=2, a0=2)
N1_N0 = MomentKey.of(c0=1, cp=1, a0=1, ap=1)
NM1_N0 = MomentKey.of(c0=1, cm=1, a0=1, am=1)
N1_NM1 = MomentKey.of(cp=1, cm=1, ap=1, am=1)
N0_N0 = MomentKey.of(c0=2, a0=2)
A1D_AM1_N0 = MomentKey.of(c0=1, cp=1, a0=1, am=1)

CANONICAL_KEYS: Tuple[MomentKey, ...] = (
    A0, A1, AM1,
    N0, N1, NM1,
    A1D_A0, AM1D_A0, A1D_AM1,
    A0_SQ, A1_SQ, AM1_SQ, A1_AM1, A0_A1, A0_AM1,
    PAIR_PUMP, A1D_SQ_A0_SQ, AM1D_SQ_A0_SQ, N1_N0, NM1_N0, N1_NM1, N0_N0, A1D_AM1_N0,
)

POPULATION_KEYS = {0: N0, 1: N1, -1: NM1}


def _swap_modes(key: MomentKey) -> MomentKey:
    c, a = key.creators, key.annihilators
    return MomentKey((c[0], c[2], c[1]), (a[0], a[2], a[1]))


@dataclass(frozen=True, eq=False)
class MomentSet:
    """
    Equal-time normally ordered moments of the three modes

    Only canonical keys are stored; a lookup of any Hermitian partner returns the
    complex conjugate, so the two always agree.

    Attributes
    ----------
    tau: float
        Time the moments refer to
    values: Mapping[MomentKey, complex]
        Expectation value per canonical key
    errors: Mapping[MomentKey, float]
        Standard error per canonical key (zero for exact backends)
    origin: str
        Backend tag ("exact", "dense", "wigner", "analytic", "synthetic")
    warnings: Tuple[str, ...]
        Statistical-quality and validity notes

    Methods
    ----------
    value(key: MomentKey) -> complex
    error(key: MomentKey) -> float
    population(j: int) -> float
    rotated(phi: float) -> MomentSet
        Moments after a_{+-1} -> exp(-i phi) a_{+-1}
    swapped() -> MomentSet
        Moments after relabeling +1 <-> -1
    """
    tau: float
    values: Mapping[MomentKey, complex]
    errors: Mapping[MomentKey, float] = field(default_factory=dict)
    origin: str = "synthetic"
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))
        object.__setattr__(self, "errors", dict(self.errors))

    @staticmethod
    def build(tau: float, values: Mapping[MomentKey, complex], errors: Optional[Mapping[MomentKey, float]] = None,
              origin: str = "synthetic", warnings: Tuple[str, ...] = ()) -> 'MomentSet':
        """Creates a MomentSet from any mix of keys and partners, keeping the canonical entries.

        Missing canonical keys are filled with 0, self-adjoint entries are made real.
        """
        canonical: Dict[MomentKey, complex] = {}
        canonical_errors: Dict[MomentKey, float] = {}
        errors = errors if errors is not None else {}
        for key in CANONICAL_KEYS:
            if key in values:
                value = complex(values[key])
                error = float(errors.get(key, 0.0))
            elif key.partner() in values:
                value = complex(values[key.partner()]).conjugate()
                error = float(errors.get(key.partner(), 0.0))
            else:
                value, error = 0j, 0.0
            if key.is_self_adjoint():
                value = complex(value.real, 0.0)
            canonical[key] = value
            canonical_errors[key] = error
        return MomentSet(tau, canonical, canonical_errors, origin, tuple(warnings))

    def _resolve(self, key: MomentKey) -> Tuple[MomentKey, bool]:
        if key in self.values:
            return key, False
        if key.partner() in self.values:
            return key.partner(), True
        log.error("the moment %s is not part of the moment set", key)
        raise InvalidParameterException(f"the moment {key} is not part of the moment set")

    def value(self, key: MomentKey) -> complex:
        stored, conjugate = self._resolve(key)
        v = self.values[stored]
        return v.conjugate() if conjugate else v

    def error(self, key: MomentKey) -> float:
        stored, _ = self._resolve(key)
        return self.errors.get(stored, 0.0)

    def population(self, j: int) -> float:
        return self.value(POPULATION_KEYS[j]).real

    def rotated(self, phi: float) -> 'MomentSet':
        values = {}
        for key, v in self.values.items():
            winding = (key.creators[1] + key.creators[2]) - (key.annihilators[1] + key.annihilators[2])
            values[key] = v * cmath.exp(1j * phi * winding)
        return MomentSet(self.tau, values, self.errors, self.origin, self.warnings)

    def swapped(self) -> 'MomentSet':
        values = {_swap_modes(k): v for k, v in self.values.items()}
        errors = {_swap_modes(k): e for k, e in self.errors.items()}
        return MomentSet.build(self.tau, values, errors, self.origin, self.warnings)

    def with_warnings(self, *warnings: str) -> 'MomentSet':
        return MomentSet(self.tau, self.values, self.errors, self.origin, self.warnings + tuple(warnings))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.tau,
            "origin": self.origin,
            "values": {k.label(): [v.real, v.imag] for k, v in self.values.items()},
            "errors": {k.label(): e for k, e in self.errors.items()},
            "warnings": list(self.warnings),
        }
