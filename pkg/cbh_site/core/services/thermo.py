"""Thermodynamic observables of the steady state and their temperature responses.

Units: ħ = k_B = 1, rates in units of γ. The atomic energy is measured from the ground
state, so E_a/ω₀ = ⟨σ_+σ_-⟩; the field energy is E_f/ν = ⟨a†a⟩.

A response C = dE/dT is formed as a centered difference of steady-state energies in the
reservoir occupation, times the Bose-Einstein factor dm/dT. Since dm/dT > 0 the sign of
C (and every zero crossing) does not depend on the reference frequency used for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Iterator, List, Optional, Sequence

import numpy as np

from . import qops
from .model import SystemParams, hamiltonian
from .qops import DensityMatrix
from .solver import SolverConfig, auto_truncate, field_occupation, solve_at_cutoff

logger = logging.getLogger(__name__)

COMMON = "common-occupation"
FIXED_FIELD = "fixed-field-occupation"
FIXED_ATOM = "fixed-atom-occupation"
RESPONSE_MODES = (COMMON, FIXED_FIELD, FIXED_ATOM)

INTERACTION_ENERGY_TOL = 1e-8
# Richardson check: halving the step may move C by at most this fraction.
RICHARDSON_RTOL = 0.01
RICHARDSON_FLOOR = 1e-6
CROSSING_TOL = 1e-3
ENERGY_BOUND_TOL = 1e-8


@dataclass(frozen=True)
class ReferenceFrequencies:
    """ω₀ of the atom, ν of the mode, and the frequency used for common-occupation dm/dT."""

    omega0: float = 1.0
    nu: float = 1.0
    omega_ref: float = 1.0

    def __post_init__(self) -> None:
        for name in ("omega0", "nu", "omega_ref"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a finite positive frequency, got {value}")

    def as_dict(self) -> dict:
        return {"omega0": self.omega0, "nu": self.nu, "omega_ref": self.omega_ref}


@dataclass(frozen=True)
class ThermoPoint:
    m_th: float
    n_th: float
    ea_over_omega0: float
    ef_over_nu: float
    e_int: float
    n_fock_used: Optional[int] = None
    residual: float = float("nan")

    def __post_init__(self) -> None:
        if not -ENERGY_BOUND_TOL <= self.ea_over_omega0 <= 1.0 + ENERGY_BOUND_TOL:
            raise ValueError(f"Atomic excitation {self.ea_over_omega0} lies outside [0, 1]")
        if self.ef_over_nu < -ENERGY_BOUND_TOL:
            raise ValueError(f"Field occupation {self.ef_over_nu} is negative")

    @property
    def interaction_flagged(self) -> bool:
        """Tr(H_I ρ) above tolerance; a symptom of an under-converged solve."""
        return abs(self.e_int) > INTERACTION_ENERGY_TOL

    def as_dict(self) -> dict:
        return {
            "m_th": self.m_th,
            "n_th": self.n_th,
            "ea_over_omega0": self.ea_over_omega0,
            "ef_over_nu": self.ef_over_nu,
            "e_int": self.e_int,
            "n_fock_used": self.n_fock_used,
            "residual": self.residual,
            "interaction_flagged": self.interaction_flagged,
        }


@dataclass(frozen=True)
class ResponseValue:
    """One response evaluation; unpacks as ``c_atom, c_field``."""

    c_atom: float
    c_field: float
    point: Optional[ThermoPoint]
    fd_step: float
    mode: str = COMMON
    flagged: bool = False

    def __iter__(self) -> Iterator[float]:
        yield self.c_atom
        yield self.c_field

    def c_total(self, freqs: ReferenceFrequencies) -> float:
        """Response of the total energy ω₀·E_a/ω₀ + ν·E_f/ν; ⟨H_I⟩ vanishes in steady state."""

        return freqs.omega0 * self.c_atom + freqs.nu * self.c_field


@dataclass(frozen=True)
class ResponseSample:
    occupation: float
    c_atom: float
    c_field: float
    point: Optional[ThermoPoint] = None
    flagged: bool = False

    def value(self, which: str) -> float:
        if which == "atom":
            return self.c_atom
        if which == "field":
            return self.c_field
        raise ValueError(f"which must be 'atom' or 'field', got {which!r}")


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    mode: str
    samples: List[ResponseSample]
    params: SystemParams
    fd_step: Optional[float] = None
    # Re-evaluates the curve at a new occupation; used to refine zero crossings.
    evaluator: Optional[Callable[[float], ResponseSample]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        occupations = [sample.occupation for sample in self.samples]
        if any(b <= a for a, b in zip(occupations, occupations[1:])):
            raise ValueError("Response samples must be strictly increasing in occupation")
        for sample in self.samples:
            if not (math.isfinite(sample.c_atom) and math.isfinite(sample.c_field)):
                raise ValueError(f"Non-finite response at occupation {sample.occupation}")

    @property
    def occupations(self) -> np.ndarray:
        return np.array([sample.occupation for sample in self.samples])

    def values(self, which: str) -> np.ndarray:
        return np.array([sample.value(which) for sample in self.samples])


@dataclass(frozen=True)
class ZeroCrossing:
    location: float
    crossings: int
    bracket: tuple

    @property
    def multiple(self) -> bool:
        return self.crossings > 1


@dataclass(frozen=True)
class RatioDiagnostic:
    """Numeric over analytic carrier response where both exceed the floor."""

    ratio: float
    spread: float
    points: int


# ----------------------------------------------------------------------
# Temperature ↔ occupation
# ----------------------------------------------------------------------

def occupation_from_temperature(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(e^{ω/T} − 1); T = 0 is the zero-occupation limit."""

    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if temperature < 0:
        raise ValueError(f"Temperature must be nonnegative, got {temperature}")
    if temperature == 0:
        return 0.0
    x = omega / temperature
    return math.exp(-x) / -math.expm1(-x)


def temperature_from_occupation(omega: float, occupation: float) -> float:
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if not occupation > 0:
        raise ValueError(f"Occupation {occupation} has no finite temperature")
    return omega / math.log1p(1.0 / occupation)


def doccupation_dtemperature(omega: float, occupation: float) -> float:
    """dm/dT = m(m+1)·ln²((m+1)/m)/ω, with the m → 0 limit 0."""

    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if occupation < 0:
        raise ValueError(f"Occupation must be nonnegative, got {occupation}")
    if occupation == 0:
        return 0.0
    log_ratio = math.log1p(1.0 / occupation)
    return occupation * (occupation + 1.0) * log_ratio * log_ratio / omega


# ----------------------------------------------------------------------
# Energies
# ----------------------------------------------------------------------

def energies(
    rho: DensityMatrix,
    params: SystemParams,
    n_fock_used: Optional[int] = None,
    residual: float = float("nan"),
) -> ThermoPoint:
    """⟨σ_+σ_-⟩, ⟨a†a⟩ and Re⟨H_I⟩ of a composite state."""

    n_fock = rho.n_fock or rho.dim // 2
    if rho.dim != 2 * n_fock:
        raise ValueError(f"State dimension {rho.dim} does not match 2 × {n_fock} Fock levels")
    _, _, sigma_z = qops.atom_ops()
    excited = 0.5 * (sigma_z + qops.identity(2))
    ea = qops.expect(qops.kron(excited, qops.identity(n_fock)), rho).real
    e_int = qops.expect(hamiltonian(params, n_fock), rho).real
    return ThermoPoint(
        m_th=params.m_th,
        n_th=params.n_th,
        ea_over_omega0=float(ea),
        ef_over_nu=field_occupation(rho),
        e_int=float(e_int),
        n_fock_used=n_fock_used if n_fock_used is not None else n_fock,
        residual=residual,
    )


def steady_point(params: SystemParams, config: Optional[SolverConfig] = None) -> ThermoPoint:
    """Auto-truncated steady state reduced to its energies."""

    result = auto_truncate(params, config or SolverConfig.from_settings())
    point = energies(result.rho, params, n_fock_used=result.n_fock_used, residual=result.residual)
    _check_interaction_energy(point)
    return point


def _check_interaction_energy(point: ThermoPoint) -> None:
    if point.interaction_flagged:
        logger.warning(
            "Steady-state interaction energy %.3e exceeds %.0e at m_th=%.4g n_th=%.4g",
            point.e_int, INTERACTION_ENERGY_TOL, point.m_th, point.n_th,
        )


# ----------------------------------------------------------------------
# Responses
# ----------------------------------------------------------------------

def default_fd_step(occupation: float) -> float:
    return max(1e-4, 1e-3 * occupation)


def response_common(
    params: SystemParams,
    m: float,
    freqs: Optional[ReferenceFrequencies] = None,
    fd_step: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> ResponseValue:
    """Both reservoirs at the common occupation m_th = n_th = m; dm/dT taken at omega_ref."""

    freqs = freqs or ReferenceFrequencies()
    return _response(
        params, m, lambda base, x: base.with_occupations(m_th=x, n_th=x),
        freqs.omega_ref, fd_step, config, COMMON,
    )


def response_atomic_fixed_n(
    params: SystemParams,
    m: float,
    n_fixed: float,
    freqs: Optional[ReferenceFrequencies] = None,
    fd_step: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> ResponseValue:
    """Vary m_th about m with n_th pinned at n_fixed; dm/dT taken at ω₀.

    ``c_atom`` is the atomic response; ``c_field`` is the field energy's response to the
    same atomic reservoir temperature.
    """

    if n_fixed < 0:
        raise ValueError(f"n_fixed must be nonnegative, got {n_fixed}")
    freqs = freqs or ReferenceFrequencies()
    return _response(
        params, m, lambda base, x: base.with_occupations(m_th=x, n_th=n_fixed),
        freqs.omega0, fd_step, config, FIXED_FIELD,
    )


def response_field_fixed_m(
    params: SystemParams,
    n: float,
    m_fixed: float,
    freqs: Optional[ReferenceFrequencies] = None,
    fd_step: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> ResponseValue:
    """Vary n_th about n with m_th pinned at m_fixed; dn/dT taken at ν."""

    if m_fixed < 0:
        raise ValueError(f"m_fixed must be nonnegative, got {m_fixed}")
    freqs = freqs or ReferenceFrequencies()
    return _response(
        params, n, lambda base, x: base.with_occupations(m_th=m_fixed, n_th=x),
        freqs.nu, fd_step, config, FIXED_ATOM,
    )


def _response(
    params: SystemParams,
    occupation: float,
    at: Callable[[SystemParams, float], SystemParams],
    omega: float,
    fd_step: Optional[float],
    config: Optional[SolverConfig],
    mode: str,
) -> ResponseValue:
    step = default_fd_step(occupation) if fd_step is None else fd_step
    if not 0 < step < occupation:
        raise ValueError(f"Finite-difference step {step} must lie in (0, {occupation})")
    config = config or SolverConfig.from_settings()

    centre_params = at(params, occupation)
    centre = auto_truncate(centre_params, config)
    n_fock = centre.n_fock_used
    point = energies(centre.rho, centre_params, n_fock_used=n_fock, residual=centre.residual)
    _check_interaction_energy(point)

    factor = doccupation_dtemperature(omega, occupation)
    coarse = factor * _centered_slope(params, occupation, step, at, n_fock, config)
    fine = factor * _centered_slope(params, occupation, 0.5 * step, at, n_fock, config)
    change = np.abs(coarse - fine) / np.maximum(np.abs(fine), RICHARDSON_FLOOR)
    flagged = bool(np.any(change >= RICHARDSON_RTOL))
    if flagged:
        logger.info("Finite-difference step %.2e not converged at occupation %.4g (change %.2e)", step, occupation, change.max())

    return ResponseValue(
        c_atom=float(coarse[0]),
        c_field=float(coarse[1]),
        point=point,
        fd_step=step,
        mode=mode,
        flagged=flagged,
    )


def _centered_slope(
    params: SystemParams,
    occupation: float,
    step: float,
    at: Callable[[SystemParams, float], SystemParams],
    n_fock: int,
    config: SolverConfig,
) -> np.ndarray:
    """d(E_a/ω₀, E_f/ν)/d(occupation) at a fixed cutoff."""

    sides = []
    for x in (occupation + step, occupation - step):
        side_params = at(params, x)
        result = solve_at_cutoff(side_params, n_fock, config)
        point = energies(result.rho, side_params)
        sides.append(np.array([point.ea_over_omega0, point.ef_over_nu]))
    return (sides[0] - sides[1]) / (2.0 * step)


# ----------------------------------------------------------------------
# Carrier closed forms
# ----------------------------------------------------------------------

def carrier_excited_population_oracle(m: float, g_over_gamma: float) -> float:
    """Steady ρ_ee of the resonantly driven atom: (g² + m(2m+1)) / (2g² + (2m+1)²).

    Obtained by eliminating the Bloch equations under the dissipator rate·(2AρA† − …).
    """

    if m < 0:
        raise ValueError(f"Occupation must be nonnegative, got {m}")
    g2 = g_over_gamma * g_over_gamma
    width = 2.0 * m + 1.0
    return (g2 + m * width) / (2.0 * g2 + width * width)


def carrier_response_analytic(m: float, g_over_gamma: float) -> float:
    """−2·m(m+1)·ln²((m+1)/m)·[2g² − (2m+1)²]/[2g² + (2m+1)²]², with the m → 0 limit 0."""

    if m < 0:
        raise ValueError(f"Occupation must be nonnegative, got {m}")
    if m == 0:
        return 0.0
    g2 = g_over_gamma * g_over_gamma
    width2 = (2.0 * m + 1.0) ** 2
    log_ratio = math.log1p(1.0 / m)
    return -2.0 * m * (m + 1.0) * log_ratio * log_ratio * (2.0 * g2 - width2) / (2.0 * g2 + width2) ** 2


def cooling_threshold_carrier(g_over_gamma: float) -> float:
    """Largest m with a negative carrier response: g/(√2 γ) − 1/2, floored at 0."""

    if not g_over_gamma > 0:
        raise ValueError(f"g/γ must be positive, got {g_over_gamma}")
    return max(0.0, g_over_gamma / math.sqrt(2.0) - 0.5)


def n_atoms_scale(c_single: float, n_atoms: int) -> float:
    if isinstance(n_atoms, bool) or not isinstance(n_atoms, (int, np.integer)) or n_atoms < 1:
        raise ValueError(f"n_atoms must be a positive integer, got {n_atoms!r}")
    return n_atoms * c_single


# ----------------------------------------------------------------------
# Curves and crossings
# ----------------------------------------------------------------------

def response_sample(
    params: SystemParams,
    occupation: float,
    mode: str = COMMON,
    fixed: float = 0.0,
    freqs: Optional[ReferenceFrequencies] = None,
    fd_step: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> ResponseSample:
    if mode == COMMON:
        value = response_common(params, occupation, freqs, fd_step, config)
    elif mode == FIXED_FIELD:
        value = response_atomic_fixed_n(params, occupation, fixed, freqs, fd_step, config)
    elif mode == FIXED_ATOM:
        value = response_field_fixed_m(params, occupation, fixed, freqs, fd_step, config)
    else:
        raise ValueError(f"mode must be one of {RESPONSE_MODES}, got {mode!r}")
    return ResponseSample(occupation, value.c_atom, value.c_field, value.point, value.flagged)


def build_response_curve(
    params: SystemParams,
    grid: Sequence[float],
    mode: str = COMMON,
    fixed: float = 0.0,
    freqs: Optional[ReferenceFrequencies] = None,
    fd_step: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> ResponseCurve:
    """Evaluate responses over an increasing occupation grid; solver errors propagate."""

    config = config or SolverConfig.from_settings()

    def evaluate(occupation: float) -> ResponseSample:
        return response_sample(params, occupation, mode, fixed, freqs, fd_step, config)

    samples = [evaluate(float(x)) for x in grid]
    return ResponseCurve(mode=mode, samples=samples, params=params, fd_step=fd_step, evaluator=evaluate)


def analytic_carrier_curve(g_over_gamma: float, grid: Sequence[float]) -> ResponseCurve:
    def evaluate(occupation: float) -> ResponseSample:
        return ResponseSample(occupation, carrier_response_analytic(occupation, g_over_gamma), 0.0)

    return ResponseCurve(
        mode=COMMON,
        samples=[evaluate(float(x)) for x in grid],
        params=SystemParams(k=0, g=g_over_gamma, kappa=0.0),
        evaluator=evaluate,
    )


def find_zero_crossing(curve: ResponseCurve, which: str, tol: float = CROSSING_TOL) -> Optional[ZeroCrossing]:
    """Smallest occupation where the chosen response changes sign, or None.

    Brackets from the samples are narrowed by bisection on fresh evaluations until
    narrower than ``tol``, then interpolated linearly.
    """

    if len(curve.samples) < 2:
        raise ValueError("A zero crossing needs at least two samples")
    xs = curve.occupations
    ys = curve.values(which)
    brackets = [i for i in range(len(xs) - 1) if ys[i] == 0 or ys[i] * ys[i + 1] < 0]
    if not brackets:
        return None
    if len(brackets) > 1:
        logger.info("%s response changes sign %d times; reporting the first", which, len(brackets))

    first = brackets[0]
    lo, hi = float(xs[first]), float(xs[first + 1])
    y_lo, y_hi = float(ys[first]), float(ys[first + 1])
    if y_lo == 0:
        return ZeroCrossing(location=lo, crossings=len(brackets), bracket=(lo, lo))

    if curve.evaluator is not None:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            y_mid = curve.evaluator(mid).value(which)
            if y_mid == 0:
                return ZeroCrossing(location=mid, crossings=len(brackets), bracket=(mid, mid))
            if y_lo * y_mid < 0:
                hi, y_hi = mid, y_mid
            else:
                lo, y_lo = mid, y_mid

    location = lo - y_lo * (hi - lo) / (y_hi - y_lo)
    return ZeroCrossing(location=location, crossings=len(brackets), bracket=(lo, hi))


def carrier_ratio(numeric: ResponseCurve, analytic: ResponseCurve, floor: float = 1e-4) -> RatioDiagnostic:
    """Measured constant between the numeric and the closed-form carrier response."""

    if not np.allclose(numeric.occupations, analytic.occupations):
        raise ValueError("Curves must share their occupation grid")
    c_numeric = numeric.values("atom")
    c_analytic = analytic.values("atom")
    mask = (np.abs(c_numeric) > floor) & (np.abs(c_analytic) > floor)
    if not np.any(mask):
        return RatioDiagnostic(ratio=float("nan"), spread=float("nan"), points=0)
    ratios = c_numeric[mask] / c_analytic[mask]
    ratio = float(np.median(ratios))
    spread = float(np.max(np.abs(ratios / ratio - 1.0)))
    return RatioDiagnostic(ratio=ratio, spread=spread, points=int(mask.sum()))
