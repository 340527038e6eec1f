"""Liouvillian assembly and steady-state solvers.

Vectorization is column stacking, vec(ρ)[i + d·j] = ρ(i, j), so vec(AρB) = (Bᵀ ⊗ A)·vec(ρ).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import logging
import math
import time
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from django.conf import settings

from . import qops
from .errors import (
    ConvergenceError,
    MultipleSteadyStatesError,
    ResidualError,
    TruncationError,
)
from .model import (
    CollapseChannel,
    SystemParams,
    atomic_collapse_set,
    atomic_hamiltonian,
    collapse_set,
    conserved_charges,
    hamiltonian,
)
from .qops import DensityMatrix, Operator

logger = logging.getLogger(__name__)

METHODS = ("auto", "direct", "propagate")

HERMITIZATION_WARN = 1e-10
NEGATIVE_EIGENVALUE_WARN = -1e-8
TAIL_LEVELS = 3
OCCUPATION_FLOOR = 1e-6
# Degenerate null spaces show up as singular values below this fraction of the largest.
RANK_CUTOFF = 1e-12
# Unknown counts up to this go through the dense least-squares path.
DENSE_SOLVE_MAX = qops.SPARSE_FROM_DIM ** 2
MIN_STEP = 1e-12
# RK4 stays stable for |λ|·dt ≲ 2.7; the 1-norm bounds the spectral radius.
STABLE_STEP_FACTOR = 2.0
EIGENVALUE_CHECK_MAX_DIM = 400


@dataclass(frozen=True)
class SolverConfig:
    residual_tol: float = 1e-10
    truncation_tol: float = 1e-8
    max_fock: int = 256
    method: str = "auto"
    initial_dt: Optional[float] = None
    max_time: float = 2000.0
    step_tol: float = 1e-8
    direct_limit: int = 20000
    occupation_rtol: Optional[float] = None
    use_symmetry: bool = True

    def __post_init__(self) -> None:
        for name in ("residual_tol", "truncation_tol", "max_time", "step_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_fock < 2:
            raise ValueError(f"max_fock must be at least 2, got {self.max_fock}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.initial_dt is not None and not self.initial_dt > 0:
            raise ValueError(f"initial_dt must be positive, got {self.initial_dt}")
        if self.occupation_rtol is not None and not self.occupation_rtol > 0:
            raise ValueError(f"occupation_rtol must be positive, got {self.occupation_rtol}")

    @classmethod
    def from_settings(cls, **overrides) -> "SolverConfig":
        """Project defaults from settings (CBH_* environment variables), with overrides."""

        values = {
            "residual_tol": settings.CBH_RESIDUAL_TOL,
            "truncation_tol": settings.CBH_TRUNCATION_TOL,
            "max_fock": settings.CBH_MAX_FOCK,
            "method": settings.CBH_SOLVER_METHOD,
            "max_time": settings.CBH_MAX_TIME,
            "step_tol": settings.CBH_STEP_TOL,
            "direct_limit": settings.CBH_DIRECT_LIMIT,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    @property
    def cutoff_rtol(self) -> float:
        """Relative ⟨a†a⟩ change accepted between consecutive cutoffs."""

        if self.occupation_rtol is not None:
            return self.occupation_rtol
        return max(OCCUPATION_FLOOR, self.truncation_tol)

    def tightened(self, factor: float = 10.0) -> "SolverConfig":
        return replace(
            self,
            residual_tol=self.residual_tol / factor,
            truncation_tol=self.truncation_tol / factor,
            occupation_rtol=self.cutoff_rtol / factor if self.occupation_rtol is not None else None,
        )

    def as_dict(self) -> dict:
        return {
            "residual_tol": self.residual_tol,
            "truncation_tol": self.truncation_tol,
            "max_fock": self.max_fock,
            "method": self.method,
            "initial_dt": self.initial_dt,
            "max_time": self.max_time,
            "step_tol": self.step_tol,
            "direct_limit": self.direct_limit,
            "occupation_rtol": self.occupation_rtol,
            "use_symmetry": self.use_symmetry,
        }


@dataclass(frozen=True, eq=False)
class Liouvillian:
    dim_hilbert: int
    matrix: sp.csr_matrix
    channel_summary: Tuple[Tuple[float, str], ...] = ()
    n_fock: Optional[int] = None
    rate_scale: float = 1.0
    # Conserved charge of each basis state, when the generator has one.
    charges: Optional[np.ndarray] = None

    @property
    def dim_super(self) -> int:
        return self.dim_hilbert * self.dim_hilbert

    def sector_indices(self) -> Optional[np.ndarray]:
        """vec positions (i, j) with equal charge: the block holding every steady state."""

        if self.charges is None:
            return None
        dim = self.dim_hilbert
        rows, cols = np.nonzero(self.charges[:, None] == self.charges[None, :])
        return np.sort(rows + dim * cols)


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho: DensityMatrix
    residual: float
    method: str
    n_fock_used: Optional[int]
    tail_population: float
    wall_time: float
    hermitization_correction: float = 0.0
    min_eigenvalue: float = float("nan")
    steps: int = 0
    cutoff_change: float = float("nan")


# ----------------------------------------------------------------------
# Vectorization
# ----------------------------------------------------------------------

def vectorize(rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    matrix = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return np.asarray(matrix, dtype=np.complex128).reshape(-1, order="F").copy()


def devectorize(vector: np.ndarray, n_fock: Optional[int] = None) -> DensityMatrix:
    vector = np.asarray(vector)
    dim = math.isqrt(vector.size)
    if dim * dim != vector.size or dim == 0:
        raise ValueError(f"Vector length {vector.size} is not a perfect square")
    return DensityMatrix(vector.reshape((dim, dim), order="F"), n_fock=n_fock)


def trace_functional(dim: int) -> sp.csr_matrix:
    """Row vector t with t·vec(ρ) = Tr ρ (the vectorized identity)."""

    columns = np.arange(dim) * (dim + 1)
    return sp.csr_matrix((np.ones(dim, dtype=np.complex128), (np.zeros(dim, dtype=int), columns)), shape=(1, dim * dim))


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------

def assemble(
    h: Operator,
    channels: Sequence[CollapseChannel],
    n_fock: Optional[int] = None,
    charges: Optional[np.ndarray] = None,
) -> Liouvillian:
    """L = −i(I⊗H − Hᵀ⊗I) + Σ rate·[2 conj(c)⊗c − I⊗c†c − (c†c)ᵀ⊗I]."""

    dim = h.dim
    if charges is not None and len(charges) != dim:
        raise ValueError(f"Expected {dim} charges, got {len(charges)}")
    eye = sp.identity(dim, dtype=np.complex128, format="csr")
    h_matrix = h.sparse()
    matrix = -1j * (sp.kron(eye, h_matrix) - sp.kron(h_matrix.T, eye))

    summary = []
    scale = float(np.max(np.abs(h_matrix.data), initial=0.0))
    for channel in channels:
        if channel.op.dim != dim:
            raise ValueError(f"Channel {channel.label or '?'} has dimension {channel.op.dim}, Hamiltonian has {dim}")
        if channel.rate < 0:
            raise ValueError(f"Channel {channel.label or '?'} has negative rate {channel.rate}")
        summary.append((channel.rate, channel.label))
        if channel.rate == 0:
            continue
        op = channel.op.sparse()
        number_like = (op.conj().T @ op).tocsr()
        matrix = matrix + channel.rate * (
            2.0 * sp.kron(op.conj(), op) - sp.kron(eye, number_like) - sp.kron(number_like.T, eye)
        )
        scale = max(scale, channel.rate)

    return Liouvillian(
        dim_hilbert=dim,
        matrix=sp.csr_matrix(matrix),
        channel_summary=tuple(summary),
        n_fock=n_fock,
        rate_scale=scale or 1.0,
        charges=None if charges is None else np.asarray(charges),
    )


def liouvillian_spectrum(liouvillian: Liouvillian) -> np.ndarray:
    """Dense eigenvalues, for spot checks on small instances only."""

    if liouvillian.dim_hilbert > 8:
        raise ValueError("Dense spectrum is limited to d ≤ 8")
    return scipy.linalg.eigvals(liouvillian.matrix.toarray())


# ----------------------------------------------------------------------
# Steady states
# ----------------------------------------------------------------------

def steady_state_direct(liouvillian: Liouvillian, config: Optional[SolverConfig] = None) -> SteadyStateResult:
    """Solve L·x = 0 with Tr x = 1 as the stacked (d²+1)×d² least-squares problem.

    Small systems go through a dense least-squares solve. Larger ones use the bordered
    form [[L, tᵀ], [t, 0]]: because t·L = 0, its unique solution has a zero multiplier
    and is the exact minimizer of the stacked problem.

    When the Liouvillian carries conserved charges (and ``use_symmetry`` is on), the
    solve is restricted to the equal-charge block, which L maps into itself and which
    contains the steady state; the residual is still measured on the full L.
    """

    config = config or SolverConfig.from_settings()
    started = time.perf_counter()
    matrix = liouvillian.matrix
    trace_row = trace_functional(liouvillian.dim_hilbert)
    block = liouvillian.sector_indices() if config.use_symmetry else None
    if block is not None:
        matrix = matrix[block][:, block]
        trace_row = trace_row[:, block]

    size = matrix.shape[0]
    rhs = np.zeros(size + 1, dtype=np.complex128)
    rhs[-1] = 1.0

    if size <= DENSE_SOLVE_MAX:
        stacked = np.vstack([matrix.toarray(), trace_row.toarray()])
        reduced, _, rank, _ = scipy.linalg.lstsq(stacked, rhs, cond=RANK_CUTOFF)
        if rank < size:
            raise MultipleSteadyStatesError(
                f"Steady-state manifold is degenerate: stacked system has rank {rank} < {size}"
            )
    else:
        bordered = sp.bmat([[matrix, trace_row.T], [trace_row, None]], format="csc")
        try:
            factor = spla.splu(bordered)
        except RuntimeError as exc:
            raise MultipleSteadyStatesError(f"Steady-state manifold is degenerate: {exc}") from exc
        full = factor.solve(rhs)
        if not np.all(np.isfinite(full)):
            raise MultipleSteadyStatesError("Bordered steady-state system is numerically singular")
        logger.debug("Bordered solve multiplier %.3e", abs(full[-1]))
        reduced = full[:-1]

    if block is None:
        solution = reduced
    else:
        solution = np.zeros(liouvillian.dim_super, dtype=np.complex128)
        solution[block] = reduced
    return _finalize(solution, liouvillian, config, "direct", started)


def steady_state_evolve(
    liouvillian: Liouvillian,
    rho0: DensityMatrix,
    config: Optional[SolverConfig] = None,
) -> SteadyStateResult:
    """Integrate dvec(ρ)/dt = L·vec(ρ) with step-doubling RK4 until ‖L·vec(ρ)‖∞ < residual_tol."""

    config = config or SolverConfig.from_settings()
    started = time.perf_counter()
    if rho0.dim != liouvillian.dim_hilbert:
        raise ValueError(f"Initial state dimension {rho0.dim} does not match Liouvillian {liouvillian.dim_hilbert}")
    rho0.validate(herm_tol=1e-10, trace_tol=1e-10, eig_floor=-1e-8)

    matrix = liouvillian.matrix
    diagonal = np.arange(liouvillian.dim_hilbert) * (liouvillian.dim_hilbert + 1)
    state = vectorize(rho0)

    stable_dt = STABLE_STEP_FACTOR / max(spla.norm(matrix, 1), 1e-300)
    dt = min(config.initial_dt or 0.01 / liouvillian.rate_scale, stable_dt)
    elapsed = 0.0
    steps = 0
    residual = _residual(matrix, state)

    while residual >= config.residual_tol:
        if elapsed >= config.max_time or dt < MIN_STEP:
            partial = _finalize(state, liouvillian, config, "propagate", started, steps=steps, check=False)
            raise ConvergenceError(
                f"Propagation stopped at t={elapsed:.3g} with residual {residual:.3e}",
                residual=residual,
                result=partial,
            )
        full_step = _rk4_step(matrix, state, dt)
        half_dt = 0.5 * dt
        two_half_steps = _rk4_step(matrix, _rk4_step(matrix, state, half_dt), half_dt)
        error = float(np.max(np.abs(two_half_steps - full_step)))
        if not math.isfinite(error) or error > config.step_tol:
            dt = half_dt
            continue

        state = two_half_steps / two_half_steps[diagonal].sum()
        elapsed += dt
        steps += 1
        residual = _residual(matrix, state)
        if error < config.step_tol / 32.0:
            dt = min(2.0 * dt, stable_dt)

    logger.debug("Propagation converged after %d steps (t=%.3g)", steps, elapsed)
    return _finalize(state, liouvillian, config, "propagate", started, steps=steps)


def solve_at_cutoff(
    params: SystemParams,
    n_fock: int,
    config: Optional[SolverConfig] = None,
    rho0: Optional[DensityMatrix] = None,
) -> SteadyStateResult:
    """One steady-state solve at a fixed Fock cutoff, choosing the method from config."""

    config = config or SolverConfig.from_settings()
    if params.k == 0 and params.kappa == 0:
        return _solve_carrier_factorized(params, n_fock, config)

    liouvillian = assemble(
        hamiltonian(params, n_fock),
        collapse_set(params, n_fock),
        n_fock=n_fock,
        charges=conserved_charges(params, n_fock),
    )
    method = config.method
    if method == "auto":
        block = liouvillian.sector_indices() if config.use_symmetry else None
        unknowns = liouvillian.dim_super if block is None else block.size
        method = "direct" if unknowns <= config.direct_limit else "propagate"

    if method == "direct":
        result = steady_state_direct(liouvillian, config)
    else:
        seed = rho0 or qops.tensor_states(
            qops.thermal_atom_state(params.m_th),
            qops.thermal_field_state(n_fock, params.n_th),
        )
        result = steady_state_evolve(liouvillian, seed, config)

    logger.debug(
        "k=%d g=%.4g kappa=%.4g m=%.4g n=%.4g N=%d: %s residual=%.2e tail=%.2e in %.3fs",
        params.k, params.g, params.kappa, params.m_th, params.n_th, n_fock,
        result.method, result.residual, result.tail_population, result.wall_time,
    )
    return result


def auto_truncate(params: SystemParams, config: Optional[SolverConfig] = None) -> SteadyStateResult:
    """Grow the Fock cutoff by 1.5× until the tail and ⟨a†a⟩ have both converged.

    Returns the smaller cutoff of the first pair of consecutive cutoffs that agree.
    """

    config = config or SolverConfig.from_settings()
    n_fock = params.cutoff
    previous: Optional[SteadyStateResult] = None

    while True:
        if n_fock > config.max_fock:
            tail = previous.tail_population if previous is not None else float("nan")
            raise TruncationError(
                f"Fock cutoff exceeded max_fock={config.max_fock} (tail population {tail:.3e})",
                best=previous,
                tail_population=tail,
            )
        current = solve_at_cutoff(params, n_fock, config)
        if previous is not None and previous.tail_population < config.truncation_tol:
            before = field_occupation(previous.rho)
            after = field_occupation(current.rho)
            change = abs(after - before) / max(before, OCCUPATION_FLOOR)
            if change < config.cutoff_rtol:
                return replace(previous, cutoff_change=change)
        previous = current
        n_fock = math.ceil(1.5 * n_fock)


# ----------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------

def field_occupation(rho: DensityMatrix) -> float:
    """⟨a†a⟩ from the diagonal of the composite state."""

    n_fock = rho.n_fock or rho.dim // 2
    populations = rho.populations().reshape(rho.dim // n_fock, n_fock).sum(axis=0)
    return float(np.dot(np.arange(n_fock), populations))


def tail_population(rho: DensityMatrix) -> float:
    """Population of the top three Fock levels, summed over both atomic states."""

    n_fock = rho.n_fock or rho.dim // 2
    populations = rho.populations().reshape(rho.dim // n_fock, n_fock)
    return float(populations[:, -TAIL_LEVELS:].sum())


def trace_distance(first: DensityMatrix, second: DensityMatrix) -> float:
    difference = first.data - second.data
    difference = 0.5 * (difference + difference.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(difference))))


def _rk4_step(matrix: sp.csr_matrix, state: np.ndarray, dt: float) -> np.ndarray:
    k1 = matrix @ state
    k2 = matrix @ (state + 0.5 * dt * k1)
    k3 = matrix @ (state + 0.5 * dt * k2)
    k4 = matrix @ (state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _residual(matrix: sp.csr_matrix, state: np.ndarray) -> float:
    return float(np.max(np.abs(matrix @ state), initial=0.0))


def _finalize(
    solution: np.ndarray,
    liouvillian: Liouvillian,
    config: SolverConfig,
    method: str,
    started: float,
    steps: int = 0,
    check: bool = True,
) -> SteadyStateResult:
    raw = devectorize(solution, n_fock=liouvillian.n_fock)
    rho = raw.hermitized()
    correction = float(np.max(np.abs(raw.data - rho.data), initial=0.0))
    if correction > HERMITIZATION_WARN:
        logger.warning("Hermitization changed the %s solution by %.3e", method, correction)

    residual = _residual(liouvillian.matrix, vectorize(rho))
    lowest = rho.min_eigenvalue() if rho.dim <= EIGENVALUE_CHECK_MAX_DIM else float("nan")
    if lowest < NEGATIVE_EIGENVALUE_WARN:
        logger.warning("Steady state has eigenvalue %.3e", lowest)

    result = SteadyStateResult(
        rho=rho,
        residual=residual,
        method=method,
        n_fock_used=liouvillian.n_fock,
        tail_population=tail_population(rho) if liouvillian.n_fock else 0.0,
        wall_time=time.perf_counter() - started,
        hermitization_correction=correction,
        min_eigenvalue=lowest,
        steps=steps,
    )
    if check and residual > config.residual_tol:
        raise ResidualError(
            f"{method} solve residual {residual:.3e} exceeds tolerance {config.residual_tol:.1e}",
            residual=residual,
            result=result,
        )
    return result


def _solve_carrier_factorized(params: SystemParams, n_fock: int, config: SolverConfig) -> SteadyStateResult:
    """k = 0 with κ = 0: atomic 2×2 steady state ⊗ thermal field at n_th."""

    started = time.perf_counter()
    atomic = steady_state_direct(assemble(atomic_hamiltonian(params), atomic_collapse_set(params)), config)
    rho = qops.tensor_states(atomic.rho, qops.thermal_field_state(n_fock, params.n_th))
    return SteadyStateResult(
        rho=rho,
        residual=atomic.residual,
        method="direct",
        n_fock_used=n_fock,
        tail_population=tail_population(rho),
        wall_time=time.perf_counter() - started,
        hermitization_correction=atomic.hermitization_correction,
        min_eigenvalue=atomic.min_eigenvalue,
    )
