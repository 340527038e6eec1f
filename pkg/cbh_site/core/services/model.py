"""Physical model: a two-level atom coupled to a bosonic mode by the k-th blue sideband.

All rates and couplings are in units of the atomic decay rate γ (γ = 1), with ħ = k_B = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import cmath
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from . import qops
from .qops import Operator

logger = logging.getLogger(__name__)

SIDEBAND_ORDERS = (0, 1, 2)

# The figures only scanned 0 ≤ g, κ ≤ 2γ.
FIGURE_RANGE_MAX = 2.0

LAMB_DICKE_WARN_ETA = 0.3


def default_n_fock(n_th: float) -> int:
    """Starting Fock cutoff: enough levels for a thermal tail below 1e-8 when n_th ≤ 3."""

    return max(20, math.ceil(12.0 * (n_th + 1.0)))


@dataclass(frozen=True)
class SystemParams:
    k: int
    g: float
    kappa: float
    n_th: float = 0.0
    m_th: float = 0.0
    n_fock: Optional[int] = None
    gamma: float = 1.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.k not in SIDEBAND_ORDERS:
            raise ValueError(f"Sideband order k must be one of {SIDEBAND_ORDERS}, got {self.k}")
        for name in ("g", "kappa", "n_th", "m_th"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite nonnegative number, got {value}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.n_fock is not None and self.n_fock < 2:
            raise ValueError(f"n_fock must be at least 2, got {self.n_fock}")

    @property
    def cutoff(self) -> int:
        return self.n_fock if self.n_fock is not None else default_n_fock(self.n_th)

    @property
    def coupling(self) -> complex:
        return self.g * cmath.exp(1j * self.phase)

    def with_occupations(self, m_th: Optional[float] = None, n_th: Optional[float] = None) -> "SystemParams":
        return replace(
            self,
            m_th=self.m_th if m_th is None else m_th,
            n_th=self.n_th if n_th is None else n_th,
        )

    def with_kappa(self, kappa: float) -> "SystemParams":
        return replace(self, kappa=kappa)

    def with_cutoff(self, n_fock: Optional[int]) -> "SystemParams":
        return replace(self, n_fock=n_fock)

    def with_phase(self, phase: float) -> "SystemParams":
        return replace(self, phase=phase)

    def check_figure_range(self) -> None:
        """Raise unless g and κ lie in the scanned window 0 ≤ g, κ ≤ 2γ."""

        limit = FIGURE_RANGE_MAX * self.gamma
        if self.g > limit or self.kappa > limit:
            raise ValueError(f"Figure presets require 0 ≤ g, kappa ≤ {limit:g}; got g={self.g}, kappa={self.kappa}")

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "g": self.g,
            "kappa": self.kappa,
            "n_th": self.n_th,
            "m_th": self.m_th,
            "n_fock": self.n_fock,
            "gamma": self.gamma,
            "phase": self.phase,
        }


@dataclass(frozen=True)
class CollapseChannel:
    """One dissipator term rate·D[op], with D[A]ρ = 2AρA† − A†Aρ − ρA†A."""

    rate: float
    op: Operator
    label: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.rate) or self.rate < 0:
            raise ValueError(f"Collapse rate must be finite and nonnegative, got {self.rate}")


def hamiltonian(params: SystemParams, n_fock: Optional[int] = None) -> Operator:
    """H_I = g(σ_- ⊗ a^k + σ_+ ⊗ a^{†k}) on the composite space; a⁰ is the identity."""

    cutoff = n_fock or params.cutoff
    sigma_minus, _, _ = qops.atom_ops()
    lowering = qops.destroy(cutoff).power(params.k)
    term = params.coupling * qops.kron(sigma_minus, lowering)
    # Adding the exact adjoint keeps H bit-for-bit Hermitian.
    h = term + term.dagger()
    return qops.Operator.from_array(h.data, f"H_k{params.k}")


def collapse_set(params: SystemParams, n_fock: Optional[int] = None) -> List[CollapseChannel]:
    """The four thermal channels: field loss/gain at κ, atomic decay/excitation at γ."""

    cutoff = n_fock or params.cutoff
    sigma_minus, sigma_plus, _ = qops.atom_ops()
    atom_identity = qops.identity(2)
    field_identity = qops.identity(cutoff)
    a = qops.destroy(cutoff)

    channels = [
        CollapseChannel(params.kappa * (params.n_th + 1.0), qops.kron(atom_identity, a), "a"),
        CollapseChannel(params.kappa * params.n_th, qops.kron(atom_identity, a.dagger()), "a†"),
        CollapseChannel(params.gamma * (params.m_th + 1.0), qops.kron(sigma_minus, field_identity), "σ-"),
        CollapseChannel(params.gamma * params.m_th, qops.kron(sigma_plus, field_identity), "σ+"),
    ]
    for channel in channels:
        if channel.op.dim != 2 * cutoff:
            raise ValueError(f"Channel {channel.label} has dimension {channel.op.dim}, expected {2 * cutoff}")
    return channels


def conserved_charges(params: SystemParams, n_fock: Optional[int] = None) -> np.ndarray:
    """Q = a†a − k·σ_+σ_- per composite basis state.

    H_I and all four jump operators shift Q by the same amount on both sides of ρ, so
    the Liouvillian is block diagonal in Q_row − Q_col.
    """

    cutoff = n_fock or params.cutoff
    levels = np.arange(cutoff)
    return np.concatenate([levels, levels - params.k])


def atomic_hamiltonian(params: SystemParams) -> Operator:
    """Carrier Hamiltonian on the bare 2×2 atom: g e^{iφ} σ_- + h.c."""

    sigma_minus, _, _ = qops.atom_ops()
    term = params.coupling * sigma_minus
    return term + term.dagger()


def atomic_collapse_set(params: SystemParams) -> List[CollapseChannel]:
    sigma_minus, sigma_plus, _ = qops.atom_ops()
    return [
        CollapseChannel(params.gamma * (params.m_th + 1.0), sigma_minus, "σ-"),
        CollapseChannel(params.gamma * params.m_th, sigma_plus, "σ+"),
    ]


def lamb_dicke_couplings(rabi_frequency: float, eta: float) -> Tuple[float, float, float]:
    """Coupling magnitudes (|g₀|, |g₁|, |g₂|) = (Ω/2, ηΩ/2, η²Ω/4).

    Phases are dropped: steady-state observables do not depend on the phase of g.
    """

    if not rabi_frequency > 0:
        raise ValueError(f"Rabi frequency must be positive, got {rabi_frequency}")
    if not 0 <= eta < 1:
        raise ValueError(f"Lamb-Dicke parameter must lie in [0, 1), got {eta}")
    if eta > LAMB_DICKE_WARN_ETA:
        logger.warning("Lamb-Dicke parameter %.3f is outside the η ≪ 1 regime", eta)
    return rabi_frequency / 2.0, eta * rabi_frequency / 2.0, eta * eta * rabi_frequency / 4.0


def rates_to_reduced(rate: float, gamma: float) -> float:
    """Express a physical rate (any unit) in units of the atomic decay rate γ."""

    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return rate / gamma
