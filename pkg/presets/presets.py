"""
Centralized scenario definitions for the steady-state engine.

Every preset is a sweep configuration in the same JSON layout the `sweep --config`
command reads, so a preset can be saved, edited and replayed as a file. Couplings and
rates are in units of the atomic decay rate γ unless a preset says otherwise.
"""


# ============================================================================
# SHARED GRIDS
# ============================================================================

FIGURE_GRID = "0.05:3:0.05"
"""
Role: Occupation grid for every figure preset, 0.05 ≤ m ≤ 3 in steps of 0.05.

Context: Fine enough to bracket the quoted cooling boundaries (1.4, 0.9, 1.2, 0.4)
to ±0.05 before the zero-crossing bisection refines them.

Used by: every preset in this module.
"""


FIG3_FIXED_N = [0.0, 1.0, 2.0]
"""
Role: Field reservoir occupations held fixed while the atomic reservoir is swept.

Context: The atomic cooling region should not depend on which of these is chosen.

Used by: FIG3A_PRESET, FIG3B_PRESET.
"""


# ============================================================================
# FIGURE PRESETS
# ============================================================================

FIG1_PRESET = {
    "mode": "common-occupation",
    "params": {"k": 1, "g": 1.0, "kappa": 0.1},
    "grid": FIGURE_GRID,
    "check_range": True,
}
"""
Role: First blue sideband (anti-Jaynes-Cummings) with both reservoirs at one occupation.

Context: g = γ, κ = 0.1γ. The field response is negative below m ≈ 1.4 and the
atomic response below m ≈ 0.9.

Used by: `preset fig1`.
"""


FIG2_PRESET = {
    "mode": "common-occupation",
    "params": {"k": 2, "g": 0.2, "kappa": 0.1},
    "grid": FIGURE_GRID,
    "check_range": True,
}
"""
Role: Second blue sideband with both reservoirs at one occupation.

Context: g = 0.2γ, κ = 0.1γ. The field response is negative below m ≈ 1.2 and the
atomic response below m ≈ 0.4.

Used by: `preset fig2`.
"""


FIG3A_PRESET = {
    "mode": "fixed-field-occupation",
    "params": {"k": 1, "g": 1.0, "kappa": 0.1},
    "grid": FIGURE_GRID,
    "fixed_n": FIG3_FIXED_N,
    "check_range": True,
}
"""
Role: Atomic response of the first-sideband model with the field reservoir pinned.

Context: Same couplings as FIG1_PRESET; only m_th moves. The atomic response is
negative for m ≲ 1 whatever the pinned n_th.

Used by: `preset fig3a`.
"""


FIG3B_PRESET = {
    "mode": "fixed-field-occupation",
    "params": {"k": 2, "g": 0.2, "kappa": 0.1},
    "grid": FIGURE_GRID,
    "fixed_n": FIG3_FIXED_N,
    "check_range": True,
}
"""
Role: Atomic response of the second-sideband model with the field reservoir pinned.

Context: Same couplings as FIG2_PRESET. The atomic response is negative for m ≲ 0.5.

Used by: `preset fig3b`.
"""


CARRIER_PRESET = {
    "mode": "common-occupation",
    "params": {"k": 0, "g": 1.0, "kappa": 0.0},
    "grid": FIGURE_GRID,
    "check_range": True,
}
"""
Role: Resonant carrier drive, where the atom decouples from the motion.

Context: The atomic response has a closed form and changes sign at
m = g/(√2 γ) − 1/2 ≈ 0.2071 for g = γ; the `oracle` command checks the same closed form.

Used by: `preset carrier`.
"""


# ============================================================================
# EXPERIMENTAL PRESETS
# ============================================================================

TRAPPED_ION_PRESET = {
    "mode": "common-occupation",
    "params": {"k": 1, "kappa": 0.05},
    "lamb_dicke": {"rabi_frequency": 10.0, "eta": 0.2},
    "grid": FIGURE_GRID,
    "check_range": False,
}
"""
Role: Single trapped ion driven on its first blue sideband.

Context: The sideband coupling follows from the Lamb-Dicke expansion: with η = 0.2
and Ω = 10γ the couplings are g₀ = 5γ, g₁ = γ, g₂ = 0.1γ, and the preset picks the one
matching its sideband order. κ is the weak motional heating/damping of the trap.

Used by: `preset trapped-ion`.
"""


CAVITY_QED_PRESET = {
    "mode": "fixed-field-occupation",
    "params": {"k": 1},
    "physical_rates": {"gamma": 1000.0, "g": 1000.0, "kappa": 100.0},
    "grid": FIGURE_GRID,
    "fixed_n": [0.1, 0.7],
    "check_range": False,
}
"""
Role: Atom in a microwave cavity, with the cavity field as the bosonic mode.

Context: Rates are in s⁻¹. The effective sideband coupling g ~ 10³ s⁻¹ and
κ = 10² s⁻¹ (the upper end of 10 to 100 s⁻¹) are typical microwave-cavity values; the
atomic width γ is an illustrative choice equal to g. Reduced by γ this gives g = γ and
κ = 0.1γ. The cavity reservoir sits at n_th ≈ 0.7 and can be cooled to about 0.1;
both are swept as fixed field occupations.

Used by: `preset cavity-qed`.
"""


PRESETS = {
    "fig1": FIG1_PRESET,
    "fig2": FIG2_PRESET,
    "fig3a": FIG3A_PRESET,
    "fig3b": FIG3B_PRESET,
    "carrier": CARRIER_PRESET,
    "trapped-ion": TRAPPED_ION_PRESET,
    "cavity-qed": CAVITY_QED_PRESET,
}
"""
Role: Name → preset lookup for the `preset` subcommand.

Used by: core.services.sweep_service (preset_config), core.management.commands.preset.
"""
