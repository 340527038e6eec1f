"""Figure output for sweeps: a gnuplot script over the CSV and a plotly HTML page."""

from __future__ import annotations

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import plotly.graph_objects as go
from plotly.subplots import make_subplots

from .sweep_service import CSV_COLUMNS, OutputRecord
from .thermo import COMMON, FIXED_ATOM, FIXED_FIELD

logger = logging.getLogger(__name__)

# The atomic energy is drawn ×10 so it shares an axis with the field energy.
ATOM_ENERGY_SCALE = 10

# curve key -> (CSV column, legend title, dash type, panel, scale)
CURVES: Dict[str, Tuple[str, str, int, str, int]] = {
    "energy_field": ("ef_over_nu", "E_f/nu", 1, "energy", 1),
    "energy_atom": ("ea_over_omega0", "10 E_a/omega_0", 2, "energy", ATOM_ENERGY_SCALE),
    "response_field": ("c_field", "C_f", 1, "response", 1),
    "response_atom": ("c_atom", "C_a", 2, "response", 1),
}
DEFAULT_CURVES = tuple(CURVES)


def _axis(mode: str) -> Tuple[str, str, Optional[str]]:
    """(x column, x label, column held fixed) for a sweep mode."""

    if mode == FIXED_FIELD:
        return "m_th", "m_th", "n_th"
    if mode == FIXED_ATOM:
        return "n_th", "n_th", "m_th"
    return "m_th", "m_th = n_th", None


def _fixed_values(records: Sequence[OutputRecord], fixed_column: Optional[str]) -> List[Optional[float]]:
    if fixed_column is None:
        return [None]
    values: List[Optional[float]] = []
    for record in records:
        value = getattr(record, fixed_column)
        if value not in values:
            values.append(value)
    return values


def emit_plot_script(
    records: Sequence[OutputRecord],
    curves: Sequence[str] = DEFAULT_CURVES,
    csv_path: str = "sweep.csv",
    mode: str = COMMON,
    title: str = "",
) -> str:
    """Self-contained gnuplot script drawing the selected curves from ``csv_path``.

    Energies go in the upper panel, responses in the lower one; solid lines for the
    field and dashed for the atom. Output depends only on the arguments.
    """

    if not records:
        raise ValueError("Plot script needs at least one record")
    unknown = [name for name in curves if name not in CURVES]
    if unknown:
        raise ValueError(f"Unknown curves {unknown}; choose from {sorted(CURVES)}")

    x_column, x_label, fixed_column = _axis(mode)
    xs = [getattr(record, x_column) for record in records]
    x_index = CSV_COLUMNS.index(x_column) + 1
    fixed_values = _fixed_values(records, fixed_column)

    lines = [
        "# gnuplot script",
        'set datafile separator ","',
        'set datafile commentschars "#"',
        'set datafile missing "nan"',
        "set key top right",
        f'set xlabel "{x_label}"',
        f"set xrange [{min(xs):.6g}:{max(xs):.6g}]",
    ]
    if title:
        lines.append(f'set title "{title}"')
    lines.append("set multiplot layout 2,1")

    for panel, y_label in (("energy", "energy"), ("response", "response function")):
        lines.append(f'set ylabel "{y_label}"')
        terms = []
        for name in curves:
            column, legend, dash, curve_panel, scale = CURVES[name]
            if curve_panel != panel:
                continue
            y_index = CSV_COLUMNS.index(column) + 1
            for fixed in fixed_values:
                expr = f"${y_index}" if scale == 1 else f"{scale}*${y_index}"
                value = str(y_index) if scale == 1 else f"({expr})"
                label = legend
                if fixed is not None:
                    fixed_index = CSV_COLUMNS.index(fixed_column) + 1
                    value = f"(abs(${fixed_index}-{fixed:.14e})<1e-12 ? {expr} : NaN)"
                    label = f"{legend}, {fixed_column}={fixed:g}"
                terms.append(f'"{csv_path}" skip 1 using {x_index}:{value} with lines lw 2 dt {dash} title "{label}"')
        if terms:
            lines.append("plot " + ", \\\n     ".join(terms))
        else:
            lines.append("plot NaN notitle")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def render_html(
    records: Sequence[OutputRecord],
    curves: Sequence[str] = DEFAULT_CURVES,
    mode: str = COMMON,
    title: str = "",
) -> str:
    """The same two panels as emit_plot_script, as a plotly page."""

    if not records:
        raise ValueError("Figure needs at least one record")
    x_column, x_label, fixed_column = _axis(mode)
    fig = make_subplots(rows=2, cols=1, shared_xaxes=True, vertical_spacing=0.08)

    for name in curves:
        column, legend, dash, panel, scale = CURVES[name]
        row = 1 if panel == "energy" else 2
        for fixed in _fixed_values(records, fixed_column):
            subset = [r for r in records if fixed is None or getattr(r, fixed_column) == fixed]
            ys = [scale * getattr(r, column) for r in subset]
            fig.add_trace(
                go.Scatter(
                    x=[getattr(r, x_column) for r in subset],
                    y=[None if not math.isfinite(y) else y for y in ys],
                    mode="lines",
                    name=legend if fixed is None else f"{legend}, {fixed_column}={fixed:g}",
                    line=dict(width=2, dash="solid" if dash == 1 else "dash"),
                ),
                row=row,
                col=1,
            )

    fig.update_layout(
        title=dict(text=title or "Steady-state energies and responses", x=0.5, xanchor="center"),
        hovermode="x unified",
        margin=dict(b=40, l=60, r=20, t=60),
        plot_bgcolor="rgba(245,245,245,0.9)",
        height=700,
    )
    fig.update_yaxes(title_text="energy", row=1, col=1)
    fig.update_yaxes(title_text="response function", zeroline=True, row=2, col=1)
    fig.update_xaxes(title_text=x_label, row=2, col=1)
    return fig.to_html(include_plotlyjs="cdn", div_id="cbh-response-figure")
