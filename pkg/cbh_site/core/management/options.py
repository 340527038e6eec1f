"""Argument groups and option → domain-object helpers shared by the subcommands."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from django import forms
from django.conf import settings
from django.core.management.base import CommandError

from ..forms import SolverConfigForm, SystemParamsForm, spec_from_config
from ..services.model import SIDEBAND_ORDERS, SystemParams
from ..services.solver import METHODS, SolverConfig
from ..services.plot_service import emit_plot_script, render_html
from ..services.sweep_service import OUTPUT_FORMATS, SweepSpec, parse_grid, render_records

# Exit status for rejected arguments, matching argparse.
USAGE_ERROR = 2
RUN_ERROR = 1


def add_system_arguments(parser, required: bool = True) -> None:
    group = parser.add_argument_group("system")
    group.add_argument("--k", type=int, choices=SIDEBAND_ORDERS, required=required, help="Sideband order")
    group.add_argument("--g", type=float, required=required, help="Coupling g/γ")
    group.add_argument("--kappa", type=float, required=required, help="Field damping κ/γ")
    group.add_argument("--nth", type=float, default=None, help="Field reservoir occupation n_th")
    group.add_argument("--mth", type=float, default=None, help="Atomic reservoir occupation m_th")
    group.add_argument("--n-fock", type=int, default=None, help="Starting Fock cutoff")
    group.add_argument("--phase", type=float, default=None, help="Coupling phase φ (g → g·e^{iφ})")


def add_solver_arguments(parser) -> None:
    group = parser.add_argument_group("solver")
    group.add_argument("--tol", type=float, default=None, help="Residual tolerance")
    group.add_argument("--truncation-tol", type=float, default=None, help="Fock tail tolerance")
    group.add_argument("--max-fock", type=int, default=None, help="Largest Fock cutoff auto-truncation may use")
    group.add_argument("--method", choices=METHODS, default=None)
    group.add_argument("--no-symmetry", action="store_true", help="Solve on the full Liouvillian")


def add_output_arguments(parser) -> None:
    group = parser.add_argument_group("output")
    group.add_argument("--format", choices=OUTPUT_FORMATS, default=None)
    group.add_argument("--out", default=None, help="Output file (default: stdout)")
    group.add_argument("--no-timestamp", action="store_true", help="Omit the generated-at comment")
    group.add_argument("--plot-script", default=None, metavar="PATH", help="Also write a gnuplot script")
    group.add_argument("--html", default=None, metavar="PATH", help="Also write a plotly HTML figure")
    group.add_argument("--workers", type=int, default=None, help="Worker threads for grid points")


def params_from_options(options) -> SystemParams:
    data = {
        "k": options["k"],
        "g": options["g"],
        "kappa": options["kappa"],
        "n_th": options.get("nth"),
        "m_th": options.get("mth"),
        "n_fock": options.get("n_fock"),
        "phase": options.get("phase"),
    }
    form = SystemParamsForm(data={key: value for key, value in data.items() if value is not None})
    if not form.is_valid():
        raise CommandError(_errors(form), returncode=USAGE_ERROR)
    return form.to_params()


def solver_overrides(options) -> dict:
    overrides = {
        "residual_tol": options.get("tol"),
        "truncation_tol": options.get("truncation_tol"),
        "max_fock": options.get("max_fock"),
        "method": options.get("method"),
    }
    if options.get("no_symmetry"):
        overrides["use_symmetry"] = False
    return {key: value for key, value in overrides.items() if value is not None}


def config_from_options(options) -> SolverConfig:
    form = SolverConfigForm(data=solver_overrides(options))
    if not form.is_valid():
        raise CommandError(_errors(form), returncode=USAGE_ERROR)
    return form.to_config()


def grid_option(text: Optional[str], label: str = "grid"):
    if text is None:
        return None
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise CommandError(f"--{label}: {exc}", returncode=USAGE_ERROR) from exc


def load_config_file(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CommandError(f"Cannot read config {path}: {exc}", returncode=USAGE_ERROR) from exc
    except json.JSONDecodeError as exc:
        raise CommandError(f"Config {path} is not valid JSON: {exc}", returncode=USAGE_ERROR) from exc


def build_spec(config: dict) -> SweepSpec:
    try:
        return spec_from_config(config)
    except forms.ValidationError as exc:
        raise CommandError("; ".join(exc.messages), returncode=USAGE_ERROR) from exc


def output_path(path: str) -> Path:
    """Relative paths resolve against CBH_OUTPUT_DIR."""

    resolved = Path(path)
    if not resolved.is_absolute():
        resolved = Path(settings.CBH_OUTPUT_DIR) / resolved
    resolved.parent.mkdir(parents=True, exist_ok=True)
    return resolved


def write_text(path: str, text: str) -> Path:
    resolved = output_path(path)
    with open(resolved, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    return resolved


def _errors(form) -> str:
    return "; ".join(f"{field}: {' '.join(errors)}" for field, errors in form.errors.items())


def emit_records(command, spec: SweepSpec, records, options, title: str = "") -> None:
    """Write records to --out (or stdout), plus the optional plot script and HTML page."""

    text = render_records(records, spec.output_format, timestamp=not options.get("no_timestamp"))
    out = options.get("out") or spec.output_path
    if out:
        resolved = write_text(out, text)
        command.stderr.write(f"Wrote {len(records)} rows to {resolved}")
    else:
        command.stdout.write(text, ending="")

    if options.get("plot_script"):
        csv_name = Path(out).name if out and spec.output_format == "csv" else "sweep.csv"
        script = emit_plot_script(records, csv_path=csv_name, mode=spec.mode, title=title)
        command.stderr.write(f"Wrote plot script to {write_text(options['plot_script'], script)}")
    if options.get("html"):
        page = render_html(records, mode=spec.mode, title=title)
        command.stderr.write(f"Wrote figure to {write_text(options['html'], page)}")
