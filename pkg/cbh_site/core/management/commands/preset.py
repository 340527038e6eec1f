import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ...services.errors import SolverError, SweepError
from ...services.sweep_service import SweepService, preset_names, spec_from_preset
from ...services.thermo import find_zero_crossing
from ..options import (
    RUN_ERROR,
    USAGE_ERROR,
    add_output_arguments,
    add_solver_arguments,
    emit_records,
    grid_option,
    solver_overrides,
)

logger = logging.getLogger(__name__)


def report_crossings(command, service, records) -> None:
    """Print the first sign change of each response curve, refined on fresh solves."""
    for fixed, curve in service.curves(records).items():
        if len(curve.samples) < 2:
            continue
        label = "" if fixed is None else f" (fixed {fixed:g})"
        for which in ("field", "atom"):
            try:
                crossing = find_zero_crossing(curve, which)
            except (SolverError, ValueError) as exc:
                command.stderr.write(f"C_{which}{label}: crossing refinement failed: {exc}")
                continue
            if crossing is None:
                command.stderr.write(f"C_{which}{label}: no sign change")
            else:
                extra = f", {crossing.crossings} sign changes" if crossing.multiple else ""
                command.stderr.write(f"C_{which}{label}: zero crossing at {crossing.location:.4f}{extra}")


class Command(BaseCommand):
    help = "Run a named figure or experimental preset."
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("name", choices=preset_names())
        parser.add_argument("--grid", default=None, help="Override the preset grid")
        parser.add_argument("--fd-step", type=float, default=None)
        parser.add_argument("--crossings", action="store_true", help="Report refined zero crossings")
        add_solver_arguments(parser)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        grid = grid_option(options["grid"])
        overrides = {
            "grid": list(grid) if grid is not None else None,
            "fd_step": options["fd_step"],
            "format": options["format"],
            "out": options["out"],
            "solver": solver_overrides(options) or None,
        }
        try:
            spec = spec_from_preset(options["name"], **overrides)
        except ValidationError as exc:
            raise CommandError("; ".join(exc.messages), returncode=USAGE_ERROR) from exc
        except ValueError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc

        service = SweepService(spec, options["workers"])
        try:
            records = service.run()
        except SweepError as exc:
            raise CommandError(str(exc), returncode=RUN_ERROR) from exc
        emit_records(self, spec, records, options, title=options["name"])
        if options["crossings"]:
            report_crossings(self, service, records)
