import logging

from django.core.management.base import BaseCommand, CommandError

from ...services.sweep_service import (
    DEFAULT_SCAN_COUPLINGS,
    KAPPA_TOL,
    SCAN_OCCUPATIONS,
    kappa_threshold_scan,
    write_kappa_csv,
)
from ..options import USAGE_ERROR, add_solver_arguments, config_from_options, grid_option, output_path

logger = logging.getLogger(__name__)

DEFAULT_KAPPAS = "0.05:0.6:0.05"


class Command(BaseCommand):
    help = "Find the largest κ/γ that still admits a bosonic cooling region, over a set of couplings."
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--k", type=int, choices=(1, 2), required=True)
        parser.add_argument(
            "--g",
            default=None,
            help="Couplings g/γ: one number, start:stop:step or a JSON list "
            f"(default per k: {DEFAULT_SCAN_COUPLINGS})",
        )
        parser.add_argument("--kappas", default=DEFAULT_KAPPAS, help="κ grid, start:stop:step or JSON list")
        parser.add_argument("--occupations", default=None, help="m = n values probed per κ")
        parser.add_argument("--kappa-tol", type=float, default=KAPPA_TOL, help="Bisection width")
        parser.add_argument("--workers", type=int, default=None)
        parser.add_argument("--out", default=None, help="Output file (default: stdout)")
        add_solver_arguments(parser)

    def handle(self, *args, **options):
        couplings = grid_option(options["g"], "g")
        kappas = grid_option(options["kappas"], "kappas")
        occupations = grid_option(options["occupations"], "occupations") or SCAN_OCCUPATIONS
        config = config_from_options(options)
        if not options["kappa_tol"] > 0:
            raise CommandError("--kappa-tol must be positive", returncode=USAGE_ERROR)

        try:
            result = kappa_threshold_scan(
                options["k"],
                couplings,
                kappas,
                occupations=occupations,
                config=config,
                workers=options["workers"],
                tol=options["kappa_tol"],
            )
        except ValueError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc

        if options["out"]:
            with open(output_path(options["out"]), "w", encoding="utf-8", newline="\n") as handle:
                write_kappa_csv(result, handle)
        else:
            write_kappa_csv(result, self.stdout)
        flag = "" if not result.flagged else " [flagged]"
        self.stderr.write(
            f"k={result.k}: kappa threshold {result.threshold:.3f} at g={result.g:g} ({result.status}){flag}"
        )
