import json
import logging

from django.core.management.base import BaseCommand, CommandError

from ...services.errors import SolverError
from ...services.thermo import (
    ReferenceFrequencies,
    n_atoms_scale,
    response_atomic_fixed_n,
    response_common,
    steady_point,
)
from ..options import (
    RUN_ERROR,
    USAGE_ERROR,
    add_solver_arguments,
    add_system_arguments,
    config_from_options,
    params_from_options,
)

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Solve one steady state and print its energies (and optionally its response)."
    requires_system_checks = []

    def add_arguments(self, parser):
        add_system_arguments(parser)
        add_solver_arguments(parser)
        parser.add_argument("--response", action="store_true", help="Also compute C_atom and C_field at m_th")
        parser.add_argument("--fd-step", type=float, default=None)
        parser.add_argument("--omega-ref", type=float, default=None)
        parser.add_argument("--n-atoms", type=int, default=None, help="Report C_N = N·C_atom")
        parser.add_argument("--format", choices=("text", "json"), default="text")

    def handle(self, *args, **options):
        params = params_from_options(options)
        config = config_from_options(options)
        if options["n_atoms"] is not None and options["n_atoms"] < 1:
            raise CommandError("--n-atoms must be at least 1", returncode=USAGE_ERROR)

        try:
            point = steady_point(params, config)
            report = point.as_dict()
            if options["response"] or options["n_atoms"]:
                report.update(self._response(params, config, options))
        except SolverError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=RUN_ERROR) from exc
        except ValueError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc

        if options["format"] == "json":
            self.stdout.write(json.dumps(report, indent=2))
            return
        for key, value in report.items():
            self.stdout.write(f"{key} = {value}")

    def _response(self, params, config, options) -> dict:
        """Common-occupation response when m_th = n_th, otherwise m_th varies with n_th pinned."""
        freqs = ReferenceFrequencies(omega_ref=options["omega_ref"] or 1.0)
        if params.m_th == params.n_th:
            value = response_common(params, params.m_th, freqs, options["fd_step"], config)
        else:
            value = response_atomic_fixed_n(params, params.m_th, params.n_th, freqs, options["fd_step"], config)
        report = {
            "mode": value.mode,
            "c_atom": value.c_atom,
            "c_field": value.c_field,
            "c_total": value.c_total(freqs),
            "fd_step": value.fd_step,
            "fd_flagged": value.flagged,
        }
        if options["n_atoms"]:
            report["c_n_atoms"] = n_atoms_scale(value.c_atom, options["n_atoms"])
        return report
