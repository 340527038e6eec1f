import csv
import logging

from django.core.management.base import BaseCommand, CommandError

from ...services.errors import SolverError
from ...services.model import SystemParams
from ...services.sweep_service import format_number
from ...services.thermo import (
    analytic_carrier_curve,
    build_response_curve,
    carrier_excited_population_oracle,
    carrier_ratio,
    cooling_threshold_carrier,
    find_zero_crossing,
    n_atoms_scale,
)
from ..options import RUN_ERROR, USAGE_ERROR, add_solver_arguments, config_from_options, grid_option

logger = logging.getLogger(__name__)

COLUMNS = (
    "g",
    "m",
    "rho_ee_numeric",
    "rho_ee_closed_form",
    "abs_diff",
    "c_atom_numeric",
    "c_atom_closed_form",
    "ratio",
)


class Command(BaseCommand):
    help = "Compare the numeric carrier steady state and response with their closed forms."
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--g", default="[0.5, 1, 2]", help="Couplings g/γ (JSON list or start:stop:step)")
        parser.add_argument("--m", default="[0.1, 0.5, 1, 2, 3]", help="Occupations m = n")
        parser.add_argument("--n-atoms", type=int, default=None, help="Add a C_N = N·C_atom column")
        parser.add_argument("--no-crossings", action="store_true", help="Skip the zero-crossing summary")
        add_solver_arguments(parser)

    def handle(self, *args, **options):
        couplings = grid_option(options["g"], "g")
        occupations = grid_option(options["m"], "m")
        config = config_from_options(options)
        n_atoms = options["n_atoms"]
        if n_atoms is not None and n_atoms < 1:
            raise CommandError("--n-atoms must be at least 1", returncode=USAGE_ERROR)
        if any(g <= 0 for g in couplings) or any(m <= 0 for m in occupations):
            raise CommandError("Couplings and occupations must be positive", returncode=USAGE_ERROR)

        writer = csv.writer(self.stdout, lineterminator="\n")
        writer.writerow(COLUMNS + (("c_n_atoms",) if n_atoms else ()))
        for g in couplings:
            params = SystemParams(k=0, g=g, kappa=0.0)
            try:
                numeric = build_response_curve(params, occupations, config=config)
            except SolverError as exc:
                raise CommandError(f"{type(exc).__name__}: {exc}", returncode=RUN_ERROR) from exc
            analytic = analytic_carrier_curve(g, occupations)

            for sample, reference in zip(numeric.samples, analytic.samples):
                m = sample.occupation
                population = sample.point.ea_over_omega0
                closed_form = carrier_excited_population_oracle(m, g)
                c_closed = reference.c_atom
                ratio = sample.c_atom / c_closed if c_closed != 0 else float("nan")
                row = [g, m, population, closed_form, abs(population - closed_form), sample.c_atom, c_closed, ratio]
                if n_atoms:
                    row.append(n_atoms_scale(sample.c_atom, n_atoms))
                writer.writerow([format_number(value) for value in row])

            diagnostic = carrier_ratio(numeric, analytic)
            self.stderr.write(
                f"g={g:g}: numeric/closed-form ratio {diagnostic.ratio:.6f} "
                f"(spread {diagnostic.spread:.2e} over {diagnostic.points} points)"
            )
            if not options["no_crossings"]:
                crossing = find_zero_crossing(numeric, "atom")
                expected = cooling_threshold_carrier(g)
                found = "none" if crossing is None else f"{crossing.location:.4f}"
                self.stderr.write(f"g={g:g}: numeric zero crossing {found}, closed-form threshold {expected:.4f}")
