import json
import logging

from django.core.management.base import BaseCommand, CommandError

from ...services.errors import SweepError
from ...services.sweep_service import (
    KAPPA_SCAN,
    SWEEP_MODES,
    SweepService,
    kappa_threshold_scan,
    write_kappa_csv,
)
from ..options import (
    RUN_ERROR,
    USAGE_ERROR,
    add_output_arguments,
    add_solver_arguments,
    add_system_arguments,
    build_spec,
    emit_records,
    grid_option,
    load_config_file,
    output_path,
    solver_overrides,
    write_text,
)
from .preset import report_crossings

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run a parameter sweep from flags and/or a JSON config file."
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("--config", default=None, help="JSON sweep configuration")
        parser.add_argument("--save-config", default=None, metavar="PATH", help="Write the effective configuration")
        parser.add_argument("--mode", choices=SWEEP_MODES, default=None)
        add_system_arguments(parser, required=False)
        parser.add_argument("--grid", default=None, help="start:stop:step or JSON list")
        parser.add_argument("--fixed-n", default=None, help="Pinned n_th values (fixed-field mode)")
        parser.add_argument("--fixed-m", default=None, help="Pinned m_th values (fixed-atom mode)")
        parser.add_argument("--occupations", default=None, help="Occupations probed per κ (kappa-scan)")
        parser.add_argument("--omega0", type=float, default=None)
        parser.add_argument("--nu", type=float, default=None)
        parser.add_argument("--omega-ref", type=float, default=None)
        parser.add_argument("--fd-step", type=float, default=None)
        parser.add_argument("--crossings", action="store_true", help="Report refined zero crossings")
        add_solver_arguments(parser)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        config = load_config_file(options["config"]) if options["config"] else {}
        config = self._merge(config, options)
        spec = build_spec(config)

        if options["save_config"]:
            path = write_text(options["save_config"], json.dumps(spec.to_config(), indent=2) + "\n")
            self.stderr.write(f"Wrote config to {path}")

        if spec.mode == KAPPA_SCAN:
            self._kappa_scan(spec, options)
            return

        service = SweepService(spec, options["workers"])
        try:
            records = service.run()
        except SweepError as exc:
            raise CommandError(str(exc), returncode=RUN_ERROR) from exc
        emit_records(self, spec, records, options)
        if options["crossings"]:
            report_crossings(self, service, records)

    def _merge(self, config: dict, options) -> dict:
        """Flags override the config file."""
        config = dict(config)
        params = dict(config.get("params") or {})
        for flag, key in (("k", "k"), ("g", "g"), ("kappa", "kappa"), ("nth", "n_th"), ("mth", "m_th"),
                          ("n_fock", "n_fock"), ("phase", "phase")):
            if options.get(flag) is not None:
                params[key] = options[flag]
        config["params"] = params

        solver = dict(config.get("solver") or {})
        solver.update(solver_overrides(options))
        config["solver"] = solver

        freqs = dict(config.get("freqs") or {})
        for flag, key in (("omega0", "omega0"), ("nu", "nu"), ("omega_ref", "omega_ref")):
            if options.get(flag) is not None:
                freqs[key] = options[flag]
        config["freqs"] = freqs

        for flag, key in (("grid", "grid"), ("fixed_n", "fixed_n"), ("fixed_m", "fixed_m"), ("occupations", "occupations")):
            values = grid_option(options.get(flag), flag.replace("_", "-"))
            if values is not None:
                config[key] = list(values)
        for flag, key in (("mode", "mode"), ("fd_step", "fd_step"), ("format", "format"), ("out", "out")):
            if options.get(flag) is not None:
                config[key] = options[flag]
        config.setdefault("mode", "common-occupation")
        if config["mode"] == KAPPA_SCAN:
            # κ comes from the grid.
            params.setdefault("kappa", 0.0)
        return config

    def _kappa_scan(self, spec, options):
        try:
            result = kappa_threshold_scan(
                spec.params.k,
                (spec.params.g,),
                spec.grid,
                occupations=spec.occupations,
                config=spec.solver,
                workers=options["workers"],
                base=spec.params,
            )
        except ValueError as exc:
            raise CommandError(str(exc), returncode=USAGE_ERROR) from exc
        out = options.get("out") or spec.output_path
        if out:
            with open(output_path(out), "w", encoding="utf-8", newline="\n") as handle:
                write_kappa_csv(result, handle)
        else:
            write_kappa_csv(result, self.stdout)
        self.stderr.write(f"kappa threshold = {result.threshold:.4f} ({result.status})")
