import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ...services.plot_service import emit_plot_script, render_html
from ...services.sweep_service import read_csv_records
from ...services.thermo import COMMON, FIXED_ATOM, FIXED_FIELD
from ..options import USAGE_ERROR, write_text

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Redraw a sweep CSV written earlier as a gnuplot script and/or a plotly page."
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument("csv", help="Sweep CSV written by `sweep` or `preset`")
        parser.add_argument("--mode", choices=(COMMON, FIXED_FIELD, FIXED_ATOM), default=COMMON)
        parser.add_argument("--title", default="")
        parser.add_argument("--plot-script", default=None, metavar="PATH", help="Write a gnuplot script")
        parser.add_argument("--html", default=None, metavar="PATH", help="Write a plotly HTML figure")

    def handle(self, *args, **options):
        if not (options["plot_script"] or options["html"]):
            raise CommandError("Nothing to draw: pass --plot-script and/or --html", returncode=USAGE_ERROR)
        path = Path(options["csv"])
        try:
            with open(path, encoding="utf-8") as handle:
                records = read_csv_records(handle)
        except OSError as exc:
            raise CommandError(f"Cannot read {path}: {exc}", returncode=USAGE_ERROR) from exc
        except ValueError as exc:
            raise CommandError(f"{path} is not a sweep CSV: {exc}", returncode=USAGE_ERROR) from exc
        if not records:
            raise CommandError(f"{path} has no rows", returncode=USAGE_ERROR)
        logger.info("Read %d rows from %s", len(records), path)

        title = options["title"] or path.stem
        if options["plot_script"]:
            script = emit_plot_script(records, csv_path=str(path), mode=options["mode"], title=title)
            self.stderr.write(f"Wrote plot script to {write_text(options['plot_script'], script)}")
        if options["html"]:
            page = render_html(records, mode=options["mode"], title=title)
            self.stderr.write(f"Wrote figure to {write_text(options['html'], page)}")
