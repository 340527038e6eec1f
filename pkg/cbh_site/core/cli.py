"""Entry point for the ``cbh`` command: public subcommand names → management commands."""

from __future__ import annotations

from importlib import import_module
import os
import sys
from typing import Optional, Sequence, TextIO

import django
from django.apps import apps

SUBCOMMANDS = {
    "steady": "steady",
    "sweep": "sweep",
    "preset": "preset",
    "scan-kappa": "scan_kappa",
    "oracle": "oracle",
    "plot": "plot",
}

USAGE = (
    "usage: cbh {steady,sweep,preset,scan-kappa,oracle,plot} [options]\n"
    "Run `cbh <subcommand> --help` for the options of each subcommand.\n"
)


def cli_main(
    argv: Optional[Sequence[str]] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Run one subcommand and return its exit status (0 ok, 1 run failure, 2 bad arguments)."""

    argv = list(sys.argv[1:] if argv is None else argv)
    err = stderr or sys.stderr
    if not argv:
        err.write(USAGE)
        return 2
    if argv[0] in ("-h", "--help"):
        (stdout or sys.stdout).write(USAGE)
        return 0
    name = SUBCOMMANDS.get(argv[0])
    if name is None:
        err.write(f"cbh: unknown subcommand {argv[0]!r}\n{USAGE}")
        return 2

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "cbh_site.settings")
    if not apps.ready:
        django.setup()
    command = import_module(f"core.management.commands.{name}").Command(stdout=stdout, stderr=stderr)
    try:
        command.run_from_argv(["cbh", argv[0], *argv[1:]])
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return 0
