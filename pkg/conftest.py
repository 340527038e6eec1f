"""Pytest wiring: make the Django project importable and configure settings."""
import os
import sys
from pathlib import Path

_SITE = Path(__file__).resolve().parent / "cbh_site"
if str(_SITE) not in sys.path:
    sys.path.insert(0, str(_SITE))

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "cbh_site.settings")

import django  # noqa: E402

django.setup()
