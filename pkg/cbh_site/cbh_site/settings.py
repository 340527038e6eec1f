"""
Django settings for the cbh_site project.

The project has no web surface and no database: Django provides the settings layer,
logging configuration, management-command CLI and test runner for the steady-state
engine in ``core.services``.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
# Priority: .env.local (development) > .env
env_file = BASE_DIR.parent / '.env.local'
if not env_file.exists():
    env_file = BASE_DIR.parent / '.env'
if env_file.exists():
    load_dotenv(env_file)


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name, '')
    return float(raw) if raw.strip() else default


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name, '')
    return int(raw) if raw.strip() else default


# Only used by Django internals; nothing here is signed.
SECRET_KEY = os.environ.get('SECRET_KEY', default='cbh-insecure-local-key')

DEBUG = os.environ.get('CBH_DEBUG', '') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'core',
]

# Steady states and sweeps are written to flat files only.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver defaults (reduced units, gamma = 1). CLI flags and sweep config files override these.
CBH_RESIDUAL_TOL = _env_float('CBH_RESIDUAL_TOL', 1e-10)
CBH_TRUNCATION_TOL = _env_float('CBH_TRUNCATION_TOL', 1e-8)
CBH_MAX_FOCK = _env_int('CBH_MAX_FOCK', 256)
CBH_SOLVER_METHOD = os.environ.get('CBH_SOLVER_METHOD', 'auto')
CBH_DIRECT_LIMIT = _env_int('CBH_DIRECT_LIMIT', 20000)
CBH_MAX_TIME = _env_float('CBH_MAX_TIME', 2000.0)
CBH_STEP_TOL = _env_float('CBH_STEP_TOL', 1e-8)

# Sweep worker pool size
CBH_WORKERS = _env_int('CBH_WORKERS', 4)

# Where relative --out paths land
CBH_OUTPUT_DIR = Path(os.environ.get('CBH_OUTPUT_DIR', '.'))

CBH_LOG_LEVEL = os.environ.get('CBH_LOG_LEVEL', 'INFO').upper()


# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '[{levelname}] {asctime} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'core.services': {
            'handlers': ['console'],
            'level': CBH_LOG_LEVEL,
            'propagate': False,
        },
        'core.management': {
            'handlers': ['console'],
            'level': CBH_LOG_LEVEL,
            'propagate': False,
        },
    },
}
