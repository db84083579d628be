"""
Django settings for the gaussmt project.

gaussmt is a numerics library with a management-command front end; no
database, templates or web stack are configured. Numeric defaults are read
from the environment (optionally through a .env file) so that runs can be
tuned without editing code.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals (signing); nothing here is secret.
SECRET_KEY = os.getenv('SECRET_KEY', 'gaussmt-local-numerics-only')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'core',
    'rates',
    'oracle',
    'asymptotics',
]

# No persistence: every quantity is recomputed from closed forms.
DATABASES = {}

USE_TZ = True


# Numerics Configuration
# Largest ell the dense conditioning oracle accepts; C(8,4)*4 = 280 auxiliary rows.
GAUSSMT_ORACLE_MAX_ELL = int(os.getenv('GAUSSMT_ORACLE_MAX_ELL', '8'))
# Relative eigenvalue cutoff for the symmetric pseudo-inverse.
GAUSSMT_PINV_RTOL = float(os.getenv('GAUSSMT_PINV_RTOL', '1e-12'))
# Largest residual the verify command accepts.
GAUSSMT_VERIFY_TOL = float(os.getenv('GAUSSMT_VERIFY_TOL', '1e-9'))
# joblib workers for grid sweeps (threads; output order is fixed).
GAUSSMT_N_JOBS = int(os.getenv('GAUSSMT_N_JOBS', '1'))

# Output formatting for emitted curve files
GAUSSMT_FLOAT_FORMAT = '.16e'  # 17 significant digits, lowercase scientific


# Logging Configuration
LOG_LEVEL = os.getenv('GAUSSMT_LOG_LEVEL', 'INFO').upper()
LOG_FILE = os.getenv('GAUSSMT_LOG_FILE')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'gaussmt': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

if LOG_FILE:
    # Ensure the log directory exists (FileHandler does not create it)
    try:
        os.makedirs(Path(LOG_FILE).resolve().parent, exist_ok=True)
        LOGGING['handlers']['file'] = {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': LOG_FILE,
            'formatter': 'verbose',
        }
        LOGGING['loggers']['gaussmt']['handlers'].append('file')
    except OSError:
        # In read-only environments, fall back to console logging only
        pass
