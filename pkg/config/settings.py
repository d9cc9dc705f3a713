import os
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "largesieve-local-only")
DEBUG = os.getenv("DJANGO_DEBUG", "false").lower() == "true"

ALLOWED_HOSTS: list[str] = []

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
    "core.apps.CoreConfig",
    "arithmetic.apps.ArithmeticConfig",
    "characters.apps.CharactersConfig",
    "euler.apps.EulerConfig",
    "sieve.apps.SieveConfig",
    "experiments.apps.ExperimentsConfig",
]

DATABASES = {
    "default": {
        "ENGINE": os.getenv("DJANGO_DB_ENGINE", "django.db.backends.sqlite3"),
        "NAME": os.getenv("DJANGO_DB_NAME", str(BASE_DIR / "largesieve.sqlite3")),
        "USER": os.getenv("DJANGO_DB_USER", ""),
        "PASSWORD": os.getenv("DJANGO_DB_PASSWORD", ""),
        "HOST": os.getenv("DJANGO_DB_HOST", ""),
        "PORT": os.getenv("DJANGO_DB_PORT", ""),
    }
}

LANGUAGE_CODE = "en-us"
TIME_ZONE = os.getenv("DJANGO_TIME_ZONE", "UTC")
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

REST_FRAMEWORK = {
    "COERCE_DECIMAL_TO_STRING": False,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "root": {
        "handlers": ["console"],
        "level": os.getenv("DJANGO_LOG_LEVEL", "WARNING"),
    },
}

# Worker pool size for scans and Gram assembly; 0 means one worker per CPU.
LSL_THREADS = int(os.getenv("LSL_THREADS", "0"))

LSL_PRIME_LIMIT_CAP = int(os.getenv("LSL_PRIME_LIMIT_CAP", str(10**8)))
LSL_SEGMENT_THRESHOLD = int(os.getenv("LSL_SEGMENT_THRESHOLD", str(10**7)))
LSL_SEGMENT_SIZE = int(os.getenv("LSL_SEGMENT_SIZE", str(2**21)))

LSL_T_GRID_DIVISOR = float(os.getenv("LSL_T_GRID_DIVISOR", "8"))
LSL_T_CHUNK_ROWS = int(os.getenv("LSL_T_CHUNK_ROWS", "64"))
LSL_GOLDEN_ITERATIONS = int(os.getenv("LSL_GOLDEN_ITERATIONS", "48"))
LSL_SIGMA_TAIL_FRACTION = float(os.getenv("LSL_SIGMA_TAIL_FRACTION", "1e-3"))

LSL_POWER_MAX_ITERATIONS = int(os.getenv("LSL_POWER_MAX_ITERATIONS", str(10**5)))
LSL_POWER_TOL = float(os.getenv("LSL_POWER_TOL", "1e-10"))

LSL_LEMMA_THRESHOLD = float(os.getenv("LSL_LEMMA_THRESHOLD", "1.0"))
LSL_LEMMA_THRESHOLD_FILE = Path(
    os.getenv("LSL_LEMMA_THRESHOLD_FILE", str(BASE_DIR / "euler" / "fixtures" / "lemma_thresholds.json"))
)

LSL_RECORD_RUNS = os.getenv("LSL_RECORD_RUNS", "true").lower() == "true"
LSL_LOG_MAX_CHARS = int(os.getenv("LSL_LOG_MAX_CHARS", "200000"))
