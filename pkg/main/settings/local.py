"""
Django settings for the cohort-ctr pipeline (local runs).

The project uses Django for its command framework, settings and logging config
only: there are no models, URLs or database.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

from pathlib import Path
from dotenv import load_dotenv
import os

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "cohort-ctr-local")

DEBUG = True

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "apps.tensor",
    "apps.encoder",
    "apps.retrieval",
    "apps.augmentation",
    "apps.attention",
    "apps.ctr",
    "apps.dataset",
    "apps.pipeline",
]

DATABASES = {}

TIME_ZONE = "UTC"

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Pipeline

PIPELINE_OUTPUT_ROOT = Path(os.getenv("COHORT_OUTPUT_ROOT", BASE_DIR / "runs"))


# Logging

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "pipeline": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "pipeline",
        },
    },
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": os.getenv("COHORT_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "main": {
            "handlers": ["console"],
            "level": os.getenv("COHORT_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
