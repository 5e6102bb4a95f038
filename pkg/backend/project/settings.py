"""
Django settings for project project.

Generated by 'django-admin startproject' using Django 5.2.1.

The project only hosts the ``wsdt`` app and its management commands; there
is no web surface.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
from dotenv import load_dotenv
import os

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-wsdt-local-only")

DEBUG = os.getenv("DEBUG", "False") == "True"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "wsdt",
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases
# Nothing is stored; the test runner still expects a default alias.

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Django REST Framework Configuration
# Serializers only validate run configuration documents.
REST_FRAMEWORK = {
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": [],
    "UNAUTHENTICATED_USER": None,
}


# WSDT runtime configuration - configurable via environment

# Upper bound on worker threads used by `manage.py eval`
WSDT_THREADS = max(1, int(os.getenv("WSDT_THREADS", os.cpu_count() or 1)))

# PNG input/output through Pillow (PPM/PGM are always available)
WSDT_ENABLE_PNG = os.getenv("WSDT_ENABLE_PNG", "True") == "True"

# PSNR reported for identical images instead of infinity
WSDT_PSNR_CAP = float(os.getenv("WSDT_PSNR_CAP", "100.0"))

WSDT_LOG_LEVEL = os.getenv("WSDT_LOG_LEVEL", "INFO").upper()

# Desk-scale training and ablation acceptance tests take tens of minutes
WSDT_RUN_SLOW_TESTS = os.getenv("WSDT_RUN_SLOW_TESTS", "False") == "True"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "wsdt": {
            "handlers": ["console"],
            "level": WSDT_LOG_LEVEL,
            "propagate": False,
        },
    },
}
