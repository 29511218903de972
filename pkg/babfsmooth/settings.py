"""
Django settings for the babfsmooth project.

Only the pieces the smoother needs are configured: the ORM run registry,
REST framework serializers used as config schemas, Celery and logging.
"""

import os
from pathlib import Path

import psutil

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def _env_flag(name, default):
    value = os.environ.get(name)
    if value is None:
        return default
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('BABF_SECRET_KEY', 'babfsmooth-local-only')

DEBUG = _env_flag('BABF_DEBUG', False)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'smoother',
]

MIDDLEWARE = []


# Database

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('BABF_DATABASE', BASE_DIR / 'db.sqlite3'),
    }
}

TIME_ZONE = 'UTC'

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Smoother

BABF_THREADS = int(os.environ.get('BABF_THREADS', 0)) or psutil.cpu_count(logical=False) or 1
BABF_RESERVOIR_SIZE = int(os.environ.get('BABF_RESERVOIR_SIZE', 2000))
BABF_LOG_LEVEL = os.environ.get('BABF_LOG_LEVEL', 'INFO').upper()


# Celery

# Eager mode runs chains and replications in-process on a thread pool;
# set BABF_CELERY_EAGER=false to dispatch them to workers through the broker.
CELERY_TASK_ALWAYS_EAGER = _env_flag('BABF_CELERY_EAGER', True)
CELERY_BROKER_URL = os.environ.get('CELERY_BROKER_URL', 'redis://localhost:6379/0')
CELERY_RESULT_BACKEND = os.environ.get('CELERY_RESULT_BACKEND', 'redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = 'UTC'

CELERY_WORKER_PREFETCH_MULTIPLIER = 1  # Chains are long; one at a time per worker
CELERY_TASK_ACKS_LATE = True
CELERY_TASK_TRACK_STARTED = True
CELERY_TASK_TIME_LIMIT = 6 * 60 * 60
CELERY_TASK_SOFT_TIME_LIMIT = 5 * 60 * 60
CELERY_WORKER_CONCURRENCY = BABF_THREADS

CELERY_BROKER_TRANSPORT_OPTIONS = {
    'visibility_timeout': 7 * 60 * 60,  # must exceed the task time limit with acks_late
    'socket_timeout': 5,
    'socket_connect_timeout': 5,
    'retry_on_timeout': True,
}


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'standard': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'standard',
        },
    },
    'loggers': {
        'smoother': {
            'handlers': ['console'],
            'level': BABF_LOG_LEVEL,
            'propagate': False,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
}


# REST framework serializers validate run configs; there are no API views or users

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
}
