"""
Django settings for the interim analysis project.

Every tunable is read from the environment (a local .env file is loaded first)
with the documented default next to it. Management-command flags override the
INTERIM_ANALYSIS defaults; nothing overrides the flags.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = os.getenv('DEBUG', 'True') == 'True'

SECRET_KEY = os.getenv('SECRET_KEY')
if not SECRET_KEY:
    if DEBUG:
        SECRET_KEY = 'django-insecure-fallback-key-for-dev-only'
    else:
        from django.core.exceptions import ImproperlyConfigured
        raise ImproperlyConfigured("SECRET_KEY environment variable must be set in production")

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', '').split(',') if os.getenv('ALLOWED_HOSTS') else []
if not ALLOWED_HOSTS and DEBUG:
    ALLOWED_HOSTS = ['*']


INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',

    # Third-party
    'rest_framework',
    'drf_spectacular',

    # Local apps
    'apps.core',
    'apps.inference',
    'apps.simulation',
    'apps.experiments',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
    'config.monitoring.RequestResponseLogMiddleware',
]

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
            ],
        },
    },
]


# No models are stored; Django only needs a nominal database.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('DB_NAME', BASE_DIR / 'db.sqlite3'),
    }
}

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [
        'rest_framework.permissions.AllowAny',
    ],
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_SCHEMA_CLASS': 'drf_spectacular.openapi.AutoSchema',
    'DEFAULT_VERSIONING_CLASS': 'rest_framework.versioning.URLPathVersioning',
    'ALLOWED_VERSIONS': ('v1',),
    'DEFAULT_VERSION': 'v1',
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
        *(['rest_framework.renderers.BrowsableAPIRenderer'] if DEBUG else []),
    ],
}

# Written into every run record; bump when outputs can change for the same inputs.
INTERIM_ANALYSIS_VERSION = '1.0.0'

SPECTACULAR_SETTINGS = {
    'TITLE': 'Interim Analysis API',
    'DESCRIPTION': 'Predictive probability of success and early-stopping decisions for sequential experiments',
    'VERSION': INTERIM_ANALYSIS_VERSION,
    'SERVE_INCLUDE_SCHEMA': True,
    'SERVERS': [
        {'url': 'http://localhost:8000', 'description': 'Local Development Server'},
    ],
}

INTERIM_ANALYSIS = {
    'ALPHA': float(os.getenv('INTERIM_ALPHA', 0.05)),
    'HORIZON': int(os.getenv('INTERIM_HORIZON', 14)),
    'INTERIM_DAY': int(os.getenv('INTERIM_DAY', 7)),
    'MC_DRAWS': int(os.getenv('INTERIM_MC_DRAWS', 10000)),
    'GAMMA_SUCCESS': float(os.getenv('INTERIM_GAMMA_SUCCESS', 0.9)),
    'GAMMA_FAILURE': float(os.getenv('INTERIM_GAMMA_FAILURE', 0.1)),
    'INTERVAL_LEVEL': float(os.getenv('INTERIM_INTERVAL_LEVEL', 0.90)),
    'HEURISTIC_L': float(os.getenv('INTERIM_HEURISTIC_L', 0.0)),
    'HEURISTIC_M': float(os.getenv('INTERIM_HEURISTIC_M', 0.0)),
    'P_SUCCESS': float(os.getenv('INTERIM_P_SUCCESS', 0.05)),
    'P_FAIL': float(os.getenv('INTERIM_P_FAIL', 0.95)),
    'PREDICTIVE_MODE': os.getenv('INTERIM_PREDICTIVE_MODE', 'generative_aggregate'),
    'PPOS_METHOD': os.getenv('INTERIM_PPOS_METHOD', 'monte_carlo'),
    'REPLICATES': int(os.getenv('INTERIM_REPLICATES', 500)),
    'SEED': int(os.getenv('INTERIM_SEED', 0)),
    'RESULT_LOG': os.getenv('INTERIM_RESULT_LOG', str(BASE_DIR / 'results' / 'runs.jsonl')),
    'OUTPUT_DIR': os.getenv('INTERIM_OUTPUT_DIR', str(BASE_DIR / 'results')),
}


LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

STATIC_URL = '/static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


LOG_LEVEL = os.getenv('INTERIM_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}', 'style': '{'},
        'simple': {'format': '{levelname} {message}', 'style': '{'},
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose' if DEBUG else 'simple',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'config': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'django.request': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
    'root': {'handlers': ['console'], 'level': 'WARNING'},
}


# Production security
if not DEBUG:
    SECURE_CONTENT_TYPE_NOSNIFF = True
    X_FRAME_OPTIONS = 'DENY'
