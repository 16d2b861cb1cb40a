from .base import *
from decouple import config

# Debug should be True for development
DEBUG = config('DJANGO_DEBUG', default=True, cast=bool)

# Nothing is persisted to a database, SQLite keeps Django's checks quiet
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# The tied-tree assertion follows DEBUG unless set explicitly
TREE_AUTOENCODER['DEBUG_TIED_TREES'] = config('TAE_DEBUG_TIED_TREES', default=DEBUG, cast=bool)

# Keep test and development runs quiet unless asked otherwise
LOGGING['loggers']['apps']['level'] = config('TAE_LOG_LEVEL', default='WARNING')
