"""Configure Django for pytest the way `python manage.py test` does.

The suite is documented to run from app/ (next to manage.py), and the
bundled run.cfg uses paths relative to it.
"""
import os
from pathlib import Path

import django
import pytest

APP_DIR = Path(__file__).resolve().parent / 'app'

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'app.settings')
django.setup()


@pytest.fixture(scope='session', autouse=True)
def run_from_app_dir():
    previous = os.getcwd()
    os.chdir(APP_DIR)
    yield
    os.chdir(previous)
