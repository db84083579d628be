import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gaussmt.settings')
django.setup()
