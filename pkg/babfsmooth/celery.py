import os

from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'babfsmooth.settings')

app = Celery('babfsmooth')

# Load task modules from all registered Django apps.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Chain and replication tasks live in smoother.tasks
app.autodiscover_tasks()
