import logging
import platform
from concurrent.futures import ThreadPoolExecutor

import psutil
from celery import group
from django.conf import settings

logger = logging.getLogger(__name__)


def default_threads():
    """Worker count: BABF_THREADS, else physical cores."""
    return getattr(settings, 'BABF_THREADS', None) or psutil.cpu_count(logical=False) or 1


def host_info():
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'python': platform.python_version(),
        'physical_cores': psutil.cpu_count(logical=False),
        'logical_cores': psutil.cpu_count(logical=True),
        'memory_total_mb': round(memory.total / 2**20),
    }


def dispatch(local_fn, task, payloads, threads=None, decode=None):
    """Run one unit of work per payload and return results in submission order.

    Eager mode calls local_fn on a thread pool; otherwise the payloads go to
    Celery workers as a group of `task` and each JSON result goes through decode.
    """
    payloads = list(payloads)
    if not payloads:
        return []

    if settings.CELERY_TASK_ALWAYS_EAGER:
        workers = max(1, min(threads or default_threads(), len(payloads)))
        if workers == 1:
            return [local_fn(payload) for payload in payloads]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(local_fn, payload) for payload in payloads]
            return [future.result() for future in futures]

    logger.info(f'Dispatching {len(payloads)} {task.name} tasks to the broker')
    results = group(task.s(payload) for payload in payloads).apply_async().get()
    return [decode(result) if decode else result for result in results]
