import logging

from celery import shared_task

from .modules.sampler import SamplerError
from .runner import execute_chain, execute_replication

logger = logging.getLogger(__name__)


@shared_task(bind=True)
def run_chain_task(self, payload):
    """One MCMC chain; returns the JSON form of its draws or a failure record."""
    logger.info(f"Task {self.request.id}: chain {payload['chain']}")
    try:
        return execute_chain(payload).to_payload()
    except SamplerError as exc:
        logger.error(f"Task {self.request.id}: {exc}")
        return {
            'failed': True,
            'chain': exc.chain,
            'sweep': exc.sweep,
            'role': exc.role,
            'state': exc.state.to_dict() if exc.state is not None else None,
        }


@shared_task(bind=True)
def run_replication_task(self, payload):
    """One benchmark replication; failures come back inside the result."""
    logger.info(f"Task {self.request.id}: {payload['design_name']} replication {payload['replication']}")
    return execute_replication(payload)
