from celery import Celery

from app.config import REDIS_URL

celery = Celery(
    "selfsim-decay",
    backend=REDIS_URL,
    broker=REDIS_URL,
    include=["app.celery_worker"],
)
