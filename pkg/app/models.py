import uuid
from datetime import datetime
from enum import Enum
from typing import Optional

from sqlalchemy import event
from sqlmodel import Field, Session, SQLModel


class TimeStampModel(SQLModel):
    """
    Base model with timestamp fields.

    created_at is set on insert; updated_at is maintained by the
    before_flush listener below.
    """
    created_at: datetime = Field(default_factory=datetime.now)
    updated_at: Optional[datetime] = Field(default=None)


class RunKind(str, Enum):
    """Long computations that go through the job queue."""
    EK_COVER = "ek_cover"      # real-model disk cover
    EKC_COVER = "ekc_cover"    # complex-model disk cover
    DECAY_FIT = "decay_fit"
    ES_SWEEP = "es_sweep"


class RunStatus(str, Enum):
    """
    Run lifecycle:
    - PENDING: stored, not yet dispatched
    - QUEUED: handed to the worker
    - RUNNING: executing
    - FAILED: raised; may be retried while attempts < max_attempts
    - COMPLETED: result stored
    """
    PENDING = "pending"
    QUEUED = "queued"
    RUNNING = "running"
    FAILED = "failed"
    COMPLETED = "completed"


class Run(TimeStampModel, table=True):
    """
    One submitted experiment: its kind, the JSON configuration it was
    started with and, once finished, the JSON result.
    """
    id: str = Field(default_factory=lambda: str(
        uuid.uuid4()), primary_key=True)
    kind: RunKind = Field(index=True)
    status: RunStatus = Field(default=RunStatus.PENDING, index=True)

    config: str  # JSON-encoded request body
    seed: Optional[int] = None
    result: Optional[str] = None  # JSON-encoded output

    # Failure handling
    attempts: int = Field(default=0)
    max_attempts: int = Field(default=2)  # retry once
    failure_reason: Optional[str] = None

    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None


@event.listens_for(Session, "before_flush")
def update_timestamps(session, flush_context, instances):
    """Set updated_at on every modified record before it is written."""
    for instance in session.dirty:
        if isinstance(instance, TimeStampModel):
            if session.is_modified(instance):
                instance.updated_at = datetime.now()
