import json
from datetime import datetime
from typing import Annotated, Any, List, Optional

from fastapi import APIRouter, Depends, HTTPException
from pydantic import BaseModel, ValidationError
from sqlmodel import Session, select

from app.celery_worker import RUN_CONFIGS, execute_run
from app.database import get_session
from app.models import Run, RunKind, RunStatus

router = APIRouter()

SessionDep = Annotated[Session, Depends(get_session)]


class RunInput(BaseModel):
    kind: RunKind
    config: dict[str, Any]
    seed: Optional[int] = None
    max_attempts: int = 2


class RunResponse(BaseModel):
    id: str
    kind: RunKind
    status: RunStatus
    config: dict[str, Any]
    seed: Optional[int] = None
    result: Optional[Any] = None
    attempts: int
    max_attempts: int
    failure_reason: Optional[str] = None
    created_at: datetime
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None


class RunRetryResponse(BaseModel):
    id: str
    kind: RunKind
    status: RunStatus
    message: str


def _response(run: Run) -> RunResponse:
    return RunResponse(
        id=run.id,
        kind=run.kind,
        status=run.status,
        config=json.loads(run.config),
        seed=run.seed,
        result=None if run.result is None else json.loads(run.result),
        attempts=run.attempts,
        max_attempts=run.max_attempts,
        failure_reason=run.failure_reason,
        created_at=run.created_at,
        started_at=run.started_at,
        completed_at=run.completed_at,
    )


def _dispatch(run: Run, session: Session) -> None:
    run.status = RunStatus.QUEUED
    session.add(run)
    session.commit()
    session.refresh(run)
    execute_run.apply_async(args=[run.id], task_id=run.id)
    session.refresh(run)


@router.post("/runs",
             response_model=RunResponse,
             summary="Submit a run",
             description="Store a long computation (cover, decay fit, separation sweep) and queue it")
def create_run(args: RunInput, session: SessionDep):
    try:
        settings = RUN_CONFIGS[args.kind].model_validate(args.config)
    except ValidationError as error:
        raise HTTPException(status_code=422, detail=json.loads(error.json()))

    run = Run(
        kind=args.kind,
        config=settings.model_dump_json(exclude_none=True),
        seed=args.seed,
        max_attempts=args.max_attempts,
    )
    session.add(run)
    session.commit()
    session.refresh(run)
    _dispatch(run, session)
    return _response(run)


@router.get("/runs",
            response_model=List[RunResponse],
            summary="Get all runs",
            description="Retrieve all submitted runs, newest first")
def get_runs(session: SessionDep):
    runs = session.exec(select(Run).order_by(Run.created_at.desc())).all()
    return [_response(run) for run in runs]


@router.get("/runs/{run_id}",
            response_model=RunResponse,
            summary="Get run by ID",
            description="Retrieve the status and, once completed, the result of a run")
def get_one_run(run_id: str, session: SessionDep):
    run = session.get(Run, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return _response(run)


@router.get("/runs/{run_id}/retry",
            response_model=RunRetryResponse,
            summary="Retry a run",
            description="Queue a failed or stuck run again")
def retry_run(run_id: str, session: SessionDep):
    run = session.get(Run, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")

    retryable_statuses = [RunStatus.PENDING, RunStatus.QUEUED, RunStatus.FAILED]
    if run.status not in retryable_statuses:
        raise HTTPException(
            status_code=400,
            detail=f"Only runs with status {[s.value for s in retryable_statuses]} can be retried. Current status: {run.status.value}"
        )

    run.attempts = 0
    run.failure_reason = None
    run.result = None
    _dispatch(run, session)
    return RunRetryResponse(id=run.id, kind=run.kind, status=run.status,
                            message="Run queued for retry")
