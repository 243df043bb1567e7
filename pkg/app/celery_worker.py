import json
from datetime import datetime, timedelta
from typing import Any

import numpy as np
from loguru import logger
from sqlalchemy import func
from sqlmodel import Session, select

from app import config, database
from app.clients.celery import celery
from app.ek_complex import calibrate_solver, cover_enumerate_complex, ekc_constants
from app.ek_real import cover_enumerate, ek_constants, select_basis
from app.fourier import decay_fit
from app.models import Run, RunKind, RunStatus
from app.output import to_jsonable
from app.schemas import DecayFitConfig, EkcCoverConfig, EkCoverConfig, EsSweepConfig
from app.separation import separation_sweep

# QUEUED runs untouched for this long are dispatched again
STALE_AFTER = timedelta(minutes=10)

RUN_CONFIGS = {
    RunKind.EK_COVER: EkCoverConfig,
    RunKind.EKC_COVER: EkcCoverConfig,
    RunKind.DECAY_FIT: DecayFitConfig,
    RunKind.ES_SWEEP: EsSweepConfig,
}

celery.conf.beat_schedule = {
    'requeue-stale-runs': {
        'task': 'app.celery_worker.requeue_stale_runs',
        'schedule': 300.0,  # Every 5 minutes
    },
}
celery.conf.timezone = 'UTC'


def perform_run(kind: RunKind, settings: dict, seed: int = 0) -> Any:
    """Run one queued computation and return its result as plain JSON data."""
    params = RUN_CONFIGS[kind].model_validate(settings)

    if kind == RunKind.EK_COVER:
        if params.ifs is None:
            O, T_D = np.eye(1), np.eye(1)
        else:
            _, O, T_D = select_basis(params.ifs)
        constants = ek_constants(O, T_D, params.B1, params.B2, mode=params.mode, seed=seed)
        result = cover_enumerate(
            O, T_D, params.B1, params.B2, params.N, params.delta, params.rho,
            params.node_cap, config.WORKERS, constants, params.theta_step, params.eta_step)

    elif kind == RunKind.EKC_COVER:
        odd = [complex(re, im) for re, im in params.theta_prefix]
        prefix = [z for w in odd for z in (w, w.conjugate())]
        d = len(prefix) + 2
        solver = calibrate_solver(params.vartheta, params.b1, d, params.samples, seed)
        constants = ekc_constants(params.vartheta, params.b1, params.b2, d, solver,
                                  theta_prefix=prefix)
        result = cover_enumerate_complex(
            prefix, params.vartheta, params.b1, params.b2, params.N, params.delta,
            params.rho, params.node_cap, config.WORKERS, constants, solver,
            params.phi_range, params.angle_step)

    elif kind == RunKind.DECAY_FIT:
        result = decay_fit(params.ifs, params.shells, params.directions, seed,
                           params.tol, params.k0, workers=config.WORKERS)

    else:
        result = separation_sweep(params.ifs, params.N_max, params.method)

    return to_jsonable(result)


@celery.task(bind=True)
def execute_run(self, run_id: str):
    """
    Execute a stored run and record its outcome.

    The run moves RUNNING -> COMPLETED with its JSON result, or to FAILED
    with the exception text as failure_reason.

    Args:
        run_id: The UUID of the run to execute

    Returns:
        str: A message describing the outcome
    """
    with Session(database.engine) as session:
        run = session.get(Run, run_id)
        if not run:
            return "Run not found."

        run.status = RunStatus.RUNNING
        run.attempts += 1
        run.started_at = datetime.now()
        session.add(run)
        session.commit()
        logger.info(f"Run {run_id} ({run.kind.value}) started, attempt {run.attempts}")

        try:
            result = perform_run(run.kind, json.loads(run.config), run.seed or 0)
        except Exception as exc:
            run.status = RunStatus.FAILED
            run.failure_reason = f"{type(exc).__name__}: {exc}"
            run.completed_at = datetime.now()
            session.add(run)
            session.commit()
            logger.warning(f"Run {run_id} failed: {run.failure_reason}")
            return f"Run {run_id} failed."

        run.result = json.dumps(result, sort_keys=True)
        run.status = RunStatus.COMPLETED
        run.completed_at = datetime.now()
        session.add(run)
        session.commit()
        logger.info(f"Run {run_id} completed")
        return f"Run {run_id} completed."


@celery.task
def requeue_stale_runs():
    """
    Dispatch QUEUED runs again when the broker seems to have lost them.

    Only runs with attempts left and no update for STALE_AFTER are picked,
    oldest first.
    """
    cutoff = datetime.now() - STALE_AFTER
    with Session(database.engine) as session:
        statement = select(Run.id).where(
            Run.status == RunStatus.QUEUED,
            Run.attempts < Run.max_attempts,
            func.coalesce(Run.updated_at, Run.created_at) < cutoff,
        ).order_by(Run.created_at)
        run_ids = list(session.exec(statement).all())

    logger.info(f"Found {len(run_ids)} stale queued runs")
    for run_id in run_ids:
        execute_run.apply_async(args=[run_id], task_id=run_id)
    return run_ids
