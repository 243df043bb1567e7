from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from loguru import logger
from sqlmodel import Session, SQLModel, create_engine

from app import database
from app.clients.celery import celery
from app.database import get_session
from app.ifs_file import load_ifs
from app.main import app
from app.schemas import ExplicitMatrix, HomogeneousIFS

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def line_ifs(theta: float, digits, probs=None) -> HomogeneousIFS:
    probs = probs or [1 / len(digits)] * len(digits)
    return HomogeneousIFS(dim=1, theta=theta, rotation=ExplicitMatrix(matrix=[[1.0]]),
                          digits=[[float(a)] for a in digits], probs=probs)


def tetrahedron(lam: float) -> HomogeneousIFS:
    return HomogeneousIFS(dim=3, theta=1 / lam, rotation=ExplicitMatrix(matrix=np.eye(3).tolist()),
                          digits=[[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
                          probs=[0.25] * 4)


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    logger.remove()


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture
def cantor() -> HomogeneousIFS:
    return load_ifs(CORPUS / "cantor.yaml")


@pytest.fixture
def uniform() -> HomogeneousIFS:
    return load_ifs(CORPUS / "uniform.yaml")


@pytest.fixture
def golden() -> HomogeneousIFS:
    return load_ifs(CORPUS / "golden.yaml")


@pytest.fixture
def rotation2d() -> HomogeneousIFS:
    return load_ifs(CORPUS / "rotation2d.yaml")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def engine(tmp_path, monkeypatch):
    engine = create_engine(f"sqlite:///{tmp_path / 'test.db'}",
                           connect_args={"check_same_thread": False})
    SQLModel.metadata.create_all(engine)
    # the worker opens its own sessions on database.engine
    monkeypatch.setattr(database, "engine", engine)
    yield engine
    engine.dispose()


@pytest.fixture
def client(engine):
    def get_session_override():
        with Session(engine) as session:
            yield session

    app.dependency_overrides[get_session] = get_session_override
    celery.conf.update(task_always_eager=True, task_eager_propagates=True)
    with TestClient(app) as test_client:
        yield test_client
    app.dependency_overrides.clear()
    celery.conf.update(task_always_eager=False)
