import math
from datetime import datetime, timedelta

import pytest
from sqlmodel import Session

from app.celery_worker import requeue_stale_runs
from app.ek_complex import forward_window
from app.models import Run, RunKind, RunStatus
from app.schemas import EsSweepConfig
from tests.conftest import line_ifs


def payload(ifs) -> dict:
    return ifs.model_dump(mode="json")


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "running" in response.json()["message"]


def test_validate(client, golden):
    response = client.post("/ifs/validate", json={"ifs": payload(golden)})
    assert response.status_code == 200
    assert response.json()["ok"]
    flat = {"dim": 2, "theta": 2, "rotation": {"kind": "matrix", "matrix": [[1, 0], [0, 1]]},
            "digits": [[0, 0], [1, 1]], "probs": [0.5, 0.5]}
    report = client.post("/ifs/validate", json={"ifs": flat}).json()
    assert not report["ok"]
    assert "spanning" in report["report"]["failures"]


def test_atoms(client, uniform):
    body = client.post("/ifs/atoms", json={"ifs": payload(uniform), "N": 2}).json()
    assert len(body["points"]) == 8
    assert sum(body["weights"]) == pytest.approx(1.0)


def test_transform_at_zero(client, rotation2d):
    body = client.post("/fourier/transform", json={"ifs": payload(rotation2d), "xi": [0, 0]}).json()
    assert body["value"] == [1.0, 0.0]
    assert body["truncation_depth"] == 0


def test_small_frequency_is_rejected(client, uniform):
    response = client.post("/fourier/psi", json={"ifs": payload(uniform), "xi": [0.5]})
    assert response.status_code == 422
    assert response.json()["error"] == "FrequencyTooSmall"


def test_psi(client, uniform):
    body = client.post("/fourier/psi", json={"ifs": payload(uniform), "xi": [5.0]}).json()
    assert body["N"] == 2
    assert body["eta"] == pytest.approx([1.25])
    assert 0 <= body["psi"] <= 1


def test_es_check_over_the_cap(client, golden):
    response = client.post("/dims/es-check", json={"ifs": payload(golden), "N": 30})
    assert response.status_code == 413
    assert response.json()["error"] == "CapExceeded"


def test_es_check_finds_the_golden_collision(client, golden):
    body = client.post("/dims/es-check", json={"ifs": payload(golden), "N": 2}).json()
    assert body["min_distance"] <= 1e-12
    assert body["colliding_pair"] is not None


def test_similarity(client, cantor):
    body = client.post("/dims/similarity", json={"ifs": payload(cantor)}).json()
    assert body["sim_dim_q"] == pytest.approx(math.log(2) / math.log(3))


def test_classify(client):
    body = client.post("/algebraic/classify", json={"coeffs": [1, -1, -1]}).json()
    assert body["is_pisot"]
    assert body["roots"][0] == pytest.approx([(1 + math.sqrt(5)) / 2, 0.0], abs=1e-12)
    response = client.post("/algebraic/classify", json={"coeffs": [1, 0, 1]})
    assert response.status_code == 422
    assert response.json()["error"] == "Undecided"


def test_label(client):
    assert client.post("/algebraic/label", json={"lam": 0.3}).json() is None
    body = client.post("/algebraic/label", json={"lam": (math.sqrt(5) - 1) / 2}).json()
    assert body["is_pisot"]


def test_ek_trace(client, golden):
    body = client.post("/ek/trace", json={"ifs": payload(golden), "eta": [1.0], "N": 6}).json()
    assert [k for [k] in body["K"]] == [1, 2, 3, 4, 7, 11, 18]
    assert body["estimates"][-1] == pytest.approx(18 / 11)


def test_solve_fg(client):
    theta = math.sqrt(2) * (1 + 1j)
    x = [float(v.real) for v in forward_window(theta, 3 + 4j)]
    body = client.post("/ek/complex/solve-fg", json={"x": x, "vartheta": 2.0, "b1": 1.0}).json()
    assert body["theta"] == pytest.approx([theta.real, theta.imag], abs=1e-8)
    response = client.post("/ek/complex/solve-fg", json={"x": x, "vartheta": 2.0, "b1": 1.5})
    assert response.status_code == 422
    assert response.json()["error"] == "OutOfDomain"


def test_completed_run(client, golden):
    response = client.post("/runs", json={"kind": "es_sweep",
                                          "config": {"ifs": payload(golden), "N_max": 3}})
    assert response.status_code == 200
    run = response.json()
    assert run["status"] == "completed"
    assert run["attempts"] == 1
    assert [report["N"] for report in run["result"]] == [0, 1, 2, 3]

    fetched = client.get(f"/runs/{run['id']}").json()
    assert fetched["result"] == run["result"]
    assert fetched["completed_at"] is not None

    retry = client.get(f"/runs/{run['id']}/retry")
    assert retry.status_code == 400


def test_failed_run_and_retry(client):
    config = {"ifs": payload(line_ifs(0.5, [0, 1])), "shells": 3}
    run = client.post("/runs", json={"kind": "decay_fit", "config": config}).json()
    assert run["status"] == "failed"
    assert run["failure_reason"].startswith("NonContractive")

    retry = client.get(f"/runs/{run['id']}/retry")
    assert retry.status_code == 200
    assert retry.json()["message"] == "Run queued for retry"
    again = client.get(f"/runs/{run['id']}").json()
    assert again["status"] == "failed"
    assert again["attempts"] == 1


def test_run_listing_is_newest_first(client, golden):
    ids = []
    for N_max in (0, 1):
        ids.append(client.post("/runs", json={"kind": "es_sweep",
                                              "config": {"ifs": payload(golden), "N_max": N_max}}).json()["id"])
    listed = [run["id"] for run in client.get("/runs").json()]
    assert listed == ids[::-1]


def test_unknown_run(client):
    assert client.get("/runs/missing").status_code == 404
    assert client.get("/runs/missing/retry").status_code == 404


def test_bad_run_config(client):
    response = client.post("/runs", json={"kind": "es_sweep", "config": {"N_max": -1}})
    assert response.status_code == 422
    response = client.post("/runs", json={"kind": "nonsense", "config": {}})
    assert response.status_code == 422


def test_stale_queued_runs_are_dispatched_again(client, engine, golden):
    stored = Run(kind=RunKind.ES_SWEEP, status=RunStatus.QUEUED,
                 config=EsSweepConfig(ifs=golden, N_max=1).model_dump_json(),
                 created_at=datetime.now() - timedelta(hours=1))
    fresh = Run(kind=RunKind.ES_SWEEP, status=RunStatus.QUEUED,
                config=EsSweepConfig(ifs=golden, N_max=1).model_dump_json())
    with Session(engine) as session:
        session.add(stored)
        session.add(fresh)
        session.commit()
        stale_id, fresh_id = stored.id, fresh.id

    assert requeue_stale_runs() == [stale_id]
    with Session(engine) as session:
        assert session.get(Run, stale_id).status == RunStatus.COMPLETED
        assert session.get(Run, fresh_id).status == RunStatus.QUEUED
