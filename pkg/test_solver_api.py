#!/usr/bin/env python3

"""
REST API のテスト
"""

import pytest
from fastapi.testclient import TestClient

import settings
from fjssp_instance import SetupParams, generate_instance, instance_to_dict
from solver_api import app

client = TestClient(app)
HEADERS = {"X-API-Key": settings.API_KEY}


@pytest.fixture(scope="module")
def s1_3():
    return instance_to_dict(generate_instance(SetupParams.for_setup("S1", 3)))


def test_root_and_health():
    assert client.get("/").json()["message"] == "FJSSP Solver API"
    body = client.get("/api/v1/health").json()
    assert body["status"] == "healthy"
    assert body["features"]["hqpu"] is True


def test_solvers_listing():
    body = client.get("/api/v1/solvers").json()
    assert [s["kind"] for s in body["solvers"]] == ["CQPU", "HQPU", "IHQPU"]
    assert body["default_topology"] == settings.TOPOLOGY


def test_api_key_missing(s1_3):
    response = client.post("/api/v1/metrics", json={"instance": s1_3})
    assert response.status_code == 401
    assert response.json()["detail"] == "X-API-Key header is required for FJSSP solver endpoints"
    assert response.headers["www-authenticate"] == "APIKey"


def test_api_key_invalid(s1_3):
    response = client.post("/api/v1/metrics", json={"instance": s1_3}, headers={"X-API-Key": "wrong"})
    assert response.status_code == 403
    assert response.json()["detail"] == "X-API-Key does not match FJSSP_API_KEY"


@pytest.mark.parametrize("path", ["/api/v1/metrics", "/api/v1/solve"])
def test_every_solver_endpoint_requires_key(path, s1_3):
    response = client.post(path, json={"instance": s1_3, "solver": "HQPU"})
    assert response.status_code == 401


def test_openapi_declares_api_key_scheme():
    schema = client.get("/openapi.json").json()
    scheme = schema["components"]["securitySchemes"]["APIKeyHeader"]
    assert scheme == {"type": "apiKey", "in": "header", "name": "X-API-Key",
                      "description": "環境変数 FJSSP_API_KEY に設定したキー"}
    assert "security" in schema["paths"]["/api/v1/solve"]["post"]
    assert "security" not in schema["paths"]["/api/v1/health"]["get"]


def test_metrics(s1_3):
    response = client.post("/api/v1/metrics", json={"instance": s1_3}, headers=HEADERS)
    assert response.status_code == 200
    assert response.json() == {"n_v": 18, "n_q": 21, "num_operations": 9}


def test_metrics_rejects_malformed_instance():
    response = client.post("/api/v1/metrics", json={"instance": {"machine_count": 1}}, headers=HEADERS)
    assert response.status_code == 400
    assert "jobs" in response.json()["detail"]


def test_metrics_rejects_invalid_instance():
    instance = {"machine_count": 1, "horizon": 3, "jobs": [[[{"machine": 4, "time": 1}]]]}
    response = client.post("/api/v1/metrics", json={"instance": instance}, headers=HEADERS)
    assert response.status_code == 400


def test_solve_deterministic(s1_3):
    payload = {"instance": s1_3, "solver": "HQPU", "topology": "chimera:4,4,4", "deterministic_budget": 100,
               "seed": 3}
    first = client.post("/api/v1/solve", json=payload, headers=HEADERS)
    assert first.status_code == 200
    body = first.json()
    assert body["status"] == "Solved"
    assert body["feasible"] is True
    assert body["config"]["seed"] == 3
    assert len(body["schedule"]["operations"]) == 9

    second = client.post("/api/v1/solve", json=payload, headers=HEADERS).json()
    for key in ("best_energy", "best_sample", "schedule", "makespan"):
        assert second[key] == body[key]


def test_solve_embedding_infeasible():
    instance = instance_to_dict(generate_instance(SetupParams.for_setup("S2", 8, k=8)))
    payload = {"instance": instance, "solver": "CQPU", "topology": "chimera:4,4,4", "deterministic_budget": 50}
    body = client.post("/api/v1/solve", json=payload, headers=HEADERS).json()
    assert body["status"] == "EmbeddingInfeasible"
    assert body["schedule"] is None


def test_solve_bad_topology(s1_3):
    payload = {"instance": s1_3, "solver": "CQPU", "topology": "pegasus:6"}
    assert client.post("/api/v1/solve", json=payload, headers=HEADERS).status_code == 400


def test_solve_unknown_solver(s1_3):
    payload = {"instance": s1_3, "solver": "QPU"}
    assert client.post("/api/v1/solve", json=payload, headers=HEADERS).status_code == 422
