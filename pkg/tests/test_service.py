import pytest
from fastapi.testclient import TestClient

from lutnet.ir import model_to_document
from model_service.main import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_defaults(client):
    body = client.get("/defaults").json()
    assert (body["k_lut"], body["phi_max"], body["score_threshold"]) == (6, 12, 5.0)


def test_lut_cost(client):
    assert client.post("/cost/lut", json={"X": 12, "Y": 12}).json() == {"luts": 1020}


def test_lut_cost_rejects_zero(client):
    assert client.post("/cost/lut", json={"X": 0, "Y": 1}).status_code == 422


def test_validate(client, ecg_training, make_tiny_network, rng):
    assert client.post("/network/validate", json=model_to_document(ecg_training)).json() == {
        "valid": True, "violations": []}

    doc = model_to_document(make_tiny_network(rng))
    doc["layers"][3]["config"][2] = 3  # g_alpha = 3 does not divide c_alpha = 4
    body = client.post("/network/validate", json=doc).json()
    assert body["valid"] is False and body["violations"]


def test_network_cost(client, ecg_training):
    body = client.post("/network/cost", json=model_to_document(ecg_training)).json()
    assert body["total"] == 1867
    assert sum(item["luts"] for item in body["per_layer"]) == 1867


def test_malformed_model(client):
    resp = client.post("/network/cost", json={"phase": "training", "layers": [{"kind": "conv9"}]})
    assert resp.status_code == 422
    assert "detail" in resp.json()


def test_search_with_architecture(client):
    resp = client.post("/search", json={
        "filters": [{"c": 12, "k": 6, "f": 12}],
        "architecture": "mitbih_af",
        "score_threshold": 0,
    })
    assert resp.status_code == 200
    result = resp.json()["results"][0]
    assert result["enumerated"] >= len(result["configs"]) > 0
    configs = {tuple(c["tuple_form"]): c for c in result["configs"]}
    assert configs[(12, 6, 12, 12, 1, 1, 12)]["analytic_cost"] == 5569


def test_search_default_threshold(client):
    result = client.post("/search", json={"filters": [{"c": 6, "k": 6, "f": 6}], "phi_max": 6}).json()["results"][0]
    assert all(c["score"] >= 5.0 for c in result["configs"])


def test_search_rejects_non_hidden_filter(client):
    resp = client.post("/search", json={"filters": [{"c": 12, "k": 5, "f": 12}], "architecture": "mitbih_af"})
    assert resp.status_code == 422
    assert "hidden filter" in resp.json()["detail"]


def test_search_bad_filter(client):
    assert client.post("/search", json={"filters": [{"c": 0, "k": 6, "f": 12}]}).status_code == 422


def test_pareto(client, pareto_rows):
    points = [{"id": r["id"], "cost": r["cost"], "accuracy": r["accuracy"]} for r in pareto_rows]
    front = client.post("/pareto", json={"points": points}).json()["front"]
    assert len(front) == 11
    assert [p["cost"] for p in front] == sorted(p["cost"] for p in front)


def test_score_condition(client, score_outlier_pairs):
    pair = score_outlier_pairs[0]
    body = client.post("/score-condition", json={"entries": [pair["i"], pair["j"]]}).json()
    assert body["pairs"] == [[pair["i"]["id"], pair["j"]["id"]]]
