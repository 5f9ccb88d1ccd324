"""Wire-protocol conformance against the recorded request fixtures."""

from __future__ import annotations

import math

import pytest

from sidecar_helpers import MODEL_ID, protocol_cases

CASES = protocol_cases()


def check_structure(case: dict, status: int, body: dict, dim: int) -> None:
    """Apply the structural rules every response must satisfy."""
    expect = case["expect"]
    if expect["status"] == "error":
        assert status != 200
        assert isinstance(body.get("error"), str) and body["error"]
        return
    assert status == expect["status"]
    assert body["dim"] == dim and dim >= 1
    count = expect["count"]
    if expect["kind"] == "sentence":
        assert list(body) == ["dim", "vectors"]
        assert len(body["vectors"]) == count
        for row in body["vectors"]:
            assert len(row) == dim
            assert all(isinstance(x, float) for x in row)
    else:
        assert list(body) == ["dim", "sequences", "tokens"]
        assert len(body["sequences"]) == count
        assert len(body["tokens"]) == count
        for seq, toks in zip(body["sequences"], body["tokens"]):
            assert len(seq) == len(toks)
            for row in seq:
                assert len(row) == dim
        for i in expect.get("empty_text_indices", []):
            assert body["sequences"][i] == []
            assert body["tokens"][i] == []


@pytest.mark.parametrize("case", CASES, ids=[c["name"] for c in CASES])
def test_conformance_case(client, model, case):
    resp = client.post("/embed", json=case["request"])
    check_structure(case, resp.status_code, resp.json(), model.dim)


@pytest.mark.parametrize(
    "case",
    [c for c in CASES if c["expect"].get("repeat_identical")],
    ids=lambda c: c["name"],
)
def test_repeat_identical_byte_for_byte(client, case):
    first = client.post("/embed", json=case["request"])
    second = client.post("/embed", json=case["request"])
    assert first.content == second.content


def test_malformed_json_body_is_protocol_error(client):
    resp = client.post(
        "/embed", content=b"{not json", headers={"content-type": "application/json"}
    )
    assert resp.status_code != 200
    assert isinstance(resp.json()["error"], str)


def test_non_object_body_is_protocol_error(client):
    resp = client.post("/embed", json=["level", "sentence"])
    assert resp.status_code != 200
    assert "object" in resp.json()["error"]


def test_health_reports_model_and_dim(client, model):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"dim": model.dim, "model": MODEL_ID}


def test_health_dim_matches_embed_dim(client):
    health = client.get("/health").json()
    embed = client.post(
        "/embed", json={"level": "sentence", "texts": ["یک"]}
    ).json()
    assert health["dim"] == embed["dim"]


def test_sentence_vectors_are_unit_norm(client):
    body = client.post(
        "/embed", json={"level": "sentence", "texts": ["سلام دنیا", ""]}
    ).json()
    for row in body["vectors"]:
        assert math.isclose(math.sqrt(sum(x * x for x in row)), 1.0, rel_tol=1e-5)


def test_distinct_texts_get_distinct_vectors(client):
    body = client.post(
        "/embed", json={"level": "sentence", "texts": ["الف", "ب"]}
    ).json()
    assert body["vectors"][0] != body["vectors"][1]


def test_two_service_instances_agree(client, model):
    """Determinism must hold across processes, not just within one."""
    from fastapi.testclient import TestClient

    from eln_embed_sidecar.app import create_app
    from eln_embed_sidecar.model import load_model

    payload = {"level": "token", "texts": ["یک دو سه", "چهار"]}
    with TestClient(create_app(load_model(MODEL_ID))) as other:
        assert (
            client.post("/embed", json=payload).content
            == other.post("/embed", json=payload).content
        )


def test_batching_does_not_change_results(model):
    """Responses are independent of the configured inference batch size."""
    from fastapi.testclient import TestClient

    from eln_embed_sidecar.app import create_app

    payload = {"level": "sentence", "texts": ["الف", "ب", "پ", "ت", "ث"]}
    with TestClient(create_app(model, batch_size=1)) as small:
        with TestClient(create_app(model, batch_size=64)) as large:
            assert (
                small.post("/embed", json=payload).content
                == large.post("/embed", json=payload).content
            )
