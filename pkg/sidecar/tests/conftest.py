"""Shared fixtures for the sidecar suite."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from eln_embed_sidecar.app import create_app
from eln_embed_sidecar.model import load_model
from sidecar_helpers import MODEL_ID


@pytest.fixture(scope="session")
def model():
    return load_model(MODEL_ID)


@pytest.fixture(scope="session")
def client(model):
    with TestClient(create_app(model, batch_size=2)) as tc:
        yield tc
