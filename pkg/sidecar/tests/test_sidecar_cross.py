"""Acceptance: the sidecar interoperates with the core through its
external interfaces only, i.e. the wire protocol and the archive format.

Importing elnkit here is deliberate and test-only; the sidecar sources
never touch it.
"""

from __future__ import annotations

import numpy as np
import pytest

from elnkit.embed import FileProvider

from eln_embed_sidecar.recorder import record_fixtures

TEXTS = ["سلام دنیا", "کتاب می خوانم", "یک دو سه چهار", "a b c"]

TOLERANCE = 1e-6


@pytest.fixture()
def sentence_archive(model, tmp_path):
    path = tmp_path / "sentence.bin"
    record_fixtures(model, TEXTS, path, level="sentence")
    return path


@pytest.fixture()
def token_archive(model, tmp_path):
    path = tmp_path / "token.bin"
    record_fixtures(model, TEXTS, path, level="token")
    return path


def test_acceptance_core_loads_sidecar_sentence_archive(
    client, model, sentence_archive
):
    provider = FileProvider(sentence_archive=sentence_archive)
    assert provider.sentence_dim == model.dim
    served = client.post(
        "/embed", json={"level": "sentence", "texts": TEXTS}
    ).json()["vectors"]
    loaded = provider.sentence_vectors(TEXTS)
    worst = max(
        float(np.max(np.abs(np.asarray(row) - vec)))
        for row, vec in zip(served, loaded)
    )
    assert worst < TOLERANCE


def test_acceptance_core_loads_sidecar_token_archive(client, model, token_archive):
    provider = FileProvider(token_archive=token_archive)
    assert provider.token_dim == model.dim
    body = client.post("/embed", json={"level": "token", "texts": TEXTS}).json()
    loaded = provider.token_vectors(TEXTS)
    for (tokens, vectors), seq, toks in zip(
        loaded, body["sequences"], body["tokens"]
    ):
        assert tokens == toks
        for vec, row in zip(vectors, seq):
            assert float(np.max(np.abs(np.asarray(row) - vec))) < TOLERANCE


def test_unknown_text_still_fails_loudly(sentence_archive):
    from elnkit.errors import DataError

    provider = FileProvider(sentence_archive=sentence_archive)
    with pytest.raises(DataError):
        provider.sentence_vectors(["متن ناشناخته"])


def test_sidecar_sources_never_import_the_core():
    """Grep-level guard: coupling is allowed in tests only."""
    from pathlib import Path

    src = Path(__file__).resolve().parents[1] / "src"
    offenders = [
        path
        for path in src.rglob("*.py")
        if "elnkit" in path.read_text(encoding="utf-8")
    ]
    assert offenders == []
