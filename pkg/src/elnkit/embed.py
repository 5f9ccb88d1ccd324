"""Provider-agnostic sentence and token embeddings.

Three interchangeable providers keep ML runtimes out of the core:

* :func:`test_embedder` hashes text into deterministic unit-norm vectors;
  dependency-free, used by property tests.
* :class:`FileProvider` reads precomputed vectors from ELNA archive files
  keyed by the SHA-256 of the text.
* :class:`ServiceProvider` is an HTTP client for an embedding service
  speaking the POST /embed wire protocol (the sidecar serves it).

Vectors are returned in input order and batch dimensions must agree; a
provider that violates either raises a protocol error here rather than
corrupting downstream math.
"""

from __future__ import annotations

import hashlib
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from . import textnorm
from .errors import DataError, FormatError, ProtocolError, TransportError

ARCHIVE_MAGIC = b"ELNA"
ARCHIVE_VERSION = 1


@dataclass(frozen=True)
class SentenceEmbedding:
    """One sentence vector with its originating text and provider."""

    vector: np.ndarray
    source_text: str
    provider_id: str


@dataclass(frozen=True)
class TokenEmbeddingSequence:
    """Per-token vectors for one text; vectors[k] embeds tokens[k]."""

    vectors: tuple[np.ndarray, ...]
    tokens: tuple[str, ...]
    provider_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "vectors", tuple(self.vectors))
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.vectors) != len(self.tokens):
            raise ProtocolError(
                f"{len(self.tokens)} tokens but {len(self.vectors)} vectors"
            )


class EmbeddingProvider(Protocol):
    provider_id: str

    def sentence_vectors(self, texts: Sequence[str]) -> list[np.ndarray]: ...

    def token_vectors(
        self, texts: Sequence[str]
    ) -> list[tuple[list[str], list[np.ndarray]]]: ...


def _check_batch(vectors: Sequence[np.ndarray], provider_id: str) -> None:
    dims = {v.shape for v in vectors}
    if len(dims) > 1:
        raise ProtocolError(f"provider {provider_id} mixed dimensions {sorted(dims)}")
    for v in vectors:
        if v.ndim != 1:
            raise ProtocolError(f"provider {provider_id} returned a non-vector")
        if not np.all(np.isfinite(v)):
            raise ProtocolError(f"provider {provider_id} returned non-finite values")


def embed_sentences(
    texts: Sequence[str], provider: EmbeddingProvider
) -> list[SentenceEmbedding]:
    """Embed each text into one vector; order preserved, dimension uniform."""
    if not texts:
        return []
    vectors = provider.sentence_vectors(list(texts))
    if len(vectors) != len(texts):
        raise ProtocolError(
            f"provider {provider.provider_id} returned {len(vectors)} vectors for {len(texts)} texts"
        )
    _check_batch(vectors, provider.provider_id)
    return [
        SentenceEmbedding(vec, text, provider.provider_id)
        for vec, text in zip(vectors, texts)
    ]


def embed_tokens(
    texts: Sequence[str], provider: EmbeddingProvider
) -> list[TokenEmbeddingSequence]:
    """Embed each text token-by-token; an empty text yields an empty sequence."""
    if not texts:
        return []
    results = provider.token_vectors(list(texts))
    if len(results) != len(texts):
        raise ProtocolError(
            f"provider {provider.provider_id} returned {len(results)} sequences for {len(texts)} texts"
        )
    flat = [v for _, vecs in results for v in vecs]
    _check_batch(flat, provider.provider_id)
    return [
        TokenEmbeddingSequence(tuple(vecs), tuple(toks), provider.provider_id)
        for toks, vecs in results
    ]


@dataclass(frozen=True)
class HashEmbedder:
    """Deterministic embedding provider: text -> seeded unit-norm Gaussian."""

    dim: int
    provider_id: str = ""

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DataError(f"embedding dimension must be >= 1, got {self.dim}")
        if not self.provider_id:
            object.__setattr__(self, "provider_id", f"hash-{self.dim}")

    def _vector(self, salt: str, text: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{salt}\x1f{text}".encode(), digest_size=16).digest()
        gen = np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))
        vec = gen.standard_normal(self.dim)
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec

    def sentence_vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._vector("sentence", t) for t in texts]

    def token_vectors(
        self, texts: Sequence[str]
    ) -> list[tuple[list[str], list[np.ndarray]]]:
        out = []
        for text in texts:
            tokens = textnorm.tokenize(text)
            out.append((tokens, [self._vector("token", tok) for tok in tokens]))
        return out


def test_embedder(dim: int) -> HashEmbedder:
    """Deterministic dependency-free provider for the given dimension."""
    return HashEmbedder(dim)


def text_key(text: str) -> bytes:
    """Archive lookup key: SHA-256 of the UTF-8 text."""
    return hashlib.sha256(text.encode("utf-8")).digest()


def write_archive(path: str | Path, dim: int, entries: dict[str, np.ndarray]) -> None:
    """Write an ELNA archive: header then (key, little-endian f32 vector) rows."""
    if dim < 1:
        raise DataError("archive dimension must be >= 1")
    with open(path, "wb") as fh:
        fh.write(ARCHIVE_MAGIC)
        fh.write(struct.pack("<III", ARCHIVE_VERSION, dim, len(entries)))
        for text in sorted(entries, key=text_key):
            vec = np.asarray(entries[text], dtype="<f4")
            if vec.shape != (dim,):
                raise DataError(f"vector for {text!r} has shape {vec.shape}, want ({dim},)")
            fh.write(text_key(text))
            fh.write(vec.tobytes())


def read_archive(path: str | Path) -> tuple[int, dict[bytes, np.ndarray]]:
    """Read an ELNA archive into {key: float32 vector}; rejects malformed files."""
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated archive header")
    if blob[:4] != ARCHIVE_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    version, dim, count = struct.unpack_from("<III", blob, 4)
    if version != ARCHIVE_VERSION:
        raise FormatError(f"{path}: unsupported archive version {version}")
    if dim < 1:
        raise FormatError(f"{path}: invalid dimension {dim}")
    entry_size = 32 + 4 * dim
    body = blob[16:]
    if len(body) != count * entry_size:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes, expected {count * entry_size}"
        )
    entries: dict[bytes, np.ndarray] = {}
    for i in range(count):
        row = body[i * entry_size : (i + 1) * entry_size]
        entries[row[:32]] = np.frombuffer(row[32:], dtype="<f4")
    return dim, entries


class FileProvider:
    """Serves embeddings from precomputed archives; unknown text is an error."""

    def __init__(
        self,
        sentence_archive: str | Path | None = None,
        token_archive: str | Path | None = None,
    ) -> None:
        self._sent: dict[bytes, np.ndarray] | None = None
        self._tok: dict[bytes, np.ndarray] | None = None
        names = []
        if sentence_archive is not None:
            self.sentence_dim, self._sent = read_archive(sentence_archive)
            names.append(Path(sentence_archive).name)
        if token_archive is not None:
            self.token_dim, self._tok = read_archive(token_archive)
            names.append(Path(token_archive).name)
        if self._sent is None and self._tok is None:
            raise DataError("file provider needs at least one archive")
        self.provider_id = "file:" + "|".join(names)

    def _lookup(self, table: dict[bytes, np.ndarray] | None, text: str, kind: str) -> np.ndarray:
        if table is None:
            raise DataError(f"no {kind} archive configured on {self.provider_id}")
        vec = table.get(text_key(text))
        if vec is None:
            raise DataError(f"{kind} text {text!r} not present in {self.provider_id}")
        return vec

    def sentence_vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self._lookup(self._sent, t, "sentence") for t in texts]

    def token_vectors(
        self, texts: Sequence[str]
    ) -> list[tuple[list[str], list[np.ndarray]]]:
        out = []
        for text in texts:
            tokens = textnorm.tokenize(text)
            out.append((tokens, [self._lookup(self._tok, t, "token") for t in tokens]))
        return out


class ServiceProvider:
    """HTTP client for the POST /embed wire protocol."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_retries: int = 3,
        max_in_flight: int = 4,
        sleeper: Callable[[float], None] = time.sleep,
        transport=None,
    ) -> None:
        import httpx

        self.provider_id = f"service:{base_url}"
        self._url = base_url.rstrip("/") + "/embed"
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._max_retries = max_retries
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._sleep = sleeper

    def close(self) -> None:
        self._client.close()

    def _post(self, payload: dict) -> dict:
        import httpx

        attempts = 0
        while True:
            try:
                with self._gate:
                    response = self._client.post(self._url, json=payload)
            except httpx.TransportError as exc:
                attempts += 1
                if attempts > self._max_retries:
                    raise TransportError(
                        f"{self.provider_id}: {exc}", retries=attempts - 1
                    ) from exc
                self._sleep(0.1 * 2 ** (attempts - 1))
                continue
            if response.status_code >= 500:
                attempts += 1
                if attempts > self._max_retries:
                    raise TransportError(
                        f"{self.provider_id}: HTTP {response.status_code}",
                        retries=attempts - 1,
                    )
                self._sleep(0.1 * 2 ** (attempts - 1))
                continue
            if response.status_code != 200:
                try:
                    detail = response.json().get("error", "")
                except ValueError:
                    detail = response.text
                raise ProtocolError(
                    f"{self.provider_id}: HTTP {response.status_code}: {detail}"
                )
            try:
                body = response.json()
            except ValueError as exc:
                raise ProtocolError(f"{self.provider_id}: non-JSON response") from exc
            if not isinstance(body, dict):
                raise ProtocolError(f"{self.provider_id}: response is not an object")
            return body

    def sentence_vectors(self, texts: Sequence[str]) -> list[np.ndarray]:
        body = self._post({"level": "sentence", "texts": list(texts)})
        vectors = body.get("vectors")
        dim = body.get("dim")
        if not isinstance(vectors, list) or not isinstance(dim, int):
            raise ProtocolError(f"{self.provider_id}: malformed sentence response")
        out = []
        for row in vectors:
            vec = np.asarray(row, dtype=np.float64)
            if vec.shape != (dim,):
                raise ProtocolError(
                    f"{self.provider_id}: vector shape {vec.shape} != ({dim},)"
                )
            out.append(vec)
        return out

    def token_vectors(
        self, texts: Sequence[str]
    ) -> list[tuple[list[str], list[np.ndarray]]]:
        body = self._post({"level": "token", "texts": list(texts)})
        sequences = body.get("sequences")
        tokens = body.get("tokens")
        dim = body.get("dim")
        if (
            not isinstance(sequences, list)
            or not isinstance(tokens, list)
            or not isinstance(dim, int)
            or len(sequences) != len(tokens)
        ):
            raise ProtocolError(f"{self.provider_id}: malformed token response")
        out = []
        for seq, toks in zip(sequences, tokens):
            vecs = []
            for row in seq:
                vec = np.asarray(row, dtype=np.float64)
                if vec.shape != (dim,):
                    raise ProtocolError(
                        f"{self.provider_id}: vector shape {vec.shape} != ({dim},)"
                    )
                vecs.append(vec)
            out.append(([str(t) for t in toks], vecs))
        return out
