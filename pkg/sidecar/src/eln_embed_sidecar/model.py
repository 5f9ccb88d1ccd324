"""Embedding models served by the sidecar.

The only backend shipped here is a deterministic hash model: every text maps
to a unit-norm vector seeded from a digest of the text, so the service needs
no weights on disk and two sidecar processes always agree.  Model identifiers
look like ``hash:<dim>``; anything else fails to load.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

_MODEL_ID = re.compile(r"^hash:(\d{1,4})$")
_MAX_DIM = 4096


class ModelLoadError(Exception):
    """Raised when a model identifier cannot be resolved to a backend."""


@dataclass(frozen=True)
class SidecarConfig:
    """Runtime settings for the service.

    The advertised dimension always comes from the loaded model, never from
    configuration, so a config cannot lie about what the service returns.
    """

    model: str = "hash:384"
    bind: str = "127.0.0.1:8090"
    batch_size: int = 32
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    def host_port(self) -> tuple[str, int]:
        host, sep, port = self.bind.rpartition(":")
        if not sep or not host:
            raise ValueError(f"bind address must be host:port, got {self.bind!r}")
        return host, int(port)


class HashModel:
    """Deterministic text embedder with no learned parameters.

    Each text is digested together with the embedding level, the digest seeds
    a counter-based generator, and the resulting Gaussian draw is normalized
    to unit length.  Tokens are whitespace-delimited; an empty or
    whitespace-only text has no tokens.
    """

    def __init__(self, dim: int):
        if not 1 <= dim <= _MAX_DIM:
            raise ModelLoadError(f"hash model dimension out of range: {dim}")
        self.dim = dim
        self.model_id = f"hash:{dim}"

    def _vector(self, level: str, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{level}\x00{text}".encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], "little")
        vec = np.random.Generator(np.random.Philox(key=key)).standard_normal(self.dim)
        norm = float(np.linalg.norm(vec))
        return (vec / norm).astype(np.float32) if norm > 0.0 else vec.astype(np.float32)

    def embed_sentences(self, texts: list[str]) -> np.ndarray:
        """Return one unit vector per text, shape (len(texts), dim)."""
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self._vector("sentence", text)
        return out

    def embed_tokens(self, text: str) -> tuple[list[str], np.ndarray]:
        """Split a text on whitespace and embed each token.

        Returns the token list and an array of shape (n_tokens, dim); both
        are empty for a text with no tokens.
        """
        tokens = text.split()
        out = np.zeros((len(tokens), self.dim), dtype=np.float32)
        for i, token in enumerate(tokens):
            out[i] = self._vector("token", token)
        return tokens, out


def load_model(model_id: str) -> HashModel:
    """Resolve a model identifier, raising ModelLoadError if unknown."""
    match = _MODEL_ID.match(model_id)
    if match is None:
        raise ModelLoadError(
            f"unknown model {model_id!r}; expected hash:<dim>, e.g. hash:384"
        )
    return HashModel(int(match.group(1)))
