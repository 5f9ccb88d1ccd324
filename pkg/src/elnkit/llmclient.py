"""Client for the external correction LLM, plus deterministic mocks.

The rendered prompt is a fixed template: instruction paragraph, the five
hypotheses as numbered lines, and an answer cue. Hypothesis text has its
whitespace collapsed before templating so a malicious or malformed
hypothesis can never fake an extra numbered line or the answer cue
(normalized text is unchanged by this guard).

Wire protocol: HTTP POST /correct with {"prompt": str, "prefix_b64": str or
null, "decoding": {...}} returning {"text": str}. Decoding defaults to
greedy (temperature 0) so evaluations reproduce. The bearer token, when the
server wants one, comes from the ELNKIT_LLM_TOKEN environment variable.
"""

from __future__ import annotations

import base64
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from . import textnorm
from .core import N_BEST, UtteranceRecord
from .errors import DataError, ProtocolError, TransportError

log = logging.getLogger("elnkit.llmclient")

TOKEN_ENV_VAR = "ELNKIT_LLM_TOKEN"

INSTRUCTION = (
    "You are a transcription error correction assistant and linguistics expert "
    "specializing in improving transcriptions produced by Automatic Speech "
    "Recognition (ASR) systems. Your task is to perform error correction based "
    "on the words in top 5 hypotheses generated by the ASR system. You can "
    "also correct the sentences yourself based on their meaning, ensuring "
    "spelling is correct. Do not use synonyms. Analyze linguistic context and "
    "provide corrected ASR hypothesis directly."
)

ANSWER_CUE = "Corrected transcription:"

_WS_RUN = re.compile(r"\s+")


def render_prompt(hypotheses: Sequence[str]) -> str:
    """Render the fixed correction prompt over exactly five hypotheses."""
    if len(hypotheses) != N_BEST:
        raise DataError(f"prompt needs exactly {N_BEST} hypotheses, got {len(hypotheses)}")
    lines = [INSTRUCTION, ""]
    for i, hyp in enumerate(hypotheses, start=1):
        lines.append(f"{i}. {_WS_RUN.sub(' ', hyp).strip()}")
    lines.extend(["", ANSWER_CUE])
    return "\n".join(lines)


@dataclass(frozen=True)
class DecodingParams:
    max_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0

    def to_json(self) -> dict:
        return {"max_tokens": self.max_tokens, "temperature": self.temperature, "seed": self.seed}


@dataclass(frozen=True)
class CorrectionRequest:
    """One correction call: rendered prompt plus the raw pieces behind it."""

    utterance_id: str
    prompt: str
    hypotheses: tuple[str, ...]
    prefix: np.ndarray | None = None
    decoding: DecodingParams = field(default_factory=DecodingParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        if len(self.hypotheses) != N_BEST:
            raise DataError(f"request needs exactly {N_BEST} hypotheses")

    @classmethod
    def for_record(
        cls,
        record: UtteranceRecord,
        prefix: np.ndarray | None = None,
        decoding: DecodingParams = DecodingParams(),
    ) -> "CorrectionRequest":
        return cls(record.id, render_prompt(record.hypotheses), record.hypotheses, prefix, decoding)


class Endpoint(Protocol):
    def correct_text(self, req: CorrectionRequest) -> str: ...


class EchoFirstMock:
    """Offline endpoint that always answers with hypothesis 1."""

    def correct_text(self, req: CorrectionRequest) -> str:
        return req.hypotheses[0]


class FixtureMock:
    """Endpoint answering from an id -> text map, with optional fault injection."""

    def __init__(self, outputs: dict[str, str], fail_ids: set[str] | None = None) -> None:
        self.outputs = dict(outputs)
        self.fail_ids = set(fail_ids or ())

    def correct_text(self, req: CorrectionRequest) -> str:
        if req.utterance_id in self.fail_ids:
            raise TransportError(f"simulated timeout for {req.utterance_id}")
        try:
            return self.outputs[req.utterance_id]
        except KeyError:
            raise TransportError(f"no fixture output for {req.utterance_id}") from None


class HttpEndpoint:
    """POST /correct client; auth token read from ELNKIT_LLM_TOKEN if set."""

    def __init__(self, base_url: str, timeout: float = 60.0) -> None:
        import httpx

        headers = {}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._url = base_url.rstrip("/") + "/correct"
        self._client = httpx.Client(timeout=timeout, headers=headers)

    def close(self) -> None:
        self._client.close()

    def correct_text(self, req: CorrectionRequest) -> str:
        import httpx

        prefix_b64 = None
        if req.prefix is not None:
            prefix_b64 = base64.b64encode(
                np.ascontiguousarray(req.prefix, dtype="<f4").tobytes()
            ).decode("ascii")
        payload = {
            "prompt": req.prompt,
            "prefix_b64": prefix_b64,
            "decoding": req.decoding.to_json(),
        }
        try:
            response = self._client.post(self._url, json=payload)
        except httpx.TransportError as exc:
            raise TransportError(f"{self._url}: {exc}") from exc
        if response.status_code >= 500:
            raise TransportError(f"{self._url}: HTTP {response.status_code}")
        if response.status_code != 200:
            raise ProtocolError(f"{self._url}: HTTP {response.status_code}: {response.text}")
        try:
            text = response.json()["text"]
        except (ValueError, KeyError) as exc:
            raise ProtocolError(f"{self._url}: malformed correction response") from exc
        if not isinstance(text, str):
            raise ProtocolError(f"{self._url}: correction text is not a string")
        return text


def correct(
    req: CorrectionRequest,
    endpoint: Endpoint,
    max_retries: int = 3,
    cfg: textnorm.NormalizationConfig = textnorm.DEFAULT_CONFIG,
    sleeper: Callable[[float], None] = time.sleep,
) -> str:
    """One correction with exponential backoff; output is post-normalized."""
    attempts = 0
    while True:
        try:
            raw = endpoint.correct_text(req)
            break
        except TransportError as exc:
            attempts += 1
            if attempts > max_retries:
                raise TransportError(
                    f"{req.utterance_id}: {exc}", retries=attempts - 1
                ) from exc
            sleeper(0.1 * 2 ** (attempts - 1))
    corrected = textnorm.normalize(raw, cfg)
    log.info("corrected %s: %r -> %r", req.utterance_id, req.hypotheses[0], corrected)
    return corrected


@dataclass(frozen=True)
class CorrectionResult:
    """Outcome for one record; failures are flagged, never silently dropped."""

    utterance_id: str
    text: str | None
    flagged: bool = False
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.utterance_id,
            "text": self.text,
            "flagged": self.flagged,
            "error": self.error,
        }


def correct_batch(
    records: Sequence[UtteranceRecord],
    endpoint: Endpoint,
    prefixes: dict[str, np.ndarray] | None = None,
    decoding: DecodingParams = DecodingParams(),
    max_retries: int = 3,
    jobs: int = 4,
    cfg: textnorm.NormalizationConfig = textnorm.DEFAULT_CONFIG,
    sleeper: Callable[[float], None] = time.sleep,
) -> list[CorrectionResult]:
    """Correct a batch with bounded concurrency, matching results by id.

    A record whose endpoint calls exhaust their retries, or whose corrected
    text normalizes to nothing, comes back flagged; the batch itself always
    completes.
    """

    def one(record: UtteranceRecord) -> CorrectionResult:
        prefix = (prefixes or {}).get(record.id)
        req = CorrectionRequest.for_record(record, prefix=prefix, decoding=decoding)
        try:
            text = correct(req, endpoint, max_retries=max_retries, cfg=cfg, sleeper=sleeper)
        except TransportError as exc:
            log.warning("flagging %s after %d retries: %s", record.id, exc.retries, exc)
            return CorrectionResult(record.id, None, flagged=True, error=str(exc))
        if not text:
            return CorrectionResult(record.id, "", flagged=True, error="empty response")
        return CorrectionResult(record.id, text)

    if not records:
        return []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(one, records))
