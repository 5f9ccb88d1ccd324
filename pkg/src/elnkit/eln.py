"""Error Level Noise vectors: pairwise disagreement among N-best hypotheses.

The sentence part averages element-wise squared differences over all
unordered hypothesis pairs; the token part does the same per token position
(sequences zero-padded to the longest) and then averages over positions.
The two parts concatenate into v_ELN, whose L2 norm is the scalar noise
magnitude.

Every per-dimension sum is evaluated with math.fsum, which rounds the exact
sum once. Combined with (a-b)^2 being bitwise equal to (b-a)^2 in IEEE
arithmetic, this makes the result bit-identical under any permutation of
the hypothesis list, not merely close.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .embed import (
    EmbeddingProvider,
    SentenceEmbedding,
    TokenEmbeddingSequence,
    embed_sentences,
    embed_tokens,
)
from .errors import DataError, DimensionError


@dataclass(frozen=True)
class ELNVector:
    """Sentence and token disagreement parts plus their joint L2 magnitude."""

    sentence_part: np.ndarray
    token_part: np.ndarray
    magnitude: float
    n_hypotheses: int
    l_max: int

    def __post_init__(self) -> None:
        sent = np.asarray(self.sentence_part, dtype=np.float64)
        tok = np.asarray(self.token_part, dtype=np.float64)
        object.__setattr__(self, "sentence_part", sent)
        object.__setattr__(self, "token_part", tok)
        if sent.ndim != 1 or tok.ndim != 1:
            raise DataError("ELN parts must be one-dimensional")
        if (len(sent) and sent.min() < 0) or (len(tok) and tok.min() < 0):
            raise DataError("ELN entries are means of squares and cannot be negative")
        expected = _l2(sent, tok)
        if not math.isclose(self.magnitude, expected, rel_tol=1e-9, abs_tol=0.0):
            raise DataError(
                f"magnitude {self.magnitude} inconsistent with parts ({expected})"
            )
        if self.n_hypotheses < 2 or self.l_max < 0:
            raise DataError("need n >= 2 hypotheses and l_max >= 0")

    @property
    def sentence_l2(self) -> float:
        return _l2(self.sentence_part, np.empty(0))

    @property
    def token_l2(self) -> float:
        return _l2(self.token_part, np.empty(0))


def _l2(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(math.fsum(x * x for part in (a, b) for x in part.tolist()))


def sentence_eln(embeddings: Sequence[SentenceEmbedding]) -> np.ndarray:
    """Mean over unordered pairs of element-wise squared embedding differences."""
    n = len(embeddings)
    if n < 2:
        raise DataError(f"sentence ELN needs at least 2 hypotheses, got {n}")
    rows = [np.asarray(e.vector, dtype=np.float64).tolist() for e in embeddings]
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise DimensionError(f"mixed sentence dimensions {sorted(dims)}")
    (d,) = dims
    scale = 2.0 / (n * (n - 1))
    pairs = list(combinations(range(n), 2))
    out = np.empty(d, dtype=np.float64)
    for c in range(d):
        out[c] = scale * math.fsum(
            (rows[i][c] - rows[j][c]) ** 2 for i, j in pairs
        )
    return out


def token_eln(sequences: Sequence[TokenEmbeddingSequence]) -> np.ndarray:
    """Positionwise pair-mean of squared differences, averaged over L_max.

    Shorter sequences are padded with zero vectors; padded positions stay in
    the 1/L_max average.
    """
    n = len(sequences)
    if n < 2:
        raise DataError(f"token ELN needs at least 2 hypotheses, got {n}")
    dims = {v.shape[0] for s in sequences for v in s.vectors}
    if len(dims) > 1:
        raise DimensionError(f"mixed token dimensions {sorted(dims)}")
    l_max = max(len(s.vectors) for s in sequences)
    if l_max == 0:
        raise DataError("token ELN is undefined when every sequence is empty")
    (d,) = dims
    padded: list[list[list[float]]] = []
    zero = [0.0] * d
    for seq in sequences:
        rows = [np.asarray(v, dtype=np.float64).tolist() for v in seq.vectors]
        rows.extend([zero] * (l_max - len(rows)))
        padded.append(rows)
    scale = 2.0 / (n * (n - 1)) / l_max
    pairs = list(combinations(range(n), 2))
    out = np.empty(d, dtype=np.float64)
    for c in range(d):
        out[c] = scale * math.fsum(
            (padded[i][k][c] - padded[j][k][c]) ** 2
            for k in range(l_max)
            for i, j in pairs
        )
    return out


def compute_eln(
    hypotheses: Sequence[str],
    sent_provider: EmbeddingProvider,
    tok_provider: EmbeddingProvider,
) -> ELNVector:
    """Full ELN for one hypothesis list (normally the 5-best of a record).

    When every hypothesis tokenizes to nothing there is no token position to
    average over; the token part is then empty (l_max 0) rather than an
    error, so degenerate records still score a magnitude.
    """
    if len(hypotheses) < 2:
        raise DataError("ELN needs at least 2 hypotheses")
    sent = sentence_eln(embed_sentences(list(hypotheses), sent_provider))
    sequences = embed_tokens(list(hypotheses), tok_provider)
    l_max = max(len(s.vectors) for s in sequences)
    tok = token_eln(sequences) if l_max else np.empty(0, dtype=np.float64)
    return ELNVector(
        sentence_part=sent,
        token_part=tok,
        magnitude=_l2(sent, tok),
        n_hypotheses=len(hypotheses),
        l_max=l_max,
    )
