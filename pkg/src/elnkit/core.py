"""Shared domain types, the line-delimited dataset schema, and seeded RNG.

All randomness in the toolkit flows through :func:`seeded_rng`, which wraps
the Philox 4x64 counter-based generator: the same 64-bit seed produces the
same stream on every platform and run, so noise mixes and padding choices
reproduce byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import textnorm
from .errors import DataError, SchemaError

SCHEMA_VERSION = 1
N_BEST = 5
_MAX_SEED = 2**64


class Condition(str, Enum):
    """Acoustic condition a record was produced under."""

    CLEAN = "clean"
    MIXED = "mixed"
    SNR5 = "snr5"
    SNR10 = "snr10"


# Fixed SNR implied by each fixed-SNR condition, in dB.
FIXED_SNR = {Condition.SNR5: 5.0, Condition.SNR10: 10.0}


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic random stream for ``seed`` (Philox 4x64, key = seed)."""
    if not 0 <= seed < _MAX_SEED:
        raise DataError(f"seed {seed} outside the unsigned 64-bit range")
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True)
class UtteranceRecord:
    """One audio sample with reference, 5-best hypotheses, and noise metadata."""

    id: str
    reference: str
    hypotheses: tuple[str, ...]
    condition: Condition
    audio_path: str | None = None
    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.id:
            raise SchemaError("record id must be nonempty", field="id")
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        object.__setattr__(self, "condition", Condition(self.condition))
        if len(self.hypotheses) != N_BEST:
            raise SchemaError(
                f"expected exactly {N_BEST} hypotheses, got {len(self.hypotheses)}",
                field="hypotheses",
            )
        if not 0 <= self.seed < _MAX_SEED:
            raise SchemaError("seed outside the unsigned 64-bit range", field="seed")
        cond = self.condition
        if cond is Condition.CLEAN:
            if self.snr_db is not None:
                raise SchemaError("clean records must not carry snr_db", field="snr_db")
        elif cond in FIXED_SNR:
            if self.snr_db != FIXED_SNR[cond]:
                raise SchemaError(
                    f"condition {cond.value} requires snr_db == {FIXED_SNR[cond]}", field="snr_db"
                )
        else:  # mixed
            if self.snr_db is None or not 0.0 <= self.snr_db <= 15.0:
                raise SchemaError("mixed records need snr_db in [0, 15]", field="snr_db")

    def validate_normalized(self, cfg: textnorm.NormalizationConfig = textnorm.DEFAULT_CONFIG) -> None:
        """Check that reference and hypotheses are normalization fixed points."""
        if textnorm.normalize(self.reference, cfg) != self.reference:
            raise SchemaError("reference is not normalized", field="reference")
        for i, hyp in enumerate(self.hypotheses):
            if textnorm.normalize(hyp, cfg) != hyp:
                raise SchemaError(f"hypothesis {i} is not normalized", field="hypotheses")

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "id": self.id,
            "audio_path": self.audio_path,
            "reference": self.reference,
            "hypotheses": list(self.hypotheses),
            "condition": self.condition.value,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class NoiseSpec:
    """Everything needed to regenerate one noisy mix bit-for-bit."""

    snr_db: float
    seed: int
    ambient_source: str | None = None
    gaussian_amplitude: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < _MAX_SEED:
            raise DataError("NoiseSpec seed outside the unsigned 64-bit range")
        amp = self.gaussian_amplitude
        if amp != 0.0 and not 0.001 <= amp <= 0.015:
            raise DataError(
                f"gaussian_amplitude must be 0 or within [0.001, 0.015], got {amp}"
            )


@dataclass(frozen=True)
class WERBreakdown:
    """Word error rate tallies for one utterance or a pooled corpus."""

    substitutions: int
    deletions: int
    insertions: int
    reference_words: int
    wer_percent: float
    empty_reference: bool = False

    def __post_init__(self) -> None:
        s, d, i, n = self.substitutions, self.deletions, self.insertions, self.reference_words
        if min(s, d, i, n) < 0:
            raise DataError("error counts must be non-negative")
        if n > 0 and self.wer_percent != (s + d + i) / n * 100.0:
            raise DataError("wer_percent inconsistent with counts")

    @classmethod
    def from_counts(cls, s: int, d: int, i: int, n: int) -> "WERBreakdown":
        """Build a breakdown from raw tallies, applying the empty-reference rule."""
        if n > 0:
            return cls(s, d, i, n, (s + d + i) / n * 100.0)
        # Empty reference: nothing to delete or substitute. An empty
        # hypothesis scores 0; otherwise each insertion counts 100 points
        # and the record is flagged rather than rejected.
        return cls(0, 0, i, 0, i * 100.0, empty_reference=i > 0)


def pad_hypotheses(
    hypotheses: Sequence[str],
    rng: np.random.Generator,
    n: int = N_BEST,
    with_replacement: bool = True,
) -> tuple[str, ...]:
    """Pad a short hypothesis list to length ``n`` by duplicating entries.

    Picks are drawn from ``rng``; with ``with_replacement=False`` the pool is
    replenished only once it empties, so duplicates spread evenly.
    """
    if not hypotheses:
        raise DataError("cannot pad an empty hypothesis list")
    if len(hypotheses) > n:
        raise DataError(f"got {len(hypotheses)} hypotheses, at most {n} allowed")
    padded = list(hypotheses)
    pool: list[str] = []
    while len(padded) < n:
        if with_replacement:
            padded.append(hypotheses[int(rng.integers(0, len(hypotheses)))])
        else:
            if not pool:
                pool = list(hypotheses)
            padded.append(pool.pop(int(rng.integers(0, len(pool)))))
    return tuple(padded)


_REQUIRED_FIELDS = ("schema", "id", "reference", "hypotheses", "condition", "seed")


def _record_from_json(obj: dict, line: int, pad: bool) -> UtteranceRecord:
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise SchemaError("missing field", line=line, field=key)
    if obj["schema"] != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {obj['schema']!r}", line=line, field="schema")
    hyps = obj["hypotheses"]
    if not isinstance(hyps, list) or not all(isinstance(h, str) for h in hyps):
        raise SchemaError("hypotheses must be a list of strings", line=line, field="hypotheses")
    if pad and 0 < len(hyps) < N_BEST:
        hyps = list(pad_hypotheses(hyps, seeded_rng(int(obj["seed"]))))
    if len(hyps) != N_BEST:
        raise SchemaError(
            f"expected {N_BEST} hypotheses after padding, got {len(hyps)}",
            line=line,
            field="hypotheses",
        )
    snr_db = obj.get("snr_db")
    try:
        return UtteranceRecord(
            id=str(obj["id"]),
            audio_path=obj.get("audio_path"),
            reference=obj["reference"],
            hypotheses=tuple(hyps),
            condition=obj["condition"],
            snr_db=float(snr_db) if snr_db is not None else None,
            seed=int(obj["seed"]),
        )
    except ValueError as exc:
        raise SchemaError(str(exc), line=line) from exc
    except SchemaError as exc:
        raise SchemaError(str(exc.args[0]) if exc.args else "invalid record", line=line, field=exc.field) from exc


def load_dataset(
    path: str | Path,
    cfg: textnorm.NormalizationConfig = textnorm.DEFAULT_CONFIG,
    pad: bool = False,
    validate_normalization: bool = True,
) -> list[UtteranceRecord]:
    """Read a JSONL dataset, validating every record; order is preserved."""
    records: list[UtteranceRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(obj, dict):
                raise SchemaError("record must be a JSON object", line=lineno)
            record = _record_from_json(obj, lineno, pad)
            if validate_normalization:
                try:
                    record.validate_normalized(cfg)
                except SchemaError as exc:
                    raise SchemaError(
                        str(exc.args[0]) if exc.args else "not normalized",
                        line=lineno,
                        field=exc.field,
                    ) from exc
            records.append(record)
    return records


def save_dataset(records: Iterable[UtteranceRecord], path: str | Path) -> None:
    """Write records as one JSON object per line (UTF-8, unescaped)."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
