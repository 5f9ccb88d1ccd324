"""Shared test helpers: seeded generators for strings, records, and audio."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from elnkit import audiomix
from elnkit.core import Condition, UtteranceRecord, seeded_rng

FIXTURES = Path(__file__).parent / "fixtures"

# Mix of Persian, Arabic-presentation, ASCII, digits, ZWNJ, punctuation, and
# whitespace so fuzzed strings exercise every normalization step.
FUZZ_ALPHABET = (
    "ابپتثجچحخدذرزژسشصضطظعغفقکگلمنوهی"
    "يكىة"
    "abcxyz"
    "0123456789"
    "۰۱۲۳۴۵۶۷۸۹"
    "٤٥٦"
    "‌"
    " \t\n"
    ".,!?؛،؟«»()-_:؛"
    "ـ"
)

WORDS = [f"w{i}" for i in range(40)] + ["سلام", "دنیا", "کتاب", "می‌رود", "خانه"]


def random_text(rng: np.random.Generator, max_len: int = 30) -> str:
    length = int(rng.integers(0, max_len + 1))
    return "".join(FUZZ_ALPHABET[int(rng.integers(0, len(FUZZ_ALPHABET)))] for _ in range(length))


def random_sentence(rng: np.random.Generator, max_words: int = 8) -> str:
    count = int(rng.integers(1, max_words + 1))
    return " ".join(WORDS[int(rng.integers(0, len(WORDS)))] for _ in range(count))


def make_record(
    rec_id: str,
    reference: str,
    hypotheses: list[str],
    condition: Condition = Condition.CLEAN,
    snr_db: float | None = None,
    seed: int = 0,
) -> UtteranceRecord:
    return UtteranceRecord(
        id=rec_id,
        reference=reference,
        hypotheses=tuple(hypotheses),
        condition=condition,
        snr_db=snr_db,
        seed=seed,
    )


def make_tone(path: Path, seconds: float = 0.25, freq: float = 440.0, amp: float = 0.3) -> Path:
    t = np.arange(int(16000 * seconds)) / 16000.0
    buf = audiomix.AudioBuffer(amp * np.sin(2 * np.pi * freq * t), 16000)
    audiomix.write_wav(path, buf)
    return path


def make_noise_wav(path: Path, seconds: float = 0.25, amp: float = 0.1, seed: int = 11) -> Path:
    rng = seeded_rng(seed)
    buf = audiomix.AudioBuffer(amp * rng.standard_normal(int(16000 * seconds)), 16000)
    audiomix.write_wav(path, buf)
    return path
