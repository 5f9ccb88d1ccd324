"""Noisy-corpus synthesis: ambient mixing at a target SNR plus Gaussian noise.

The mixture is y = x_clean + alpha * noise_segment + g, where alpha scales the
length-fitted ambient segment so the speech-to-ambient power ratio hits the
requested SNR exactly, and g is zero-mean Gaussian with standard deviation
``gaussian_amplitude`` (skipped when 0). Power is the mean square over the
full buffer. Per-record randomness comes from the NoiseSpec seed; the draw
order is fixed (segment offset first, Gaussian vector second) so any record
regenerates bit-for-bit from its spec.
"""

from __future__ import annotations

import json
import math
import shutil
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Condition, NoiseSpec, seeded_rng
from .errors import DataError, FormatError

EXPECTED_RATE = 16000
_PCM_SCALE = 32767.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono waveform as float64 amplitudes plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise DataError("audio buffers must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise DataError("audio buffers must contain only finite samples")
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    def power(self) -> float:
        """Mean of squared samples."""
        return float(np.mean(np.square(self.samples))) if len(self) else 0.0


def read_wav(path: str | Path) -> AudioBuffer:
    """Read a mono 16-bit PCM RIFF file into [-1, 1] floats."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1:
                raise FormatError(f"{path}: expected mono, got {fh.getnchannels()} channels")
            if fh.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM, got {fh.getsampwidth() * 8}-bit")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / _PCM_SCALE
    return AudioBuffer(samples, rate)


def write_wav(path: str | Path, buf: AudioBuffer) -> None:
    """Write a buffer as mono 16-bit PCM; samples are clipped to [-1, 1]."""
    clipped = np.clip(buf.samples, -1.0, 1.0)
    pcm = np.round(clipped * _PCM_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(buf.sample_rate)
        fh.writeframes(pcm.tobytes())


def measure_snr(speech: AudioBuffer, noise: AudioBuffer) -> float:
    """Speech-to-noise power ratio in dB: 10 * log10(P_speech / P_noise)."""
    if len(speech) != len(noise):
        raise DataError("SNR is defined over equal-length buffers")
    p_speech, p_noise = speech.power(), noise.power()
    if p_speech == 0.0 or p_noise == 0.0:
        raise DataError("SNR is undefined for a zero-power buffer")
    return 10.0 * math.log10(p_speech / p_noise)


def fit_noise(noise: AudioBuffer, length: int, rng: np.random.Generator) -> np.ndarray:
    """Fit noise to ``length``: seeded crop when longer, seeded-phase loop when shorter."""
    samples = noise.samples
    if len(samples) == 0:
        raise DataError("cannot fit an empty noise buffer")
    if len(samples) == length:
        return samples.copy()
    if len(samples) > length:
        offset = int(rng.integers(0, len(samples) - length + 1))
        return samples[offset : offset + length].copy()
    phase = int(rng.integers(0, len(samples)))
    return np.resize(np.roll(samples, -phase), length)


def snr_scale(clean: AudioBuffer, noise_segment: np.ndarray, snr_db: float) -> float:
    """Scale factor alpha = sqrt(P_speech / (P_noise * 10^(snr_db / 10)))."""
    p_speech = clean.power()
    p_noise = float(np.mean(np.square(noise_segment)))
    if p_speech == 0.0:
        raise DataError("clean signal has zero power")
    if p_noise == 0.0:
        raise DataError("noise segment has zero power")
    return math.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(
    clean: AudioBuffer,
    noise: AudioBuffer,
    spec: NoiseSpec,
    peak: str = "normalize",
) -> AudioBuffer:
    """Mix ambient noise into clean speech at the requested SNR, then add Gaussian.

    ``peak`` picks what happens when the mixture leaves [-1, 1]:
    "normalize" rescales the whole mixture (preserving all power ratios),
    "clip" hard-limits samples.
    """
    if clean.sample_rate != noise.sample_rate:
        raise DataError(
            f"sample-rate mismatch: {clean.sample_rate} vs {noise.sample_rate}"
        )
    if peak not in ("normalize", "clip"):
        raise DataError(f"unknown peak policy {peak!r}")
    rng = seeded_rng(spec.seed)
    segment = fit_noise(noise, len(clean), rng)
    alpha = snr_scale(clean, segment, spec.snr_db)
    mixture = clean.samples + alpha * segment
    if spec.gaussian_amplitude > 0.0:
        mixture = mixture + rng.normal(0.0, spec.gaussian_amplitude, size=len(clean))
    top = float(np.max(np.abs(mixture))) if len(mixture) else 0.0
    if top > 1.0:
        mixture = mixture / top if peak == "normalize" else np.clip(mixture, -1.0, 1.0)
    return AudioBuffer(mixture, clean.sample_rate)


@dataclass(frozen=True)
class MixRecord:
    """One synthesized utterance and the noise spec that regenerates it."""

    id: str
    source: str
    out: str
    condition: Condition
    spec: NoiseSpec | None  # None for clean pass-through

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "out": self.out,
            "condition": self.condition.value,
            "snr_db": self.spec.snr_db if self.spec else None,
            "gaussian_amplitude": self.spec.gaussian_amplitude if self.spec else None,
            "ambient_source": self.spec.ambient_source if self.spec else None,
            "seed": self.spec.seed if self.spec else None,
        }


def _read_manifest(path: str | Path) -> list[str]:
    entries = [
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not entries:
        raise DataError(f"clean manifest {path} lists no files")
    return entries


def build_condition_corpus(
    clean_manifest: str | Path,
    noise_dir: str | Path,
    condition: Condition,
    count: int,
    seed: int,
    out_dir: str | Path,
) -> list[MixRecord]:
    """Synthesize ``count`` utterances under one condition into ``out_dir``.

    mixed draws snr_db ~ U[0, 15]; snr5/snr10 fix it at 5/10 dB; every
    non-clean record draws gaussian_amplitude ~ U[0.001, 0.015] and one
    ambient file uniformly. Clean records copy source bytes untouched.
    Writes ``mix_manifest.jsonl`` beside the audio and returns the records.
    """
    condition = Condition(condition)
    if count <= 0:
        raise DataError("count must be positive")
    sources = _read_manifest(clean_manifest)
    noise_files: list[Path] = []
    if condition is not Condition.CLEAN:
        noise_files = sorted(Path(noise_dir).glob("*.wav"))
        if not noise_files:
            raise DataError(f"no ambient .wav files in {noise_dir}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    master = seeded_rng(seed)

    records: list[MixRecord] = []
    for i in range(count):
        src = sources[i % len(sources)]
        rec_id = f"{condition.value}-{i:05d}"
        dst = out / f"{rec_id}.wav"
        if condition is Condition.CLEAN:
            shutil.copyfile(src, dst)
            records.append(MixRecord(rec_id, src, str(dst), condition, None))
            continue
        # Fixed per-record draw order keeps the whole corpus a pure
        # function of (manifest, noise_dir, condition, count, seed).
        rec_seed = int(master.integers(0, 2**63))
        if condition is Condition.MIXED:
            snr_db = float(master.uniform(0.0, 15.0))
        else:
            snr_db = 5.0 if condition is Condition.SNR5 else 10.0
        amp = float(master.uniform(0.001, 0.015))
        ambient = noise_files[int(master.integers(0, len(noise_files)))]
        spec = NoiseSpec(
            snr_db=snr_db, seed=rec_seed, ambient_source=str(ambient), gaussian_amplitude=amp
        )
        clean = read_wav(src)
        if clean.sample_rate != EXPECTED_RATE:
            raise DataError(f"{src}: expected {EXPECTED_RATE} Hz, got {clean.sample_rate}")
        write_wav(dst, mix_at_snr(clean, read_wav(ambient), spec))
        records.append(MixRecord(rec_id, src, str(dst), condition, spec))

    with open(out / "mix_manifest.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    return records
