"""Declarative end-to-end pipeline with content-addressed stage skipping.

Stages run in dependency order: mix (optional) -> normalize -> eln ->
project (optional) -> correct -> wer -> analyze. Each stage records a hash
of its configuration slice and input files plus hashes of its outputs in
``manifest.json``; a re-run skips any stage whose input hash and output
files are unchanged. The manifest's ``content_hash`` covers config, stage
hashes, and tool version but never timestamps, so identical runs produce
identical hashes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, analysis, audiomix, embed, llmclient, textnorm
from . import eln as eln_mod
from . import wer as wer_mod
from .core import Condition, UtteranceRecord, load_dataset, save_dataset
from .errors import DataError, ElnkitError, StageError, TransportError
from .projector import load_weights, project

STAGE_ORDER = ("mix", "normalize", "eln", "project", "correct", "wer", "analyze")


def _from_json(cls, obj: dict, where: str):
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(obj) - names
    if unknown:
        raise DataError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**obj)


@dataclass(frozen=True)
class ProviderConfig:
    """Which embedding backend the eln stage uses."""

    kind: str = "test"  # test | file | service
    dim: int = 384
    token_dim: int = 300
    sentence_archive: str | None = None
    token_archive: str | None = None
    url: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("test", "file", "service"):
            raise DataError(f"unknown provider kind {self.kind!r}")
        if self.kind == "file" and not (self.sentence_archive and self.token_archive):
            raise DataError("file provider needs sentence_archive and token_archive")
        if self.kind == "service" and not self.url:
            raise DataError("service provider needs url")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "token_dim": self.token_dim,
            "sentence_archive": self.sentence_archive,
            "token_archive": self.token_archive,
            "url": self.url,
        }


@dataclass(frozen=True)
class EndpointConfig:
    """Which correction endpoint the correct stage talks to."""

    kind: str = "echo"  # echo | fixture | service
    url: str | None = None
    fixture: str | None = None
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("echo", "fixture", "service"):
            raise DataError(f"unknown endpoint kind {self.kind!r}")
        if self.kind == "fixture" and not self.fixture:
            raise DataError("fixture endpoint needs a fixture path")
        if self.kind == "service" and not self.url:
            raise DataError("service endpoint needs url")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "url": self.url,
            "fixture": self.fixture,
            "max_retries": self.max_retries,
        }


@dataclass(frozen=True)
class AudioConfig:
    """Optional noisy-corpus synthesis ahead of the text stages."""

    clean_manifest: str
    noise_dir: str
    condition: str = "mixed"
    count: int = 1

    def to_json(self) -> dict:
        return {
            "clean_manifest": self.clean_manifest,
            "noise_dir": self.noise_dir,
            "condition": self.condition,
            "count": self.count,
        }


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; round-trips losslessly through JSON."""

    dataset: str
    out_dir: str
    conditions: tuple[str, ...] = ("clean", "mixed", "snr5", "snr10")
    seed: int = 0
    jobs: int = 4
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    projector_weights: str | None = None
    audio: AudioConfig | None = None
    bin_edges: tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 40.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "bin_edges", tuple(float(e) for e in self.bin_edges))
        for c in self.conditions:
            Condition(c)
        if self.jobs < 1:
            raise DataError("jobs must be >= 1")

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "out_dir": self.out_dir,
            "conditions": list(self.conditions),
            "seed": self.seed,
            "jobs": self.jobs,
            "provider": self.provider.to_json(),
            "endpoint": self.endpoint.to_json(),
            "projector_weights": self.projector_weights,
            "audio": self.audio.to_json() if self.audio else None,
            "bin_edges": list(self.bin_edges),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise DataError("pipeline config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise DataError(f"pipeline config: unknown keys {sorted(unknown)}")
        data = dict(obj)
        if "provider" in data and data["provider"] is not None:
            data["provider"] = _from_json(ProviderConfig, data["provider"], "provider")
        if "endpoint" in data and data["endpoint"] is not None:
            data["endpoint"] = _from_json(EndpointConfig, data["endpoint"], "endpoint")
        if data.get("audio") is not None:
            data["audio"] = _from_json(AudioConfig, data["audio"], "audio")
        if "conditions" in data:
            data["conditions"] = tuple(data["conditions"])
        if "bin_edges" in data:
            data["bin_edges"] = tuple(data["bin_edges"])
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc.msg}") from exc
        return cls.from_json(obj)

    def validate_paths(self) -> None:
        """Reject missing referenced files before any stage runs."""
        missing = []
        if not Path(self.dataset).exists():
            missing.append(("dataset", self.dataset))
        if self.provider.kind == "file":
            for label in ("sentence_archive", "token_archive"):
                p = getattr(self.provider, label)
                if not Path(p).exists():
                    missing.append((f"provider.{label}", p))
        if self.endpoint.kind == "fixture" and not Path(self.endpoint.fixture).exists():
            missing.append(("endpoint.fixture", self.endpoint.fixture))
        if self.projector_weights and not Path(self.projector_weights).exists():
            missing.append(("projector_weights", self.projector_weights))
        if self.audio:
            if not Path(self.audio.clean_manifest).exists():
                missing.append(("audio.clean_manifest", self.audio.clean_manifest))
            if not Path(self.audio.noise_dir).is_dir():
                missing.append(("audio.noise_dir", self.audio.noise_dir))
        if missing:
            detail = ", ".join(f"{label}: {path}" for label, path in missing)
            raise DataError(f"missing pipeline inputs: {detail}")


def _file_hash(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _obj_hash(obj: Any) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


@dataclass(frozen=True)
class PipelineResult:
    out_dir: str
    ran: tuple[str, ...]
    skipped: tuple[str, ...]
    content_hash: str
    pooled_wer_percent: float | None


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _write_jsonl(path: Path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


class _Runner:
    def __init__(self, cfg: PipelineConfig) -> None:
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.manifest_path = self.out / "manifest.json"
        self.stages: dict[str, dict] = {}
        self.ran: list[str] = []
        self.skipped: list[str] = []
        self.prev: dict[str, dict] = {}
        if self.manifest_path.exists():
            try:
                self.prev = json.loads(self.manifest_path.read_text(encoding="utf-8")).get(
                    "stages", {}
                )
            except (json.JSONDecodeError, AttributeError):
                self.prev = {}  # corrupt manifest: rebuild everything

    def _content_hash(self) -> str:
        return _obj_hash(
            {
                "config": self.cfg.to_json(),
                "stages": self.stages,
                "tool_version": __version__,
            }
        )

    def write_manifest(self) -> None:
        manifest = {
            "schema": 1,
            "tool_version": __version__,
            "config": self.cfg.to_json(),
            "stages": self.stages,
            "content_hash": self._content_hash(),
            "generated_at": datetime.now(timezone.utc).isoformat(),
        }
        self.manifest_path.write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def run_stage(self, name: str, input_hash: str, fn: Callable[[], list[Path]]) -> None:
        entry = self.prev.get(name)
        if entry and entry.get("input_hash") == input_hash:
            outputs = entry.get("outputs", {})
            if all(
                (self.out / rel).exists() and _file_hash(self.out / rel) == digest
                for rel, digest in outputs.items()
            ):
                self.stages[name] = {"input_hash": input_hash, "outputs": outputs}
                self.skipped.append(name)
                self.write_manifest()
                return
        try:
            produced = fn()
        except StageError:
            self.write_manifest()
            raise
        except ElnkitError as exc:
            self.write_manifest()  # keep finished stages resumable
            raise StageError(name, str(exc)) from exc
        self.stages[name] = {
            "input_hash": input_hash,
            "outputs": {
                str(p.relative_to(self.out)): _file_hash(p) for p in sorted(produced)
            },
        }
        self.ran.append(name)
        self.write_manifest()


def _build_providers(cfg: ProviderConfig):
    if cfg.kind == "test":
        return embed.test_embedder(cfg.dim), embed.test_embedder(cfg.token_dim)
    if cfg.kind == "file":
        provider = embed.FileProvider(cfg.sentence_archive, cfg.token_archive)
        return provider, provider
    provider = embed.ServiceProvider(cfg.url)
    return provider, provider


def _build_endpoint(cfg: EndpointConfig) -> llmclient.Endpoint:
    if cfg.kind == "echo":
        return llmclient.EchoFirstMock()
    if cfg.kind == "fixture":
        table = json.loads(Path(cfg.fixture).read_text(encoding="utf-8"))
        if not isinstance(table, dict):
            raise DataError(f"{cfg.fixture}: fixture must map id -> text")
        return llmclient.FixtureMock({str(k): str(v) for k, v in table.items()})
    return llmclient.HttpEndpoint(cfg.url)


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute all configured stages, skipping any whose inputs are unchanged."""
    cfg.validate_paths()
    runner = _Runner(cfg)
    runner.out.mkdir(parents=True, exist_ok=True)

    # ---- mix (optional) ----------------------------------------------------
    if cfg.audio:
        audio = cfg.audio
        noise_files = sorted(Path(audio.noise_dir).glob("*.wav"))
        mix_inputs = {
            "clean_manifest": _file_hash(Path(audio.clean_manifest)),
            "noise": {p.name: _file_hash(p) for p in noise_files},
        }
        mix_hash = _obj_hash(
            {"stage": "mix", "cfg": audio.to_json(), "seed": cfg.seed, "inputs": mix_inputs}
        )

        def do_mix() -> list[Path]:
            records = audiomix.build_condition_corpus(
                audio.clean_manifest,
                audio.noise_dir,
                Condition(audio.condition),
                audio.count,
                cfg.seed,
                runner.out / "mix",
            )
            produced = [runner.out / "mix" / "mix_manifest.jsonl"]
            produced.extend(Path(r.out) for r in records)
            return produced

        runner.run_stage("mix", mix_hash, do_mix)

    # ---- normalize ---------------------------------------------------------
    norm_path = runner.out / "normalized.jsonl"
    norm_hash = _obj_hash(
        {
            "stage": "normalize",
            "dataset": _file_hash(Path(cfg.dataset)),
            "conditions": sorted(cfg.conditions),
        }
    )

    def do_normalize() -> list[Path]:
        keep = {Condition(c) for c in cfg.conditions}
        raw = load_dataset(cfg.dataset, validate_normalization=False)
        normalized = [
            replace(
                r,
                reference=textnorm.normalize(r.reference),
                hypotheses=tuple(textnorm.normalize(h) for h in r.hypotheses),
            )
            for r in raw
            if r.condition in keep
        ]
        if not normalized:
            raise DataError("no records left after condition filtering")
        save_dataset(normalized, norm_path)
        return [norm_path]

    runner.run_stage("normalize", norm_hash, do_normalize)

    # ---- eln ---------------------------------------------------------------
    eln_path = runner.out / "eln.jsonl"
    vec_dir = runner.out / "vectors"
    provider_inputs: dict[str, Any] = {"provider": cfg.provider.to_json()}
    if cfg.provider.kind == "file":
        provider_inputs["archives"] = {
            "sentence": _file_hash(Path(cfg.provider.sentence_archive)),
            "token": _file_hash(Path(cfg.provider.token_archive)),
        }
    eln_hash = _obj_hash(
        {"stage": "eln", "normalized": _file_hash(norm_path), **provider_inputs}
    )

    def do_eln() -> list[Path]:
        records = load_dataset(norm_path)
        sent_p, tok_p = _build_providers(cfg.provider)
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            vectors = list(
                pool.map(
                    lambda r: eln_mod.compute_eln(r.hypotheses, sent_p, tok_p), records
                )
            )
        d_prime = max((len(v.token_part) for v in vectors), default=0)
        if d_prime == 0:
            d_prime = getattr(tok_p, "token_dim", None) or getattr(tok_p, "dim", 0)
        rows, sent_entries, tok_entries = [], {}, {}
        for record, vec in zip(records, vectors):
            rows.append(
                {
                    "id": record.id,
                    "magnitude": vec.magnitude,
                    "sentence_l2": vec.sentence_l2,
                    "token_l2": vec.token_l2,
                    "d": len(vec.sentence_part),
                    "d_prime": len(vec.token_part),
                }
            )
            sent_entries[record.id] = vec.sentence_part
            token_part = vec.token_part
            if len(token_part) == 0:
                if not d_prime:
                    raise DataError(
                        f"{record.id}: token dimension unknown for an all-empty corpus"
                    )
                token_part = np.zeros(d_prime)
            tok_entries[record.id] = token_part
        _write_jsonl(eln_path, rows)
        vec_dir.mkdir(exist_ok=True)
        d = len(next(iter(sent_entries.values())))
        embed.write_archive(vec_dir / "sentence.elna", d, sent_entries)
        embed.write_archive(vec_dir / "token.elna", d_prime, tok_entries)
        return [eln_path, vec_dir / "sentence.elna", vec_dir / "token.elna"]

    runner.run_stage("eln", eln_hash, do_eln)

    # ---- project (optional) ------------------------------------------------
    prefix_archive = runner.out / "prefix" / "prefix.elna"
    if cfg.projector_weights:
        project_hash = _obj_hash(
            {
                "stage": "project",
                "weights": _file_hash(Path(cfg.projector_weights)),
                "sentence": _file_hash(vec_dir / "sentence.elna"),
                "token": _file_hash(vec_dir / "token.elna"),
            }
        )

        def do_project() -> list[Path]:
            weights = load_weights(cfg.projector_weights)
            _, sent_entries = embed.read_archive(vec_dir / "sentence.elna")
            _, tok_entries = embed.read_archive(vec_dir / "token.elna")
            records = load_dataset(norm_path)
            (runner.out / "prefix").mkdir(exist_ok=True)
            out_entries = {}
            for record in records:
                key = embed.text_key(record.id)
                x = np.concatenate(
                    [
                        np.asarray(sent_entries[key], dtype=np.float64),
                        np.asarray(tok_entries[key], dtype=np.float64),
                    ]
                )
                out_entries[record.id] = project(x, weights).reshape(-1)
            embed.write_archive(
                prefix_archive, weights.prefix_len * weights.llm_dim, out_entries
            )
            header = runner.out / "prefix" / "prefix.json"
            header.write_text(
                json.dumps(
                    {
                        "prefix_len": weights.prefix_len,
                        "llm_dim": weights.llm_dim,
                        "note": (
                            "rows are flattened prefix_len x llm_dim matrices keyed "
                            "by utterance id; how they interleave with prompt tokens "
                            "is up to the consumer"
                        ),
                    },
                    indent=2,
                )
                + "\n",
                encoding="utf-8",
            )
            return [prefix_archive, header]

        runner.run_stage("project", project_hash, do_project)

    # ---- correct -----------------------------------------------------------
    corrections_path = runner.out / "corrections.jsonl"
    correct_inputs: dict[str, Any] = {
        "stage": "correct",
        "normalized": _file_hash(norm_path),
        "endpoint": cfg.endpoint.to_json(),
        "decoding": llmclient.DecodingParams().to_json(),
    }
    if cfg.endpoint.kind == "fixture":
        correct_inputs["fixture_hash"] = _file_hash(Path(cfg.endpoint.fixture))
    if cfg.projector_weights:
        correct_inputs["prefix"] = _file_hash(prefix_archive)
    correct_hash = _obj_hash(correct_inputs)

    def do_correct() -> list[Path]:
        records = load_dataset(norm_path)
        endpoint = _build_endpoint(cfg.endpoint)
        prefixes = None
        if cfg.projector_weights:
            _, entries = embed.read_archive(prefix_archive)
            prefixes = {
                r.id: np.asarray(entries[embed.text_key(r.id)], dtype=np.float64)
                for r in records
            }
        results = llmclient.correct_batch(
            records,
            endpoint,
            prefixes=prefixes,
            max_retries=cfg.endpoint.max_retries,
            jobs=cfg.jobs,
        )
        if records and all(r.flagged for r in results):
            raise StageError(
                "correct", "every record failed correction"
            ) from TransportError("endpoint produced no successful corrections")
        _write_jsonl(corrections_path, [r.to_json() for r in results])
        return [corrections_path]

    runner.run_stage("correct", correct_hash, do_correct)

    # ---- wer ---------------------------------------------------------------
    wer_dir = runner.out / "wer"
    per_utt_path = wer_dir / "per_utt.csv"
    pooled_path = wer_dir / "pooled.json"
    wer_hash = _obj_hash(
        {
            "stage": "wer",
            "normalized": _file_hash(norm_path),
            "corrections": _file_hash(corrections_path),
        }
    )

    def do_wer() -> list[Path]:
        records = {r.id: r for r in load_dataset(norm_path)}
        corrections = _read_jsonl(corrections_path)
        wer_dir.mkdir(exist_ok=True)
        flagged = 0
        rows = []
        pairs = []
        for row in corrections:
            if row["flagged"]:
                flagged += 1
                continue
            record = records[row["id"]]
            ref = textnorm.tokenize(record.reference)
            hyp = textnorm.tokenize(row["text"])
            breakdown, _ = wer_mod.align(ref, hyp)
            pairs.append((ref, hyp))
            rows.append(
                {
                    "id": row["id"],
                    "S": breakdown.substitutions,
                    "D": breakdown.deletions,
                    "I": breakdown.insertions,
                    "N": breakdown.reference_words,
                    "wer_percent": breakdown.wer_percent,
                }
            )
        if not rows:
            raise DataError("no unflagged corrections to score")
        corpus = wer_mod.corpus_wer(pairs)
        with open(per_utt_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["id", "S", "D", "I", "N", "wer_percent"], lineterminator="\n"
            )
            writer.writeheader()
            writer.writerows(rows)
        pooled = corpus.pooled
        pooled_path.write_text(
            json.dumps(
                {
                    "substitutions": pooled.substitutions,
                    "deletions": pooled.deletions,
                    "insertions": pooled.insertions,
                    "reference_words": pooled.reference_words,
                    "wer_percent": pooled.wer_percent,
                    "empty_reference": pooled.empty_reference,
                    "macro_wer_percent": corpus.macro_wer_percent,
                    "scored_count": len(rows),
                    "flagged_count": flagged,
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        return [per_utt_path, pooled_path]

    runner.run_stage("wer", wer_hash, do_wer)

    # ---- analyze -----------------------------------------------------------
    report_dir = runner.out / "report"
    table_path = report_dir / "table.csv"
    study_path = report_dir / "study.json"
    analyze_hash = _obj_hash(
        {
            "stage": "analyze",
            "per_utt": _file_hash(per_utt_path),
            "eln": _file_hash(eln_path),
            "normalized": _file_hash(norm_path),
            "bin_edges": list(cfg.bin_edges),
        }
    )

    def do_analyze() -> list[Path]:
        conditions = {r.id: r.condition for r in load_dataset(norm_path)}
        magnitudes = {row["id"]: row["magnitude"] for row in _read_jsonl(eln_path)}
        report_dir.mkdir(exist_ok=True)
        with open(per_utt_path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        by_condition: dict[Condition, list[dict]] = {}
        for row in rows:
            by_condition.setdefault(conditions[row["id"]], []).append(row)
        reports = []
        for condition, group in sorted(by_condition.items(), key=lambda kv: kv[0].value):
            pooled = wer_mod.WERBreakdown.from_counts(
                sum(int(r["S"]) for r in group),
                sum(int(r["D"]) for r in group),
                sum(int(r["I"]) for r in group),
                sum(int(r["N"]) for r in group),
            )
            per_utt = tuple(
                (r["id"], float(r["wer_percent"]), magnitudes.get(r["id"]))
                for r in group
            )
            reports.append(
                analysis.ConditionReport(condition, "corrected", pooled, per_utt)
            )
        table_path.write_text(
            analysis.render_table_csv(analysis.condition_table(reports)),
            encoding="utf-8",
        )
        pairs = [
            (magnitudes[r["id"]], float(r["wer_percent"]))
            for r in rows
            if r["id"] in magnitudes
        ]
        if len(pairs) >= 2:
            study = analysis.magnitude_wer_study(
                pairs, tuple(cfg.bin_edges) + (math.inf,)
            )
            study_obj = {"count": len(pairs), **study.to_json()}
        else:
            study_obj = {"count": len(pairs), "error": "fewer than 2 scored pairs"}
        study_path.write_text(json.dumps(study_obj, indent=2) + "\n", encoding="utf-8")
        return [table_path, study_path]

    runner.run_stage("analyze", analyze_hash, do_analyze)

    pooled_wer = None
    if pooled_path.exists():
        pooled_wer = json.loads(pooled_path.read_text(encoding="utf-8"))["wer_percent"]
    return PipelineResult(
        out_dir=str(runner.out),
        ran=tuple(runner.ran),
        skipped=tuple(runner.skipped),
        content_hash=runner._content_hash(),
        pooled_wer_percent=pooled_wer,
    )
