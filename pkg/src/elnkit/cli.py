"""Command-line entry point wiring the toolkit together.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 transport
error. Global flags: --seed, --jobs, --config (subcommand flags override
config-file fields, which override defaults).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__, analysis, audiomix, embed, llmclient, textnorm
from . import eln as eln_mod
from . import wer as wer_mod
from .core import Condition, load_dataset, save_dataset
from .errors import DataError, ElnkitError, StageError, TransportError
from .pipeline import PipelineConfig, run_pipeline
from .projector import load_weights, project


@click.group(name="elnkit")
@click.version_option(__version__)
@click.option("--seed", type=int, default=None, help="Seed for randomized stages.")
@click.option("--jobs", type=int, default=None, help="Parallelism degree.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Pipeline config JSON.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.pass_context
def cli(ctx: click.Context, seed: int | None, jobs: int | None, config_path: str | None, verbose: int) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)
    ctx.obj = {"seed": seed, "jobs": jobs, "config": config_path}


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--small-number-limit", type=int, default=100, show_default=True)
def normalize(in_path: str, out_path: str, small_number_limit: int) -> None:
    """Normalize a dataset (JSONL) or plain text file, one line at a time."""
    cfg = replace(textnorm.DEFAULT_CONFIG, small_number_limit=small_number_limit)
    first = ""
    with open(in_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                first = line.lstrip()
                break
    if first.startswith("{"):
        records = load_dataset(in_path, pad=True, validate_normalization=False)
        save_dataset(
            (
                replace(
                    r,
                    reference=textnorm.normalize(r.reference, cfg),
                    hypotheses=tuple(textnorm.normalize(h, cfg) for h in r.hypotheses),
                )
                for r in records
            ),
            out_path,
        )
    else:
        with open(in_path, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as dst:
            for line in src:
                dst.write(textnorm.normalize(line.rstrip("\n"), cfg) + "\n")
    click.echo(f"normalized {in_path} -> {out_path}")


@cli.command()
@click.option("--clean-manifest", required=True, type=click.Path(exists=True))
@click.option("--noise-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--condition", required=True, type=click.Choice([c.value for c in Condition]))
@click.option("--count", required=True, type=int)
@click.option("--seed", type=int, default=None, help="Overrides the global --seed.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def mix(ctx: click.Context, clean_manifest: str, noise_dir: str, condition: str, count: int, seed: int | None, out_dir: str) -> None:
    """Synthesize a noisy corpus for one condition."""
    if seed is None:
        seed = ctx.obj.get("seed") or 0
    records = audiomix.build_condition_corpus(
        clean_manifest, noise_dir, Condition(condition), count, seed, out_dir
    )
    click.echo(f"wrote {len(records)} records under {out_dir}")


def _provider_pair(provider: str, dim: int, token_dim: int, sentence_archive: str | None, token_archive: str | None, url: str | None):
    if provider == "test":
        return embed.test_embedder(dim), embed.test_embedder(token_dim)
    if provider == "file":
        if not (sentence_archive and token_archive):
            raise click.UsageError("--provider file needs --sentence-archive and --token-archive")
        handle = embed.FileProvider(sentence_archive, token_archive)
        return handle, handle
    if not url:
        raise click.UsageError("--provider service needs --url")
    handle = embed.ServiceProvider(url)
    return handle, handle


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--provider", type=click.Choice(["test", "file", "service"]), default="test", show_default=True)
@click.option("--dim", type=int, default=384, show_default=True)
@click.option("--token-dim", type=int, default=300, show_default=True)
@click.option("--sentence-archive", type=click.Path(exists=True), default=None)
@click.option("--token-archive", type=click.Path(exists=True), default=None)
@click.option("--url", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dump-vectors", "vectors_dir", type=click.Path(), default=None)
def eln(dataset: str, provider: str, dim: int, token_dim: int, sentence_archive: str | None, token_archive: str | None, url: str | None, out_path: str, vectors_dir: str | None) -> None:
    """Compute ELN magnitudes for every record of a normalized dataset."""
    records = load_dataset(dataset)
    sent_p, tok_p = _provider_pair(provider, dim, token_dim, sentence_archive, token_archive, url)
    rows = []
    sent_entries: dict[str, np.ndarray] = {}
    tok_entries: dict[str, np.ndarray] = {}
    vectors = [eln_mod.compute_eln(r.hypotheses, sent_p, tok_p) for r in records]
    d_prime = max((len(v.token_part) for v in vectors), default=0)
    if d_prime == 0:
        d_prime = getattr(tok_p, "token_dim", None) or getattr(tok_p, "dim", 0)
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
        part = vec.token_part
        if len(part) == 0:
            if not d_prime:
                raise DataError(f"{record.id}: token dimension unknown for an all-empty corpus")
            part = np.zeros(d_prime)
        tok_entries[record.id] = part
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    if vectors_dir:
        vdir = Path(vectors_dir)
        vdir.mkdir(parents=True, exist_ok=True)
        if sent_entries:
            d = len(next(iter(sent_entries.values())))
            embed.write_archive(vdir / "sentence.elna", d, sent_entries)
            embed.write_archive(vdir / "token.elna", d_prime, tok_entries)
    click.echo(f"wrote {len(rows)} ELN rows to {out_path}")


@cli.command(name="project")
@click.option("--eln", "eln_path", required=True, type=click.Path(exists=True))
@click.option("--weights", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--vectors", "vectors_dir", type=click.Path(), default=None, help="Vector archive dir (default: <eln>.vectors).")
def project_cmd(eln_path: str, weights: str, out_path: str, vectors_dir: str | None) -> None:
    """Project dumped ELN vectors through a weights file into prefix embeddings."""
    vdir = Path(vectors_dir) if vectors_dir else Path(eln_path + ".vectors")
    sent_path, tok_path = vdir / "sentence.elna", vdir / "token.elna"
    if not (sent_path.exists() and tok_path.exists()):
        raise DataError(
            f"vector archives not found under {vdir}; run `elnkit eln --dump-vectors {vdir}` first"
        )
    w = load_weights(weights)
    _, sent_entries = embed.read_archive(sent_path)
    _, tok_entries = embed.read_archive(tok_path)
    ids = [json.loads(line)["id"] for line in Path(eln_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    out_entries = {}
    for rec_id in ids:
        key = embed.text_key(rec_id)
        if key not in sent_entries or key not in tok_entries:
            raise DataError(f"{rec_id}: vectors missing from archives under {vdir}")
        x = np.concatenate(
            [np.asarray(sent_entries[key], np.float64), np.asarray(tok_entries[key], np.float64)]
        )
        out_entries[rec_id] = project(x, w).reshape(-1)
    embed.write_archive(out_path, w.prefix_len * w.llm_dim, out_entries)
    Path(out_path + ".json").write_text(
        json.dumps(
            {
                "prefix_len": w.prefix_len,
                "llm_dim": w.llm_dim,
                "note": (
                    "rows are flattened prefix_len x llm_dim matrices keyed by "
                    "utterance id; prompt placement is up to the consumer"
                ),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    click.echo(f"projected {len(out_entries)} vectors to {out_path}")


@cli.command()
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--endpoint", required=True, help="Service URL or 'mock' for the echo mock.")
@click.option("--fixture", type=click.Path(exists=True), default=None, help="id -> text JSON map; overrides --endpoint with a fixture mock.")
@click.option("--prefix-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_context
def correct(ctx: click.Context, dataset: str, endpoint: str, fixture: str | None, prefix_dir: str | None, out_path: str) -> None:
    """Run LLM correction over a normalized dataset."""
    records = load_dataset(dataset)
    if fixture:
        table = json.loads(Path(fixture).read_text(encoding="utf-8"))
        handle: llmclient.Endpoint = llmclient.FixtureMock({str(k): str(v) for k, v in table.items()})
    elif endpoint == "mock":
        handle = llmclient.EchoFirstMock()
    else:
        handle = llmclient.HttpEndpoint(endpoint)
    prefixes = None
    if prefix_dir:
        archive = Path(prefix_dir) / "prefix.elna"
        if not archive.exists():
            raise DataError(f"{archive} not found")
        _, entries = embed.read_archive(archive)
        prefixes = {
            r.id: np.asarray(entries[embed.text_key(r.id)], np.float64)
            for r in records
            if embed.text_key(r.id) in entries
        }
    jobs = ctx.obj.get("jobs") or 4
    results = llmclient.correct_batch(records, handle, prefixes=prefixes, jobs=jobs)
    if records and all(r.flagged for r in results):
        raise TransportError("every record failed correction")
    with open(out_path, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result.to_json(), ensure_ascii=False) + "\n")
    flagged = sum(1 for r in results if r.flagged)
    click.echo(f"corrected {len(results) - flagged}/{len(results)} records -> {out_path}")


@cli.command()
@click.option("--ref", "ref_path", required=True, type=click.Path(exists=True), help="Dataset JSONL with references.")
@click.option("--hyp", "hyp_path", required=True, type=click.Path(exists=True), help="Corrections JSONL with id/text rows.")
@click.option("--per-utt", "per_utt_path", required=True, type=click.Path())
@click.option("--macro", is_flag=True, help="Also print the macro (mean per-utterance) WER.")
def wer(ref_path: str, hyp_path: str, per_utt_path: str, macro: bool) -> None:
    """Score corrections against references; writes per-utterance CSV."""
    records = {r.id: r for r in load_dataset(ref_path)}
    import csv as _csv

    pairs = []
    rows = []
    with open(hyp_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            if row.get("flagged"):
                continue
            rec = records.get(row["id"])
            if rec is None:
                raise DataError(f"hypothesis id {row['id']!r} not in {ref_path}")
            ref_toks = textnorm.tokenize(rec.reference)
            hyp_toks = textnorm.tokenize(row["text"])
            breakdown, _ = wer_mod.align(ref_toks, hyp_toks)
            pairs.append((ref_toks, hyp_toks))
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
        raise DataError("no scorable hypotheses")
    corpus = wer_mod.corpus_wer(pairs)
    with open(per_utt_path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=["id", "S", "D", "I", "N", "wer_percent"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"pooled WER: {corpus.pooled.wer_percent:.4f}%")
    if macro:
        click.echo(f"macro WER: {corpus.macro_wer_percent:.4f}%")


@cli.command()
@click.option("--wer", "wer_csv", required=True, type=click.Path(exists=True))
@click.option("--eln", "eln_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True), help="Normalized dataset (condition per id).")
@click.option("--out", "out_dir", required=True, type=click.Path())
def analyze(wer_csv: str, eln_path: str, dataset: str, out_dir: str) -> None:
    """Build the condition table and the magnitude-vs-WER study."""
    import csv as _csv

    conditions = {r.id: r.condition for r in load_dataset(dataset)}
    magnitudes = {
        row["id"]: row["magnitude"]
        for row in (json.loads(l) for l in Path(eln_path).read_text(encoding="utf-8").splitlines() if l.strip())
    }
    with open(wer_csv, encoding="utf-8", newline="") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise DataError(f"{wer_csv} has no rows")
    by_condition: dict[Condition, list[dict]] = {}
    for row in rows:
        cond = conditions.get(row["id"])
        if cond is None:
            raise DataError(f"id {row['id']!r} not in {dataset}")
        by_condition.setdefault(cond, []).append(row)
    reports = []
    for cond, group in sorted(by_condition.items(), key=lambda kv: kv[0].value):
        pooled = wer_mod.WERBreakdown.from_counts(
            sum(int(r["S"]) for r in group),
            sum(int(r["D"]) for r in group),
            sum(int(r["I"]) for r in group),
            sum(int(r["N"]) for r in group),
        )
        per_utt = tuple((r["id"], float(r["wer_percent"]), magnitudes.get(r["id"])) for r in group)
        reports.append(analysis.ConditionReport(cond, "corrected", pooled, per_utt))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.csv").write_text(
        analysis.render_table_csv(analysis.condition_table(reports)), encoding="utf-8"
    )
    study_pairs = [
        (magnitudes[r["id"]], float(r["wer_percent"])) for r in rows if r["id"] in magnitudes
    ]
    if len(study_pairs) >= 2:
        study = analysis.magnitude_wer_study(
            study_pairs, tuple(analysis.DEFAULT_BIN_EDGES[:-1]) + (math.inf,)
        )
        study_obj = {"count": len(study_pairs), **study.to_json()}
    else:
        study_obj = {"count": len(study_pairs), "error": "fewer than 2 scored pairs"}
    (out / "study.json").write_text(json.dumps(study_obj, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out / 'table.csv'} and {out / 'study.json'}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.pass_context
def run(ctx: click.Context, config_path: str | None) -> None:
    """Run the full pipeline from a config file."""
    path = config_path or ctx.obj.get("config")
    if not path:
        raise click.UsageError("run needs --config (global or local)")
    cfg = PipelineConfig.load(path)
    if ctx.obj.get("seed") is not None:
        cfg = replace(cfg, seed=ctx.obj["seed"])
    if ctx.obj.get("jobs") is not None:
        cfg = replace(cfg, jobs=ctx.obj["jobs"])
    result = run_pipeline(cfg)
    click.echo(f"ran: {', '.join(result.ran) or '(nothing)'}")
    click.echo(f"skipped: {', '.join(result.skipped) or '(nothing)'}")
    if result.pooled_wer_percent is not None:
        click.echo(f"pooled WER: {result.pooled_wer_percent:.4f}%")
    click.echo(f"manifest content hash: {result.content_hash}")


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping toolkit errors onto documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3 if isinstance(exc.__cause__, TransportError) else 2
    except TransportError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except ElnkitError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0
