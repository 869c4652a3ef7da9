"""Command-line entry point wiring the toolkit into end-to-end workflows.

Every subcommand that writes outputs also writes a `*.run.json` config echo
next to them so runs can be reproduced. Errors exit nonzero with a single
`error: ...` line on stderr.
"""

from __future__ import annotations

import json
import sys
from functools import wraps
from pathlib import Path

import click

from . import dataio, metrics, preprocess, rules, synth, temporal
from .coverage import compute_coverage, coverage_distribution
from .errors import LofkitError
from .llm import batch as llm_batch
from .llm import mockserver
from .llm.client import EndpointConfig
from .llm.prompts import get_template
from .llm.retrieval import DEFAULT_CHUNKS, load_chunk_store, retrieve_chunks


def _echo_config(target: Path, subcommand: str, params: dict) -> None:
    """Write the run configuration next to the outputs it produced."""
    if target.suffix:
        echo_path = target.with_suffix(target.suffix + ".run.json")
    else:
        target.mkdir(parents=True, exist_ok=True)
        echo_path = target / "run.json"
    payload = {"subcommand": subcommand, "params": {k: str(v) if isinstance(v, Path) else v for k, v in params.items()}}
    echo_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _fail_cleanly(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LofkitError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option()
def main():
    """Biofouling level-of-fouling assessment toolkit."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), help="Write counts as JSON.")
@_fail_cleanly
def stats(manifest_path: Path, out_path: Path | None):
    """Per-class image counts for a dataset manifest."""
    manifest = dataio.load_manifest(manifest_path)
    result = dataio.dataset_stats(manifest)
    payload = {"counts": {str(k): v for k, v in result.counts.items()}, "total": result.total}
    if out_path:
        out_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        _echo_config(out_path, "stats", {"manifest": manifest_path})
    for rank in range(6):
        click.echo(f"LoF {rank}: {result.counts[rank]}")
    click.echo(f"total: {result.total}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--train-fraction", default=0.8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--stratified/--no-stratified", default=True, show_default=True)
@_fail_cleanly
def split(manifest_path: Path, out_path: Path, train_fraction: float, seed: int, stratified: bool):
    """Create the train/test split file once; refuses to overwrite it."""
    manifest = dataio.load_manifest(manifest_path)
    spec = dataio.SplitSpec(train_fraction=train_fraction, seed=seed, stratified=stratified)
    result = dataio.make_split(manifest, spec)
    dataio.write_split(result, out_path)
    _echo_config(out_path, "split", {
        "manifest": manifest_path, "train_fraction": train_fraction,
        "seed": seed, "stratified": stratified,
    })
    click.echo(f"split written: {len(result.train_ids)} train / {len(result.test_ids)} test")


@main.command(name="preprocess")
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--channels", default="R,G,B,H,S,V,E", show_default=True)
@click.option("--edge-operator", default="sobel", show_default=True, type=click.Choice(["sobel", "laplacian"]))
@_fail_cleanly
def preprocess_cmd(images_dir: Path, out_dir: Path, channels: str, edge_operator: str):
    """Export per-image channel stacks (16-bit planes plus sidecar)."""
    spec = tuple(name.strip() for name in channels.split(",") if name.strip())
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in sorted(images_dir.iterdir()):
        if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        image = preprocess.read_rgb(path)
        stack = preprocess.stack_channels(image, spec, edge_operator=edge_operator)
        preprocess.export_channel_stack(stack, out_dir / path.stem)
        count += 1
    _echo_config(out_dir, "preprocess", {
        "images": images_dir, "channels": channels, "edge_operator": edge_operator,
    })
    click.echo(f"exported {count} channel stacks to {out_dir}")


def _mask_paths(masks_dir: Path) -> list[Path]:
    paths = sorted(p for p in masks_dir.iterdir() if p.suffix.lower() == ".png")
    if not paths:
        raise LofkitError(f"no mask PNGs found in {masks_dir}")
    return paths


@main.command()
@click.option("--masks", "masks_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@_fail_cleanly
def coverage(masks_dir: Path, out_path: Path):
    """Per-mask hull coverage percentages as CSV."""
    rows = []
    for path in _mask_paths(masks_dir):
        report = compute_coverage(dataio.read_mask(path))
        rows.append((path.stem, report))
    with out_path.open("w") as fh:
        fh.write("image_id,hull_pixels,water_pixels,clean_pct,slime_pct,macro_pct,basis\n")
        for image_id, r in rows:
            fh.write(
                f"{image_id},{r.hull_pixels},{r.water_pixels},"
                f"{r.clean_pct!r},{r.slime_pct!r},{r.macro_pct!r},{r.basis}\n"
            )
    _echo_config(out_path, "coverage", {"masks": masks_dir})
    click.echo(f"coverage for {len(rows)} masks written to {out_path}")


@main.command()
@click.option("--masks", "masks_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--preset", default="figure1-default", show_default=True)
@click.option("--threshold-config", "threshold_path", type=click.Path(exists=True, path_type=Path),
              help="key=value file overriding the preset.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@_fail_cleanly
def rate(masks_dir: Path, preset: str, threshold_path: Path | None, out_path: Path):
    """Rate masks: coverage -> decision tree -> prediction CSV."""
    cfg = rules.load_threshold_config(threshold_path) if threshold_path else rules.get_preset(preset)
    records = []
    for path in _mask_paths(masks_dir):
        report = compute_coverage(dataio.read_mask(path))
        rank = rules.classify_lof(rules.FoulingObservation.from_coverage(report), cfg)
        scores = tuple(1.0 if r == rank else 0.0 for r in range(6))
        top1, top2 = dataio.top_two(scores)
        records.append(dataio.PredictionRecord(
            image_id=path.stem, top1=top1, top2=top2,
            class_scores=scores, source_model="rule-engine",
        ))
    dataio.save_predictions(records, out_path)
    _echo_config(out_path, "rate", {"masks": masks_dir, "preset": preset,
                                    "threshold_config": threshold_path})
    click.echo(f"rated {len(records)} masks -> {out_path}")


@main.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--window", default=5, show_default=True)
@click.option("--weighting", default="confidence", show_default=True,
              type=click.Choice(list(temporal.WEIGHTINGS)))
@_fail_cleanly
def smooth(frames_dir: Path, out_dir: Path, window: int, weighting: str):
    """Temporally smooth a directory of probability-raster PNGs (name order)."""
    paths = sorted(p for p in frames_dir.iterdir() if p.suffix.lower() == ".png")
    if not paths:
        raise LofkitError(f"no probability PNGs found in {frames_dir}")
    seq = temporal.FrameSequence(frames=tuple(dataio.read_probs(p) for p in paths))
    smoothed = temporal.smooth_sequence(seq, window=window, weighting=weighting)
    out_dir.mkdir(parents=True, exist_ok=True)
    for path, frame in zip(paths, smoothed.frames):
        dataio.write_probs(frame, out_dir / path.name)
    _echo_config(out_dir, "smooth", {"frames": frames_dir, "window": window, "weighting": weighting})
    click.echo(f"smoothed {len(paths)} frames -> {out_dir}")


@main.command(name="synth")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--counts", default="7,263,70,113,126,183", show_default=True,
              help="Per-LoF-class record counts.")
@click.option("--seed", default=0, show_default=True)
@click.option("--width", default=64, show_default=True)
@click.option("--height", default=64, show_default=True)
@_fail_cleanly
def synth_cmd(out_dir: Path, counts: str, seed: int, width: int, height: int):
    """Generate a labelled synthetic dataset (manifest, masks, renders)."""
    class_counts = [int(v) for v in counts.split(",")]
    manifest = synth.generate_dataset(class_counts, out_dir, seed=seed, width=width, height=height)
    _echo_config(out_dir, "synth", {"counts": counts, "seed": seed, "width": width, "height": height})
    click.echo(f"wrote {len(manifest)} records to {out_dir}")


def _scored_from_args(truth: dict[str, int], preds_path: Path | None, journal_path: Path | None):
    if (preds_path is None) == (journal_path is None):
        raise LofkitError("provide exactly one of --preds or --journal")
    if preds_path is not None:
        records = dataio.load_predictions(preds_path, known_ids=set(truth))
        kept = [r for r in records if r.image_id in truth]
        dropped = len(records) - len(kept)
        if dropped:
            click.echo(f"ignoring {dropped} prediction(s) for ids not in the manifest", err=True)
        return metrics.scored_from_predictions(kept)
    journal = llm_batch.load_journal(journal_path)
    kept_ids = [image_id for image_id in journal if image_id in truth]
    dropped = len(journal) - len(kept_ids)
    if dropped:
        click.echo(f"ignoring {dropped} journal entr(ies) for ids not in the manifest", err=True)
    return llm_batch.scored_from_results([(image_id, journal[image_id]) for image_id in kept_ids])


@main.command(name="eval")
@click.option("--truth", "truth_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--preds", "preds_path", type=click.Path(exists=True, path_type=Path))
@click.option("--journal", "journal_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_fail_cleanly
def eval_cmd(truth_path: Path, preds_path: Path | None, journal_path: Path | None, out_dir: Path):
    """Score predictions (CSV or LLM journal) against manifest labels."""
    truth = dataio.load_manifest(truth_path).labels()
    scored = _scored_from_args(truth, preds_path, journal_path)
    report = metrics.compute_metrics(truth, scored)
    if report.n_classified:
        matrix = metrics.confusion_from_scored(truth, scored)
    else:
        import numpy as np

        matrix = metrics.ConfusionMatrix(np.zeros((6, 6), dtype=np.int64))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
    )
    (out_dir / "confusion.json").write_text(
        json.dumps(matrix.counts.tolist(), indent=2) + "\n"
    )
    _echo_config(out_dir, "eval", {"truth": truth_path, "preds": preds_path, "journal": journal_path})
    click.echo(
        f"classification rate {report.classification_rate:.4f}, "
        f"accuracy over classified "
        + (f"{report.accuracy_over_classified:.4f}" if report.accuracy_over_classified is not None else "n/a")
    )


@main.command(name="report")
@click.option("--eval-dir", "eval_dir", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory produced by `lofkit eval`.")
@click.option("--coverage-csv", "coverage_csv", type=click.Path(exists=True, path_type=Path),
              help="Optional coverage CSV to histogram into the report.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@_fail_cleanly
def report_cmd(eval_dir: Path, coverage_csv: Path | None, out_dir: Path):
    """Render eval output into report.json / report.md / per_class.svg."""
    report = metrics.MetricsReport.from_json(json.loads((eval_dir / "metrics.json").read_text()))
    matrix = metrics.ConfusionMatrix(json.loads((eval_dir / "confusion.json").read_text()))
    histograms = None
    if coverage_csv is not None:
        import csv as _csv

        from .coverage import CoverageReport

        with coverage_csv.open(newline="") as fh:
            reports = [
                CoverageReport(
                    hull_pixels=float(row["hull_pixels"]),
                    water_pixels=float(row["water_pixels"]),
                    clean_pct=float(row["clean_pct"]),
                    slime_pct=float(row["slime_pct"]),
                    macro_pct=float(row["macro_pct"]),
                )
                for row in _csv.DictReader(fh)
            ]
        histograms = coverage_distribution(reports)
    paths = metrics.emit_report(report, matrix, out_dir, histograms=histograms)
    _echo_config(out_dir, "report", {"eval_dir": eval_dir, "coverage_csv": coverage_csv})
    click.echo("wrote " + ", ".join(str(p) for p in paths))


@main.group()
def llm():
    """LLM assessment: batch runs and the offline replay server."""


@llm.command(name="run")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--images-root", type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Base directory for relative image paths (default: manifest directory).")
@click.option("--template", "template_name", default="expert", show_default=True)
@click.option("--endpoint", "endpoint_url", required=True)
@click.option("--model", "model_id", default="openai/gpt-4o", show_default=True)
@click.option("--out", "journal_path", required=True, type=click.Path(path_type=Path),
              help="Journal file; already-answered ids are skipped on rerun.")
@click.option("--concurrency", default=4, show_default=True)
@click.option("--chunk-store", "chunk_store", type=str,
              help="Guideline chunk JSONL for the rag template, or 'builtin'.")
@click.option("--rag-k", default=3, show_default=True)
@click.option("--rag-query", default="macrofouling percent cover thresholds slime", show_default=True)
@click.option("--temperature", default=0.0, show_default=True)
@click.option("--max-tokens", default=512, show_default=True)
@click.option("--timeout", default=60.0, show_default=True)
@click.option("--api-key-env", default="LOFKIT_API_KEY", show_default=True)
@_fail_cleanly
def llm_run(
    manifest_path: Path,
    images_root: Path | None,
    template_name: str,
    endpoint_url: str,
    model_id: str,
    journal_path: Path,
    concurrency: int,
    chunk_store: str | None,
    rag_k: int,
    rag_query: str,
    temperature: float,
    max_tokens: int,
    timeout: float,
    api_key_env: str,
):
    """Assess every manifest image through a chat-completions endpoint."""
    template = get_template(template_name)
    chunks = ()
    if template.rag_slots > 0:
        if chunk_store is None:
            raise LofkitError(
                f"template {template_name!r} needs --chunk-store (a JSONL file or 'builtin')"
            )
        store = list(DEFAULT_CHUNKS) if chunk_store == "builtin" else load_chunk_store(chunk_store)
        chunks = tuple(retrieve_chunks(rag_query, store, k=min(rag_k, template.rag_slots)))
    elif chunk_store is not None:
        raise LofkitError(f"template {template_name!r} has no guideline slots; drop --chunk-store")

    manifest = dataio.load_manifest(manifest_path)
    endpoint = EndpointConfig(base_url=endpoint_url, api_key_env=api_key_env)
    results = llm_batch.run_batch(
        manifest,
        template,
        endpoint,
        journal_path,
        images_root=images_root or manifest_path.parent,
        concurrency=concurrency,
        chunks=chunks,
        model_id=model_id,
        temperature=temperature,
        max_tokens=max_tokens,
        timeout=timeout,
    )
    _echo_config(journal_path, "llm run", {
        "manifest": manifest_path, "template": template_name, "endpoint": endpoint_url,
        "model": model_id, "concurrency": concurrency, "chunk_store": chunk_store,
        "rag_k": rag_k, "rag_query": rag_query, "temperature": temperature,
        "max_tokens": max_tokens, "timeout": timeout,
    })
    rate_value = llm_batch.classification_rate(results)
    click.echo(f"{len(results)} images assessed, classification rate {rate_value:.4f}")


@llm.command(name="mock-serve")
@click.option("--script", "script_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--port", default=8089, show_default=True)
@_fail_cleanly
def llm_mock_serve(script_path: Path, port: int):
    """Serve a replay script as a chat-completions endpoint (Ctrl+C stops)."""
    click.echo(f"replaying {script_path} on http://127.0.0.1:{port}")
    mockserver.serve_script(script_path, port)


if __name__ == "__main__":
    main()
