"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from patspec import pipeline as pl
from patspec.align import AlignedTuple
from patspec.dataset import attach_images, read_jsonl, split, split_manifest, write_jsonl
from patspec.enrich import DEFAULT_INSTRUCTION
from patspec.errors import DataError, EndpointError
from patspec.imageprep import ABLATION_SIZES, batch_normalize, write_report
from patspec.ingest import InputFormat
from patspec.metrics.report import ALL_METRICS
from patspec.model import PatentDocument, TrainingSample
from patspec.rank import parse_weights

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ENDPOINT = 0, 1, 2, 3

log = logging.getLogger("patspec")

_FORMATS = ["uspto-xml", "plain"]
_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
_existing_dir = click.Path(exists=True, file_okay=False, path_type=Path)
_out_path = click.Path(dir_okay=False, path_type=Path)


def _instruction(path: Path | None) -> str:
    return path.read_text(encoding="utf-8").strip() if path else DEFAULT_INSTRUCTION


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG.")
def cli(verbose: int) -> None:
    """Build patent drawing-to-specification datasets, rank generations and score them."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if verbose < 2:
        logging.getLogger("httpx").setLevel(logging.WARNING)


@cli.command()
@click.option("--format", "fmt", type=click.Choice(_FORMATS), required=True)
@click.option("--in", "in_dir", type=_existing_dir, required=True, help="Directory of patent files and sidecar images.")
@click.option("--out", type=_out_path, required=True)
@click.option("--allow-missing-images", is_flag=True, help="Keep drawings whose image file is absent.")
def ingest(fmt: str, in_dir: Path, out: Path, allow_missing_images: bool) -> None:
    """Parse patents into corpus JSONL."""
    docs = pl.run_ingest(in_dir, InputFormat.parse(fmt).value, out, allow_missing_images)
    click.echo(f"{len(docs)} documents -> {out}")


@cli.command()
@click.option("--in", "in_path", type=_existing_file, required=True, help="corpus.jsonl")
@click.option("--out", type=_out_path, required=True)
@click.option("--min-score", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True)
def align(in_path: Path, out: Path, min_score: float) -> None:
    """Align claim features, drawings and specification paragraphs."""
    aligned = pl.run_align(read_jsonl(in_path, PatentDocument), out, min_score)
    click.echo(f"{len(aligned)} aligned tuples -> {out}")


@cli.command()
@click.option("--in", "in_path", type=_existing_file, required=True, help="aligned.jsonl")
@click.option("--corpus", type=_existing_file, required=True, help="corpus.jsonl the tuples were aligned from.")
@click.option("--out", type=_out_path, required=True)
@click.option("--tokens-manifest", type=_out_path, default=None, help="Write the special-token inventory here.")
@click.option("--instruction-file", type=_existing_file, default=None, help="Also write chat records using this instruction.")
def enrich(in_path: Path, corpus: Path, out: Path, tokens_manifest: Path | None, instruction_file: Path | None) -> None:
    """Emit tagged training samples from aligned tuples."""
    samples = pl.run_enrich(
        read_jsonl(in_path, AlignedTuple),
        read_jsonl(corpus, PatentDocument),
        out,
        tokens_manifest,
        _instruction(instruction_file) if instruction_file else None,
    )
    click.echo(f"{len(samples)} samples -> {out}")


@cli.command()
@click.option("--in", "in_dir", type=_existing_dir, required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--max-dim", type=int, default=4096, show_default=True, help=f"One of {ABLATION_SIZES} unless --allow-any-size.")
@click.option("--force-rotate", type=click.Choice(["0", "90", "180", "270"]), default=None, help="Extra clockwise rotation.")
@click.option("--allow-any-size", is_flag=True)
@click.option("--report", type=_out_path, default=None, help="ImageMeta JSONL (default: <out>/imageprep.jsonl).")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True)
def imageprep(in_dir: Path, out_dir: Path, max_dim: int, force_rotate: str | None, allow_any_size: bool, report: Path | None, jobs: int) -> None:
    """Rotate and rescale drawings so the longer side equals --max-dim."""
    try:
        metas = batch_normalize(in_dir, out_dir, max_dim, int(force_rotate) if force_rotate else None, allow_any=allow_any_size, jobs=jobs)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    write_report(metas, report or out_dir / "imageprep.jsonl")
    errors = sum(m.status == "error" for m in metas)
    click.echo(f"{len(metas)} images, {errors} errors -> {out_dir}")
    if errors:
        raise DataError(f"{errors} image(s) failed; see the report")


@cli.group()
def dataset() -> None:
    """Attach images to samples and split train/test."""


@dataset.command("emit")
@click.option("--in", "in_path", type=_existing_file, required=True, help="samples from enrich")
@click.option("--images", "image_dir", type=_existing_dir, default=None, help="Preprocessed image directory.")
@click.option("--out", type=_out_path, required=True)
@click.option("--require-image/--no-require-image", default=True, show_default=True)
def dataset_emit(in_path: Path, image_dir: Path | None, out: Path, require_image: bool) -> None:
    """Point samples at preprocessed images (paths relative to --out)."""
    samples = read_jsonl(in_path, TrainingSample)
    if image_dir is None:
        names, prefix = [], ""
    else:
        names = sorted(p.name for p in image_dir.iterdir() if p.is_file())
        images, base = image_dir.resolve(), out.resolve().parent
        prefix = (images.relative_to(base).as_posix() if images.is_relative_to(base) else images.as_posix()) + "/"
    kept = attach_images(samples, names, prefix, require_image)
    write_jsonl(out, kept)
    click.echo(f"{len(kept)} samples -> {out}")


@dataset.command("split")
@click.option("--in", "in_path", type=_existing_file, required=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--test-size", type=click.IntRange(0), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lora-rank", type=int, default=None, help="Recorded in the manifest for downstream trainers.")
@click.option("--epochs", type=int, default=None, help="Recorded in the manifest for downstream trainers.")
def dataset_split(in_path: Path, out_dir: Path, test_size: int, seed: int, lora_rank: int | None, epochs: int | None) -> None:
    """Seeded uniform train/test split at sample granularity."""
    samples = read_jsonl(in_path, TrainingSample)
    train, test = split(samples, test_size, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_jsonl(out_dir / "train.jsonl", train)
    write_jsonl(out_dir / "test.jsonl", test)
    extra = {k: v for k, v in (("lora_rank", lora_rank), ("epochs", epochs)) if v is not None}
    manifest = split_manifest(train, test, seed, **extra)
    (out_dir / "dataset_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"train {len(train)}, test {len(test)} -> {out_dir}")


@cli.command()
@click.option("--samples", type=_existing_file, required=True)
@click.option("--endpoint", default="mock", show_default=True, help="'mock' or an endpoint JSON file.")
@click.option("--mock-template", default="{prompt}", show_default=True, help="Response template for the mock endpoint.")
@click.option("--n", "n", type=click.IntRange(1), default=1, show_default=True)
@click.option("--concurrency", type=click.IntRange(1), default=4, show_default=True)
@click.option("--instruction-file", type=_existing_file, default=None)
@click.option("--image-root", type=_existing_dir, default=None, help="Base for relative image paths (default: the samples file's directory).")
@click.option("--audit", type=_out_path, default=None, help="Audit log (default: the --out path with suffix .audit.jsonl).")
@click.option("--out", type=_out_path, required=True)
def generate(
    samples: Path,
    endpoint: str,
    mock_template: str,
    n: int,
    concurrency: int,
    instruction_file: Path | None,
    image_root: Path | None,
    audit: Path | None,
    out: Path,
) -> None:
    """Request candidate paragraphs from a chat-completions endpoint."""
    cfg = pl.endpoint_from(endpoint, mock_template)
    results = pl.run_generate(
        samples, cfg, out, n, concurrency, _instruction(instruction_file), audit or out.with_suffix(".audit.jsonl"), image_root
    )
    errors = sum(1 for r in results if r["error"])
    click.echo(f"{len(results)} results, {errors} errors -> {out}")


@cli.command()
@click.option("--gens", type=_existing_file, required=True)
@click.option("--samples", type=_existing_file, required=True)
@click.option("--out", type=_out_path, required=True)
@click.option("--weights", default="0.25,0.25,0.25,0.25", show_default=True, help="c,n,d,f weights.")
def rank(gens: Path, samples: Path, out: Path, weights: str) -> None:
    """Score candidates and keep the best one per sample."""
    try:
        parsed = parse_weights(weights)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--weights") from exc
    selected = pl.run_rank(gens, samples, out, parsed)
    click.echo(f"{len(selected)} selected -> {out}")


@cli.command()
@click.option("--hyp", type=_existing_file, required=True, help="selected.jsonl")
@click.option("--ref", type=_existing_file, required=True, help="test.jsonl")
@click.option("--out", type=_out_path, required=True)
@click.option("--metrics", default=",".join(ALL_METRICS), show_default=True)
@click.option("--embedding-endpoint", default="hashing", show_default=True, help="'hashing', 'none' or an endpoint JSON file.")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True)
def evaluate(hyp: Path, ref: Path, out: Path, metrics: str, embedding_endpoint: str, jobs: int) -> None:
    """Score selected paragraphs against reference paragraphs."""
    names = [m.strip() for m in metrics.split(",") if m.strip()]
    unknown = [m for m in names if m not in ALL_METRICS]
    if unknown:
        raise click.BadParameter(f"unknown metrics {unknown}", param_hint="--metrics")
    report = pl.run_evaluate(hyp, ref, out, names, embedding_endpoint, jobs)
    click.echo(report.to_table(), nl=False)


@cli.command()
@click.option("--config", "config_path", type=_existing_file, default=None, help="INI config; defaults run on the bundled corpus.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE", help="Override a config value.")
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=click.IntRange(1), default=None)
@click.option("--corpus", type=click.Path(path_type=Path), default=None)
@click.option("--test-size", type=click.IntRange(0), default=None)
def pipeline(config_path: Path | None, out_dir: Path, overrides: tuple[str, ...], seed, jobs, corpus, test_size) -> None:
    """Run the configured stages end to end and write a run manifest."""
    values: dict[str, str] = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise click.BadParameter(f"expected SECTION.KEY=VALUE, got {item!r}", param_hint="--set")
        values[key.strip()] = value
    for key, value in (("run.seed", seed), ("run.jobs", jobs), ("ingest.corpus", corpus and corpus.resolve()), ("dataset.test_size", test_size)):
        if value is not None:
            values[key] = str(value)
    try:
        config = pl.PipelineConfig.load(config_path, values)
        config.stages()
    except (ValueError, FileNotFoundError) as exc:
        raise click.UsageError(str(exc)) from exc
    manifest = pl.run_pipeline(config, out_dir)
    click.echo(f"{len(manifest['stages'])} stages -> {out_dir / 'run_manifest.json'}")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and map errors to exit codes."""
    try:
        cli.main(args=argv, prog_name="patspec", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except EndpointError as exc:
        click.echo(f"endpoint error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_ENDPOINT
    except (DataError, OSError) as exc:
        click.echo(f"data error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_DATA
    except ValueError as exc:
        click.echo(f"invalid setting: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
