"""Stage functions and the config-driven end-to-end runner.

Each stage reads and writes files in a run directory so that a failed run
keeps everything produced before the failing stage. The run manifest records
the seed, library versions, a config hash and sha256 digests of every
stage's inputs and outputs.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import platform
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from importlib import metadata, resources
from pathlib import Path

from patspec.align import AlignedTuple, build_aligned_tuples
from patspec.dataset import attach_images, emit_samples, read_jsonl, read_records, split, split_manifest, to_chat_record, write_jsonl
from patspec.enrich import DEFAULT_INSTRUCTION, write_token_manifest
from patspec.errors import EndpointUnreachable, MalformedDocument
from patspec.genclient import EndpointConfig, GenerationClient, embedding_provider, generate_batch
from patspec.imageprep import batch_normalize, write_report as write_image_report
from patspec.ingest import ingest_directory
from patspec.metrics.report import ALL_METRICS, evaluate_corpus, write_report
from patspec.model import PatentDocument, TrainingSample
from patspec.rank import parse_weights, select_all

log = logging.getLogger(__name__)

STAGES = ("ingest", "align", "enrich", "imageprep", "dataset", "generate", "rank", "evaluate")
BUNDLED_CORPUS = "bundled:minicorpus"

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"seed": "0", "jobs": "4", "stages": ", ".join(STAGES)},
    "ingest": {"corpus": BUNDLED_CORPUS, "format": "plain", "allow_missing_images": "false"},
    "align": {"min_score": "0.0"},
    "enrich": {"instruction_file": ""},
    "imageprep": {"max_dim": "512", "force_rotate": "", "allow_any_size": "false"},
    "dataset": {"test_size": "1000", "require_image": "true", "lora_rank": "", "epochs": ""},
    "generate": {"endpoint": "mock", "n": "4", "concurrency": "4", "mock_template": "{desc} The drawing shows {comps}. {cf}"},
    "rank": {"weights": "0.25,0.25,0.25,0.25"},
    "evaluate": {"metrics": ",".join(ALL_METRICS), "embedding": "hashing"},
}


def bundled_corpus_dir() -> Path:
    return Path(str(resources.files("patspec") / "data" / "minicorpus"))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_tree(path: str | Path) -> str:
    """Digest of a directory: sorted relative names with their file digests."""
    root = Path(path)
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(f"{p.relative_to(root).as_posix()}\0{sha256_file(p)}\n".encode())
    return h.hexdigest()


def digest(path: Path) -> str | None:
    if path.is_dir():
        return sha256_tree(path)
    if path.is_file():
        return sha256_file(path)
    return None


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------


def run_ingest(corpus: str | Path, fmt: str, out: Path, allow_missing_images: bool = False) -> list[PatentDocument]:
    docs = ingest_directory(corpus, fmt, allow_missing_images)
    if not docs:
        raise MalformedDocument(f"no documents found in {corpus}")
    write_jsonl(out, docs)
    return docs


def run_align(docs: Sequence[PatentDocument], out: Path, min_score: float = 0.0) -> list[AlignedTuple]:
    aligned = [t for d in docs for t in build_aligned_tuples(d, min_score)]
    write_jsonl(out, aligned)
    return aligned


def run_enrich(
    aligned: Sequence[AlignedTuple],
    docs: Sequence[PatentDocument],
    out: Path,
    tokens_manifest: Path | None = None,
    instruction: str | None = None,
) -> list[TrainingSample]:
    samples = emit_samples(aligned, {d.doc_id: d for d in docs})
    write_jsonl(out, samples)
    if tokens_manifest is not None:
        write_token_manifest(tokens_manifest)
    if instruction is not None:
        write_jsonl(out.with_suffix(".chat.jsonl"), [to_chat_record(s, instruction) for s in samples])
    return samples


def run_dataset(
    samples: Sequence[TrainingSample],
    image_names: Sequence[str],
    out_dir: Path,
    test_size: int,
    seed: int,
    image_prefix: str = "images/",
    require_image: bool = True,
    instruction: str = DEFAULT_INSTRUCTION,
    extra: Mapping[str, object] | None = None,
) -> tuple[list[TrainingSample], list[TrainingSample]]:
    samples = attach_images(samples, image_names, image_prefix, require_image)
    write_jsonl(out_dir / "samples.jsonl", samples)
    train, test = split(samples, test_size, seed)
    write_jsonl(out_dir / "train.jsonl", train)
    write_jsonl(out_dir / "test.jsonl", test)
    write_jsonl(out_dir / "train.chat.jsonl", [to_chat_record(s, instruction) for s in train])
    manifest = split_manifest(train, test, seed, **dict(extra or {}))
    (out_dir / "dataset_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return train, test


def endpoint_from(spec: str, mock_template: str | None = None) -> EndpointConfig:
    if spec == "mock":
        return EndpointConfig.mock(mock_template or "{prompt}")
    return EndpointConfig.from_file(spec)


def run_generate(
    samples_path: Path,
    endpoint: EndpointConfig,
    out: Path,
    n: int = 1,
    concurrency: int = 4,
    instruction: str = DEFAULT_INSTRUCTION,
    audit_path: Path | None = None,
    image_root: Path | None = None,
) -> list[dict]:
    records = read_records(samples_path)
    root = image_root or samples_path.parent
    with GenerationClient(endpoint, audit_path=audit_path, image_root=root) as client:
        results = list(generate_batch(records, client, instruction, n, concurrency))
    write_jsonl(out, results)
    failed = [r.sample_id for r in results if r.error]
    if failed:
        log.warning("%d generation(s) failed: %s", len(failed), ", ".join(failed))
    endpoint_failures = [r.error for r in results if r.error and not r.error.startswith("invalid sample")]
    if endpoint_failures and len(failed) == len(results):
        # nothing came back at all: treat as an endpoint outage, not a data problem
        raise EndpointUnreachable(f"every request to {endpoint.endpoint_id} failed; first error: {endpoint_failures[0]}")
    return [r.model_dump() for r in results]


def run_rank(gens_path: Path, samples_path: Path, out: Path, weights=None) -> list[dict]:
    samples = {s.sample_id: s for s in read_jsonl(samples_path, TrainingSample)}
    selected, skipped = select_all(read_records(gens_path), samples, parse_weights(weights))
    if skipped:
        log.warning("rank skipped %d sample(s): %s", len(skipped), ", ".join(skipped))
    write_jsonl(out, selected)
    return selected


def run_evaluate(hyp_path: Path, ref_path: Path, out: Path, metrics: Sequence[str] = ALL_METRICS, embedding: str | None = "hashing", jobs: int = 1):
    hyps = {r["sample_id"]: r["text"] for r in read_records(hyp_path)}
    refs = {s.sample_id: s.target_text for s in read_jsonl(ref_path, TrainingSample)}
    report = evaluate_corpus(hyps, refs, metrics, embedding_provider(embedding), jobs)
    write_report(report, out)
    return report


# --------------------------------------------------------------------------
# config and runner
# --------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    sections: dict[str, dict[str, str]]
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: Mapping[str, str] | None = None) -> PipelineConfig:
        """Read an INI file over the defaults; ``overrides`` are ``section.key`` pairs."""
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(DEFAULTS)
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise FileNotFoundError(f"config file {path} not found")
            parser.read(path, encoding="utf-8")
            base = path.resolve().parent
        for key, value in (overrides or {}).items():
            section, _, option = key.partition(".")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option, str(value))
        return cls({s: dict(parser[s]) for s in parser.sections()}, base)

    def get(self, section: str, key: str) -> str:
        return self.sections.get(section, {}).get(key, DEFAULTS.get(section, {}).get(key, ""))

    def getbool(self, section: str, key: str) -> bool:
        return self.get(section, key).strip().lower() in {"1", "true", "yes", "on"}

    def path(self, section: str, key: str) -> Path | None:
        value = self.get(section, key).strip()
        if not value:
            return None
        p = Path(value).expanduser()
        return p if p.is_absolute() else self.base_dir / p

    def corpus_dir(self) -> Path:
        value = self.get("ingest", "corpus").strip()
        return bundled_corpus_dir() if value == BUNDLED_CORPUS else self.path("ingest", "corpus")

    def stages(self) -> list[str]:
        names = [s.strip() for s in self.get("run", "stages").split(",") if s.strip()]
        unknown = [s for s in names if s not in STAGES]
        if unknown:
            raise ValueError(f"unknown stages: {unknown}")
        return [s for s in STAGES if s in names]

    def config_hash(self) -> str:
        """Hash of the effective settings; the output directory is excluded."""
        canonical = {s: {k: v for k, v in sorted(kv.items()) if not (s == "run" and k == "out_dir")} for s, kv in sorted(self.sections.items())}
        return hashlib.sha256(json.dumps(canonical, sort_keys=True).encode()).hexdigest()

    def instruction(self) -> str:
        path = self.path("enrich", "instruction_file")
        return path.read_text(encoding="utf-8").strip() if path else DEFAULT_INSTRUCTION


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for dist in ("patspec", "pydantic", "Pillow", "httpx", "numpy", "click"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = "unknown"
    return out


def _io(paths: Mapping[str, Path]) -> dict[str, str | None]:
    return {name: digest(p) for name, p in paths.items()}


def run_pipeline(config: PipelineConfig, out_dir: str | Path) -> dict:
    """Run the configured stages in order; returns (and writes) the run manifest.

    The first failing stage raises; the manifest written so far and all
    earlier outputs stay on disk.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("run", "seed"))
    jobs = max(1, int(config.get("run", "jobs")))
    instruction = config.instruction()
    manifest: dict = {
        "seed": seed,
        "versions": _versions(),
        "config_sha256": config.config_hash(),
        "stages": [],
    }
    manifest_path = out / "run_manifest.json"

    f = {
        "corpus": out / "corpus.jsonl",
        "aligned": out / "aligned.jsonl",
        "samples_raw": out / "enriched.jsonl",
        "tokens": out / "tokens.txt",
        "images": out / "images",
        "image_report": out / "imageprep.jsonl",
        "samples": out / "samples.jsonl",
        "train": out / "train.jsonl",
        "test": out / "test.jsonl",
        "gens": out / "gens.jsonl",
        "selected": out / "selected.jsonl",
        "report": out / "report.json",
    }

    def record(name: str, inputs: Mapping[str, Path], outputs: Mapping[str, Path], **counts) -> None:
        manifest["stages"].append({"stage": name, "inputs": _io(inputs), "outputs": _io(outputs), "counts": counts})
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    docs: list[PatentDocument] | None = None
    aligned: list[AlignedTuple] | None = None
    samples: list[TrainingSample] | None = None

    def load_docs() -> list[PatentDocument]:
        return docs if docs is not None else read_jsonl(f["corpus"], PatentDocument)

    corpus = config.corpus_dir()
    for stage in config.stages():
        log.info("stage %s", stage)
        if stage == "ingest":
            if corpus is None or not corpus.is_dir():
                raise MalformedDocument(f"corpus directory {corpus} does not exist")
            docs = run_ingest(corpus, config.get("ingest", "format"), f["corpus"], config.getbool("ingest", "allow_missing_images"))
            record(stage, {"corpus": corpus}, {"corpus": f["corpus"]}, documents=len(docs))
        elif stage == "align":
            docs = load_docs()
            aligned = run_align(docs, f["aligned"], float(config.get("align", "min_score")))
            record(stage, {"corpus": f["corpus"]}, {"aligned": f["aligned"]}, tuples=len(aligned))
        elif stage == "enrich":
            docs = load_docs()
            aligned = aligned if aligned is not None else read_jsonl(f["aligned"], AlignedTuple)
            samples = run_enrich(aligned, docs, f["samples_raw"], f["tokens"])
            record(stage, {"corpus": f["corpus"], "aligned": f["aligned"]}, {"enriched": f["samples_raw"], "tokens": f["tokens"]}, samples=len(samples))
        elif stage == "imageprep":
            samples = samples if samples is not None else read_jsonl(f["samples_raw"], TrainingSample)
            wanted = sorted({s.image_path for s in samples if s.image_path})
            force = config.get("imageprep", "force_rotate").strip()
            metas = batch_normalize(
                corpus,
                f["images"],
                int(config.get("imageprep", "max_dim")),
                int(force) if force else None,
                paths=wanted,
                allow_any=config.getbool("imageprep", "allow_any_size"),
                jobs=jobs,
            )
            write_image_report(metas, f["image_report"])
            errors = sum(m.status == "error" for m in metas)
            record(stage, {"corpus": corpus}, {"images": f["images"]}, images=len(metas), errors=errors)
        elif stage == "dataset":
            samples = samples if samples is not None else read_jsonl(f["samples_raw"], TrainingSample)
            image_names = sorted(p.name for p in f["images"].iterdir()) if f["images"].is_dir() else []
            extra = {k: config.get("dataset", k) for k in ("lora_rank", "epochs") if config.get("dataset", k)}
            train, test = run_dataset(
                samples,
                image_names,
                out,
                int(config.get("dataset", "test_size")),
                seed,
                require_image=config.getbool("dataset", "require_image"),
                instruction=instruction,
                extra=extra,
            )
            record(
                stage,
                {"enriched": f["samples_raw"], "images": f["images"]},
                {"samples": f["samples"], "train": f["train"], "test": f["test"]},
                train=len(train),
                test=len(test),
            )
        elif stage == "generate":
            endpoint = endpoint_from(config.get("generate", "endpoint"), config.get("generate", "mock_template"))
            gens = run_generate(
                f["test"],
                endpoint,
                f["gens"],
                int(config.get("generate", "n")),
                min(jobs, int(config.get("generate", "concurrency"))),
                instruction,
                audit_path=out / "audit.jsonl",
            )
            record(stage, {"test": f["test"]}, {"gens": f["gens"]}, results=len(gens), errors=sum(1 for g in gens if g["error"]))
        elif stage == "rank":
            selected = run_rank(f["gens"], f["test"], f["selected"], config.get("rank", "weights"))
            record(stage, {"gens": f["gens"], "test": f["test"]}, {"selected": f["selected"]}, selected=len(selected))
        elif stage == "evaluate":
            metrics = [m.strip() for m in config.get("evaluate", "metrics").split(",") if m.strip()]
            report = run_evaluate(f["selected"], f["test"], f["report"], metrics, config.get("evaluate", "embedding"), jobs)
            record(stage, {"selected": f["selected"], "test": f["test"]}, {"report": f["report"]}, samples=report.counts["samples"])
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
