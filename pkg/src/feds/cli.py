"""Command-line interface: build, classify, evaluate, bench, inspect.

Batch-oriented; no interactive steering. Option precedence is flags over
FED_* environment variables over built-in defaults, randomized behavior
always takes --seed (default 42, never wall-clock), and machine output
(--format json) is line-delimited JSON. Exit codes: 0 success, 2 I/O,
3 provider, 4 validation, 5 internal; errors never escape as tracebacks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .classify import classify_batch
from .evaluate import SplitSpec, run_evaluation
from .exceptions import (
    FedsError,
    NoClasses,
    ProviderError,
    StoreError,
    ValidationError,
)
from .index import FlatIndex, IvfFlatIndex
from .ingest import ingest_manifest, load_manifest, make_provider, MockProvider, HttpProvider, PagePayload, embed_page
from .pooling import DocumentEmbedding, build_class_centroids, build_document_embedding
from .store import centroids_as_objects, read_store, write_store
from .vectors import MEASURES

EXIT_OK = 0
EXIT_IO = 2
EXIT_PROVIDER = 3
EXIT_VALIDATION = 4
EXIT_INTERNAL = 5

_CATEGORY_CODES = {
    "io": EXIT_IO,
    "provider": EXIT_PROVIDER,
    "validation": EXIT_VALIDATION,
    "internal": EXIT_INTERNAL,
}


class _UsageError(ValidationError):
    """Bad flags or flag values; maps to the validation exit code."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _env(name: str, default, cast):
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise _UsageError(f"environment variable {name}={raw!r} is not valid") from None


def _resolve(flag_value, env_name: str, default, cast=str):
    if flag_value is not None:
        return flag_value
    return _env(env_name, default, cast)


def _check_choice(value: str, choices, what: str) -> str:
    if value not in choices:
        raise _UsageError(f"{what} must be one of {', '.join(choices)}; got {value!r}")
    return value


def _print_json(obj) -> None:
    print(json.dumps(obj))


def _print_table(rows: list[list[str]], header: list[str]) -> None:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    line = "  ".join(str(h).ljust(w) for h, w in zip(header, widths))
    print(line)
    print("  ".join("-" * w for w in widths))
    for r in rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))


def _load_centroid_objects(store_path):
    samples, stored_centroids, labels = read_store(store_path)
    if stored_centroids:
        centroids = centroids_as_objects(stored_centroids, labels)
    elif samples:
        # store written without a centroid section: mean-pool per class
        docs = [
            (DocumentEmbedding(vector=s.vector, doc_id=str(s.id), page_count=1), labels[s.label_id])
            for s in samples
        ]
        centroids = build_class_centroids(docs)
    else:
        raise NoClasses(f"store {store_path} holds no centroids and no samples")
    return samples, centroids, labels


def _cmd_build(args) -> int:
    aggregation = _check_choice(
        _resolve(args.aggregation, "FED_AGGREGATION", "mean"), ("mean", "weighted"), "--aggregation"
    )
    parallelism = int(_resolve(args.parallelism, "FED_PARALLELISM", 1, int))
    retries = int(_resolve(args.retries, "FED_RETRIES", 0, int))
    if args.manifest is None or args.store is None:
        raise _UsageError("build requires --manifest and --store")

    manifest = load_manifest(args.manifest, require_labels=True)
    provider = make_provider(manifest.provider, manifest.dim, retries=retries)
    report = ingest_manifest(manifest, provider, aggregation=aggregation, parallelism=parallelism)

    labeled = [(doc, label) for doc, label in report.documents]
    if not labeled:
        for failure in report.failures:
            print(f"FAILED {failure.doc_id}: {failure.error}", file=sys.stderr)
        print("error: no documents were ingested successfully", file=sys.stderr)
        if report.failures:
            return _CATEGORY_CODES[report.failures[0].category]
        return EXIT_VALIDATION
    centroids = build_class_centroids(labeled)
    samples = [(i, label, doc) for i, (doc, label) in enumerate(labeled)]
    write_store(samples, centroids, args.store, dim=manifest.dim)

    fmt = _check_choice(_resolve(args.format, "FED_FORMAT", "table"), ("json", "table"), "--format")
    if fmt == "json":
        for c in centroids:
            _print_json({"label": c.label, "members": c.member_count})
    else:
        _print_table([[c.label, c.member_count] for c in centroids], ["label", "members"])
    for failure in report.failures:
        print(f"FAILED {failure.doc_id}: {failure.error}", file=sys.stderr)
    if report.failures:
        return _CATEGORY_CODES[report.failures[0].category]
    return EXIT_OK


def _classification_inputs(args, store_dim: int, retries: int, aggregation: str, parallelism: int):
    """Yield (doc_id, vector) pairs for cmd_classify from a manifest or files."""
    if args.manifest:
        manifest = load_manifest(args.manifest, require_labels=False)
        if manifest.dim != store_dim:
            raise ValidationError(f"manifest dim {manifest.dim} != store dim {store_dim}")
        provider = make_provider(manifest.provider, manifest.dim, retries=retries)
        report = ingest_manifest(manifest, provider, aggregation=aggregation, parallelism=parallelism)
        queries = [(doc.doc_id, doc.vector) for doc, _ in report.documents]
        return queries, report.failures
    if not args.input:
        raise _UsageError("classify requires --manifest or --input")
    kind = _check_choice(
        _resolve(args.provider, "FED_PROVIDER", "mock"), ("mock", "http"), "--provider"
    )
    if kind == "http":
        url = _resolve(args.url, "FED_URL", None)
        if not url:
            raise _UsageError("--provider http requires --url")
        provider = HttpProvider(url, store_dim, retries=retries)
    else:
        provider = MockProvider(store_dim)
    doc_id = args.doc_id or os.path.splitext(os.path.basename(args.input[0]))[0]
    pages = []
    for i, path in enumerate(args.input):
        with open(path, "rb") as f:
            content = f.read()
        payload = PagePayload(doc_id=doc_id, page_index=i, content=content, text_hint=args.text_hint)
        pages.append(embed_page(provider, payload))
    doc = build_document_embedding(pages)
    return [(doc_id, doc.vector)], []


def _cmd_classify(args) -> int:
    measure = _check_choice(_resolve(args.measure, "FED_MEASURE", "cosine"), MEASURES, "--measure")
    fmt = _check_choice(_resolve(args.format, "FED_FORMAT", "table"), ("json", "table"), "--format")
    aggregation = _check_choice(
        _resolve(args.aggregation, "FED_AGGREGATION", "mean"), ("mean", "weighted"), "--aggregation"
    )
    parallelism = int(_resolve(args.parallelism, "FED_PARALLELISM", 1, int))
    retries = int(_resolve(args.retries, "FED_RETRIES", 0, int))
    if args.store is None:
        raise _UsageError("classify requires --store")

    samples, centroids, labels = _load_centroid_objects(args.store)
    dim = centroids[0].dim
    queries, ingest_failures = _classification_inputs(args, dim, retries, aggregation, parallelism)
    items = classify_batch(queries, centroids, measure)

    for item in items:
        if not item.ok:
            continue
        r = item.result
        if fmt == "json":
            _print_json(
                {
                    "doc_id": item.doc_id,
                    "predicted": r.predicted_label,
                    "measure": r.measure,
                    "ranking": [{"label": l, "score": s} for l, s in r.ranking],
                }
            )
        else:
            ranked = ", ".join(f"{l}={s:.4f}" for l, s in r.ranking)
            print(f"{item.doc_id}\t{r.predicted_label}\t[{ranked}]")

    failed = False
    for failure in ingest_failures:
        failed = True
        print(f"FAILED {failure.doc_id}: {failure.error}", file=sys.stderr)
    for item in items:
        if not item.ok:
            failed = True
            print(f"FAILED {item.doc_id}: {item.error}", file=sys.stderr)
    if failed:
        if ingest_failures:
            return _CATEGORY_CODES[ingest_failures[0].category]
        return EXIT_VALIDATION
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    measure = _check_choice(_resolve(args.measure, "FED_MEASURE", "cosine"), MEASURES, "--measure")
    averaging = _check_choice(
        _resolve(args.averaging, "FED_AVERAGING", "macro"), ("macro", "micro"), "--averaging"
    )
    fmt = _check_choice(_resolve(args.format, "FED_FORMAT", "table"), ("json", "table"), "--format")
    seed = int(_resolve(args.seed, "FED_SEED", 42, int))
    spec = SplitSpec(
        train_frac=float(_resolve(args.train_frac, "FED_TRAIN_FRAC", 0.7, float)),
        val_frac=float(_resolve(args.val_frac, "FED_VAL_FRAC", 0.1, float)),
        test_frac=float(_resolve(args.test_frac, "FED_TEST_FRAC", 0.2, float)),
        seed=seed,
    )
    if args.store is None:
        raise _UsageError("evaluate requires --store")

    samples, _, labels = read_store(args.store)
    result = run_evaluation(samples, labels, spec, measure=measure, averaging=averaging)
    report = result.report
    method = f"centroid-{measure}"

    if fmt == "json":
        payload = {
            "method": method,
            "measure": measure,
            "seed": seed,
            "split": result.split_sizes,
            "confusion": {
                "labels": list(result.confusion.labels),
                "counts": result.confusion.counts.tolist(),
            },
        }
        payload.update(report.as_dict())
        _print_json(payload)
    else:
        print(f"averaging={report.averaging} seed={seed} "
              f"split=train:{result.split_sizes['train']}/val:{result.split_sizes['val']}(unused)/"
              f"test:{result.split_sizes['test']}")
        _print_table(
            [[method, f"{report.accuracy:.4f}", f"{report.precision:.4f}", f"{report.recall:.4f}", f"{report.f1:.4f}"]],
            ["Method", "Accuracy", "Precision", "Recall", "F1-Score"],
        )
        rows = [
            [label, f"{m.precision:.4f}", f"{m.recall:.4f}", f"{m.f1:.4f}", m.support]
            for label, m in report.per_class.items()
        ]
        _print_table(rows, ["Class", "Precision", "Recall", "F1-Score", "Support"])
    return EXIT_OK


def _cmd_bench(args) -> int:
    measure = _check_choice(_resolve(args.measure, "FED_MEASURE", "cosine"), MEASURES, "--measure")
    fmt = _check_choice(_resolve(args.format, "FED_FORMAT", "table"), ("json", "table"), "--format")
    seed = int(_resolve(args.seed, "FED_SEED", 42, int))
    k = int(_resolve(args.k, "FED_K", 10, int))
    nlist = int(_resolve(args.nlist, "FED_NLIST", 16, int))
    n_queries = int(_resolve(args.queries, "FED_QUERIES", 100, int))
    if args.store is None:
        raise _UsageError("bench requires --store")
    nprobe_raw = _resolve(args.nprobe, "FED_NPROBE", "1,2,4,8,16")
    try:
        nprobes = [int(x) for x in str(nprobe_raw).split(",") if x.strip() != ""]
    except ValueError:
        raise _UsageError(f"--nprobe must be a comma-separated list of integers, got {nprobe_raw!r}") from None
    if not nprobes:
        raise _UsageError("--nprobe list must not be empty")

    samples, _, labels = read_store(args.store)
    if not samples:
        raise ValidationError("store holds no samples to index")
    dim = samples[0].vector.size
    flat = FlatIndex.from_samples(samples, dim)
    vectors = np.stack([s.vector for s in samples])
    ivf = IvfFlatIndex.train(vectors, nlist=min(nlist, len(samples)), seed=seed)
    for s in samples:
        ivf.add(s.id, s.vector, s.label_id)

    rng = np.random.default_rng(seed)
    pick = rng.choice(len(samples), size=min(n_queries, len(samples)), replace=False)
    queries = [samples[i].vector for i in pick]

    t0 = time.perf_counter()
    flat_hits = [flat.search(q, k, measure) for q in queries]
    flat_us = (time.perf_counter() - t0) / len(queries) * 1e6

    rows = []
    for nprobe in nprobes:
        if not 1 <= nprobe <= ivf.nlist:
            raise ValidationError(f"nprobe {nprobe} out of range [1, {ivf.nlist}]")
        t0 = time.perf_counter()
        ivf_hits = [ivf.search(q, k, nprobe, measure) for q in queries]
        ivf_us = (time.perf_counter() - t0) / len(queries) * 1e6
        recalls = []
        for exact, approx in zip(flat_hits, ivf_hits):
            truth = {h.id for h in exact}
            got = {h.id for h in approx}
            recalls.append(len(truth & got) / len(truth) if truth else 1.0)
        rows.append((nprobe, float(np.mean(recalls)), ivf_us))

    if fmt == "json":
        _print_json({"index": "flat", "k": k, "recall": 1.0, "us_per_query": flat_us})
        for nprobe, recall, us in rows:
            _print_json(
                {"index": "ivf", "nlist": ivf.nlist, "nprobe": nprobe, "k": k, "recall": recall, "us_per_query": us}
            )
    else:
        table = [["flat", "-", f"{1.0:.4f}", f"{flat_us:.1f}"]] + [
            ["ivf", str(nprobe), f"{recall:.4f}", f"{us:.1f}"] for nprobe, recall, us in rows
        ]
        _print_table(table, ["index", "nprobe", f"recall@{k}", "us/query"])
    return EXIT_OK


def _cmd_inspect(args) -> int:
    fmt = _check_choice(_resolve(args.format, "FED_FORMAT", "table"), ("json", "table"), "--format")
    if args.store is None:
        raise _UsageError("inspect requires --store")
    samples, centroids, labels = read_store(args.store)
    dim = samples[0].vector.size if samples else (centroids[0].vector.size if centroids else None)
    per_class = {label: 0 for label in labels}
    for s in samples:
        per_class[labels[s.label_id]] += 1
    if fmt == "json":
        _print_json(
            {
                "dim": dim,
                "labels": labels,
                "samples": len(samples),
                "centroids": len(centroids),
                "per_class": per_class,
            }
        )
    else:
        print(f"dim={dim} samples={len(samples)} centroids={len(centroids)}")
        _print_table([[label, count] for label, count in per_class.items()], ["label", "samples"])
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="feds", description="Vector-sampling document classification toolkit")
    parser.add_argument("--version", action="version", version=f"feds {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--format", choices=("json", "table"))
        p.add_argument("--seed", type=int)

    p = sub.add_parser("build", help="ingest a labeled manifest and write a store")
    p.add_argument("--manifest")
    p.add_argument("--store")
    p.add_argument("--aggregation", choices=("mean", "weighted"))
    p.add_argument("--parallelism", type=int)
    p.add_argument("--retries", type=int)
    common(p)

    p = sub.add_parser("classify", help="classify new documents against a store")
    p.add_argument("--store")
    p.add_argument("--manifest")
    p.add_argument("--input", nargs="+", help="page files forming one document")
    p.add_argument("--doc-id")
    p.add_argument("--text-hint")
    p.add_argument("--provider", choices=("mock", "http"))
    p.add_argument("--url")
    p.add_argument("--measure", choices=MEASURES)
    p.add_argument("--aggregation", choices=("mean", "weighted"))
    p.add_argument("--parallelism", type=int)
    p.add_argument("--retries", type=int)
    common(p)

    p = sub.add_parser("evaluate", help="split, train centroids, and score the test split")
    p.add_argument("--store")
    p.add_argument("--measure", choices=MEASURES)
    p.add_argument("--averaging", choices=("macro", "micro"))
    p.add_argument("--train-frac", type=float)
    p.add_argument("--val-frac", type=float)
    p.add_argument("--test-frac", type=float)
    common(p)

    p = sub.add_parser("bench", help="recall and latency of IVF search vs the flat oracle")
    p.add_argument("--store")
    p.add_argument("--nlist", type=int)
    p.add_argument("--nprobe", help="comma-separated nprobe values")
    p.add_argument("--k", type=int)
    p.add_argument("--queries", type=int)
    p.add_argument("--measure", choices=MEASURES)
    common(p)

    p = sub.add_parser("inspect", help="dump store header, label table, per-class counts")
    p.add_argument("--store")
    common(p)

    return parser


_COMMANDS = {
    "build": _cmd_build,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (build, classify, evaluate, bench, inspect)")
        return _COMMANDS[args.command](args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ProviderError as e:
        print(f"provider error: {e}", file=sys.stderr)
        return EXIT_PROVIDER
    except StoreError as e:
        print(f"store error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except FedsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # never leak a traceback to the shell
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
