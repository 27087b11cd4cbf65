"""Command-line entry point.

One binary, one subcommand per pipeline:

    deideval score       token-level classification metrics
    deideval cire        judge-based retention scores
    deideval icd         JSC / NSDCG code-overlap retention
    deideval surrogate   build a surrogate-PII corpus from placeholders
    deideval sample-fps  draw false positives into an annotation CSV
    deideval correlate   metric scores vs. manual ground truth
    deideval serve       run the annotation triage service

Exit codes: 0 success, 1 only-undefined metrics, 2 input error, 3 backend
error. Every artifact embeds {tool version, seed, config hash}; wall-clock
timestamps only ever go to the run.log sidecar so reruns stay byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import (
    GroundTruthLabel,
    correlate,
    ground_truth_cir,
    sample_false_positives,
    write_annotation_csv,
)
from .backends import BackendConfig, load_backend_config
from .alignment import align
from .cire import CireConfig, SplitMode, cire_score
from .corpus import read_corpus, record_to_document
from .errors import BackendError, InputError, ProtocolError
from .icd import IcdConfig, ReportScale, jsc, nsdcg, predict_codes
from .scoring import (
    ConfusionCounts,
    MatchingMode,
    SchemaConfig,
    bin_slot,
    binned_reports,
    binned_to_csv,
    classify_tokens,
    compute_metrics,
    count,
    metrics_table,
    metrics_to_json,
)
from .service import AnnotationServer, AnnotationStore
from .surrogate import SurrogateConfig, build_surrogate_text, derive_seed, map_to_json
from .textcore import tokenize

EXIT_OK = 0
EXIT_UNDEFINED = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3


def _config_hash(settings: dict) -> str:
    return hashlib.sha256(
        json.dumps(settings, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]


def _provenance(seed: int, settings: dict) -> dict:
    return {"tool_version": __version__, "seed": seed, "config_hash": _config_hash(settings)}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_meta(path: Path, provenance: dict) -> None:
    _write_json(path.with_name(path.name + ".meta.json"), {"provenance": provenance})


def _log_run(out_dir: Path, argv: list[str]) -> None:
    with (out_dir / "run.log").open("a", encoding="utf-8") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S%z')} deideval {' '.join(argv)}\n")


def _read_system_texts(path: Path) -> dict[str, str]:
    """doc_id -> de-identified text; system outputs carry no gold spans."""
    if not path.exists():
        raise InputError(f"corpus file not found: {path}")
    texts: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                texts[record["doc_id"]] = record["text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise InputError(f"{path}:{lineno}: bad record ({exc})") from None
    return texts


def _check_doc_ids(gold_ids: set, system_ids: set) -> None:
    if gold_ids != system_ids:
        only_gold = sorted(gold_ids - system_ids)[:20]
        only_system = sorted(system_ids - gold_ids)[:20]
        raise InputError(
            f"gold and system corpora disagree on doc_ids "
            f"(gold-only: {only_gold}, system-only: {only_system})"
        )


def _schema_from_args(args) -> SchemaConfig:
    mode = MatchingMode.CONSERVATIVE if args.matching == "conservative" else MatchingMode.GENEROUS
    return SchemaConfig(include_provider_pii=args.include_provider, matching_mode=mode)


def _iter_pairs(args):
    """Stream (doc, system_text) pairs after validating the doc_id sets agree.

    Gold documents are parsed one at a time (two passes over the file);
    consumers needing doc_id-ordered artifacts sort their outputs.
    """
    system_texts = _read_system_texts(Path(args.system))
    gold_ids = {doc.doc_id for doc in read_corpus(args.gold)}
    _check_doc_ids(gold_ids, set(system_texts))
    for doc in read_corpus(args.gold):
        yield doc, system_texts[doc.doc_id]


# ---------------------------------------------------------------------------
# subcommands


def cmd_score(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = _schema_from_args(args)
    edges = [int(e) for e in args.bin_edges.split(",") if e.strip()] if args.bin_edges else []
    settings = {
        "command": "score",
        "gold": args.gold,
        "system": args.system,
        "include_provider": args.include_provider,
        "matching": args.matching,
        "bin_edges": edges,
    }
    provenance = _provenance(args.seed, settings)

    def score_one(item):
        doc, system_text = item
        pair = align(doc.tokens, tokenize(system_text))
        verdicts = classify_tokens(doc, pair, schema)
        return len(doc.tokens), count(verdicts)

    pooled_bins = [ConfusionCounts() for _ in range(len(edges) + 1)]
    total = ConfusionCounts()
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        for n_tokens, counts in pool.map(score_one, _iter_pairs(args)):
            total = total + counts
            slot = bin_slot(n_tokens, edges)
            pooled_bins[slot] = pooled_bins[slot] + counts

    report = compute_metrics(total)
    payload = metrics_to_json(total, report)
    payload["provenance"] = provenance
    _write_json(out_dir / "metrics.json", payload)
    (out_dir / "metrics.txt").write_text(
        metrics_table([("corpus", total, report)]), encoding="utf-8"
    )
    _write_meta(out_dir / "metrics.txt", provenance)
    (out_dir / "binned.csv").write_text(
        binned_to_csv(binned_reports(edges, pooled_bins)), encoding="utf-8"
    )
    _write_meta(out_dir / "binned.csv", provenance)
    _log_run(out_dir, sys.argv[1:])
    print(metrics_table([("corpus", total, report)]), end="")
    return EXIT_UNDEFINED if report.all_undefined() else EXIT_OK


def _backend_config(args) -> BackendConfig:
    # The config file, when present, overrides any backend flags.
    if getattr(args, "backend_config", None):
        return load_backend_config(args.backend_config)
    cfg = BackendConfig()
    if getattr(args, "judge", None):
        cfg.judge_kind = args.judge
    if getattr(args, "judge_endpoint", None):
        cfg.judge_endpoint = args.judge_endpoint
    if getattr(args, "judge_fixture", None):
        cfg.judge_fixture = args.judge_fixture
    if getattr(args, "icd_seed", None) is not None:
        cfg.icd_seed = args.icd_seed
    return cfg


def cmd_cire(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend_cfg = _backend_config(args)
    judge = backend_cfg.build_judge()
    template = Path(args.template).read_text(encoding="utf-8") if args.template else ""
    split = SplitMode.SENTENCE if args.split_mode == "sentence" else SplitMode.FIXED_CHUNK
    cfg = CireConfig(
        judge=judge,
        chunk_size=args.chunk_size,
        split_mode=split,
        prompt_template=template,
        parallelism=args.parallel_chunks,
    )
    settings = {
        "command": "cire",
        "gold": args.gold,
        "system": args.system,
        "chunk_size": args.chunk_size,
        "split_mode": args.split_mode,
        "judge_kind": backend_cfg.judge_kind,
        "template": args.template or "<default>",
    }
    provenance = _provenance(args.seed, settings)

    def run_one(item):
        doc, system_text = item
        return cire_score(doc, system_text, cfg)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        scores = list(pool.map(run_one, _iter_pairs(args)))
    scores.sort(key=lambda s: s.doc_id)

    with (out_dir / "cire.jsonl").open("w", encoding="utf-8") as fh:
        for score in scores:
            fh.write(json.dumps(score.to_json(), sort_keys=True) + "\n")
    _write_meta(out_dir / "cire.jsonl", provenance)
    retentions = {s.doc_id: s.retention for s in scores}
    defined = [r for r in retentions.values() if r is not None]
    summary = {
        "provenance": provenance,
        "n_documents": len(scores),
        "mean_retention": sum(defined) / len(defined) if defined else None,
        "retention_by_doc": retentions,
    }
    _write_json(out_dir / "cire_summary.json", summary)
    _log_run(out_dir, sys.argv[1:])
    print(f"cire: {len(scores)} documents, mean retention {summary['mean_retention']}")
    return EXIT_OK if defined else EXIT_UNDEFINED


def cmd_icd(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    backend_cfg = _backend_config(args)
    predictor = backend_cfg.build_icd()
    scale = ReportScale.PERCENT if args.scale == "percent" else ReportScale.UNIT
    icd_cfg = IcdConfig(
        predictor=predictor, binarization_threshold=args.threshold, report_scale=scale
    )
    settings = {
        "command": "icd",
        "gold": args.gold,
        "system": args.system,
        "threshold": args.threshold,
        "scale": args.scale,
        "icd_kind": backend_cfg.icd_kind,
    }
    provenance = _provenance(args.seed, settings)

    def run_one(item):
        doc, system_text = item
        orig = predict_codes(doc.text, predictor)
        deid = predict_codes(system_text, predictor)
        return {
            "doc_id": doc.doc_id,
            "jsc": icd_cfg.scaled(jsc(orig, deid, icd_cfg)),
            "nsdcg": nsdcg(orig, deid),
        }

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(run_one, _iter_pairs(args)))
    rows.sort(key=lambda r: r["doc_id"])

    with (out_dir / "icd.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    _write_meta(out_dir / "icd.jsonl", provenance)
    summary = {
        "provenance": provenance,
        "n_documents": len(rows),
        "mean_jsc": sum(r["jsc"] for r in rows) / len(rows) if rows else None,
        "mean_nsdcg": sum(r["nsdcg"] for r in rows) / len(rows) if rows else None,
    }
    _write_json(out_dir / "icd_summary.json", summary)
    _log_run(out_dir, sys.argv[1:])
    print(f"icd: {len(rows)} documents, mean JSC {summary['mean_jsc']}")
    return EXIT_OK if rows else EXIT_UNDEFINED


def cmd_surrogate(args) -> int:
    in_path = Path(getattr(args, "in"))
    out_path = Path(args.out)
    if not in_path.exists():
        raise InputError(f"corpus file not found: {in_path}")
    map_dir = Path(args.map_dir) if args.map_dir else out_path.with_name(out_path.name + ".maps")
    map_dir.mkdir(parents=True, exist_ok=True)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    settings = {
        "command": "surrogate",
        "in": str(in_path),
        "noise_rate": args.noise_rate,
    }
    provenance = _provenance(args.seed, settings)

    n_docs = 0
    with in_path.open(encoding="utf-8") as src, out_path.open("w", encoding="utf-8") as dst:
        for lineno, line in enumerate(src, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                doc_id, text = record["doc_id"], record["text"]
            except (json.JSONDecodeError, KeyError) as exc:
                raise InputError(f"{in_path}:{lineno}: bad record ({exc})") from None
            cfg = SurrogateConfig(seed=derive_seed(args.seed, doc_id), noise_rate=args.noise_rate)
            new_text, replacements, spans = build_surrogate_text(text, cfg)
            doc = record_to_document(
                {
                    "doc_id": doc_id,
                    "text": new_text,
                    "gold_spans": [
                        {
                            "start": s.start,
                            "end": s.end,
                            "category": s.category.value,
                            "is_provider": s.is_provider,
                        }
                        for s in spans
                    ],
                },
                source=f"{in_path}:{lineno}",
            )
            dst.write(json.dumps(
                {
                    "doc_id": doc.doc_id,
                    "text": doc.text,
                    "gold_spans": [
                        {"start": s.start, "end": s.end, "category": s.category.value,
                         "is_provider": s.is_provider}
                        for s in doc.gold_spans
                    ],
                },
                ensure_ascii=False,
            ) + "\n")
            safe = "".join(c if c.isalnum() or c in "-._" else "_" for c in doc_id)
            (map_dir / f"{safe}.json").write_text(map_to_json(replacements), encoding="utf-8")
            n_docs += 1
    _write_meta(out_path, provenance)
    print(f"surrogate: wrote {n_docs} documents to {out_path}")
    return EXIT_OK


def cmd_sample_fps(args) -> int:
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    schema = _schema_from_args(args)
    settings = {
        "command": "sample-fps",
        "gold": args.gold,
        "system": args.system,
        "n": args.n,
        "include_provider": args.include_provider,
        "matching": args.matching,
    }
    provenance = _provenance(args.seed, settings)

    verdicts_by_doc = []
    for doc, system_text in _iter_pairs(args):
        pair = align(doc.tokens, tokenize(system_text))
        verdicts_by_doc.append((doc.doc_id, classify_tokens(doc, pair, schema)))
    samples = sample_false_positives(verdicts_by_doc, args.n, args.seed)
    if not samples:
        print("warning: no false positives found; wrote header-only CSV", file=sys.stderr)
    write_annotation_csv(out_path, samples)
    _write_meta(out_path, provenance)
    print(f"sample-fps: wrote {len(samples)} samples to {out_path}")
    return EXIT_OK


def _read_truth(path: Path) -> dict[str, float]:
    if not path.exists():
        raise InputError(f"truth file not found: {path}")
    truth = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                labels = [
                    GroundTruthLabel(record["doc_id"], lab["index"], bool(lab["clinically_changed"]))
                    for lab in record["labels"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"{path}:{lineno}: bad truth record ({exc})") from None
            truth[record["doc_id"]] = ground_truth_cir(labels)
    return truth


def _read_metric_file(path: Path, field: str) -> dict[str, float]:
    if not path.exists():
        raise InputError(f"metric file not found: {path}")
    metric_by_doc = {}
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            value = record.get(field)
            if value is None:
                raise InputError(
                    f"{path}: document {record.get('doc_id')} has no defined {field!r}"
                )
            metric_by_doc[record["doc_id"]] = float(value)
    return metric_by_doc


def cmd_correlate(args) -> int:
    """One report cell per metric file; the JSON keeps the grid labels
    (dataset, model) so cells from several runs assemble into a table."""
    files = args.metric_file
    fields = args.metric_field or ["retention"]
    names = args.metric_name or []
    if len(fields) == 1 and len(files) > 1:
        fields = fields * len(files)
    if len(fields) != len(files):
        raise InputError("one --metric-field per --metric-file (or a single shared one)")
    while len(names) < len(files):
        names.append(fields[len(names)])

    truth_by_doc = _read_truth(Path(args.truth))
    reports = [
        correlate(_read_metric_file(Path(f), field), truth_by_doc, metric_name=name)
        for f, field, name in zip(files, fields, names)
    ]
    settings = {
        "command": "correlate",
        "metric_files": list(files),
        "metric_fields": fields,
        "truth": args.truth,
        "dataset": args.dataset,
        "model": args.model,
    }
    payload = {
        "dataset": args.dataset,
        "model": args.model,
        "results": {r.metric: r.to_json() for r in reports},
        "provenance": _provenance(args.seed, settings),
    }
    # single-metric convenience: top-level fields mirror the one report
    if len(reports) == 1:
        payload.update(reports[0].to_json())
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out_path, payload)
    for r in reports:
        print(f"correlate[{r.metric}]: n={r.n} pearson={r.pearson_r} spearman={r.spearman_rho}")
    all_undefined = all(r.pearson_r is None and r.spearman_rho is None for r in reports)
    return EXIT_UNDEFINED if all_undefined else EXIT_OK


def cmd_serve(args) -> int:
    store = AnnotationStore(args.annotations)
    server = AnnotationServer(store, port=args.port, bind=args.bind, ui_dir=args.ui_dir)
    host, port = server.address
    print(f"serving annotations from {args.annotations} on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, out_dir=True):
    p.add_argument("--seed", type=int, default=0, help="seed recorded in artifact provenance")
    p.add_argument("--jobs", type=int, default=1, help="per-document parallelism")
    if out_dir:
        p.add_argument("--out-dir", required=True, help="artifact output directory")


def _add_pair_inputs(p):
    p.add_argument("--gold", required=True, help="gold corpus JSONL (with gold_spans)")
    p.add_argument("--system", required=True, help="system output corpus JSONL")


def _add_schema(p):
    p.add_argument("--include-provider", action="store_true",
                   help="treat provider/clinic spans as PII")
    p.add_argument("--matching", choices=["generous", "conservative"], default="generous")


def _add_backend(p):
    p.add_argument("--backend-config", help="backend config file; overrides backend flags")
    p.add_argument("--judge", choices=["oracle", "replay", "remote-chat"], default="oracle")
    p.add_argument("--judge-endpoint", help="remote-chat endpoint URL")
    p.add_argument("--judge-fixture", help="replay fixture path")
    p.add_argument("--icd-seed", type=int, default=None, help="stub predictor seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deideval", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"deideval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="token-level classification metrics")
    _add_pair_inputs(p)
    _add_schema(p)
    p.add_argument("--bin-edges", default="500,1000,2000,4000",
                   help="comma-separated token-count bin edges")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("cire", help="judge-based retention scores")
    _add_pair_inputs(p)
    _add_backend(p)
    p.add_argument("--chunk-size", type=int, default=20)
    p.add_argument("--split-mode", choices=["fixed", "sentence"], default="fixed")
    p.add_argument("--template", help="prompt template file with {original_chunk}/{deid_chunk}")
    p.add_argument("--parallel-chunks", type=int, default=1,
                   help="in-flight judge calls per document")
    _add_common(p)
    p.set_defaults(func=cmd_cire)

    p = sub.add_parser("icd", help="JSC / NSDCG code-overlap retention")
    _add_pair_inputs(p)
    _add_backend(p)
    p.add_argument("--threshold", type=float, default=0.5, help="sigmoid binarization threshold")
    p.add_argument("--scale", choices=["unit", "percent"], default="unit")
    _add_common(p)
    p.set_defaults(func=cmd_icd)

    p = sub.add_parser("surrogate", help="build a surrogate-PII corpus")
    p.add_argument("--in", required=True, help="input JSONL with [[TAG]] placeholders")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--map-dir", help="replacement-map sidecar directory")
    _add_common(p, out_dir=False)
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("sample-fps", help="sample false positives for annotation")
    _add_pair_inputs(p)
    _add_schema(p)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--out", required=True, help="annotation CSV path")
    _add_common(p, out_dir=False)
    p.set_defaults(func=cmd_sample_fps)

    p = sub.add_parser("correlate", help="correlate metric scores with ground truth")
    p.add_argument("--metric-file", required=True, action="append",
                   help="JSONL with doc_id + metric field; repeat for a multi-metric grid")
    p.add_argument("--metric-field", action="append",
                   help="field holding the score (default: retention)")
    p.add_argument("--metric-name", action="append",
                   help="label for the report cell (default: the field name)")
    p.add_argument("--truth", required=True, help="JSONL {doc_id, labels:[...]} ground truth")
    p.add_argument("--dataset", default="", help="grid row label")
    p.add_argument("--model", default="", help="grid row label")
    p.add_argument("--out", required=True, help="correlation report JSON path")
    _add_common(p, out_dir=False)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("serve", help="run the annotation triage service")
    p.add_argument("--annotations", required=True, help="annotation CSV to serve")
    p.add_argument("--port", type=int, default=8377)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument("--ui-dir", help="static directory with the built triage UI")
    _add_common(p, out_dir=False)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BackendError, ProtocolError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
