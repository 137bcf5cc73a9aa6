"""Command-line entry point: ``neon <stage> ...``.

Each stage reads and writes files only, so any stage can be rerun on its own.
Flags override the matching config values. On failure a one-line JSON report
``{"error", "stage", "message"}`` goes to stderr and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import corpus, datastore, evaluation, graph, qa, querylog
from .config import PipelineConfig, load_config
from .dates import format_datestamp, parse_datestamp
from .errors import ConfigError, MissingInput, NeonError, ProviderFailure
from .providers import HashingEmbedder, HttpEmbedder, HttpLlmClient, RecordingLlm, ReplayLlm

log = logging.getLogger("neon")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_PROVIDER = 4
EXIT_DATA = 5


def _require(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInput(f"input not found: {p}")
    return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def make_llm(cfg: PipelineConfig, mock: bool):
    if mock:
        from .mock import RuleBasedLlm
        return RuleBasedLlm()
    p = cfg.providers
    if p.cassette:
        return ReplayLlm(_require(p.cassette))
    if not p.llm_endpoint or not p.llm_model:
        raise ConfigError("providers.llm_endpoint and providers.llm_model are required without --mock-providers")
    client = HttpLlmClient(p.llm_endpoint, p.llm_model, api_key_env=p.api_key_env,
                           attempts=cfg.extraction.retries, timeout=p.timeout, rate_limit=p.rate_limit)
    return RecordingLlm(client, p.record) if p.record else client


def make_embedder(cfg: PipelineConfig, mock: bool):
    p = cfg.providers
    if mock or p.embedder == "mock":
        return HashingEmbedder(p.embed_dimension)
    if not p.embed_endpoint or not p.embed_model:
        raise ConfigError("providers.embed_endpoint and providers.embed_model are required for the http embedder")
    return HttpEmbedder(p.embed_endpoint, p.embed_model, p.embed_dimension,
                        api_key_env=p.api_key_env, timeout=p.timeout)


# -- stages -----------------------------------------------------------------

def cmd_ingest(args, cfg: PipelineConfig, mock: bool) -> dict:
    m = args.m if args.m is not None else cfg.chunking.m
    stride = args.stride if args.stride is not None else cfg.chunking.stride
    threshold = args.threshold if args.threshold is not None else cfg.dedup.threshold
    if not 1 <= stride <= m:
        raise ConfigError(f"stride {stride} must lie in [1, m={m}]")
    chunks, stats = corpus.ingest(corpus.read_jsonl(_require(args.input)), m, stride, threshold,
                                  cfg.dedup.window_days)
    corpus.write_chunks(args.output, chunks)
    return {"articles": stats.articles, "sentences": stats.sentences, "chunks": stats.chunks,
            "retained": stats.retained}


def cmd_extract(args, cfg: PipelineConfig, mock: bool) -> dict:
    ec = cfg.extraction
    variant = (args.variant or ec.variant).upper()
    chunks = corpus.read_chunks(_require(args.chunks))
    subjects = args.subject or ec.subjects or sorted({e for c in chunks for e in c.entities})
    parallelism = args.parallelism or ec.parallelism
    llm = make_llm(cfg, mock)
    temperature = cfg.providers.temperature
    if variant == graph.M1:
        kg, metrics = graph.extract_m1(subjects, chunks, llm, parallelism=parallelism, temperature=temperature)
    else:
        pairs = graph.select_target_pairs(chunks, subjects, args.top_p or ec.top_p)
        kg, metrics = graph.extract_m2(pairs, chunks, llm, args.k_batch or ec.k_batch,
                                       parallelism=parallelism, temperature=temperature)
    if metrics.prompts and len(metrics.failures) == metrics.prompts:
        raise ProviderFailure(f"all {metrics.prompts} extraction calls failed; first: {metrics.failures[0]['error']}")
    graph.write_graph(args.output, kg, metrics)
    return {"variant": variant, **metrics.to_json(), "interactions": len(kg.interactions)}


def _detect_kind(path: Path) -> str:
    for obj in corpus.read_jsonl(path):
        if "sentences" in obj:
            return "chunks"
        if "subject" in obj:
            return "graph"
        break
    raise ConfigError(f"cannot tell whether {path} holds chunks or a graph; pass --kind")


def cmd_index(args, cfg: PipelineConfig, mock: bool) -> dict:
    src = _require(args.input)
    kind = args.kind if args.kind != "auto" else _detect_kind(src)
    if kind == "chunks":
        items = corpus.read_chunks(src)
        label = args.label or "newsrag"
    else:
        kg = graph.read_graph(src)
        items = kg.interactions
        variants = sorted({i.variant for i in items})
        label = args.label or ("neon-" + variants[0].lower() if len(variants) == 1 else "neon")
    store = datastore.index(items, make_embedder(cfg, mock), label)
    datastore.save(store, args.output)
    return {"kind": kind, "label": label, "entries": len(store), "embed_failures": store.embed_failures}


def _load_linker(path: str | None):
    if not path:
        return None
    return qa.DictionaryLinker(json.loads(_require(path).read_text("utf-8")))


def cmd_query(args, cfg: PipelineConfig, mock: bool) -> dict:
    rc = cfg.retrieval
    store_dir = _require(args.store)
    store = datastore.load(store_dir)
    if args.queries:
        queries = list(corpus.read_jsonl(_require(args.queries)))
    elif args.text and args.date:
        queries = [{"query": args.text, "date": args.date}]
    else:
        raise ConfigError("query needs --queries FILE or both --text and --date")
    chunk_store = bool(store.entries) and isinstance(store.entries[0].payload, corpus.Chunk)
    k = args.k or rc.k or (qa.DEFAULT_K_CHUNKS if chunk_store else qa.DEFAULT_K_INTERACTIONS)
    r = args.r if args.r is not None else rc.r
    strategy = args.strategy or rc.strategy
    method = args.method or store.label
    linker = _load_linker(args.linker)
    llm, embedder = make_llm(cfg, mock), make_embedder(cfg, mock)
    records = []
    for n, q in enumerate(queries):
        tq = qa.reformulate(q["query"], parse_datestamp(q["date"]), linker)
        resp = qa.answer(tq, store, strategy, k, r, llm, embedder,
                         temperature=cfg.providers.temperature, max_tokens=cfg.providers.max_tokens)
        records.append(resp.to_json(method, str(q.get("id", n))))
    out = corpus.write_jsonl(args.output, records) if args.output else None
    if out is None:
        for rec in records:
            print(json.dumps(rec, ensure_ascii=False, sort_keys=True))
    return {"queries": len(records), "strategy": strategy, "k": k, "r": r, "method": method}


def cmd_eval(args, cfg: PipelineConfig, mock: bool) -> dict:
    ev = cfg.eval
    mode = args.mode or ev.mode
    attributes = evaluation.resolve_attributes(args.attribute or ev.attribute)
    items = list(corpus.read_jsonl(_require(args.answers)))
    examples = args.examples or ev.examples_path
    records = evaluation.judge_items(items, make_llm(cfg, mock), mode, attributes,
                                     _require(examples) if examples else None, ev.parallelism)
    if records and all(r.error for r in records):
        raise ProviderFailure(f"every judge call failed; first: {records[0].error}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus.write_jsonl(out / "ratings.jsonl", (r.to_json() for r in records))
    report = evaluation.aggregate(records, clamp=args.clamp or ev.clamp)
    _write_json(out / "report.json", report.to_json())
    (out / "report.txt").write_text(report.to_table() + "\n", encoding="utf-8")
    (out / "lengths.txt").write_text(evaluation.length_table(evaluation.length_stats(records)) + "\n",
                                     encoding="utf-8")
    return {"items": len(items), "judge_calls": len(records),
            "flagged": sum(1 for r in records if r.rating and r.rating.flagged),
            "errors": sum(1 for r in records if r.error)}


def cmd_spikes(args, cfg: PipelineConfig, mock: bool) -> dict:
    qc = cfg.querylog
    window = args.window or qc.window
    min_users = args.min_users if args.min_users is not None else qc.min_users
    series = querylog.series_from_rows(querylog.read_log_rows(_require(args.input)), min_users)
    result, skipped = {}, []
    for entity, s in series.items():
        if len(s.points) < window:
            skipped.append(entity)
            continue
        result[entity] = [format_datestamp(d) for d in querylog.detect_spikes(s, window)]
    if args.output:
        _write_json(Path(args.output), result)
    else:
        print(json.dumps(result, indent=2, sort_keys=True))
    return {"entities": len(result), "skipped_short": skipped}


STAGES = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "index": cmd_index,
    "query": cmd_query,
    "eval": cmd_eval,
    "spikes": cmd_spikes,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neon", description="Timestamped entity-interaction pipeline for temporal QA.")
    ap.add_argument("--config", help="pipeline config (JSON)")
    ap.add_argument("--mock-providers", action="store_true", help="use the offline deterministic LLM and embedder")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("ingest", help="articles -> deduplicated chunks")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("extract", help="chunks -> interaction graph")
    p.add_argument("--variant", choices=("m1", "m2"))
    p.add_argument("--chunks", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--subject", action="append", help="subject entity id (repeatable)")
    p.add_argument("--k-batch", type=int)
    p.add_argument("--top-p", type=int)
    p.add_argument("--parallelism", type=int)

    p = sub.add_parser("index", help="graph or chunks -> datastore directory")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", choices=("auto", "graph", "chunks"), default="auto")
    p.add_argument("--label")

    p = sub.add_parser("query", help="questions -> grounded answers")
    p.add_argument("--store", required=True)
    p.add_argument("--queries")
    p.add_argument("--text")
    p.add_argument("--date", help="query date, YYYYMMDD")
    p.add_argument("--output")
    p.add_argument("--strategy", choices=qa.STRATEGIES)
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--linker", help="JSON map of surface form -> canonical name")
    p.add_argument("--method", help="label recorded with each answer (default: store label)")

    p = sub.add_parser("eval", help="answers -> judge ratings and report")
    p.add_argument("--answers", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--attribute", choices=("all", "h", "r", "f"))
    p.add_argument("--mode", choices=("zero", "few"))
    p.add_argument("--examples", help="directory of in-context examples")
    p.add_argument("--clamp", action="store_true", help="clamp out-of-range ratings instead of excluding them")

    p = sub.add_parser("spikes", help="query logs -> spiking dates per entity")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--window", type=int)
    p.add_argument("--min-users", type=int)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (MissingInput, FileNotFoundError)):
        return EXIT_MISSING
    if isinstance(exc, ProviderFailure):
        return EXIT_PROVIDER
    if isinstance(exc, (NeonError, ValueError, KeyError)):
        return EXIT_DATA
    return EXIT_ERROR


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        mock = args.mock_providers or cfg.providers.mock
        if getattr(args, "output", None):
            Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        summary = STAGES[args.stage](args, cfg, mock)
    except Exception as exc:
        report = {"error": type(exc).__name__, "stage": args.stage, "message": str(exc)}
        print(json.dumps(report, ensure_ascii=False), file=sys.stderr)
        log.debug("stage failed", exc_info=True)
        return _exit_code(exc)
    log.info("%s: %s", args.stage, json.dumps(summary, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
