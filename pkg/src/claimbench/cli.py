"""Command-line pipeline: synth | split | summarize | index | infer | score | bootstrap | report.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 endpoint
failure (including runs where any case failed).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from claimbench import cohort, gateway, prompts, registry, report, retrieval, synthetic
from claimbench.bootstrap import BootstrapConfig, bootstrap_metrics
from claimbench.claims import format_claim
from claimbench.errors import ClaimBenchError, ConfigError, DataError, EndpointError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ENDPOINT = 0, 2, 3, 4

CORPUS_SCHEMA = """\
corpus JSONL schema (one encounter per line):
  {"id": "enc-1", "note": "operative report text", "date": "2021-03-04",
   "service": "General Surgery", "age": 54, "sex": "F",
   "claim": {"icd10": ["K21.9"],
             "providers": [{"name": "Jane Doe",
                            "lines": [{"cpt": "43239", "modifiers": ["59"],
                                       "description": "EGD with biopsy"}]}]}}
  age and sex are optional. Registry files are {year}.csv with KIND,CODE lines
  (KIND is ICD10 or CPT). The endpoint URL and model may also come from
  CLAIMBENCH_ENDPOINT / CLAIMBENCH_MODEL; the bearer token is read from
  CLAIMBENCH_API_KEY.
"""

log = logging.getLogger("claimbench")


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- commands -----------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    encounters = synthetic.make_encounters(args.n, seed=args.seed)
    cohort.write_corpus(out / "corpus.jsonl", encounters)
    synthetic.write_synthetic_registries(out / "registry", encounters)
    vecs = synthetic.hashing_embedding([e.note for e in encounters], args.dim)
    with (out / "embeddings.jsonl").open("w", encoding="utf-8") as fh:
        for rec, vec in zip(encounters, vecs):
            fh.write(json.dumps({"id": rec.id, "vector": [float(x) for x in vec]}) + "\n")
    print(f"wrote {len(encounters)} encounters, registries and embeddings to {out}")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    corpus = cohort.ingest(_require_file(args.corpus, "corpus"))
    spec = cohort.SplitSpec(balance_key=args.balance_key, seed=args.seed)
    result = cohort.split(corpus, spec)
    payload = result.to_dict()
    payload["corpus_digest"] = corpus.source_digest
    _write(Path(args.out), json.dumps(payload, indent=1) + "\n")
    print(
        f"train={len(result.train)} validation={len(result.validation)} "
        f"test={len(result.test)} strata={len(result.strata)}"
    )
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    corpus = cohort.ingest(_require_file(args.corpus, "corpus"))
    out = Path(args.out_dir)
    summary = cohort.summarize(corpus)
    counts = cohort.load_token_counts(args.token_counts) if args.token_counts else None
    stats = cohort.token_stats(corpus, counts=counts, bins=args.bins)
    _write(out / "summary.csv", summary.to_csv())
    _write(out / "summary.txt", summary.to_text())
    _write(out / "token_stats.json", json.dumps(stats.to_dict(), indent=1) + "\n")
    sys.stdout.write(summary.to_text())
    return EXIT_OK


def _vectors_for(ids: Sequence[str], corpus, args: argparse.Namespace) -> dict[str, np.ndarray]:
    if args.embeddings:
        table = retrieval.load_embeddings(_require_file(args.embeddings, "embeddings"), args.dim)
        missing = [i for i in ids if i not in table]
        if missing:
            raise DataError(f"no embedding for {len(missing)} encounters, e.g. {missing[0]!r}")
        return {i: table[i] for i in ids}
    if not args.embed_endpoint:
        raise ConfigError("need --embeddings or --embed-endpoint")
    endpoint = gateway.EndpointConfig(args.embed_endpoint, model=args.embed_model, embedding_dim=args.dim)
    vecs = gateway.embed([corpus[i].note for i in ids], endpoint)
    return dict(zip(ids, vecs))


def _load_split(args: argparse.Namespace) -> cohort.Split:
    return cohort.Split.load(_require_file(args.split, "split"))


def cmd_index(args: argparse.Namespace) -> int:
    corpus = cohort.ingest(_require_file(args.corpus, "corpus"))
    split = _load_split(args)
    ids = list(split.train)
    vectors = _vectors_for(ids, corpus, args)
    dim = args.dim or len(next(iter(vectors.values())))
    index = retrieval.build_index(
        ((vectors[i], {"id": i, "claim": format_claim(corpus[i].claim)}) for i in ids), dim
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    print(f"indexed {len(index)} training notes (dim {index.dim}) at {out.with_suffix('.bin')}")
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    corpus = cohort.ingest(_require_file(args.corpus, "corpus"))
    split = _load_split(args)
    ids = corpus.ids if args.subset == "all" else list(getattr(split, args.subset))
    templates = prompts.load_templates(args.template_dir)
    endpoint = gateway.EndpointConfig.from_env(
        base_url=args.endpoint,
        model=args.model,
        timeout=args.timeout,
        retry=gateway.RetryPolicy(max_attempts=args.max_attempts),
    )
    params = gateway.GenerationParams(
        max_new_tokens=args.max_new_tokens, repetition_penalty=args.repetition_penalty
    )
    metadata = {
        "variant": args.variant,
        "corpus_digest": corpus.source_digest,
        "split_seed": split.spec.seed,
        "subset": args.subset,
        "templates_digest": _digest(json.dumps(dict(templates.templates), sort_keys=True)),
    }
    contexts: dict[str, prompts.RagContext] = {}
    if args.variant == "rag":
        index = retrieval.VectorIndex.load(_require_file(str(Path(args.index).with_suffix(".bin")), "index"))
        queries = _vectors_for(ids, corpus, args)
        for eid in ids:
            hits = retrieval.search(index, queries[eid], args.k)
            contexts[eid] = prompts.RagContext(tuple(h.metadata["claim"] for h in hits))
        metadata["k"] = args.k
        metadata["index_digest"] = _digest(
            hashlib.sha256(index.vectors.tobytes()).hexdigest()
            + json.dumps(index.metadata, sort_keys=True)
        )
    # every prompt is built before any request goes out
    all_prompts = {
        eid: prompts.build_inference_prompt(
            corpus[eid].note, args.variant, contexts.get(eid), templates, k=args.k
        )
        for eid in ids
    }
    manifest = gateway.run_evaluation(
        all_prompts, endpoint, params, workers=args.workers, run_dir=args.out, metadata=metadata
    )
    failed = manifest.errors()
    print(f"run {manifest.run_id}: {len(manifest.cases) - len(failed)} ok, {len(failed)} failed -> {args.out}")
    for case in failed[:5]:
        print(f"  {case.encounter_id}: {case.error['kind']}: {case.error['message']}", file=sys.stderr)
    return EXIT_ENDPOINT if failed else EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    corpus = cohort.ingest(_require_file(args.corpus, "corpus"))
    registries = registry.load_registry_dir(_require_file(args.registry_dir, "registry-dir"))
    manifest = gateway.RunManifest.load(_require_file(args.run, "run"))
    synonyms = None
    if args.synonyms:
        synonyms = json.loads(_require_file(args.synonyms, "synonyms").read_text(encoding="utf-8"))
    rep = report.score_run(
        manifest, corpus, registries, args.label, args.errors_as_misses, synonyms
    )
    _write(Path(args.out), rep.to_json())
    sys.stdout.write(report.render_text([rep]))
    return EXIT_OK


def cmd_bootstrap(args: argparse.Namespace) -> int:
    rep = report.EvalReport.load(_require_file(args.scores, "scores"))
    config = BootstrapConfig(args.iterations, args.sample_size, args.seed)
    result = bootstrap_metrics(report.case_scores(rep), config, workers=args.workers)
    out = Path(args.out)
    _write(out.with_suffix(".json"), json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n")
    _write(out.with_suffix(".csv"), result.to_csv(rep.label))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    reports = [report.EvalReport.load(_require_file(p, "scores")) for p in args.scores]
    if args.bootstrap:
        if len(args.bootstrap) != len(reports):
            raise ConfigError("give one --bootstrap file per --scores file")
        reports = [
            report.EvalReport(
                r.label,
                r.cases,
                r.n_errors,
                r.provenance,
                {k: v for k, v in json.loads(_require_file(b, "bootstrap").read_text()).items()
                 if k != "distributions"},
            )
            for r, b in zip(reports, args.bootstrap)
        ]
    out = Path(args.out_dir)
    _write(out / "report.csv", report.render_csv(reports))
    _write(out / "report.txt", report.render_text(reports))
    _write(
        out / "report.json",
        json.dumps({r.label: {k: v for k, v in r.to_dict().items() if k != "cases"} for r in reports},
                   indent=1, sort_keys=True) + "\n",
    )
    sys.stdout.write(report.render_text(reports))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_embedding_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", help="JSONL of {id, vector[]} covering the needed notes")
    p.add_argument("--embed-endpoint", help="embedding service base URL (alternative to --embeddings)")
    p.add_argument("--embed-model", default="default")
    p.add_argument("--dim", type=int, default=None, help="embedding dimensionality")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="claimbench",
        description="Benchmark LLM-generated surgical billing claims against coder ground truth.",
        epilog=CORPUS_SCHEMA,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus, registries and embeddings")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=retrieval.DEFAULT_DIM)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="60/20/20 split balanced across encounter date",
                       epilog=CORPUS_SCHEMA, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balance-key", default="month", choices=["month", "year", "day", "none"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("summarize", help="cohort table and note token-length statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--token-counts", help="sidecar of precomputed token counts (JSONL or CSV)")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("index", help="build the flat retrieval index from training notes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    _add_embedding_args(p)
    p.add_argument("--out", required=True, help="index path prefix (writes .bin and .meta.jsonl)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("infer", help="generate claims for a split subset through the endpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--subset", default="test", choices=["train", "validation", "test", "all"],
                   help="which encounters to run; 'all' ignores the split (smoke tests)")
    p.add_argument("--variant", required=True, choices=list(prompts.VARIANTS))
    p.add_argument("--endpoint", help="completion service base URL (or CLAIMBENCH_ENDPOINT)")
    p.add_argument("--model", help="model identifier sent to the endpoint")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--max-new-tokens", type=int, default=512)
    p.add_argument("--repetition-penalty", type=float, default=1.1)
    p.add_argument("--template-dir")
    p.add_argument("--index", help="index path prefix (rag variant)")
    p.add_argument("--k", type=int, default=2)
    _add_embedding_args(p)
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("score", help="score a stored run (no network)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--registry-dir", required=True)
    p.add_argument("--label")
    p.add_argument("--errors-as-misses", action="store_true")
    p.add_argument("--synonyms", help="JSON {word: [synonyms]} for the METEOR synonym stage")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("bootstrap", help="bootstrap mean precision/recall")
    p.add_argument("--scores", required=True)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--sample-size", type=int, default=None, help="defaults to the number of cases")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix (writes .json and .csv)")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("report", help="results table for one or more scored runs")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--bootstrap", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"claimbench {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EndpointError as exc:
        print(f"claimbench {args.command}: endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (DataError, ClaimBenchError) as exc:
        print(f"claimbench {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, json.JSONDecodeError) as exc:
        print(f"claimbench {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
