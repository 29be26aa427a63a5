"""Command-line entry point.

Phases are separate subcommands with an on-disk handoff (``sequences.jsonl``
then ``rankings.jsonl`` then ``pairs.jsonl`` + reports inside ``--out``), so
expensive generation can be cached once and re-scored freely:

* ``generate``  — phase one, write generation sequences
* ``rank``      — phase two by prompting
* ``prob-rank`` — phase two by token probability
* ``score``     — phase three, metrics + aggregate + confusion matrix
* ``baseline``  — the random chance floor
* ``report``    — re-render stored aggregates, emit mode deltas

Exit codes: 0 success, 1 run failure, 2 usage error. Failures print one
machine-readable JSON line on stderr. The API key for HTTP backends is read
from the environment only (see ``epicon.backends.API_KEY_ENV_VAR``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import backends as backends_mod
from .core import RankedPermutation, dataset_digest, load_pairs
from .errors import EpiconError, InapplicableConjunction
from .pipeline import (
    PROMPT_MODE,
    ConfusionMatrix,
    RunConfig,
    RunMode,
    aggregate,
    confusion_matrix,
    evaluate_pair,
    phase_generate,
    phase_rank,
    random_baseline,
    read_jsonl,
    sequence_from_record,
    sequence_record,
    write_jsonl,
)
from .probscore import CONJUNCTIONS, ScoreKind, conjunction_template
from .report import emit_aggregate, emit_confusion, emit_delta, load_aggregate_json

CONJUNCTION_CHOICES = sorted(CONJUNCTIONS) + ["for"]


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", help="JSONL dataset of cause-effect pairs")
    parser.add_argument(
        "--backend",
        choices=("http", "replay", "random"),
        default="replay",
        help="model access: live server, recorded payloads, or scripted random",
    )
    parser.add_argument("--base-url", default="http://127.0.0.1:8000", help="http backend URL")
    parser.add_argument("--model", default="", help="model name (keys the cache)")
    parser.add_argument("--cache-dir", help="record store; replay reads it, other backends append")
    parser.add_argument("--workers", type=int, default=4, help="concurrent pairs in flight")
    parser.add_argument("--seed", type=int, default=0, help="run seed (presentation shuffles)")
    parser.add_argument("--out", default="run", help="run artifact directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epicon",
        description="Measure how consistently a model ranks its own causal intermediates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_generate = sub.add_parser("generate", help="phase one: generate intermediates")
    _shared_flags(p_generate)
    p_generate.add_argument("--retries", type=int, default=3, help="retries per prompt")
    p_generate.add_argument("--max-tokens", type=int, default=512)

    p_rank = sub.add_parser("rank", help="phase two: rank by prompting")
    _shared_flags(p_rank)
    p_rank.add_argument("--sequences", help="sequences file (default <out>/sequences.jsonl)")
    p_rank.add_argument("--retries", type=int, default=3)
    p_rank.add_argument("--max-tokens", type=int, default=512)

    p_prob = sub.add_parser("prob-rank", help="phase two: rank by token probability")
    _shared_flags(p_prob)
    p_prob.add_argument("--sequences", help="sequences file (default <out>/sequences.jsonl)")
    p_prob.add_argument("--conjunction", required=True, choices=CONJUNCTION_CHOICES)
    p_prob.add_argument(
        "--score-kind",
        default=ScoreKind.CAUSAL_STRENGTH.value,
        choices=[kind.value for kind in ScoreKind],
    )
    p_prob.add_argument("--domain-context", default="", help="domain string for pmi-dc")

    p_score = sub.add_parser("score", help="phase three: metrics and reports")
    _shared_flags(p_score)
    p_score.add_argument("--sequences", help="sequences file (default <out>/sequences.jsonl)")
    p_score.add_argument("--rankings", help="rankings file (default <out>/rankings.jsonl)")

    p_base = sub.add_parser("baseline", help="random-ranking chance floor")
    _shared_flags(p_base)
    p_base.add_argument("--samples", type=int, default=100_000)
    p_base.add_argument("--defeaters", type=int, default=5, dest="m")
    p_base.add_argument("--supporters", type=int, default=5, dest="n")

    p_report = sub.add_parser("report", help="re-render stored aggregates and deltas")
    p_report.add_argument("--run", help="run directory holding aggregate.json")
    p_report.add_argument("--format", default="markdown", choices=("csv", "json", "markdown"))
    p_report.add_argument("--out", help="output directory (default: the run directory)")
    p_report.add_argument("--prompt-run", help="prompt-mode run directory for deltas")
    p_report.add_argument(
        "--prob-run",
        action="append",
        default=[],
        metavar="CONJ=DIR",
        help="probability-mode run per conjunction (repeatable)",
    )
    return parser


def _model_name(args) -> str:
    if args.model:
        return args.model
    return "random" if args.backend == "random" else "model"


def _build_backend(args, parser: argparse.ArgumentParser):
    store = None
    if args.cache_dir:
        store = backends_mod.JsonlStore(Path(args.cache_dir) / "records.jsonl")
    if args.backend == "replay":
        if not args.cache_dir:
            parser.error("--backend replay requires --cache-dir with recorded payloads")
        return backends_mod.ReplayBackend(args.cache_dir)
    if args.backend == "random":
        inner = backends_mod.ScriptedRandomBackend(seed=args.seed)
    else:
        inner = backends_mod.HttpBackend(base_url=args.base_url)
    if store is not None:
        return backends_mod.cached(inner, store)
    return inner


def _config(args) -> RunConfig:
    return RunConfig(
        model_name=_model_name(args),
        seed=args.seed,
        workers=args.workers,
        generation_retries=getattr(args, "retries", 3),
        max_tokens=getattr(args, "max_tokens", 512),
        domain_context=getattr(args, "domain_context", ""),
    )


def _require_dataset(args, parser) -> list:
    if not args.dataset:
        parser.error(f"{args.command} requires --dataset")
    return load_pairs(args.dataset)


def _write_meta(out: Path, args, extra: dict) -> None:
    meta_path = out / "run_meta.json"
    meta = {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta.update(
        {
            "model": _model_name(args),
            "backend": args.backend,
            "seed": args.seed,
            "workers": args.workers,
        }
    )
    if args.dataset:
        meta["dataset"] = str(args.dataset)
        meta["dataset_digest"] = dataset_digest(args.dataset)
    meta.update(extra)
    out.mkdir(parents=True, exist_ok=True)
    meta_path.write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _load_sequences(path: Path):
    records = {}
    for record in read_jsonl(path):
        records[str(record["pair_id"])] = record
    return records


def cmd_generate(args, parser) -> int:
    pairs = _require_dataset(args, parser)
    backend = _build_backend(args, parser)
    out = Path(args.out)
    results = phase_generate(pairs, backend, _config(args))
    records = []
    generated = 0
    for pair_id, seq, error in results:
        if error is None:
            generated += 1
            records.append(sequence_record(seq))
        else:
            records.append(
                {"pair_id": pair_id, "failure": type(error).__name__, "detail": str(error)}
            )
    write_jsonl(out / "sequences.jsonl", records)
    _write_meta(out, args, {"phase_generate": {"generated": generated, "failed": len(pairs) - generated}})
    print(f"generated {generated}/{len(pairs)} sequences -> {out / 'sequences.jsonl'}")
    return 0 if generated else 1


def _rank_common(args, parser, mode: RunMode) -> int:
    pairs = _require_dataset(args, parser)
    backend = _build_backend(args, parser)
    out = Path(args.out)
    sequences_path = Path(args.sequences) if args.sequences else out / "sequences.jsonl"
    stored = _load_sequences(sequences_path)
    records = []
    ready = []
    for pair in pairs:
        record = stored.get(pair.id)
        if record is None or "failure" in record:
            kind = record["failure"] if record else "MissingSequence"
            records.append({"pair_id": pair.id, "failure": kind, "mode": mode.describe()})
            continue
        ready.append((pair.id, sequence_from_record(record)))
    ranked_rows = phase_rank(pairs, ready, backend, _config(args), mode)
    ranked_count = 0
    for pair_id, perm, presentation, scores, error in ranked_rows:
        if error is not None:
            records.append(
                {
                    "pair_id": pair_id,
                    "failure": type(error).__name__,
                    "detail": str(error),
                    "mode": mode.describe(),
                }
            )
            continue
        ranked_count += 1
        row = {"pair_id": pair_id, "order": list(perm.order), "mode": mode.describe()}
        if presentation is not None:
            row["presentation"] = list(presentation.shuffled_indices)
            row["seed"] = presentation.seed
        if scores is not None:
            row["scores"] = scores
        records.append(row)
    order_index = {pair.id: i for i, pair in enumerate(pairs)}
    records.sort(key=lambda r: order_index[str(r["pair_id"])])
    write_jsonl(out / "rankings.jsonl", records)
    _write_meta(
        out,
        args,
        {"phase_rank": {"mode": mode.describe(), "ranked": ranked_count, "failed": len(pairs) - ranked_count}},
    )
    print(f"ranked {ranked_count}/{len(pairs)} pairs ({mode.describe()}) -> {out / 'rankings.jsonl'}")
    return 0 if ranked_count else 1


def cmd_rank(args, parser) -> int:
    return _rank_common(args, parser, PROMPT_MODE)


def cmd_prob_rank(args, parser) -> int:
    conjunction_template(args.conjunction)  # raises for effect-first words
    mode = RunMode(
        kind="prob",
        conjunction=args.conjunction,
        score_kind=ScoreKind(args.score_kind),
    )
    return _rank_common(args, parser, mode)


def cmd_score(args, parser) -> int:
    pairs = _require_dataset(args, parser)
    out = Path(args.out)
    sequences_path = Path(args.sequences) if args.sequences else out / "sequences.jsonl"
    rankings_path = Path(args.rankings) if args.rankings else out / "rankings.jsonl"
    sequences = _load_sequences(sequences_path)
    rankings = {str(r["pair_id"]): r for r in read_jsonl(rankings_path)}
    mode = PROMPT_MODE
    for record in rankings.values():
        described = str(record.get("mode", "prompt"))
        if described.startswith("prob:"):
            _, conjunction, kind = described.split(":", 2)
            mode = RunMode(kind="prob", conjunction=conjunction, score_kind=ScoreKind(kind))
        break
    results = []
    for pair in pairs:
        seq_rec = sequences.get(pair.id)
        if seq_rec is None or "failure" in seq_rec:
            kind = seq_rec["failure"] if seq_rec else "MissingSequence"
            results.append(evaluate_pair(pair.id, mode, None, None, failure=kind))
            continue
        seq = sequence_from_record(seq_rec)
        rank_rec = rankings.get(pair.id)
        if rank_rec is None or "order" not in rank_rec:
            kind = rank_rec.get("failure", "MissingRanking") if rank_rec else "MissingRanking"
            detail = rank_rec.get("detail", "") if rank_rec else ""
            results.append(
                evaluate_pair(pair.id, mode, seq, None, failure=kind, failure_detail=detail)
            )
            continue
        ranked = RankedPermutation(pair_id=pair.id, order=tuple(rank_rec["order"]))
        results.append(evaluate_pair(pair.id, mode, seq, ranked))

    metadata = {
        "model": _model_name(args),
        "seed": args.seed,
        "mode": mode.describe(),
        "dataset_digest": dataset_digest(args.dataset),
    }
    if mode.kind == "prob":
        metadata["conjunction"] = mode.conjunction
        metadata["score_kind"] = mode.score_kind.value
    report = aggregate(results, metadata=metadata)
    pair_rows = []
    for result in results:
        row = {"pair_id": result.pair_id, "mode": result.mode.describe()}
        if result.bundle is not None:
            row["bundle"] = result.bundle.as_dict()
            row["order"] = list(result.ranked.order)
        else:
            row["failure"] = result.failure
            if result.failure_detail:
                row["detail"] = result.failure_detail
        pair_rows.append(row)
    write_jsonl(out / "pairs.jsonl", pair_rows)
    emit_aggregate(report, "json", out / "aggregate.json")
    emit_aggregate(report, "csv", out / "aggregate.csv")
    matrix = confusion_matrix(results)
    (out / "confusion.json").write_text(
        json.dumps(
            {"labels": list(matrix.labels), "counts": [list(r) for r in matrix.counts]},
            ensure_ascii=False,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    emit_confusion(matrix, out / "confusion.csv")
    _write_meta(out, args, {"phase_score": {"scored": report.scored, "failed": report.failed}})
    _print_summary(report)
    return 0


def _print_summary(report) -> None:
    for name in ("tau_supporters", "tau_defeaters", "tau_all", "cgp", "igc"):
        stat = report.metrics[name]
        if stat.count == 0:
            print(f"{name} n/a (n=0)")
        else:
            print(f"{name} {stat.mean:.3f} ± {stat.std:.3f} (n={stat.count})")
    print(f"scored {report.scored} failed {report.failed}")


def cmd_baseline(args, parser) -> int:
    out = Path(args.out)
    report = random_baseline(args.samples, seed=args.seed, m=args.m, n=args.n)
    emit_aggregate(report, "json", out / "aggregate.json")
    emit_aggregate(report, "csv", out / "aggregate.csv")
    _print_summary(report)
    return 0


def cmd_report(args, parser) -> int:
    wrote_anything = False
    if args.run:
        run = Path(args.run)
        out = Path(args.out) if args.out else run
        report = load_aggregate_json(run / "aggregate.json")
        suffix = {"csv": "csv", "json": "json", "markdown": "md"}[args.format]
        emit_aggregate(report, args.format, out / f"aggregate.{suffix}")
        confusion_path = run / "confusion.json"
        if confusion_path.exists():
            stored = json.loads(confusion_path.read_text(encoding="utf-8"))
            counts = [tuple(row) for row in stored["counts"]]
            percentages = tuple(
                tuple(100.0 * cell / sum(row) for cell in row) for row in counts
            )
            matrix = ConfusionMatrix(
                labels=tuple(stored["labels"]),
                counts=tuple(counts),
                percentages=percentages,
            )
            emit_confusion(matrix, out / "confusion.csv")
        wrote_anything = True
    if args.prob_run:
        if not args.prompt_run:
            parser.error("--prob-run requires --prompt-run for the delta baseline")
        prompt_report = load_aggregate_json(Path(args.prompt_run) / "aggregate.json")
        prob_reports = {}
        for item in args.prob_run:
            if "=" not in item:
                parser.error(f"--prob-run expects CONJ=DIR, got {item!r}")
            conjunction, directory = item.split("=", 1)
            prob_reports[conjunction] = load_aggregate_json(Path(directory) / "aggregate.json")
        out = Path(args.out) if args.out else Path(args.prompt_run)
        emit_delta(prompt_report, prob_reports, out / "delta.csv")
        wrote_anything = True
    if not wrote_anything:
        parser.error("report needs --run and/or --prob-run inputs")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "rank": cmd_rank,
    "prob-rank": cmd_prob_rank,
    "score": cmd_score,
    "baseline": cmd_baseline,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = COMMANDS[args.command]
    try:
        return handler(args, parser)
    except InapplicableConjunction as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 2
    except EpiconError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "IoFailure", "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
