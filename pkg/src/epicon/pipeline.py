"""Batch orchestration: generate, rank, evaluate, aggregate.

A run walks each cause-effect pair through up to three phases — generating
the intermediates, ranking them (by prompting or by token probability),
and scoring the ranking against the generation order. Failures never abort
a run; a pair that cannot be parsed or ranked is dropped and counted, and
``scored + failed`` always equals the dataset size.

Pairs are processed by a bounded worker pool; each pair's phases run
sequentially and all aggregation happens single-threaded afterwards.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ChatRequest
from .core import (
    CauseEffectPair,
    GenerationSequence,
    Intermediate,
    Polarity,
    PresentationOrder,
    RankedPermutation,
    presentation_order,
    validate_sequence,
)
from .errors import (
    EpiconError,
    GenerationFailed,
    InvariantViolation,
    NothingScored,
    RankingFailed,
    ScoringFailed,
)
from .extraction import (
    apply_presentation,
    assemble_sequence,
    parse_generated_pair,
    parse_ranking,
)
from .metrics import MetricBundle, metric_bundle
from .probscore import (
    ScoreKind,
    avg_conditional_prob,
    causal_strength,
    combine_events,
    conjunction_template,
    pmi_dc,
    rank_by_score,
    render_template,
)
from .prompts import build_generation_prompt, build_ranking_prompt


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared by all phases of a run."""

    model_name: str = "unspecified"
    seed: int = 0
    workers: int = 4
    generation_retries: int = 3
    max_tokens: int = 512
    words: int | None = None
    domain_context: str = ""


@dataclass(frozen=True)
class RunMode:
    """How the ranking was obtained: by prompting or by token probability."""

    kind: str  # "prompt" or "prob"
    conjunction: str | None = None
    score_kind: ScoreKind | None = None

    def describe(self) -> str:
        if self.kind == "prompt":
            return "prompt"
        return f"prob:{self.conjunction}:{self.score_kind.value}"


PROMPT_MODE = RunMode(kind="prompt")


@dataclass(frozen=True)
class PairResult:
    """Outcome for one pair: either a scored bundle or a counted failure."""

    pair_id: str
    mode: RunMode
    sequence: GenerationSequence | None = None
    ranked: RankedPermutation | None = None
    bundle: MetricBundle | None = None
    failure: str | None = None
    failure_detail: str = ""

    def __post_init__(self) -> None:
        if (self.ranked is None) != (self.bundle is None):
            raise ValueError("bundle must be present exactly when a ranking is present")


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class AggregateReport:
    """Per-metric mean/std over scored pairs, plus failure accounting."""

    metrics: dict[str, MetricStat]
    failures: dict[str, int]
    metadata: dict[str, object] = field(default_factory=dict)

    @property
    def scored(self) -> int:
        return int(self.metadata.get("scored", 0))

    @property
    def failed(self) -> int:
        return sum(self.failures.values())


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts of generation position (row) vs ranked position (column)."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    percentages: tuple[tuple[float, ...], ...]


def _attempt_loop(attempts: int, call):
    """Run ``call`` up to ``attempts`` times; returns (value, None) or
    (None, last_error)."""
    last_error: EpiconError | None = None
    for _ in range(attempts):
        try:
            return call(), None
        except EpiconError as exc:
            last_error = exc
    return None, last_error


def run_generation(pair: CauseEffectPair, backend, config: RunConfig) -> GenerationSequence:
    """Phase one: four prompts, two arguments each, assembled into a sequence.

    Each prompt gets up to ``1 + generation_retries`` attempts on parse
    failure before the whole pair fails.
    """
    attempts = 1 + config.generation_retries
    results: dict[tuple[str, Polarity], tuple[str, str]] = {}
    for polarity in (Polarity.DEFEATER, Polarity.SUPPORTER):
        for strength in ("weaker", "stronger"):
            prompt = build_generation_prompt(pair, polarity, strength, config.words)
            request = ChatRequest(
                prompt=prompt,
                max_tokens=config.max_tokens,
                model_name=config.model_name,
                pair_id=pair.id,
                phase="generate",
            )
            value, error = _attempt_loop(
                attempts, lambda req=request: parse_generated_pair(backend.complete(req))
            )
            if error is not None:
                raise GenerationFailed(pair.id, attempts, f"{strength} {polarity.value}: {error}")
            results[(strength, polarity)] = value
    try:
        seq = assemble_sequence(
            pair,
            weaker_defeaters=results[("weaker", Polarity.DEFEATER)],
            stronger_defeaters=results[("stronger", Polarity.DEFEATER)],
            weaker_supporters=results[("weaker", Polarity.SUPPORTER)],
            stronger_supporters=results[("stronger", Polarity.SUPPORTER)],
        )
    except EpiconError as exc:
        raise GenerationFailed(pair.id, attempts, str(exc)) from exc
    validate_sequence(seq)
    return seq


def run_ranking(
    pair: CauseEffectPair, seq: GenerationSequence, backend, config: RunConfig
) -> tuple[RankedPermutation, PresentationOrder]:
    """Phase two, prompting route: present shuffled arguments, extract ranks.

    The returned permutation is already expressed over generation
    positions; the presentation order used is returned for the run record.
    """
    k = len(seq.items)
    presentation = presentation_order(pair.id, k, config.seed)
    prompt = build_ranking_prompt(pair, seq, presentation)
    request = ChatRequest(
        prompt=prompt,
        max_tokens=config.max_tokens,
        model_name=config.model_name,
        pair_id=pair.id,
        phase="rank",
    )
    attempts = 1 + config.generation_retries

    def attempt():
        local = parse_ranking(backend.complete(request), k)
        return apply_presentation(local, presentation)

    value, error = _attempt_loop(attempts, attempt)
    if error is not None:
        log = error.strategy_log if hasattr(error, "strategy_log") else [str(error)]
        raise RankingFailed(pair.id, log)
    return value, presentation


def run_prob_ranking(
    pair: CauseEffectPair,
    seq: GenerationSequence,
    backend,
    conjunction: str,
    kind: ScoreKind,
    config: RunConfig,
) -> tuple[RankedPermutation, list[float]]:
    """Phase two, probability route: score the effect under each intermediate.

    For every intermediate the cause and intermediate are combined, the
    conjunction template is rendered, and the effect's token logprobs under
    the backend give the score of the chosen kind; sorting ascending yields
    the ranking (lowest causal strength first). Also returns the raw
    per-position scores for the run record.
    """
    template = conjunction_template(conjunction)
    effect = pair.effect
    domain_logprobs = None
    if kind is ScoreKind.PMI_DOMAIN_CONDITIONAL:
        try:
            domain_logprobs = backend.score_continuation(
                config.domain_context, effect, config.model_name
            )
        except EpiconError as exc:
            raise ScoringFailed(pair.id, 0, f"domain context: {exc}") from exc
    scores: list[float] = []
    for position, item in enumerate(seq.items, start=1):
        context, continuation = render_template(
            template, combine_events(pair.cause, item.text), effect
        )
        try:
            logprobs = backend.score_continuation(context, continuation, config.model_name)
            if kind is ScoreKind.CAUSAL_STRENGTH:
                scores.append(causal_strength(logprobs))
            elif kind is ScoreKind.AVG_CONDITIONAL_PROB:
                scores.append(avg_conditional_prob(logprobs))
            else:
                scores.append(pmi_dc(logprobs, domain_logprobs))
        except EpiconError as exc:
            raise ScoringFailed(pair.id, position, str(exc)) from exc
    return rank_by_score(seq, scores), scores


def evaluate_pair(
    pair_id: str,
    mode: RunMode,
    sequence: GenerationSequence | None,
    ranked: RankedPermutation | None,
    failure: str | None = None,
    failure_detail: str = "",
) -> PairResult:
    """Phase three: attach the metric bundle, or record the failure as data."""
    if ranked is not None and sequence is not None:
        try:
            bundle = metric_bundle(sequence, ranked)
        except EpiconError as exc:
            return PairResult(
                pair_id=pair_id,
                mode=mode,
                sequence=sequence,
                failure=type(exc).__name__,
                failure_detail=str(exc),
            )
        return PairResult(
            pair_id=pair_id, mode=mode, sequence=sequence, ranked=ranked, bundle=bundle
        )
    return PairResult(
        pair_id=pair_id,
        mode=mode,
        sequence=sequence,
        failure=failure or "Unknown",
        failure_detail=failure_detail,
    )


def _map_pairs(items, worker, max_workers: int):
    if max_workers <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(worker, items))


def phase_generate(pairs, backend, config: RunConfig):
    """Generate sequences for every pair; failures become (None, error)."""

    def worker(pair):
        try:
            return pair.id, run_generation(pair, backend, config), None
        except EpiconError as exc:
            return pair.id, None, exc

    return _map_pairs(pairs, worker, config.workers)


def phase_rank(pairs, sequences, backend, config: RunConfig, mode: RunMode):
    """Rank every generated sequence in the requested mode."""
    by_id = {pair.id: pair for pair in pairs}

    def worker(item):
        pair_id, seq = item
        pair = by_id[pair_id]
        try:
            if mode.kind == "prompt":
                ranked, presentation = run_ranking(pair, seq, backend, config)
                return pair_id, ranked, presentation, None, None
            ranked, scores = run_prob_ranking(
                pair, seq, backend, mode.conjunction, mode.score_kind, config
            )
            return pair_id, ranked, None, scores, None
        except EpiconError as exc:
            return pair_id, None, None, None, exc

    return _map_pairs(list(sequences), worker, config.workers)


def aggregate(results, metadata: dict | None = None) -> AggregateReport:
    """Mean and sample standard deviation of each metric over scored pairs.

    A metric absent for a pair (group tau with fewer than two members) is
    excluded from that metric's own denominator. Failed pairs are counted
    by failure kind; ``scored + failed`` equals the number of results.
    """
    values: dict[str, list[float]] = {
        "tau_supporters": [],
        "tau_defeaters": [],
        "tau_all": [],
        "cgp": [],
        "igc": [],
    }
    failures: dict[str, int] = {}
    scored = 0
    for result in results:
        if result.bundle is None:
            kind = result.failure or "Unknown"
            failures[kind] = failures.get(kind, 0) + 1
            continue
        scored += 1
        for name, value in result.bundle.as_dict().items():
            if value is not None:
                values[name].append(value)
    if scored == 0:
        raise NothingScored("no pair produced a metric bundle")
    metrics: dict[str, MetricStat] = {}
    for name, series in values.items():
        count = len(series)
        if count == 0:
            metrics[name] = MetricStat(mean=math.nan, std=math.nan, count=0)
            continue
        mean = sum(series) / count
        if count < 2:
            std = 0.0
        else:
            std = math.sqrt(sum((v - mean) ** 2 for v in series) / (count - 1))
        metrics[name] = MetricStat(mean=mean, std=std, count=count)
    meta = dict(metadata or {})
    meta.setdefault("scored", scored)
    meta["dataset_size"] = scored + sum(failures.values())
    return AggregateReport(metrics=metrics, failures=failures, metadata=meta)


def slot_labels(m: int, n: int) -> tuple[str, ...]:
    return tuple(f"{s:+d}" for s in list(range(-m, 0)) + list(range(1, n + 1)))


def confusion_matrix(results) -> ConfusionMatrix:
    """Where generation positions ended up in the ranking, over scored pairs.

    ``counts[i][j]`` is how often the intermediate generated at position
    ``i+1`` was ranked at position ``j+1``; percentages are row-normalized.
    """
    scored = [r for r in results if r.bundle is not None]
    if not scored:
        raise NothingScored("no pair produced a metric bundle")
    first = scored[0].sequence
    k = len(first.items)
    labels = slot_labels(first.num_defeaters, first.num_supporters)
    counts = [[0] * k for _ in range(k)]
    for result in scored:
        if len(result.ranked.order) != k:
            raise InvariantViolation(
                "wrong length", "scored pairs have inconsistent sequence sizes"
            )
        for rank_index, position in enumerate(result.ranked.order):
            counts[position - 1][rank_index] += 1
    percentages = []
    for row in counts:
        total = sum(row)
        percentages.append(tuple(100.0 * cell / total for cell in row))
    return ConfusionMatrix(
        labels=labels,
        counts=tuple(tuple(row) for row in counts),
        percentages=tuple(percentages),
    )


def synthetic_sequence(m: int, n: int, pair_id: str = "synthetic") -> GenerationSequence:
    """A placeholder sequence with the canonical slot layout, for baselines."""
    items = [
        Intermediate(text=f"synthetic defeater {m - i}", polarity=Polarity.DEFEATER, slot=-(m - i))
        for i in range(m)
    ]
    items += [
        Intermediate(text=f"synthetic supporter {j + 1}", polarity=Polarity.SUPPORTER, slot=j + 1)
        for j in range(n)
    ]
    return GenerationSequence(pair_id=pair_id, items=tuple(items))


def random_baseline(num_samples: int, seed: int, m: int = 5, n: int = 5) -> AggregateReport:
    """Expected metric levels when ranking uniformly at random.

    Draws ``num_samples`` uniform permutations against the canonical
    ``m + n`` layout and aggregates their metric bundles; deterministic in
    the seed. This is the chance floor everything else is read against.
    """
    if num_samples < 1:
        raise NothingScored("need at least one sample")
    rng = random.Random(seed)
    seq = synthetic_sequence(m, n, pair_id="random-baseline")
    k = m + n
    results = []
    positions = list(range(1, k + 1))
    for index in range(num_samples):
        order = rng.sample(positions, k)
        ranked = RankedPermutation(pair_id=seq.pair_id, order=tuple(order))
        results.append(
            PairResult(
                pair_id=f"sample-{index}",
                mode=PROMPT_MODE,
                sequence=seq,
                ranked=ranked,
                bundle=metric_bundle(seq, ranked),
            )
        )
    return aggregate(
        results,
        metadata={
            "model": "random",
            "seed": seed,
            "samples": num_samples,
            "m": m,
            "n": n,
            "mode": "random-baseline",
        },
    )


# ---------------------------------------------------------------------------
# run artifact records (line-delimited JSON handoff between CLI phases)


def sequence_record(seq: GenerationSequence) -> dict:
    return {
        "pair_id": seq.pair_id,
        "items": [
            {"text": it.text, "polarity": it.polarity.value, "slot": it.slot}
            for it in seq.items
        ],
    }


def sequence_from_record(record: dict) -> GenerationSequence:
    items = tuple(
        Intermediate(
            text=entry["text"], polarity=Polarity(entry["polarity"]), slot=int(entry["slot"])
        )
        for entry in record["items"]
    )
    return GenerationSequence(pair_id=str(record["pair_id"]), items=items)


def write_jsonl(path: str | Path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path):
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                yield json.loads(line)
