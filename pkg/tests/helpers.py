"""Shared builders and independent oracles for the test suite.

The oracles here deliberately use the most literal formulation of each
definition (double loops, explicit index lookups) so that the library's
faster implementations are checked against something that cannot share
their bugs.
"""

from __future__ import annotations

from epicon.core import GenerationSequence, Intermediate, Polarity, RankedPermutation

D = Polarity.DEFEATER
A = Polarity.SUPPORTER


def labels(pattern: str) -> tuple[Polarity, ...]:
    """Parse a compact label string like ``"DDADD"`` (D=defeater, A=supporter)."""
    table = {"D": D, "A": A}
    return tuple(table[ch] for ch in pattern)


def make_sequence(m: int = 5, n: int = 5, pair_id: str = "pair-1") -> GenerationSequence:
    """A canonical valid sequence: m defeaters slotted -m..-1, n supporters +1..+n."""
    items = [
        Intermediate(text=f"defeater of strength {m - i}", polarity=D, slot=-(m - i))
        for i in range(m)
    ]
    items += [
        Intermediate(text=f"supporter of strength {j + 1}", polarity=A, slot=j + 1)
        for j in range(n)
    ]
    return GenerationSequence(pair_id=pair_id, items=tuple(items))


def ranking(order, pair_id: str = "pair-1") -> RankedPermutation:
    return RankedPermutation(pair_id=pair_id, order=tuple(order))


def tau_oracle(reference, observed) -> float:
    """Literal pair-counting Kendall tau: concordant minus discordant over all pairs."""
    k = len(reference)
    ref_pos = {item: idx for idx, item in enumerate(reference)}
    obs_pos = {item: idx for idx, item in enumerate(observed)}
    concordant = discordant = 0
    items = list(reference)
    for a in range(k):
        for b in range(a + 1, k):
            ref_sign = ref_pos[items[a]] - ref_pos[items[b]]
            obs_sign = obs_pos[items[a]] - obs_pos[items[b]]
            if (ref_sign > 0) == (obs_sign > 0):
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (k * (k - 1) / 2)


def cgp_oracle(seq: GenerationSequence, ranked: RankedPermutation) -> float:
    """Literal double loop over supporter x defeater generation positions."""
    supporters = [p for p, it in enumerate(seq.items, start=1) if it.polarity is A]
    defeaters = [p for p, it in enumerate(seq.items, start=1) if it.polarity is D]
    order = list(ranked.order)
    violations = 0
    for a in supporters:
        for d in defeaters:
            if order.index(a) < order.index(d):
                violations += 1
    return 1 - violations / (len(supporters) * len(defeaters))


def polarity_distance_oracle(seq_labels, i: int, j: int) -> int:
    """Direct transcription of the distance definition (1-based, i < j)."""
    total = 0
    for k in range(i, j):
        if seq_labels[k - 1] != seq_labels[k] and seq_labels[k] != seq_labels[i - 1]:
            total += 1
    return total


def build_replay_fixtures(pairs, cache_path, model, seed, ranking_style="identity"):
    """Record generation and ranking payloads so a replay run reproduces a
    chosen ranking per pair.

    ``ranking_style``: "identity" makes every final ranking the identity
    (the payload is the inverse of the presentation shuffle), "reverse"
    the full reversal, "shuffled" a deterministic per-pair permutation.
    Returns the sequences the replayed generation phase will produce.
    """
    import hashlib
    import random as random_mod

    from epicon.backends import JsonlStore, cache_key
    from epicon.core import presentation_order
    from epicon.extraction import assemble_sequence
    from epicon.prompts import build_generation_prompt, build_ranking_prompt

    store = JsonlStore(cache_path)
    seen_keys = set()

    def put_checked(key, payload):
        # distinct (model, pair, phase, prompt) must never collide
        assert key not in seen_keys, "cache key collision while building fixtures"
        seen_keys.add(key)
        store.put(key, payload)

    sequences = {}
    for pair in pairs:
        generated = {}
        for polarity in (D, A):
            for strength in ("weaker", "stronger"):
                first = f"{strength} {polarity.value} alpha for {pair.id}"
                second = f"{strength} {polarity.value} beta for {pair.id}"
                prompt = build_generation_prompt(pair, polarity, strength)
                put_checked(
                    cache_key(model, pair.id, "generate", prompt), f"1. {first}\n2. {second}"
                )
                generated[(strength, polarity)] = (first, second)
        seq = assemble_sequence(
            pair,
            weaker_defeaters=generated[("weaker", D)],
            stronger_defeaters=generated[("stronger", D)],
            weaker_supporters=generated[("weaker", A)],
            stronger_supporters=generated[("stronger", A)],
        )
        sequences[pair.id] = seq
        k = len(seq.items)
        presentation = presentation_order(pair.id, k, seed)
        if ranking_style == "identity":
            target = list(range(1, k + 1))
        elif ranking_style == "reverse":
            target = list(range(k, 0, -1))
        else:
            digest = hashlib.sha256(f"{seed}:{pair.id}".encode()).digest()
            rng = random_mod.Random(int.from_bytes(digest[:8], "big"))
            target = rng.sample(range(1, k + 1), k)
        local = [presentation.shuffled_indices.index(g) + 1 for g in target]
        prompt = build_ranking_prompt(pair, seq, presentation)
        put_checked(cache_key(model, pair.id, "rank", prompt), " ".join(str(v) for v in local))
    return sequences


def build_score_fixtures(pairs, sequences, cache_path, model, conjunction="so"):
    """Record toy-scorer logprobs for every conjunction context, so replay
    backends can serve probability-ranking runs."""
    from epicon.backends import JsonlStore, ToyScorer, cached
    from epicon.pipeline import RunConfig, run_prob_ranking
    from epicon.probscore import ScoreKind

    wrapped = cached(ToyScorer(), JsonlStore(cache_path))
    config = RunConfig(model_name=model)
    for pair in pairs:
        run_prob_ranking(
            pair, sequences[pair.id], wrapped, conjunction,
            ScoreKind.PMI_DOMAIN_CONDITIONAL, config,
        )
