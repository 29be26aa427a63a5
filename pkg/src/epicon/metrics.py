"""The three metric families scored over one generation/ranking pair.

* Intensity ranking concordance: Kendall tau between the generation order
  and the ranked order, over the whole sequence (``tau_all``) and within
  each polarity group (``tau_group``).
* Cross-group position (``cgp``): the fraction of supporter/defeater pairs
  the ranking orders correctly (every defeater should precede every
  supporter), in ``[0, 1]``.
* Intra-group clustering (``igc``): the mean silhouette score of the ranked
  polarity labels under a sequence distance that counts polarity changes,
  excluding reversions to the starting polarity.

All functions are pure; nothing here touches I/O or shared state.
"""

from __future__ import annotations

from collections.abc import Hashable, Sequence
from dataclasses import dataclass

from .core import GenerationSequence, Polarity, RankedPermutation
from .errors import (
    BadArity,
    BadOrder,
    EmptyGroup,
    IdMismatch,
    IndexOutOfRange,
    SingleCluster,
)


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise polarity-change distances for one label sequence.

    ``entries[i][j]`` (0-based) is the distance between ranked positions
    ``i + 1`` and ``j + 1``; the matrix is symmetric with a zero diagonal.
    """

    size: int
    entries: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class MetricBundle:
    """All five metric values for one generation/ranking pair.

    The group taus are ``None`` when the corresponding group has fewer
    than two members (no pairs exist to compare).
    """

    tau_supporters: float | None
    tau_defeaters: float | None
    tau_all: float
    cgp: float
    igc: float

    def as_dict(self) -> dict[str, float | None]:
        return {
            "tau_supporters": self.tau_supporters,
            "tau_defeaters": self.tau_defeaters,
            "tau_all": self.tau_all,
            "cgp": self.cgp,
            "igc": self.igc,
        }


def _count_inversions(values: list[int]) -> int:
    """Number of out-of-order pairs, counted by merge sort."""
    if len(values) < 2:
        return 0
    mid = len(values) // 2
    left, right = values[:mid], values[mid:]
    inversions = _count_inversions(left) + _count_inversions(right)
    merged: list[int] = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            # right[j] precedes the remaining len(left) - i left values
            inversions += len(left) - i
            merged.append(right[j])
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    values[:] = merged
    return inversions


def kendall_tau(reference_order: Sequence[Hashable], observed_order: Sequence[Hashable]) -> float:
    """Rank concordance between two orderings of the same ids.

    Returns (concordant pairs - discordant pairs) / total pairs, in
    ``[-1, 1]``: 1 for identical orders, -1 for fully reversed ones.
    Since the inputs are strict permutations of each other, this equals
    ``1 - 4 * inversions / (k * (k - 1))`` where ``inversions`` counts the
    id pairs whose relative order flips between the two lists.
    """
    k = len(reference_order)
    if k < 2:
        raise BadArity(f"need at least 2 ids, got {k}")
    if len(observed_order) != k:
        raise IdMismatch(f"length mismatch: {k} vs {len(observed_order)}")
    rank: dict[Hashable, int] = {}
    for idx, item in enumerate(reference_order):
        if item in rank:
            raise IdMismatch(f"duplicate id in reference order: {item!r}")
        rank[item] = idx
    try:
        ranked_observed = [rank[item] for item in observed_order]
    except KeyError as exc:
        raise IdMismatch(f"id {exc.args[0]!r} not present in reference order") from exc
    if len(set(ranked_observed)) != k:
        raise IdMismatch("observed order repeats an id")
    inversions = _count_inversions(ranked_observed)
    return 1.0 - 4.0 * inversions / (k * (k - 1))


def _check_ranked(seq: GenerationSequence, ranked: RankedPermutation) -> None:
    if len(ranked.order) != len(seq.items):
        raise IdMismatch(
            f"ranking covers {len(ranked.order)} positions, sequence has {len(seq.items)}"
        )
    if ranked.pair_id and seq.pair_id and ranked.pair_id != seq.pair_id:
        raise IdMismatch(f"ranking is for pair {ranked.pair_id!r}, sequence for {seq.pair_id!r}")


def tau_group(
    seq: GenerationSequence, ranked: RankedPermutation, polarity: Polarity
) -> float | None:
    """Kendall tau restricted to positions of one polarity.

    The reference is the group's generation order; the observed order is
    the order those positions appear in the ranking. Returns ``None`` when
    the group has fewer than two members.
    """
    _check_ranked(seq, ranked)
    group = [pos for pos, it in enumerate(seq.items, start=1) if it.polarity is polarity]
    if len(group) < 2:
        return None
    group_set = set(group)
    observed = [pos for pos in ranked.order if pos in group_set]
    return kendall_tau(group, observed)


def cgp(seq: GenerationSequence, ranked: RankedPermutation) -> float:
    """Cross-group position agreement in ``[0, 1]``.

    Each supporter ranked before a defeater is one violation; the count is
    normalized by the number of supporter/defeater pairs and subtracted
    from 1, so 1 means every defeater precedes every supporter.
    """
    _check_ranked(seq, ranked)
    num_defeaters = seq.num_defeaters
    num_supporters = seq.num_supporters
    if num_defeaters == 0 or num_supporters == 0:
        raise EmptyGroup(
            f"need both polarities, got {num_defeaters} defeater(s)/{num_supporters} supporter(s)"
        )
    supporters_seen = 0
    violations = 0
    for pos in ranked.order:
        if seq.items[pos - 1].polarity is Polarity.SUPPORTER:
            supporters_seen += 1
        else:
            violations += supporters_seen
    return 1.0 - violations / (num_supporters * num_defeaters)


def polarity_distance(labels: Sequence[Polarity], i: int, j: int) -> int:
    """Sequence clustering distance between 1-based positions ``i < j``.

    Counts the polarity changes strictly between the two positions,
    excluding changes that revert to the polarity at position ``i``.
    """
    k = len(labels)
    if not (1 <= i <= k) or not (1 <= j <= k):
        raise IndexOutOfRange(f"positions ({i}, {j}) outside 1..{k}")
    if i >= j:
        raise BadOrder(f"need i < j, got i={i}, j={j}")
    start = labels[i - 1]
    distance = 0
    for step in range(i, j):
        if labels[step - 1] is not labels[step] and labels[step] is not start:
            distance += 1
    return distance


def distance_matrix(labels: Sequence[Polarity]) -> DistanceMatrix:
    """All pairwise polarity-change distances, symmetrically completed."""
    k = len(labels)
    if k < 2:
        raise BadArity(f"need at least 2 labels, got {k}")
    entries = [[0] * k for _ in range(k)]
    for i in range(k):
        running = 0
        start = labels[i]
        for j in range(i + 1, k):
            if labels[j - 1] is not labels[j] and labels[j] is not start:
                running += 1
            entries[i][j] = running
            entries[j][i] = running
    return DistanceMatrix(size=k, entries=tuple(tuple(row) for row in entries))


def silhouette(labels: Sequence[Polarity]) -> list[float]:
    """Per-element silhouette scores over the polarity-change distance.

    For each element the intra-cluster mean distance (cohesion) is compared
    against the mean distance to the other polarity's elements (separation);
    the score is their difference over the larger of the two, in ``[-1, 1]``.
    An element that is the only member of its polarity scores 1 outright:
    it cannot be torn between clusters it does not share.
    """
    counts = {Polarity.DEFEATER: 0, Polarity.SUPPORTER: 0}
    for label in labels:
        counts[label] += 1
    if counts[Polarity.DEFEATER] == 0 or counts[Polarity.SUPPORTER] == 0:
        raise SingleCluster("both polarities must be present to score clustering")
    entries = distance_matrix(labels).entries
    k = len(labels)
    scores: list[float] = []
    for i in range(k):
        own = labels[i]
        own_size = counts[own]
        if own_size == 1:
            scores.append(1.0)
            continue
        intra = sum(entries[i][j] for j in range(k) if j != i and labels[j] is own)
        inter = sum(entries[i][j] for j in range(k) if labels[j] is not own)
        d_ic = intra / (own_size - 1)
        d_nc = inter / (k - own_size)
        scores.append((d_nc - d_ic) / max(d_ic, d_nc))
    return scores


def igc(labels: Sequence[Polarity]) -> float:
    """Mean silhouette score of the label sequence, in ``[-1, 1]``."""
    scores = silhouette(labels)
    return sum(scores) / len(scores)


def metric_bundle(seq: GenerationSequence, ranked: RankedPermutation) -> MetricBundle:
    """Score one ranking against its generation sequence on all five metrics."""
    _check_ranked(seq, ranked)
    k = len(seq.items)
    reference = list(range(1, k + 1))
    return MetricBundle(
        tau_supporters=tau_group(seq, ranked, Polarity.SUPPORTER),
        tau_defeaters=tau_group(seq, ranked, Polarity.DEFEATER),
        tau_all=kendall_tau(reference, list(ranked.order)),
        cgp=cgp(seq, ranked),
        igc=igc(seq.labels_under(ranked)),
    )
