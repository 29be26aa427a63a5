"""Domain types for cause-effect pairs, intermediates, and orderings.

The generation phase produces a :class:`GenerationSequence`: ``m`` defeaters
followed by ``n`` supporters, ordered weakest-influence-last within the
defeater block and weakest-first within the supporter block, so that reading
the whole sequence goes from "weakens the most" to "strengthens the most".
The ranking phase produces a :class:`RankedPermutation` over the generation
positions. All types are immutable value objects.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import BadArity, InvariantViolation

_QUOTE_CHARS = "\"'`‘’“”"


def normalize_text(text: str) -> str:
    """Trim, collapse internal whitespace, and strip surrounding quotes.

    Used wherever two intermediates must be compared for equality; the raw
    text is kept verbatim everywhere else.
    """
    out = " ".join(text.split())
    while len(out) >= 2 and out[0] in _QUOTE_CHARS and out[-1] in _QUOTE_CHARS:
        out = out[1:-1].strip()
    return out


class Polarity(Enum):
    """Whether an intermediate weakens or strengthens the causal link."""

    DEFEATER = "defeater"
    SUPPORTER = "supporter"

    def flipped(self) -> "Polarity":
        return Polarity.SUPPORTER if self is Polarity.DEFEATER else Polarity.DEFEATER


@dataclass(frozen=True)
class CauseEffectPair:
    """A defeasible cause-effect pair plus its two seed intermediates."""

    id: str
    cause: str
    effect: str
    original_supporter: str
    original_defeater: str

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise InvariantViolation("empty field", "pair id must be non-empty")
        for name in ("cause", "effect", "original_supporter", "original_defeater"):
            if not normalize_text(getattr(self, name)):
                raise InvariantViolation("empty field", f"{name} is empty for pair {self.id!r}")


@dataclass(frozen=True)
class Intermediate:
    """One generated intermediate with its polarity and intensity slot.

    ``slot`` is a signed intensity label: negative for defeaters, positive
    for supporters, never zero; larger ``|slot|`` means stronger influence.
    """

    text: str
    polarity: Polarity
    slot: int

    def __post_init__(self) -> None:
        if self.slot == 0:
            raise InvariantViolation("wrong slot layout", "slot 0 is not a valid intensity")
        if (self.slot < 0) != (self.polarity is Polarity.DEFEATER):
            raise InvariantViolation(
                "wrong slot layout",
                f"slot {self.slot} does not match polarity {self.polarity.value}",
            )
        if not normalize_text(self.text):
            raise InvariantViolation("empty text", "intermediate text is empty")


@dataclass(frozen=True)
class GenerationSequence:
    """The intermediates of one pair in generation-phase intensity order."""

    pair_id: str
    items: tuple[Intermediate, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def num_defeaters(self) -> int:
        return sum(1 for it in self.items if it.polarity is Polarity.DEFEATER)

    @property
    def num_supporters(self) -> int:
        return len(self.items) - self.num_defeaters

    def labels(self) -> tuple[Polarity, ...]:
        """Polarity labels in generation order."""
        return tuple(it.polarity for it in self.items)

    def labels_under(self, order: "RankedPermutation") -> tuple[Polarity, ...]:
        """Polarity labels read in the given ranked order."""
        return tuple(self.items[pos - 1].polarity for pos in order.order)


@dataclass(frozen=True)
class RankedPermutation:
    """A ranking of generation positions, weakest influence first.

    ``order[j]`` is the (1-based) generation position of the intermediate
    ranked at position ``j + 1``; position 1 weakens the most and the last
    position strengthens the most.
    """

    pair_id: str
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        k = len(self.order)
        if sorted(self.order) != list(range(1, k + 1)):
            raise InvariantViolation(
                "not a permutation",
                f"order {self.order} is not a permutation of 1..{k}",
            )


@dataclass(frozen=True)
class PresentationOrder:
    """The shuffled order in which arguments were shown to the ranker.

    ``shuffled_indices[t]`` is the generation position of the argument
    presented at slot ``t + 1``. The shuffle is a pure function of
    ``(seed, pair_id)`` so a run can be replayed exactly.
    """

    pair_id: str
    shuffled_indices: tuple[int, ...]
    seed: int = field(default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "shuffled_indices", tuple(int(v) for v in self.shuffled_indices))
        k = len(self.shuffled_indices)
        if sorted(self.shuffled_indices) != list(range(1, k + 1)):
            raise InvariantViolation(
                "not a permutation",
                f"shuffled_indices {self.shuffled_indices} is not a permutation of 1..{k}",
            )


def presentation_order(pair_id: str, k: int, seed: int) -> PresentationOrder:
    """Build the deterministic presentation shuffle for one pair.

    The generator is seeded from a digest of ``(seed, pair_id)`` so the
    result is stable across platforms and process restarts.
    """
    if k < 2:
        raise BadArity(f"need at least 2 presented arguments, got {k}")
    digest = hashlib.sha256(f"{seed}\x1f{pair_id}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    indices = list(range(1, k + 1))
    rng.shuffle(indices)
    return PresentationOrder(pair_id=pair_id, shuffled_indices=tuple(indices), seed=seed)


def validate_sequence(seq: GenerationSequence) -> None:
    """Check all structural invariants of a generation sequence.

    Raises :class:`InvariantViolation` with kind ``"wrong length"``,
    ``"wrong slot layout"``, or ``"duplicate texts"``.
    """
    items = seq.items
    if len(items) < 2:
        raise InvariantViolation("wrong length", f"{len(items)} item(s); need at least 2")
    m = sum(1 for it in items if it.polarity is Polarity.DEFEATER)
    n = len(items) - m
    if m < 1 or n < 1:
        raise InvariantViolation(
            "wrong slot layout", f"need both polarities, got {m} defeater(s)/{n} supporter(s)"
        )
    expected_slots = list(range(-m, 0)) + list(range(1, n + 1))
    actual_slots = [it.slot for it in items]
    if actual_slots != expected_slots:
        raise InvariantViolation(
            "wrong slot layout",
            f"slots {actual_slots} do not read {expected_slots}",
        )
    seen: dict[str, int] = {}
    for position, it in enumerate(items, start=1):
        key = normalize_text(it.text)
        if key in seen:
            raise InvariantViolation(
                "duplicate texts",
                f"positions {seen[key]} and {position} share text {key!r}",
            )
        seen[key] = position


def ideal_permutation(m: int, n: int, pair_id: str = "") -> RankedPermutation:
    """The ranking a perfectly self-consistent model would produce.

    With the generation order as reference, that is simply the identity
    over positions ``1..m+n``.
    """
    if m < 1 or n < 1 or m + n < 2:
        raise BadArity(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    return RankedPermutation(pair_id=pair_id, order=tuple(range(1, m + n + 1)))


def load_pairs(path: str | Path) -> list[CauseEffectPair]:
    """Read a JSONL dataset of cause-effect pairs.

    Each line is an object with fields ``id``, ``cause``, ``effect``,
    ``supporter``, and ``defeater`` (the two seed intermediates).
    """
    pairs: list[CauseEffectPair] = []
    seen_ids: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvariantViolation("bad record", f"{path}:{line_number}: {exc}") from exc
        missing = [k for k in ("id", "cause", "effect", "supporter", "defeater") if k not in record]
        if missing:
            raise InvariantViolation(
                "missing field", f"{path}:{line_number}: missing {', '.join(missing)}"
            )
        pair = CauseEffectPair(
            id=str(record["id"]),
            cause=str(record["cause"]),
            effect=str(record["effect"]),
            original_supporter=str(record["supporter"]),
            original_defeater=str(record["defeater"]),
        )
        if pair.id in seen_ids:
            raise InvariantViolation("duplicate id", f"{path}:{line_number}: id {pair.id!r}")
        seen_ids.add(pair.id)
        pairs.append(pair)
    return pairs


def dataset_digest(path: str | Path) -> str:
    """Hex digest of the dataset file, recorded in run metadata."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
