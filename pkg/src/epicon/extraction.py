"""Recovering structured data from free-form model text.

Two parsing problems live here: pulling the two generated arguments out of
a generation response, and pulling a rank permutation out of a ranking
response. Models render both in many shapes (numbered lists, bare lines,
chatty preambles, one-line rankings, one-number-per-line rankings), so the
parsers try a fixed, ordered set of strategies and the first one that
yields a valid result wins. No voting, no model-specific scripts: the same
rules apply to every response, which keeps extraction auditable.
"""

from __future__ import annotations

import re

from .core import (
    CauseEffectPair,
    GenerationSequence,
    Intermediate,
    Polarity,
    PresentationOrder,
    RankedPermutation,
    normalize_text,
    validate_sequence,
)
from .errors import DuplicateIntermediate, GenerationParseError, IdMismatch, RankExtractionError

_LIST_MARKER = re.compile(r"^\s*(?:\d+\s*[.)\]:]|[-*•])\s*")
_PREAMBLE_OPENER = re.compile(r"^\s*(?:sure|okay|ok|certainly)?[,.!:]?\s*here\s+(?:is|are)\b", re.I)
_INTEGER_TOKEN = re.compile(r"\d+")
_LEADING_INTEGER = re.compile(r"^\s*(\d+)")


def _is_preamble(line: str) -> bool:
    return line.rstrip().endswith(":") or bool(_PREAMBLE_OPENER.match(line))


def _strip_list_marker(line: str) -> str:
    return _LIST_MARKER.sub("", line, count=1)


def parse_generated_pair(text: str) -> tuple[str, str]:
    """Extract the two generated arguments from a generation response.

    Keeps non-empty lines that are not boilerplate (lines ending in a colon
    or opening with a "here is/are" phrase), strips list markers and
    surrounding quotes, and requires exactly two survivors, returned in
    output order.
    """
    candidates: list[str] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or _is_preamble(line):
            continue
        cleaned = normalize_text(_strip_list_marker(line))
        if cleaned:
            candidates.append(cleaned)
    if len(candidates) != 2:
        raise GenerationParseError(len(candidates), f"candidates: {candidates!r}")
    return candidates[0], candidates[1]


def assemble_sequence(
    pair: CauseEffectPair,
    weaker_defeaters: tuple[str, str],
    stronger_defeaters: tuple[str, str],
    weaker_supporters: tuple[str, str],
    stronger_supporters: tuple[str, str],
) -> GenerationSequence:
    """Slot the eight generated texts and the two originals into one sequence.

    Each generation prompt asks for a chain: the first argument weaker (or
    stronger) than the original, the second weaker (or stronger) than the
    first. Unrolling those chains puts the originals at intensity 3 on each
    side:

    * defeaters, strongest first: stronger[1], stronger[0], original,
      weaker[0], weaker[1]  (slots -5..-1)
    * supporters, weakest first: weaker[1], weaker[0], original,
      stronger[0], stronger[1]  (slots +1..+5)
    """
    ordered: list[tuple[str, Polarity, int]] = [
        (stronger_defeaters[1], Polarity.DEFEATER, -5),
        (stronger_defeaters[0], Polarity.DEFEATER, -4),
        (pair.original_defeater, Polarity.DEFEATER, -3),
        (weaker_defeaters[0], Polarity.DEFEATER, -2),
        (weaker_defeaters[1], Polarity.DEFEATER, -1),
        (weaker_supporters[1], Polarity.SUPPORTER, 1),
        (weaker_supporters[0], Polarity.SUPPORTER, 2),
        (pair.original_supporter, Polarity.SUPPORTER, 3),
        (stronger_supporters[0], Polarity.SUPPORTER, 4),
        (stronger_supporters[1], Polarity.SUPPORTER, 5),
    ]
    seen: dict[str, int] = {}
    for text, _, slot in ordered:
        key = normalize_text(text)
        if key in seen:
            raise DuplicateIntermediate(
                f"pair {pair.id}: slots {seen[key]} and {slot} share text {key!r}"
            )
        seen[key] = slot
    seq = GenerationSequence(
        pair_id=pair.id,
        items=tuple(
            Intermediate(text=text, polarity=polarity, slot=slot)
            for text, polarity, slot in ordered
        ),
    )
    validate_sequence(seq)
    return seq


def _single_line_strategy(text: str, k: int) -> tuple[list[int] | None, str]:
    """One line holding exactly k integers separated by spaces or commas."""
    for line in text.splitlines():
        tokens = [t for t in re.split(r"[\s,]+", line.strip()) if t]
        if len(tokens) != k:
            continue
        try:
            values = [int(t) for t in tokens]
        except ValueError:
            continue
        if sorted(values) == list(range(1, k + 1)):
            return values, "single-line: matched"
    return None, f"single-line: no line with exactly {k} integers forming a permutation"


def _per_line_strategy(text: str, k: int) -> tuple[list[int] | None, str]:
    """k consecutive non-empty lines, each contributing its leading integer."""
    leading: list[int | None] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        match = _LEADING_INTEGER.match(line)
        leading.append(int(match.group(1)) if match else None)
    for start in range(0, len(leading) - k + 1):
        window = leading[start : start + k]
        if None in window:
            continue
        values = [v for v in window if v is not None]
        if sorted(values) == list(range(1, k + 1)):
            return values, "per-line: matched"
    return None, f"per-line: no {k} consecutive lines with leading integers forming a permutation"


def _integer_run_strategy(text: str, k: int) -> tuple[list[int] | None, str]:
    """First maximal run of k distinct in-range integers in reading order."""
    stream = [int(t) for t in _INTEGER_TOKEN.findall(text)]
    for start in range(len(stream)):
        run: list[int] = []
        seen: set[int] = set()
        for value in stream[start:]:
            if not (1 <= value <= k) or value in seen:
                break
            run.append(value)
            seen.add(value)
            if len(run) == k:
                return run, "integer-run: matched"
    return None, f"integer-run: no run of {k} distinct integers in 1..{k}"


def parse_ranking(text: str, k: int) -> RankedPermutation:
    """Recover a permutation of ``1..k`` from a ranking response.

    Strategies are tried in a fixed order and the first valid permutation
    wins: (a) a single line of exactly k integers, (b) k consecutive lines
    each contributing one leading integer, (c) the first maximal run of k
    distinct in-range integers anywhere in the text. The result is in
    presentation-local indices; compose with the presentation shuffle via
    :func:`apply_presentation` to express it over generation positions.
    """
    if k < 2:
        raise RankExtractionError([f"need k >= 2, got {k}"])
    log: list[str] = []
    for strategy in (_single_line_strategy, _per_line_strategy, _integer_run_strategy):
        values, note = strategy(text, k)
        log.append(note)
        if values is not None:
            return RankedPermutation(pair_id="", order=tuple(values))
    raise RankExtractionError(log)


def apply_presentation(
    local_perm: RankedPermutation, presentation: PresentationOrder
) -> RankedPermutation:
    """Translate a ranking over presented indices into generation positions.

    The model ranked the arguments as it saw them; argument ``t`` on its
    screen was the intermediate at generation position
    ``presentation.shuffled_indices[t - 1]``.
    """
    k = len(presentation.shuffled_indices)
    if len(local_perm.order) != k:
        raise IdMismatch(
            f"ranking covers {len(local_perm.order)} indices, presentation shows {k}"
        )
    if local_perm.pair_id and local_perm.pair_id != presentation.pair_id:
        raise IdMismatch(
            f"ranking is for pair {local_perm.pair_id!r}, presentation for "
            f"{presentation.pair_id!r}"
        )
    order = tuple(presentation.shuffled_indices[t - 1] for t in local_perm.order)
    return RankedPermutation(pair_id=presentation.pair_id, order=order)
