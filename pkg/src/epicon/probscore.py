"""Ranking intermediates by conditional token probability.

Instead of asking the model to rank its intermediates, each intermediate is
spliced between the cause and the effect with an explicit causal
conjunction, and the effect's conditional log-probability under the model
stands in for causal strength: the lower the probability of the effect,
the more the intermediate weakens the link. Sorting the intermediates by
that score yields a ranking comparable to the prompting route.

All scores live in log space; the raw probability product underflows for
long effects and the monotone transform leaves rankings unchanged.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

from .backends import TokenLogprob
from .core import GenerationSequence, RankedPermutation
from .errors import (
    EmptyScore,
    InapplicableConjunction,
    InvariantViolation,
    LengthMismatchWarning,
    NonFiniteScore,
)


class ConjunctionCategory(Enum):
    COORDINATING = "coordinating"
    SUBORDINATING = "subordinating"
    CONJUNCTIVE_ADVERB = "conjunctive_adverb"


@dataclass(frozen=True)
class ConjunctionTemplate:
    """A causal sentence pattern with ``{cause}`` and ``{effect}`` holes.

    Only cause-first patterns exist here: a left-to-right model can only
    condition the effect on what precedes it.
    """

    word: str
    category: ConjunctionCategory
    pattern: str

    def __post_init__(self) -> None:
        cause_at = self.pattern.find("{cause}")
        effect_at = self.pattern.find("{effect}")
        if cause_at < 0 or effect_at < 0:
            raise InvariantViolation("bad pattern", f"{self.pattern!r} must hold both events")
        if cause_at >= effect_at:
            raise InvariantViolation(
                "bad pattern", f"{self.pattern!r} must place the cause before the effect"
            )


class ScoreKind(Enum):
    """The scoring formulas exposed to the pipeline and CLI."""

    CAUSAL_STRENGTH = "causal-strength"
    AVG_CONDITIONAL_PROB = "avg-prob"
    PMI_DOMAIN_CONDITIONAL = "pmi-dc"


CONJUNCTIONS: dict[str, ConjunctionTemplate] = {
    "so": ConjunctionTemplate("so", ConjunctionCategory.COORDINATING, "{cause}, so {effect}"),
    "because": ConjunctionTemplate(
        "because", ConjunctionCategory.SUBORDINATING, "Because {cause}, {effect}"
    ),
    "since": ConjunctionTemplate(
        "since", ConjunctionCategory.SUBORDINATING, "Since {cause}, {effect}"
    ),
    "as": ConjunctionTemplate("as", ConjunctionCategory.SUBORDINATING, "As {cause}, {effect}"),
    "therefore": ConjunctionTemplate(
        "therefore", ConjunctionCategory.CONJUNCTIVE_ADVERB, "{cause}; therefore, {effect}"
    ),
    "thus": ConjunctionTemplate(
        "thus", ConjunctionCategory.CONJUNCTIVE_ADVERB, "{cause}; thus, {effect}"
    ),
    "hence": ConjunctionTemplate(
        "hence", ConjunctionCategory.CONJUNCTIVE_ADVERB, "{cause}; hence, {effect}"
    ),
}

# effect-first coordinating conjunction; listed so the rejection message can
# explain itself instead of claiming the word is unknown
_EFFECT_FIRST_WORDS = {"for"}


def conjunction_template(word: str) -> ConjunctionTemplate:
    """Look up a usable template; effect-first conjunctions are refused."""
    key = word.strip().lower()
    if key in _EFFECT_FIRST_WORDS:
        raise InapplicableConjunction(
            f"conjunction {word!r} places the effect before the cause "
            "('{effect}, for {cause}'); a left-to-right model cannot score it"
        )
    template = CONJUNCTIONS.get(key)
    if template is None:
        raise InapplicableConjunction(
            f"unknown conjunction {word!r}; choose one of {sorted(CONJUNCTIONS)}"
        )
    return template


def _trim_terminal(text: str, punctuation: str) -> str:
    # iterate to a fixed point so interleaved punctuation and (unicode)
    # whitespace cannot survive a single pass
    out = text.strip()
    previous = None
    while previous != out:
        previous = out
        out = out.rstrip(punctuation).strip()
    return out


def combine_events(cause: str, intermediate: str) -> str:
    """Join a cause and an active intermediate into one compound event.

    The cause loses its terminal punctuation, the intermediate its
    trailing period, and the two are joined with ". " into a single
    declarative context ready for a conjunction template.
    """
    if not cause.strip() or not intermediate.strip():
        raise InvariantViolation("empty field", "cause and intermediate must be non-empty")
    return _trim_terminal(cause, ".!?") + ". " + _trim_terminal(intermediate, ".")


def render_template(
    template: ConjunctionTemplate, combined_cause: str, effect: str
) -> tuple[str, str]:
    """Instantiate the pattern and split it right before the effect.

    Returns ``(context, continuation)``: the context holds the cause and
    the conjunction with its punctuation, the continuation is the effect
    text whose tokens get scored.
    """
    effect_at = template.pattern.index("{effect}")
    context = template.pattern[:effect_at].replace("{cause}", combined_cause).rstrip()
    return context, effect


def causal_strength(logprobs: Sequence[TokenLogprob]) -> float:
    """Log-probability of the whole continuation: the sum of token logs."""
    if not logprobs:
        raise EmptyScore("no tokens to score")
    return sum(tl.logprob for tl in logprobs)


def avg_conditional_prob(logprobs: Sequence[TokenLogprob]) -> float:
    """Arithmetic mean of the per-token probabilities, in (0, 1]."""
    if not logprobs:
        raise EmptyScore("no tokens to score")
    return sum(math.exp(tl.logprob) for tl in logprobs) / len(logprobs)


def pmi_dc(
    cond_logprobs: Sequence[TokenLogprob], domain_logprobs: Sequence[TokenLogprob]
) -> float:
    """Log of the domain-conditional pointwise mutual information.

    The continuation's log-probability given the full context minus its
    log-probability given only the domain context. Tokenizations of the
    same continuation can differ across contexts; that is recorded as a
    warning, and each side uses its own token list as returned.
    """
    if not cond_logprobs or not domain_logprobs:
        raise EmptyScore("no tokens to score")
    if len(cond_logprobs) != len(domain_logprobs):
        warnings.warn(
            f"continuation tokenized into {len(cond_logprobs)} tokens under the full "
            f"context but {len(domain_logprobs)} under the domain context",
            LengthMismatchWarning,
            stacklevel=2,
        )
    return sum(tl.logprob for tl in cond_logprobs) - sum(tl.logprob for tl in domain_logprobs)


def rank_by_score(seq: GenerationSequence, scores: Sequence[float]) -> RankedPermutation:
    """Order generation positions by ascending score.

    The lowest causal strength ranks first ("weakens the most"); ties
    break toward the earlier generation position.
    """
    if len(scores) != len(seq.items):
        raise InvariantViolation(
            "wrong length", f"{len(scores)} scores for {len(seq.items)} intermediates"
        )
    for position, score in enumerate(scores, start=1):
        if not math.isfinite(score):
            raise NonFiniteScore(f"score at generation position {position} is {score}")
    order = sorted(range(1, len(scores) + 1), key=lambda pos: (scores[pos - 1], pos))
    return RankedPermutation(pair_id=seq.pair_id, order=tuple(order))
