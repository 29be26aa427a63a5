"""Prompt builders for the generation and ranking phases.

The generation prompt asks for exactly two arguments in a strength chain
(first weaker/stronger than the original, second than the first), which is
what lets :func:`epicon.extraction.assemble_sequence` place everything on
the intensity scale. The ranking prompt shows all arguments as a numbered
list in presentation order and asks for indices only, weakest first.
"""

from __future__ import annotations

from .core import CauseEffectPair, GenerationSequence, Polarity, PresentationOrder, normalize_text

GENERATION_TEMPLATE = (
    "Generate two {argument_type}s for the cause-effect relationship in which "
    "'{cause}' leads to '{effect}', without explanations, additional commentary, "
    "index or quotation marks.\n\n"
    "The two generated {argument_type}s vary in strength. More specifically, the "
    "first generated {argument_type} should be {strength} than the original "
    "{argument_type}, while the second generated {argument_type} should be "
    "{strength} than the first {argument_type}.\n\n"
    "Please ensure that the generated {argument_type}s are around {words} words "
    "in length. In addition, the generated {strength} {argument_type}s should "
    "have similar style to the original {argument_type}. The original "
    "{argument_type} is: '{original_argument}'. Make sure that there are no "
    "explanations or additional commentary for the output and that the generated "
    "arguments are separated by a new line character."
)

RANKING_TEMPLATE = (
    "Given a defeasible cause-effect pair and {total} arguments with varying "
    "strength, please give a ranking of the arguments based on whether they "
    "strengthen or weaken the argumentative strength of the cause-effect pair. "
    "Note that the {total} arguments consist of {supporters} supporting arguments "
    "and {defeaters} defeating arguments. The ranking should be in the order from "
    "the argument that weakens the argumentative strength of the pair the most to "
    "the argument that strengthens the argumentative strength the most.\n\n"
    "In addition, please ensure that the result only contains indices referring "
    "to each argument, separated by a single space and without any additional "
    "explanation or comments.\n\n"
    "The cause is '{cause}' and the effect is '{effect}'.\n\n"
    "The {total} arguments are:\n\n"
    "{argument_lines}"
)


def words_hint(pair: CauseEffectPair) -> int:
    """Target argument length: the mean word count of the two originals."""
    lengths = [len(pair.original_supporter.split()), len(pair.original_defeater.split())]
    return max(1, round(sum(lengths) / len(lengths)))


def build_generation_prompt(
    pair: CauseEffectPair, polarity: Polarity, strength: str, words: int | None = None
) -> str:
    """The prompt requesting two weaker or two stronger intermediates."""
    if strength not in ("weaker", "stronger"):
        raise ValueError(f"strength must be 'weaker' or 'stronger', got {strength!r}")
    original = (
        pair.original_defeater if polarity is Polarity.DEFEATER else pair.original_supporter
    )
    return GENERATION_TEMPLATE.format(
        argument_type=polarity.value,
        cause=normalize_text(pair.cause),
        effect=normalize_text(pair.effect),
        strength=strength,
        words=words if words is not None else words_hint(pair),
        original_argument=normalize_text(original),
    )


def build_ranking_prompt(
    pair: CauseEffectPair, seq: GenerationSequence, presentation: PresentationOrder
) -> str:
    """The prompt asking the model to rank the presented arguments."""
    presented = [seq.items[pos - 1] for pos in presentation.shuffled_indices]
    argument_lines = "\n".join(
        f"{index}. {normalize_text(item.text)}" for index, item in enumerate(presented, start=1)
    )
    return RANKING_TEMPLATE.format(
        total=len(presented),
        supporters=seq.num_supporters,
        defeaters=seq.num_defeaters,
        cause=normalize_text(pair.cause),
        effect=normalize_text(pair.effect),
        argument_lines=argument_lines,
    )
