import itertools
import random

import pytest

from epicon.core import (
    CauseEffectPair,
    Polarity,
    RankedPermutation,
    presentation_order,
    validate_sequence,
)
from epicon.errors import DuplicateIntermediate, GenerationParseError, IdMismatch
from epicon.extraction import (
    apply_presentation,
    assemble_sequence,
    parse_generated_pair,
    parse_ranking,
)

PAIR = CauseEffectPair(
    id="p1",
    cause="John wants to leave his current party",
    effect="Months later, he joins the opposition",
    original_supporter="leaving a party can imply preferring another one",
    original_defeater="John decides to become an independent politician",
)

EIGHT = {
    "weaker_defeaters": ("weak defeater one", "weak defeater two"),
    "stronger_defeaters": ("strong defeater one", "strong defeater two"),
    "weaker_supporters": ("weak supporter one", "weak supporter two"),
    "stronger_supporters": ("strong supporter one", "strong supporter two"),
}


class TestParseGeneratedPair:
    def test_numbered_list(self):
        assert parse_generated_pair("1. Arg one\n2. Arg two") == ("Arg one", "Arg two")

    def test_chatty_preamble(self):
        text = "Sure, here are the arguments:\nArg one\nArg two"
        assert parse_generated_pair(text) == ("Arg one", "Arg two")

    def test_undercount(self):
        with pytest.raises(GenerationParseError) as err:
            parse_generated_pair("Arg one")
        assert err.value.found_count == 1

    def test_overcount(self):
        with pytest.raises(GenerationParseError) as err:
            parse_generated_pair("1. A\n2. B\n3. C")
        assert err.value.found_count == 3


class TestAssembleSequence:
    def test_originals_land_at_intensity_three(self):
        seq = assemble_sequence(PAIR, **EIGHT)
        assert len(seq.items) == 10
        by_slot = {it.slot: it.text for it in seq.items}
        assert by_slot[-3] == PAIR.original_defeater
        assert by_slot[3] == PAIR.original_supporter
        validate_sequence(seq)

    def test_chained_strength_semantics(self):
        # oracle: unroll "first is weaker/stronger than the original, second
        # than the first" into numeric influence strengths, then check the
        # assembled slots sort the same way
        strength = {
            EIGHT["stronger_defeaters"][1]: -5,
            EIGHT["stronger_defeaters"][0]: -4,
            PAIR.original_defeater: -3,
            EIGHT["weaker_defeaters"][0]: -2,
            EIGHT["weaker_defeaters"][1]: -1,
            EIGHT["weaker_supporters"][1]: 1,
            EIGHT["weaker_supporters"][0]: 2,
            PAIR.original_supporter: 3,
            EIGHT["stronger_supporters"][0]: 4,
            EIGHT["stronger_supporters"][1]: 5,
        }
        seq = assemble_sequence(PAIR, **EIGHT)
        expected_order = sorted(strength, key=strength.get)
        assert [it.text for it in seq.items] == expected_order
        assert [it.slot for it in seq.items] == sorted(strength.values())

    def test_duplicate_against_original(self):
        clashing = dict(EIGHT)
        clashing["weaker_defeaters"] = (PAIR.original_defeater, "weak defeater two")
        with pytest.raises(DuplicateIntermediate):
            assemble_sequence(PAIR, **clashing)

    def test_duplicate_after_normalization(self):
        clashing = dict(EIGHT)
        clashing["stronger_supporters"] = ("strong supporter one", ' "strong  supporter one" ')
        with pytest.raises(DuplicateIntermediate):
            assemble_sequence(PAIR, **clashing)

    def test_polarity_blocks(self):
        seq = assemble_sequence(PAIR, **EIGHT)
        assert all(it.polarity is Polarity.DEFEATER for it in seq.items[:5])
        assert all(it.polarity is Polarity.SUPPORTER for it in seq.items[5:])


def render(perm, style):
    if style == "single-space":
        return " ".join(str(v) for v in perm)
    if style == "single-comma":
        return ", ".join(str(v) for v in perm)
    if style == "per-line":
        return "\n".join(str(v) for v in perm)
    if style == "per-line-dot":
        return "\n".join(f"{v}." for v in perm)
    raise ValueError(style)


class TestParseRanking:
    def test_single_line(self):
        perm = parse_ranking("3 1 2 5 4 7 6 9 10 8", 10)
        assert perm.order == (3, 1, 2, 5, 4, 7, 6, 9, 10, 8)

    def test_one_number_per_line(self):
        perm = parse_ranking("3\n1\n2\n5\n4\n7\n6\n9\n10\n8", 10)
        assert perm.order == (3, 1, 2, 5, 4, 7, 6, 9, 10, 8)

    def test_repeated_value_rejected(self):
        from epicon.errors import RankExtractionError

        with pytest.raises(RankExtractionError) as err:
            parse_ranking("The ranking is: 1 1 2 3 4 5 6 7 8 9", 10)
        assert len(err.value.strategy_log) == 3

    @pytest.mark.parametrize("style", ["single-space", "single-comma", "per-line", "per-line-dot"])
    def test_round_trip_exhaustive_small_k(self, style):
        for k in range(2, 6):
            for perm in itertools.permutations(range(1, k + 1)):
                parsed = parse_ranking(render(perm, style), k)
                assert parsed.order == perm

    @pytest.mark.parametrize("style", ["single-space", "single-comma", "per-line", "per-line-dot"])
    def test_round_trip_random_k10(self, style):
        rng = random.Random(7)
        for _ in range(250):
            perm = tuple(rng.sample(range(1, 11), 10))
            assert parse_ranking(render(perm, style), 10).order == perm


class TestApplyPresentation:
    def shuffle(self, indices, pair_id="p1", seed=0):
        from epicon.core import PresentationOrder

        return PresentationOrder(pair_id=pair_id, shuffled_indices=tuple(indices), seed=seed)

    def test_identity_composition(self):
        pres = self.shuffle(range(1, 11))
        local = RankedPermutation(pair_id="", order=tuple(range(1, 11)))
        assert apply_presentation(local, pres).order == tuple(range(1, 11))

    def test_shuffle_passthrough(self):
        pres = self.shuffle([2, 1] + list(range(3, 11)))
        local = RankedPermutation(pair_id="", order=tuple(range(1, 11)))
        assert apply_presentation(local, pres).order == (2, 1, 3, 4, 5, 6, 7, 8, 9, 10)

    def test_inverse_recovers_identity(self):
        rng = random.Random(11)
        for _ in range(1_000):
            sigma = rng.sample(range(1, 11), 10)
            inverse = [0] * 10
            for t, g in enumerate(sigma, start=1):
                inverse[g - 1] = t
            local = RankedPermutation(pair_id="", order=tuple(inverse))
            assert apply_presentation(local, self.shuffle(sigma)).order == tuple(range(1, 11))

    def test_composition_recovers_target(self):
        # ranking sigma-inverse-of-pi over presentation sigma gives back pi
        rng = random.Random(13)
        for _ in range(10_000):
            k = rng.choice((4, 10))
            sigma = rng.sample(range(1, k + 1), k)
            pi = rng.sample(range(1, k + 1), k)
            position_in_sigma = {g: t for t, g in enumerate(sigma, start=1)}
            local = RankedPermutation(pair_id="", order=tuple(position_in_sigma[g] for g in pi))
            assert apply_presentation(local, self.shuffle(sigma)).order == tuple(pi)

    def test_length_mismatch(self):
        local = RankedPermutation(pair_id="", order=(1, 2, 3))
        with pytest.raises(IdMismatch):
            apply_presentation(local, self.shuffle(range(1, 11)))

    def test_pair_id_mismatch(self):
        local = RankedPermutation(pair_id="other", order=tuple(range(1, 11)))
        with pytest.raises(IdMismatch):
            apply_presentation(local, self.shuffle(range(1, 11), pair_id="p1"))

    def test_seeded_shuffle_composes(self):
        pres = presentation_order("p1", 10, seed=99)
        local = RankedPermutation(pair_id="", order=tuple(range(1, 11)))
        assert apply_presentation(local, pres).order == pres.shuffled_indices
