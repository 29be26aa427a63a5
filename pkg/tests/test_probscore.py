import math
import random

import pytest
from hypothesis import given, strategies as st

from epicon.backends import TokenLogprob, ToyScorer
from epicon.errors import (
    EmptyScore,
    InapplicableConjunction,
    InvariantViolation,
    LengthMismatchWarning,
    NonFiniteScore,
)
from epicon.probscore import (
    CONJUNCTIONS,
    ConjunctionCategory,
    ConjunctionTemplate,
    avg_conditional_prob,
    causal_strength,
    combine_events,
    conjunction_template,
    pmi_dc,
    rank_by_score,
    render_template,
)
from helpers import make_sequence


def lp(*values):
    return [TokenLogprob(token_text=f"t{i}", logprob=v) for i, v in enumerate(values)]


class TestTemplates:
    def test_registry_matches_published_patterns(self):
        expected = {
            "so": "{cause}, so {effect}",
            "because": "Because {cause}, {effect}",
            "since": "Since {cause}, {effect}",
            "as": "As {cause}, {effect}",
            "therefore": "{cause}; therefore, {effect}",
            "thus": "{cause}; thus, {effect}",
            "hence": "{cause}; hence, {effect}",
        }
        assert {w: t.pattern for w, t in CONJUNCTIONS.items()} == expected

    def test_categories(self):
        assert CONJUNCTIONS["so"].category is ConjunctionCategory.COORDINATING
        for word in ("because", "since", "as"):
            assert CONJUNCTIONS[word].category is ConjunctionCategory.SUBORDINATING
        for word in ("therefore", "thus", "hence"):
            assert CONJUNCTIONS[word].category is ConjunctionCategory.CONJUNCTIVE_ADVERB

    def test_cause_precedes_effect_everywhere(self):
        for template in CONJUNCTIONS.values():
            assert template.pattern.index("{cause}") < template.pattern.index("{effect}")

    def test_for_is_rejected(self):
        with pytest.raises(InapplicableConjunction):
            conjunction_template("for")

    def test_effect_first_pattern_cannot_be_built(self):
        with pytest.raises(InvariantViolation):
            ConjunctionTemplate("for", ConjunctionCategory.COORDINATING, "{effect}, for {cause}")

    def test_unknown_word_rejected(self):
        with pytest.raises(InapplicableConjunction):
            conjunction_template("meanwhile")


class TestCombineEvents:
    def test_period_join(self):
        assert (
            combine_events("John leaves.", "He hates the platform.")
            == "John leaves. He hates the platform"
        )

    def test_cause_without_period(self):
        assert combine_events("John leaves", "He is tired") == "John leaves. He is tired"

    def test_exclamation_and_question_stripped_from_cause(self):
        assert combine_events("He left!", "It rained") == "He left. It rained"
        assert combine_events("He left?!", "It rained") == "He left. It rained"

    @given(st.text(min_size=1))
    def test_punctuation_stripping_idempotent(self, cause):
        try:
            once = combine_events(cause, "x")
        except InvariantViolation:
            return  # cause was all punctuation/whitespace; nothing to check
        assert combine_events(once[: -len(". x")], "x") == once


class TestRenderTemplate:
    def test_so(self):
        assert render_template(CONJUNCTIONS["so"], "C", "E") == ("C, so", "E")

    def test_because(self):
        assert render_template(CONJUNCTIONS["because"], "C", "E") == ("Because C,", "E")

    def test_therefore(self):
        assert render_template(CONJUNCTIONS["therefore"], "C", "E") == ("C; therefore,", "E")

    def test_all_templates_split_cleanly(self):
        for template in CONJUNCTIONS.values():
            context, continuation = render_template(template, "the cause text", "the effect")
            assert "the cause text" in context
            assert continuation == "the effect"
            rebuilt = template.pattern.replace("{cause}", "the cause text").replace(
                "{effect}", "the effect"
            )
            assert rebuilt == context + " " + continuation


class TestScores:
    def test_causal_strength_single_token(self):
        assert causal_strength(lp(-1.0)) == -1.0

    def test_causal_strength_additivity(self):
        assert causal_strength(lp(-1.0, -2.0)) == -3.0

    def test_causal_strength_matches_toy_oracle(self):
        scorer = ToyScorer()
        scored = scorer.score_continuation("a cause, so", "the effect", "toy")
        assert causal_strength(scored) == pytest.approx(
            scorer.sequence_logprob("a cause, so", "the effect")
        )

    @given(st.floats(min_value=1e-6, max_value=1.0 - 1e-9), st.floats(min_value=0.01, max_value=0.99))
    def test_token_split_invariance(self, p, split):
        # splitting one token of probability p into p1 * p2 = p leaves the
        # total unchanged
        p1 = p**split
        p2 = p / p1
        whole = causal_strength(lp(math.log(p)))
        parts = causal_strength(lp(math.log(p1), math.log(p2)))
        assert parts == pytest.approx(whole, rel=1e-9, abs=1e-12)

    def test_avg_conditional_prob(self):
        assert avg_conditional_prob(lp(math.log(0.5))) == pytest.approx(0.5)
        assert avg_conditional_prob(lp(math.log(0.2), math.log(0.4))) == pytest.approx(0.3)

    @given(st.lists(st.floats(min_value=-20, max_value=0.0), min_size=1, max_size=10))
    def test_avg_prob_in_unit_interval(self, values):
        result = avg_conditional_prob(lp(*values))
        assert 0 < result <= 1

    def test_pmi_self_ratio_is_zero(self):
        tokens = lp(-0.5, -1.5)
        assert pmi_dc(tokens, tokens) == 0.0

    def test_pmi_difference(self):
        assert pmi_dc(lp(-2.0), lp(-5.0)) == 3.0

    def test_pmi_matches_toy_ratio(self):
        scorer = ToyScorer()
        cond = scorer.score_continuation("the cause. the intermediate, so", "the effect", "toy")
        domain = scorer.score_continuation("", "the effect", "toy")
        expected = scorer.sequence_logprob(
            "the cause. the intermediate, so", "the effect"
        ) - scorer.sequence_logprob("", "the effect")
        assert pmi_dc(cond, domain) == pytest.approx(expected)

    def test_pmi_warns_on_tokenization_mismatch(self):
        with pytest.warns(LengthMismatchWarning):
            pmi_dc(lp(-1.0, -1.0), lp(-2.0))

    def test_empty_scores(self):
        with pytest.raises(EmptyScore):
            causal_strength([])
        with pytest.raises(EmptyScore):
            avg_conditional_prob([])
        with pytest.raises(EmptyScore):
            pmi_dc([], lp(-1.0))


class TestRankByScore:
    def test_increasing_scores_identity(self):
        seq = make_sequence()
        perm = rank_by_score(seq, [float(i) for i in range(10)])
        assert perm.order == tuple(range(1, 11))

    def test_decreasing_scores_reversed(self):
        seq = make_sequence()
        perm = rank_by_score(seq, [float(-i) for i in range(10)])
        assert perm.order == tuple(range(10, 0, -1))

    def test_ties_break_by_generation_position(self):
        seq = make_sequence()
        scores = [float(i) for i in range(10)]
        scores[3] = scores[6] = 99.0  # positions 4 and 7 tie
        perm = rank_by_score(seq, scores)
        assert perm.order.index(4) < perm.order.index(7)

    def test_non_finite_rejected(self):
        seq = make_sequence()
        scores = [float(i) for i in range(10)]
        scores[5] = float("nan")
        with pytest.raises(NonFiniteScore):
            rank_by_score(seq, scores)

    def test_wrong_length_rejected(self):
        with pytest.raises(InvariantViolation):
            rank_by_score(make_sequence(), [1.0, 2.0])


class TestRankingEquivalences:
    def effect_scores(self, scorer, contexts, effect, domain_context=""):
        cond = [scorer.score_continuation(ctx, effect, "toy") for ctx in contexts]
        domain = scorer.score_continuation(domain_context, effect, "toy")
        cs = [causal_strength(c) for c in cond]
        pmi = [pmi_dc(c, domain) for c in cond]
        return cs, pmi

    def test_pmi_equals_causal_strength_ranking(self):
        scorer = ToyScorer()
        seq = make_sequence()
        rng = random.Random(4)
        for _ in range(50):
            effect = f"outcome {rng.randrange(1_000_000)} occurs"
            contexts = [f"cause. intermediate {i} {rng.randrange(1_000_000)}, so" for i in range(10)]
            cs, pmi = self.effect_scores(scorer, contexts, effect)
            assert rank_by_score(seq, cs).order == rank_by_score(seq, pmi).order

    def test_single_token_effects_align_all_three_kinds(self):
        scorer = ToyScorer()
        seq = make_sequence()
        rng = random.Random(9)
        for _ in range(50):
            effect = rng.choice("abcdefghijklmnopqrstuvwxyz")
            contexts = [f"cause. intermediate {i} {rng.randrange(1_000_000)}, so" for i in range(10)]
            cond = [scorer.score_continuation(ctx, effect, "toy") for ctx in contexts]
            domain = scorer.score_continuation("", effect, "toy")
            cs = [causal_strength(c) for c in cond]
            avg = [avg_conditional_prob(c) for c in cond]
            pmi = [pmi_dc(c, domain) for c in cond]
            assert (
                rank_by_score(seq, cs).order
                == rank_by_score(seq, avg).order
                == rank_by_score(seq, pmi).order
            )
