import random

import pytest

from kfuse.embedding import EmbeddingProvider
from kfuse.injector import (
    InjectionConfig,
    InjectionOutcome,
    ManualOverrideTable,
    build_candidate_sequence,
    inject_pair_with_outcome,
    inject_sentence,
    inject_with_outcome,
    k_query,
    select_entity,
)
from kfuse.kg import Category, EntityRecord, Triplet
from kfuse.matcher import find_mentions, tokenize
from kfuse.tree import flatten

from oracles import select_oracle


class TestKQuery:
    def test_manchester_united_gets_football_club(self, store):
        tokens = tokenize("Manchester United won the match")
        mentions = find_mentions(tokens, store)
        per_mention = k_query(tokens, store, mentions)
        assert len(per_mention) == 1
        (entity_id, triplets) = per_mention[0][0]
        assert entity_id == "Q16"
        assert ("instance of", "football club") in [
            (t.relation, t.object_text) for t in triplets
        ]

    def test_full_ablation_keeps_candidates_with_empty_lists(self, store):
        tokens = tokenize("Apple makes phones")
        mentions = find_mentions(tokens, store)
        per_mention = k_query(tokens, store, mentions, set(Category))
        assert len(per_mention) == 1
        assert [triplets for _, triplets in per_mention[0]] == [[], []]
        assert [entity_id for entity_id, _ in per_mention[0]] == ["Q312", "Q89"]

    def test_no_mentions_empty_result(self, store):
        tokens = tokenize("nothing matches at all")
        assert k_query(tokens, store, find_mentions(tokens, store)) == []


class TestBuildCandidateSequence:
    def test_label_and_description(self):
        record = EntityRecord(id="Q1", label="Apple Inc.", description="technology company")
        assert build_candidate_sequence(record) == "Apple Inc.; technology company"

    def test_label_only(self):
        record = EntityRecord(id="Q1", label="widget")
        assert build_candidate_sequence(record) == "widget"

    def test_full_record_follows_triplet_order(self, store):
        # alias*, instance of* (resolved), description; derived by hand
        assert build_candidate_sequence(store.records["Q16"], store) == (
            "Manchester United; Man Utd; Man United; football club; "
            "English professional football club"
        )

    def test_unresolved_cat_uses_raw_id(self):
        record = EntityRecord(id="Q1", label="thing", instance_of=("Q999",))
        assert build_candidate_sequence(record) == "thing; Q999"


class TestSelectEntity:
    def test_high_similarity_selected(self, hash_provider):
        chosen = select_entity(
            [("Q1", "alpha beta gamma")], "alpha beta gamma", hash_provider, 0.5
        )
        assert chosen is not None and chosen.entity_id == "Q1"
        assert chosen.similarity > 0.99

    def test_below_threshold_rejected(self, hash_provider):
        chosen = select_entity(
            [("Q1", "totally unrelated words")], "alpha beta gamma", hash_provider, 0.5
        )
        assert chosen is None

    def test_threshold_is_strict(self, hash_provider):
        assert select_entity([("Q1", "same text")], "same text", hash_provider, 1.0) is None

    def test_empty_candidates(self, hash_provider):
        assert select_entity([], "anything", hash_provider, 0.0) is None

    def test_tie_breaks_to_ascending_id(self, hash_provider):
        chosen = select_entity(
            [("Q9", "same words"), ("Q10", "same words")], "same words", hash_provider, 0.0
        )
        assert chosen.entity_id == "Q10"  # "Q10" < "Q9" lexicographically

    def test_argmax_beats_weaker_candidate(self, hash_provider):
        sentence = "the striker scored for the football club last night"
        weak = "quantum chromodynamics lattice"
        strong = "football club; the striker scored"
        chosen = select_entity([("Q1", weak), ("Q2", strong)], sentence, hash_provider, 0.0)
        assert chosen.entity_id == "Q2"

    def test_matches_bruteforce_oracle_on_random_sets(self, hash_provider):
        rng = random.Random(13)
        words = "alpha beta gamma delta epsilon zeta eta theta iota kappa".split()
        for _ in range(300):
            sentence = " ".join(rng.choices(words, k=rng.randrange(1, 6)))
            candidates = [
                (f"Q{i}", " ".join(rng.choices(words, k=rng.randrange(1, 6))))
                for i in range(rng.randrange(0, 5))
            ]
            threshold = rng.uniform(-1.0, 1.0)
            chosen = select_entity(candidates, sentence, hash_provider, threshold)
            expected = select_oracle(candidates, sentence, hash_provider, threshold)
            if expected is None:
                assert chosen is None
            else:
                assert chosen is not None
                assert (chosen.entity_id, chosen.similarity) == (expected[0], expected[2])


def config(**kwargs):
    return InjectionConfig(**kwargs)


class TestInjectSentence:
    def test_no_mentions_gives_singleton_groups(self, store, hash_provider):
        tokens = tokenize("totally unknown words here")
        tree = inject_sentence(tokens, store, hash_provider, config())
        assert [g.tokens for g in tree.groups] == [(t,) for t in tokens.tokens]
        assert all(not g.branches for g in tree.groups)

    def test_injection_attaches_branches(self, store, hash_provider):
        tokens = tokenize("Manchester United won")
        tree = inject_sentence(tokens, store, hash_provider, config(threshold=-1.0))
        mention_groups = [g for g in tree.groups if g.mention_entity]
        assert len(mention_groups) == 1
        assert mention_groups[0].tokens == ("Manchester", "United")
        assert mention_groups[0].branches

    def test_ablation_soundness(self, store, hash_provider):
        relation_of = {"alias": Category.ALIAS, "instance of": Category.CAT,
                       "subclass of": Category.CAT, "description": Category.DESC}
        texts = [
            "Manchester United won",
            "Apple unveiled a phone in New York City",
            "the city took fruit from United",
        ]
        for ablation in ({Category.ALIAS}, {Category.CAT, Category.DESC}, set(Category)):
            for text in texts:
                tree = inject_sentence(
                    tokenize(text), store, hash_provider,
                    config(threshold=-1.0, ablation=frozenset(ablation)),
                )
                for group in tree.groups:
                    for branch in group.branches:
                        assert relation_of[branch.relation] not in ablation

    def test_full_ablation_yields_no_branches(self, store, hash_provider):
        tree = inject_sentence(
            tokenize("Manchester United and Apple"), store, hash_provider,
            config(threshold=-1.0, ablation=frozenset(Category)),
        )
        assert all(not g.branches for g in tree.groups)

    def test_max_triplets_cap(self, store, hash_provider):
        tokens = tokenize("Manchester United won")
        tree = inject_sentence(
            tokens, store, hash_provider, config(threshold=-1.0, max_triplets_per_entity=1)
        )
        mention_group = next(g for g in tree.groups if g.mention_entity)
        assert len(mention_group.branches) == 1
        # cap keeps the first triplet in deterministic order: the first alias
        assert mention_group.branches[0].relation == "alias"

    def test_gating_when_sentence_already_at_budget(self, store, hash_provider):
        text = "Manchester United " + " ".join(f"w{i}" for i in range(8))
        tokens = tokenize(text)  # 10 tokens
        tree, outcome = inject_with_outcome(
            tokens, store, hash_provider,
            config(threshold=-1.0, gating=True, max_length=len(tokens.tokens)),
        )
        assert outcome is InjectionOutcome.GATED
        assert all(not g.branches for g in tree.groups)
        assert flatten(tree).n == len(tokens.tokens)

    def test_gating_off_allows_overflow(self, store, hash_provider):
        tokens = tokenize("Manchester United plus pad pad pad pad pad pad pad pad")
        tree, outcome = inject_with_outcome(
            tokens, store, hash_provider,
            config(threshold=-1.0, gating=False, max_length=len(tokens.tokens)),
        )
        assert outcome is InjectionOutcome.INJECTED
        assert flatten(tree).n > len(tokens.tokens)

    def test_gating_keeps_fit_injection(self, store, hash_provider):
        tokens = tokenize("Manchester United won")
        tree, outcome = inject_with_outcome(
            tokens, store, hash_provider,
            config(threshold=-1.0, gating=True, max_length=64),
        )
        assert outcome is InjectionOutcome.INJECTED
        assert flatten(tree).n <= 64

    def test_original_tokens_preserved(self, store, hash_provider):
        for text in ["Manchester United won", "Apple and New York City", "plain words"]:
            tokens = tokenize(text)
            tree = inject_sentence(tokens, store, hash_provider, config(threshold=-1.0))
            seq = flatten(tree)
            main = [t for t, b in zip(seq.tokens, seq.is_branch) if not b]
            assert main == list(tokens.tokens)

    def test_determinism(self, store, hash_provider):
        tokens = tokenize("Apple and Manchester United in New York City")
        cfg = config(threshold=-1.0)
        assert inject_sentence(tokens, store, hash_provider, cfg) == inject_sentence(
            tokens, store, hash_provider, cfg
        )

    def test_threshold_one_injects_nothing(self, store, hash_provider):
        tokens = tokenize("Manchester United Manchester United")
        tree = inject_sentence(tokens, store, hash_provider, config(threshold=1.0))
        assert all(not g.branches for g in tree.groups)

    def test_threshold_monotonicity(self, store, hash_provider):
        texts = [
            "Manchester United won the cup",
            "Apple released a laptop",
            "New York City is large",
            "the fruit market sells apple and pear",
            "United flew to the city",
        ]
        injected_counts = []
        for threshold in [round(0.1 * i, 1) for i in range(11)]:
            count = 0
            for text in texts:
                tree = inject_sentence(
                    tokenize(text), store, hash_provider, config(threshold=threshold)
                )
                count += any(g.branches for g in tree.groups)
            injected_counts.append(count)
        assert injected_counts == sorted(injected_counts, reverse=True)


class TestManualOverrides:
    def test_override_replaces_scoring(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("s1", "Manchester United", [
            Triplet(subject="", relation="instance of", object_text="football club")
        ])
        tokens = tokenize("Manchester United won")
        # threshold 1.0 blocks the scored path; the override must still land
        tree = inject_sentence(
            tokens, store, hash_provider, config(threshold=1.0), overrides, "s1"
        )
        mention_group = next(g for g in tree.groups if g.mention_entity)
        assert [(b.relation, b.object_tokens) for b in mention_group.branches] == [
            ("instance of", ("football", "club"))
        ]

    def test_empty_override_suppresses(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("s1", "Manchester United", [])
        tokens = tokenize("Manchester United won")
        tree = inject_sentence(
            tokens, store, hash_provider, config(threshold=-1.0), overrides, "s1"
        )
        mention_group = next(g for g in tree.groups if g.mention_entity)
        assert mention_group.tokens == ("Manchester", "United")
        assert mention_group.branches == ()

    def test_override_only_applies_to_its_sentence(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("s1", "Manchester United", [])
        tree = inject_sentence(
            tokenize("Manchester United won"), store, hash_provider,
            config(threshold=-1.0), overrides, "s2",
        )
        mention_group = next(g for g in tree.groups if g.mention_entity)
        assert mention_group.branches  # s2 not overridden, scoring applies

    def test_missed_override_counted(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("s1", "Flux Capacitor", [])
        inject_sentence(
            tokenize("Manchester United won"), store, hash_provider,
            config(threshold=-1.0), overrides, "s1",
        )
        assert overrides.missed == 1

    def test_ablation_filters_override_triplets(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("s1", "Manchester United", [
            Triplet(subject="", relation="description", object_text="a football club"),
            Triplet(subject="", relation="alias", object_text="Red Devils"),
        ])
        tree = inject_sentence(
            tokenize("Manchester United won"), store, hash_provider,
            config(threshold=-1.0, ablation=frozenset({Category.DESC})), overrides, "s1",
        )
        mention_group = next(g for g in tree.groups if g.mention_entity)
        assert [b.relation for b in mention_group.branches] == ["alias"]

    def test_duplicate_key_rejected(self):
        overrides = ManualOverrideTable()
        overrides.add("s1", "x", [])
        with pytest.raises(Exception, match="duplicate"):
            overrides.add("s1", "X", [])


class TestInjectPair:
    def test_pair_gating_drops_both_halves(self, store, hash_provider):
        tokens_a = tokenize("Manchester United " + " ".join(f"a{i}" for i in range(3)))
        tokens_b = tokenize("Apple " + " ".join(f"b{i}" for i in range(4)))
        cfg = config(threshold=-1.0, gating=True, max_length=10)
        tree_a, tree_b, outcome = inject_pair_with_outcome(
            tokens_a, tokens_b, store, hash_provider, cfg
        )
        assert outcome is InjectionOutcome.GATED
        assert all(not g.branches for g in tree_a.groups + tree_b.groups)

    def test_pair_keeps_fitting_injection(self, store, hash_provider):
        tokens_a = tokenize("Manchester United won")
        tokens_b = tokenize("good game")
        cfg = config(threshold=-1.0, gating=True, max_length=64)
        tree_a, tree_b, outcome = inject_pair_with_outcome(
            tokens_a, tokens_b, store, hash_provider, cfg
        )
        assert outcome is InjectionOutcome.INJECTED
        assert any(g.branches for g in tree_a.groups)

    def test_bare_pair(self, store, hash_provider):
        tree_a, tree_b, outcome = inject_pair_with_outcome(
            tokenize("no matches"), tokenize("none here"), store, hash_provider,
            config(threshold=-1.0, gating=True, max_length=10),
        )
        assert outcome is InjectionOutcome.BARE

    def test_override_found_in_one_half_is_not_missed(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("p1", "Manchester United", [
            Triplet(subject="", relation="description", object_text="a club")
        ])
        inject_pair_with_outcome(
            tokenize("plain words"), tokenize("Manchester United won"),
            store, hash_provider, config(threshold=1.0), overrides, "p1",
        )
        assert overrides.missed == 0

    def test_override_absent_from_both_halves_missed_once(self, store, hash_provider):
        overrides = ManualOverrideTable()
        overrides.add("p1", "Flux Capacitor", [])
        inject_pair_with_outcome(
            tokenize("plain words"), tokenize("more words"),
            store, hash_provider, config(threshold=1.0), overrides, "p1",
        )
        assert overrides.missed == 1


class TestConfigValidation:
    def test_threshold_range(self):
        with pytest.raises(ValueError):
            InjectionConfig(threshold=1.5)

    def test_max_triplets_positive(self):
        with pytest.raises(ValueError):
            InjectionConfig(max_triplets_per_entity=0)
