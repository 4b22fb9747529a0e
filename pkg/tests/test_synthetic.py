"""Tests for the synthetic language-pair generator."""

from collections import Counter

import numpy as np
import pytest

from clwe_runtime.config import SynthPairSpec
from clwe_runtime.errors import InvalidSpec
from clwe_runtime.synthetic import generate_synthetic_pair, surface_lexicon, validate_spec


SMALL = dict(latent_vocab_size=80, sentence_count=200, sentence_length_range=(4, 8), held_out_count=5)


def _cooccurrences(corpus, window=2):
    counts = Counter()
    for sentence in corpus.sentences:
        for i, w in enumerate(sentence):
            for j in range(max(0, i - window), min(len(sentence), i + window + 1)):
                if j != i:
                    counts[(w, sentence[j])] += 1
    return counts


class TestSpec:
    def test_invalid_fraction_rejected(self):
        with pytest.raises(Exception):
            SynthPairSpec(shared_content_fraction=1.5)

    def test_validate_spec_wraps_errors(self):
        spec = SynthPairSpec.model_construct(**{**SynthPairSpec().model_dump(), "latent_vocab_size": 0})
        with pytest.raises(InvalidSpec):
            validate_spec(spec)

    def test_length_range_order(self):
        with pytest.raises(Exception):
            SynthPairSpec(sentence_length_range=(5, 2))


class TestLexicon:
    def test_words_are_distinct(self):
        words = surface_lexicon(300, "a", np.random.default_rng(0))
        assert len(words) == len(set(words)) == 300

    def test_languages_never_share_forms(self):
        a = set(surface_lexicon(200, "a", np.random.default_rng(0)))
        b = set(surface_lexicon(200, "b", np.random.default_rng(0)))
        assert not a & b


class TestGeneration:
    def test_same_seed_same_pair(self):
        p1 = generate_synthetic_pair(SynthPairSpec(**SMALL, rng_seed=4))
        p2 = generate_synthetic_pair(SynthPairSpec(**SMALL, rng_seed=4))
        assert p1.corpus_a == p2.corpus_a
        assert p1.corpus_b == p2.corpus_b
        assert p1.gold == p2.gold

    def test_different_seed_differs(self):
        p1 = generate_synthetic_pair(SynthPairSpec(**SMALL, rng_seed=1))
        p2 = generate_synthetic_pair(SynthPairSpec(**SMALL, rng_seed=2))
        assert p1.corpus_a != p2.corpus_a

    def test_shared_fraction_and_disjoint_unshared(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL, shared_content_fraction=0.5))
        assert int(pair.shared_mask.sum()) == 100
        seen_a = set(pair.latent_a)
        for i, shared in enumerate(pair.shared_mask):
            if shared:
                assert pair.latent_b[i] == pair.latent_a[i]
            else:
                assert pair.latent_b[i] not in seen_a

    def test_gold_relabels_shared_sentences(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL))
        i = int(np.flatnonzero(pair.shared_mask)[0])
        assert pair.render_in_b(pair.corpus_a[i]) == pair.corpus_b[i]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_fully_shared_pair_has_relabeled_cooccurrences(self, seed):
        spec = SynthPairSpec(**SMALL, rng_seed=seed, shared_content_fraction=1.0, noise_substitution_rate=0.0)
        pair = generate_synthetic_pair(spec)
        a2b = dict(pair.gold_pairs)
        assert set(a2b) == set(pair.vocab_a.words)
        relabeled = Counter()
        for (u, v), c in _cooccurrences(pair.corpus_a).items():
            relabeled[(a2b[u], a2b[v])] += c
        assert relabeled == _cooccurrences(pair.corpus_b)

    def test_gold_words_are_in_both_vocabularies(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL))
        for s, t in pair.gold_pairs:
            assert s in pair.vocab_a
            assert t in pair.vocab_b
        assert len(pair.gold) == len(pair.gold_pairs)

    def test_language_tags(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL), language_tags=("en", "fr", "de"))
        assert pair.corpus_a.language_tag == "en"
        assert pair.corpus_b.language_tag == "fr"

    def test_held_out_pairs_are_word_for_word(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL))
        assert len(pair.held_out) == 5
        a2b = dict(zip(pair.lexicon_a, pair.lexicon_b))
        for src, trg in pair.held_out:
            assert tuple(a2b[w] for w in src) == trg

    def test_third_language(self):
        pair = generate_synthetic_pair(SynthPairSpec(**SMALL, third_language=True))
        assert pair.corpus_c is not None
        assert len(pair.corpus_c) == 200
        assert pair.gold_pairs_ca
        assert not set(pair.lexicon_c) & set(pair.lexicon_a)
