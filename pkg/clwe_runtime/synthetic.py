"""
Synthetic language pairs with a known lexicon.

A latent language (Zipf unigram plus per-word successor lists) is rendered
into two or three surface languages. Each surface language owns a disjoint
consonant set, so surface forms never collide across languages. The gold
lexicon is the relabeling f_A(w) -> f_B(w) over latent words.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

import numpy as np
from pydantic import ValidationError

from clwe_runtime.config import SynthPairSpec
from clwe_runtime.corpus import build_vocabulary
from clwe_runtime.errors import InvalidSpec
from models import BilingualDictionary, Corpus, Vocabulary

logger = logging.getLogger(__name__)

LatentSentence = Tuple[int, ...]

_ALPHABETS = {
    "a": ("bdfgh", "aeiou"),
    "b": ("klmnp", "aeiou"),
    "c": ("rstvz", "aeiou"),
}
_MAX_REDRAWS = 100


@dataclass
class LatentModel:
    unigram_cdf: np.ndarray
    successors: np.ndarray
    successor_cdf: np.ndarray
    bigram_weight: float

    @property
    def size(self) -> int:
        return int(self.successors.shape[0])

    def sample(self, length: int, rng: np.random.Generator) -> LatentSentence:
        unigram_draws = np.searchsorted(self.unigram_cdf, rng.random(length), side="right")
        successor_slots = np.searchsorted(self.successor_cdf, rng.random(length), side="right")
        use_bigram = rng.random(length) < self.bigram_weight
        unigram_draws = np.minimum(unigram_draws, self.size - 1)
        successor_slots = np.minimum(successor_slots, self.successors.shape[1] - 1)

        out = [int(unigram_draws[0])]
        for i in range(1, length):
            if use_bigram[i]:
                out.append(int(self.successors[out[-1], successor_slots[i]]))
            else:
                out.append(int(unigram_draws[i]))
        return tuple(out)

    def diverged(self, fraction: float, rng: np.random.Generator) -> "LatentModel":
        """Copy with a fraction of successor lists re-drawn from the unigram."""
        successors = self.successors.copy()
        n = int(round(fraction * self.size))
        if n:
            rows = rng.choice(self.size, size=n, replace=False)
            draws = np.searchsorted(self.unigram_cdf, rng.random((n, successors.shape[1])), side="right")
            successors[rows] = np.minimum(draws, self.size - 1)
        return LatentModel(self.unigram_cdf, successors, self.successor_cdf, self.bigram_weight)


@dataclass
class SyntheticPair:
    corpus_a: Corpus
    corpus_b: Corpus
    gold: BilingualDictionary
    gold_pairs: List[Tuple[str, str]]
    vocab_a: Vocabulary
    vocab_b: Vocabulary
    lexicon_a: List[str]
    lexicon_b: List[str]
    latent_a: List[LatentSentence]
    latent_b: List[LatentSentence]
    shared_mask: np.ndarray
    held_out: List[Tuple[Tuple[str, ...], Tuple[str, ...]]] = field(default_factory=list)
    corpus_c: Optional[Corpus] = None
    lexicon_c: Optional[List[str]] = None
    gold_pairs_ca: List[Tuple[str, str]] = field(default_factory=list)

    def render_in_b(self, sentence: Tuple[str, ...]) -> Tuple[str, ...]:
        """Word-for-word gold rendering of an A sentence in language B."""
        a2b = dict(zip(self.lexicon_a, self.lexicon_b))
        return tuple(a2b.get(t, t) for t in sentence)


def validate_spec(spec: SynthPairSpec) -> SynthPairSpec:
    try:
        return SynthPairSpec.model_validate(dict(spec))
    except ValidationError as e:
        raise InvalidSpec(str(e)) from e


def surface_lexicon(size: int, language: str, rng: np.random.Generator) -> List[str]:
    """`size` distinct CV-syllable words; lower latent ids get shorter words."""
    consonants, vowels = _ALPHABETS[language]
    syllables = [c + v for c in consonants for v in vowels]
    words: List[str] = []
    n_syll = 1
    while len(words) < size:
        group = ["".join(p) for p in itertools.product(syllables, repeat=n_syll)]
        order = rng.permutation(len(group))
        words.extend(group[i] for i in order[: size - len(words)])
        n_syll += 1
    return words


def latent_model(spec: SynthPairSpec, rng: np.random.Generator) -> LatentModel:
    ranks = np.arange(1, spec.latent_vocab_size + 1, dtype=np.float64)
    unigram = ranks ** (-spec.zipf_exponent)
    unigram /= unigram.sum()
    cdf = np.cumsum(unigram)
    cdf[-1] = 1.0

    b = spec.successors_per_word
    succ_draws = np.searchsorted(cdf, rng.random((spec.latent_vocab_size, b)), side="right")
    successors = np.minimum(succ_draws, spec.latent_vocab_size - 1)
    succ_weights = np.arange(1, b + 1, dtype=np.float64) ** (-spec.zipf_exponent)
    succ_cdf = np.cumsum(succ_weights / succ_weights.sum())
    succ_cdf[-1] = 1.0
    return LatentModel(cdf, successors, succ_cdf, spec.bigram_weight)


def _add_noise(sentence: LatentSentence, rate: float, model: LatentModel, rng: np.random.Generator) -> LatentSentence:
    if rate <= 0:
        return sentence
    hit = rng.random(len(sentence)) < rate
    if not hit.any():
        return sentence
    replacements = np.searchsorted(model.unigram_cdf, rng.random(len(sentence)), side="right")
    replacements = np.minimum(replacements, model.size - 1)
    return tuple(int(replacements[i]) if hit[i] else w for i, w in enumerate(sentence))


def _render(sentence: LatentSentence, lexicon: List[str]) -> Tuple[str, ...]:
    return tuple(lexicon[w] for w in sentence)


def _gold_pairs(
    lex_from: List[str], lex_to: List[str], vocab_from: Vocabulary, vocab_to: Vocabulary
) -> List[Tuple[str, str]]:
    return [
        (s, t) for s, t in zip(lex_from, lex_to)
        if s in vocab_from and t in vocab_to
    ]


def generate_synthetic_pair(
    spec: SynthPairSpec,
    language_tags: Tuple[str, str, str] = ("src", "trg", "thd"),
) -> SyntheticPair:
    spec = validate_spec(spec)
    rng = np.random.default_rng(spec.rng_seed)
    tag_a, tag_b, tag_c = language_tags

    base = latent_model(spec, rng)
    model_a = base.diverged(spec.structural_divergence, rng)
    model_b = base.diverged(spec.structural_divergence, rng)
    lexicon_a = surface_lexicon(spec.latent_vocab_size, "a", rng)
    lexicon_b = surface_lexicon(spec.latent_vocab_size, "b", rng)

    lo, hi = spec.sentence_length_range
    n = spec.sentence_count
    n_shared = int(round(spec.shared_content_fraction * n))
    shared_mask = np.zeros(n, dtype=bool)
    shared_mask[rng.permutation(n)[:n_shared]] = True
    lengths = rng.integers(lo, hi + 1, size=n)

    latent_a: List[LatentSentence] = []
    for i in range(n):
        if shared_mask[i]:
            source_model = model_a if rng.random() < 0.5 else model_b
        else:
            source_model = model_a
        latent_a.append(source_model.sample(int(lengths[i]), rng))

    seen_a: Set[LatentSentence] = set(latent_a)
    latent_b: List[LatentSentence] = []
    for i in range(n):
        if shared_mask[i]:
            latent_b.append(latent_a[i])
            continue
        for _ in range(_MAX_REDRAWS):
            candidate = model_b.sample(int(lengths[i]), rng)
            if candidate not in seen_a:
                break
        else:
            raise InvalidSpec(
                "could not draw a B sentence distinct from every A sentence; "
                "increase latent_vocab_size or sentence lengths"
            )
        latent_b.append(candidate)

    sents_a = [_render(_add_noise(s, spec.noise_substitution_rate, base, rng), lexicon_a) for s in latent_a]
    sents_b = [_render(_add_noise(s, spec.noise_substitution_rate, base, rng), lexicon_b) for s in latent_b]
    corpus_a = Corpus(tuple(sents_a), tag_a)
    corpus_b = Corpus(tuple(sents_b), tag_b)

    held_out = []
    for _ in range(spec.held_out_count):
        latent = base.sample(int(rng.integers(lo, hi + 1)), rng)
        held_out.append((_render(latent, lexicon_a), _render(latent, lexicon_b)))

    vocab_a = build_vocabulary(corpus_a, 1)
    vocab_b = build_vocabulary(corpus_b, 1)
    gold_pairs = _gold_pairs(lexicon_a, lexicon_b, vocab_a, vocab_b)
    gold, _ = BilingualDictionary.from_word_pairs(gold_pairs, vocab_a, vocab_b)

    pair = SyntheticPair(
        corpus_a=corpus_a,
        corpus_b=corpus_b,
        gold=gold,
        gold_pairs=gold_pairs,
        vocab_a=vocab_a,
        vocab_b=vocab_b,
        lexicon_a=lexicon_a,
        lexicon_b=lexicon_b,
        latent_a=latent_a,
        latent_b=latent_b,
        shared_mask=shared_mask,
        held_out=held_out,
    )

    if spec.third_language:
        model_c = base.diverged(spec.third_language_divergence, rng)
        lexicon_c = surface_lexicon(spec.latent_vocab_size, "c", rng)
        lengths_c = rng.integers(lo, hi + 1, size=n)
        sents_c = [_render(model_c.sample(int(length), rng), lexicon_c) for length in lengths_c]
        pair.corpus_c = Corpus(tuple(sents_c), tag_c)
        pair.lexicon_c = lexicon_c
        vocab_c = build_vocabulary(pair.corpus_c, 1)
        pair.gold_pairs_ca = _gold_pairs(lexicon_c, lexicon_a, vocab_c, vocab_a)

    logger.info(
        f"Generated synthetic pair: {n} sentences ({n_shared} shared), "
        f"|V_A|={len(vocab_a)}, |V_B|={len(vocab_b)}, gold={len(gold)}"
    )
    return pair
