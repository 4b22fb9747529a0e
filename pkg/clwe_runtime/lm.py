"""
N-gram language models.

NGramLM is an interpolated Kneser-Ney model with a single fixed discount.
Sentences are padded with one <s> and one </s>; unknown words map to <unk>.
The highest order (and any n-gram starting with <s>) uses raw counts, lower
orders use continuation counts, and the recursion bottoms out in a uniform
distribution over every predictable word (seen words, </s>, <unk>).

All scores are natural logs. ARPA files store log10 values.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Protocol, Sequence, Tuple

from clwe_runtime.errors import EmptyCorpus, NoSmoothingZeroProb, ParseError
from models import Corpus

logger = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LN10 = math.log(10.0)
ARPA_FLOOR = -99.0
PROB_CACHE_SIZE = 1 << 18

Gram = Tuple[str, ...]


class LanguageModel(Protocol):
    order: int

    @property
    def vocabulary(self) -> FrozenSet[str]:
        ...

    def logprob(self, word: str, context: Sequence[str]) -> float:
        ...


def _trim_context(context: Sequence[str], order: int) -> Gram:
    """Last order-1 words, starting no earlier than the last <s>."""
    h = tuple(context)[-(order - 1):] if order > 1 else ()
    if BOS in h[1:]:
        last = len(h) - 1 - h[::-1].index(BOS)
        h = h[last:]
    return h


def next_state(state: Gram, word: str, order: int) -> Gram:
    return _trim_context(state + (word,), order)


class NGramLM:
    """Interpolated Kneser-Ney n-gram model."""

    def __init__(self, order: int, discount: float):
        self.order = order
        self.discount = discount
        # adjusted[m][gram] -> raw or continuation count of an m-gram
        self.adjusted: Dict[int, Dict[Gram, int]] = {}
        # contexts[m][history] -> (sum of adjusted counts, number of distinct followers)
        self.contexts: Dict[int, Dict[Gram, Tuple[int, int]]] = {}
        self._vocabulary: FrozenSet[str] = frozenset()
        self._prob = lru_cache(maxsize=PROB_CACHE_SIZE)(self._interpolated)

    @property
    def vocabulary(self) -> FrozenSet[str]:
        """Predictable words: seen words plus </s> and <unk>."""
        return self._vocabulary

    def fit(self, corpus: Corpus) -> "NGramLM":
        n = self.order
        raw: Dict[int, Counter] = {m: Counter() for m in range(1, n + 1)}
        words = set()
        for sentence in corpus.sentences:
            padded = (BOS,) + tuple(sentence) + (EOS,)
            words.update(sentence)
            for end in range(1, len(padded)):
                for m in range(1, n + 1):
                    start = end - m + 1
                    if start < 0:
                        break
                    raw[m][padded[start:end + 1]] += 1

        for m in range(1, n + 1):
            if m == n:
                self.adjusted[m] = dict(raw[m])
                continue
            left = Counter(g[1:] for g in raw[m + 1])
            self.adjusted[m] = {
                g: (c if g[0] == BOS else left[g]) for g, c in raw[m].items()
            }

        for m in range(1, n + 1):
            totals: Dict[Gram, List[int]] = defaultdict(lambda: [0, 0])
            for g, a in self.adjusted[m].items():
                if a > 0:
                    stats = totals[g[:-1]]
                    stats[0] += a
                    stats[1] += 1
            self.contexts[m] = {h: (t, k) for h, (t, k) in totals.items()}

        self._vocabulary = frozenset(words | {EOS, UNK})
        self._prob.cache_clear()
        return self

    def prob(self, word: str, context: Sequence[str] = ()) -> float:
        w = word if word in self._vocabulary else UNK
        return self._prob(w, _trim_context(context, self.order))

    def _interpolated(self, w: str, h: Gram) -> float:
        m = len(h) + 1
        lower = self._prob(w, h[1:]) if h else 1.0 / len(self._vocabulary)
        stats = self.contexts[m].get(h)
        if stats is None:
            p = lower
        else:
            total, types = stats
            a = self.adjusted[m].get(h + (w,), 0)
            p = max(a - self.discount, 0.0) / total + self.discount * types / total * lower
        return p

    def logprob(self, word: str, context: Sequence[str] = ()) -> float:
        p = self.prob(word, context)
        return math.log(p) if p > 0 else -math.inf

    def backoff_weight(self, h: Gram) -> Optional[float]:
        stats = self.contexts.get(len(h) + 1, {}).get(h)
        if stats is None:
            return None
        total, types = stats
        return self.discount * types / total


class BackoffLM:
    """Backoff model read from an ARPA file."""

    def __init__(self, order: int, probs: Dict[Gram, float], backoffs: Dict[Gram, float]):
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self._vocabulary = frozenset(g[0] for g in probs if len(g) == 1 and g[0] != BOS)

    @property
    def vocabulary(self) -> FrozenSet[str]:
        return self._vocabulary

    def _log10(self, w: str, h: Gram) -> float:
        g = h + (w,)
        if g in self.probs:
            return self.probs[g]
        if not h:
            return self.probs.get((UNK,), ARPA_FLOOR)
        return self.backoffs.get(h, 0.0) + self._log10(w, h[1:])

    def logprob(self, word: str, context: Sequence[str] = ()) -> float:
        w = word if word in self._vocabulary else UNK
        value = self._log10(w, _trim_context(context, self.order))
        return -math.inf if value <= ARPA_FLOOR else value * LN10


class UniformLM:
    """Every predictable word gets the same probability."""

    def __init__(self, words: Iterable[str], order: int = 1):
        self.order = order
        self._vocabulary = frozenset(set(words) | {EOS, UNK})
        self._logp = -math.log(len(self._vocabulary))

    @property
    def vocabulary(self) -> FrozenSet[str]:
        return self._vocabulary

    def logprob(self, word: str, context: Sequence[str] = ()) -> float:
        return self._logp


def train_ngram_lm(corpus: Corpus, order: int = 5, discount: float = 0.75) -> NGramLM:
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if corpus.token_count == 0:
        raise EmptyCorpus(f"cannot train a language model on empty corpus '{corpus.language_tag}'")
    lm = NGramLM(order, discount).fit(corpus)
    logger.info(
        f"Trained {order}-gram LM on '{corpus.language_tag}': "
        f"{len(corpus)} sentences, {len(lm.vocabulary)} predictable words"
    )
    return lm


def lm_logprob(lm: LanguageModel, sentence: Sequence[str], bos: bool = True, eos: bool = True) -> float:
    context: List[str] = [BOS] if bos else []
    total = 0.0
    targets = list(sentence) + ([EOS] if eos else [])
    for word in targets:
        lp = lm.logprob(word, context)
        if lp == -math.inf:
            raise NoSmoothingZeroProb(f"zero probability for '{word}' after {tuple(context[-3:])}")
        total += lp
        context.append(word)
    return total


# ---------------------------------------------------------------------------
# ARPA I/O
# ---------------------------------------------------------------------------

def _log10(p: float) -> float:
    return math.log10(p) if p > 0 else ARPA_FLOOR


def write_arpa(lm: NGramLM, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)

    sections: Dict[int, List[Tuple[Gram, float, Optional[float]]]] = {}
    for m in range(1, lm.order + 1):
        grams = [g for g, a in lm.adjusted[m].items() if a > 0]
        if m == 1:
            grams = sorted(set(grams) | {(w,) for w in lm.vocabulary})
        else:
            grams = sorted(grams)
        entries = []
        for g in grams:
            p = lm.prob(g[-1], g[:-1]) if m > 1 else lm._prob(g[0], ())
            bo = lm.backoff_weight(g) if m < lm.order else None
            entries.append((g, _log10(p), None if bo is None else _log10(bo)))
        if m == 1:
            bo = lm.backoff_weight((BOS,)) if lm.order > 1 else None
            entries.insert(0, ((BOS,), ARPA_FLOOR, None if bo is None else _log10(bo)))
        sections[m] = entries

    with open(out, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for m in range(1, lm.order + 1):
            f.write(f"ngram {m}={len(sections[m])}\n")
        for m in range(1, lm.order + 1):
            f.write(f"\n\\{m}-grams:\n")
            for g, lp, bo in sections[m]:
                line = f"{lp:.7f}\t{' '.join(g)}"
                if bo is not None:
                    line += f"\t{bo:.7f}"
                f.write(line + "\n")
        f.write("\n\\end\\\n")
    return out


def load_arpa(path: str | Path) -> BackoffLM:
    probs: Dict[Gram, float] = {}
    backoffs: Dict[Gram, float] = {}
    declared: Dict[int, int] = {}
    order = 0
    section: Optional[int] = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line == "\\data\\":
                continue
            if line == "\\end\\":
                break
            if line.startswith("ngram "):
                m, count = line[len("ngram "):].split("=")
                declared[int(m)] = int(count)
                order = max(order, int(m))
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:].split("-")[0])
                continue
            if section is None:
                raise ParseError("n-gram entry outside a section", line=lineno, path=str(path))
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise ParseError("expected 'logprob<TAB>words[<TAB>backoff]'", line=lineno, path=str(path))
            gram = tuple(fields[1].split(" "))
            if len(gram) != section:
                raise ParseError(f"{len(gram)}-gram in the {section}-gram section", line=lineno, path=str(path))
            try:
                probs[gram] = float(fields[0])
                if len(fields) == 3:
                    backoffs[gram] = float(fields[2])
            except ValueError as e:
                raise ParseError(str(e), line=lineno, path=str(path)) from e

    for m, count in declared.items():
        found = sum(1 for g in probs if len(g) == m)
        if found != count:
            raise ParseError(f"header declares {count} {m}-grams, found {found}", path=str(path))
    if order == 0:
        raise ParseError("no \\data\\ header", path=str(path))
    return BackoffLM(order, probs, backoffs)
