"""
Corpus ingestion, normalization, vocabulary construction and statistics.

Files are UTF-8 with one sentence per line, tokens space-separated after
normalization. Dictionaries are `source<TAB>target` TSV.
"""

import logging
import re
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np

from clwe_runtime.errors import EmptyCorpus, LanguageMismatch, ParseError
from models import Corpus, Vocabulary
from schemas import CorpusStats

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def normalize_text(raw: str, lowercase: bool = True) -> List[str]:
    """Split on whitespace and punctuation boundaries.

    Runs of word characters form one token, every other non-space character
    is its own token.
    """
    text = raw.lower() if lowercase else raw
    return _TOKEN_RE.findall(text)


def build_vocabulary(corpus: Corpus, min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    return Vocabulary.from_counts(corpus.counts(), min_count=min_count)


def type_token_ratio(corpus: Corpus) -> float:
    tokens = corpus.token_count
    if tokens == 0:
        raise EmptyCorpus(f"corpus '{corpus.language_tag}' has no tokens")
    return len(corpus.counts()) / tokens


def concat_corpora(a: Corpus, b: Corpus) -> Corpus:
    if a.language_tag != b.language_tag:
        raise LanguageMismatch(f"cannot concatenate '{a.language_tag}' with '{b.language_tag}'")
    return Corpus(a.sentences + b.sentences, a.language_tag)


def repeat_corpus(corpus: Corpus, times: int) -> Corpus:
    if times < 1:
        raise ValueError(f"times must be >= 1, got {times}")
    return Corpus(corpus.sentences * times, corpus.language_tag)


def split_corpus(corpus: Corpus, parts: int = 2) -> List[Corpus]:
    """Even contiguous split; earlier parts take the remainder."""
    if parts < 1:
        raise ValueError(f"parts must be >= 1, got {parts}")
    bounds = np.linspace(0, len(corpus), parts + 1)
    edges = np.ceil(bounds).astype(int)
    return [
        Corpus(corpus.sentences[edges[i]:edges[i + 1]], corpus.language_tag)
        for i in range(parts)
    ]


def sample_sentences(corpus: Corpus, n: int, rng: np.random.Generator) -> Tuple[Corpus, np.ndarray]:
    """Draw n sentences without replacement. Returns the sample and its source indices."""
    if n > len(corpus):
        raise ValueError(f"cannot sample {n} sentences from a corpus of {len(corpus)}")
    idx = rng.choice(len(corpus), size=n, replace=False)
    return corpus.subset(idx.tolist()), idx


def corpus_statistics(corpus: Corpus) -> CorpusStats:
    tokens = corpus.token_count
    types = len(corpus.counts())
    return CorpusStats(
        language_tag=corpus.language_tag,
        sentences=len(corpus),
        tokens=tokens,
        types=types,
        ttr=(types / tokens) if tokens else 0.0,
        mean_sentence_length=(tokens / len(corpus)) if len(corpus) else 0.0,
    )


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def read_corpus(path: str | Path, language_tag: str, lowercase: bool = True) -> Corpus:
    sentences = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            tokens = normalize_text(line, lowercase=lowercase)
            if tokens:
                sentences.append(tuple(tokens))
    logger.info(f"Read {len(sentences)} sentences from {path}")
    return Corpus(tuple(sentences), language_tag)


def write_corpus(corpus: Corpus, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for sentence in corpus.sentences:
            f.write(" ".join(sentence) + "\n")
    return out


def read_word_pairs(path: str | Path) -> List[Tuple[str, str]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ParseError("expected 'source<TAB>target'", line=lineno, path=str(path))
            pairs.append((fields[0], fields[1]))
    return pairs


def write_word_pairs(pairs: Iterable[Tuple[str, str]], path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        for s, t in pairs:
            f.write(f"{s}\t{t}\n")
    return out


def tokenize_file(src: str | Path, dst: str | Path, lowercase: bool = True) -> int:
    """Normalize a raw text file into the corpus format. Returns the sentence count."""
    corpus = read_corpus(src, language_tag="raw", lowercase=lowercase)
    write_corpus(corpus, dst)
    return len(corpus)

