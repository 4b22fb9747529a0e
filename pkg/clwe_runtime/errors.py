"""Exception hierarchy for the toolkit.

Every failure a caller can act on is a ``ClweError``. Errors caused by bad
arguments additionally subclass ``ValueError`` so generic callers can treat
them as such.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class ClweError(RuntimeError):
    """Base class for all toolkit errors."""


class InvalidConfig(ClweError, ValueError):
    """Raised when a configuration document or knob fails validation."""


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------

class EmptyCorpus(ClweError, ValueError):
    """Raised when an operation needs at least one token and got none."""


class EmptyVocabulary(ClweError, ValueError):
    """Raised when no word survives the frequency cutoff."""


class LanguageMismatch(ClweError, ValueError):
    """Raised when corpora with different language tags are combined."""


class InvalidSpec(ClweError, ValueError):
    """Raised when a synthetic pair specification violates its invariants."""


class ParseError(ClweError, ValueError):
    """Raised when an interchange file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

class DegenerateVocabulary(ClweError, ValueError):
    """Raised when the vocabulary is too small for negative sampling."""


class DimensionMismatch(ParseError):
    """Raised when vector dimensions disagree."""


class ZeroVector(ClweError, ValueError):
    """Raised when a zero-norm vector reaches a normalizing operation."""


class NumericalError(ClweError):
    """Raised when training produced non-finite values."""


# ---------------------------------------------------------------------------
# crossmap / structsim
# ---------------------------------------------------------------------------

class CutoffTooLarge(ClweError, ValueError):
    """Raised when a frequency cutoff exceeds a vocabulary size."""


class RankDeficient(ClweError):
    """Raised when the unconstrained normal equations are singular."""


class EmptyDictionary(ClweError, ValueError):
    """Raised when a mapping is requested from an empty dictionary."""


class KTooLarge(ClweError, ValueError):
    """Raised when a neighborhood size does not fit the candidate set."""


class InvalidK(ClweError, ValueError):
    """Raised when a kNN graph is requested with an impossible k."""


class SolverError(ClweError):
    """Raised when an eigensolver or linear solver fails."""


# ---------------------------------------------------------------------------
# umt
# ---------------------------------------------------------------------------

class NoSmoothingZeroProb(ClweError):
    """Raised when an unsmoothed language model assigns zero probability."""


class EmptyParallel(ClweError, ValueError):
    """Raised when alignment training receives no sentence pairs."""


class LengthMismatch(ClweError, ValueError):
    """Raised when hypothesis and reference collections differ in size."""


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

class EmptyTestSet(ClweError, ValueError):
    """Raised when an evaluation set is empty."""


class AllQueriesOov(ClweError):
    """Raised when every BLI query is out of vocabulary."""


class InsufficientCoverage(ClweError):
    """Raised when fewer than two word-similarity pairs are covered."""


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

class StageError(ClweError):
    """Raised when a pipeline stage fails; keeps the partial manifest."""

    def __init__(self, stage: str, cause: BaseException, manifest: Optional[Dict[str, Any]] = None):
        self.stage = stage
        self.cause = cause
        self.manifest = dict(manifest or {})
        super().__init__(f"stage '{stage}' failed: {cause}")


class LockHeld(ClweError):
    """Raised when another pipeline process owns the output directory."""
