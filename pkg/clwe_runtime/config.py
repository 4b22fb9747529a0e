"""
Configuration models and loader for pipeline runs.

Every knob lives on a pydantic model with its default. A run is described by
one YAML document (see data/default_config.yaml); environment variables with
the CLWE_ prefix and CLI flags override it.

Precedence: CLI flag > environment > config file > default.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal, Optional, Tuple

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from clwe_runtime.errors import InvalidConfig
from clwe_runtime.paths import DEFAULT_OUT_DIR, default_config_path

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward", "union"]
Retrieval = Literal["cosine", "csls"]
MappingMode = Literal["orthogonal", "unconstrained"]
AugmentationPlan = Literal["none", "src-only", "tgt-only", "both"]
KRule = Literal["cumulative_ge", "strict_below"]
KCombine = Literal["min", "max"]


def _check_fraction(v: float, name: str, upper_open: bool = False) -> float:
    if v < 0.0 or v > 1.0 or (upper_open and v >= 1.0):
        bound = "[0,1)" if upper_open else "[0,1]"
        raise ValueError(f"{name} must be in {bound}, got {v}")
    return v


# ---------------------------------------------------------------------------
# corpus
# ---------------------------------------------------------------------------

class CorpusConfig(BaseModel):
    """Where the monolingual corpora come from when not synthetic."""
    source_path: Optional[str] = None
    target_path: Optional[str] = None
    third_path: Optional[str] = None
    source_language: str = "src"
    target_language: str = "trg"
    third_language: str = "thd"
    lowercase: bool = True


class SynthPairSpec(BaseModel):
    latent_vocab_size: int = 2000
    sentence_count: int = 20000
    sentence_length_range: Tuple[int, int] = (5, 15)
    shared_content_fraction: float = 0.5
    noise_substitution_rate: float = 0.0
    rng_seed: int = 0
    zipf_exponent: float = 1.0
    successors_per_word: int = 8
    bigram_weight: float = 0.7
    structural_divergence: float = 0.2
    held_out_count: int = 200
    third_language: bool = False
    third_language_divergence: float = 1.0

    @field_validator("latent_vocab_size", "sentence_count", "successors_per_word")
    @classmethod
    def _positive(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be positive, got {v}")
        return v

    @field_validator("held_out_count")
    @classmethod
    def _non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"held_out_count must be >= 0, got {v}")
        return v

    @field_validator("sentence_length_range")
    @classmethod
    def _length_range(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = v
        if lo < 1 or hi < lo:
            raise ValueError(f"sentence_length_range must satisfy 1 <= lo <= hi, got {v}")
        return v

    @field_validator(
        "shared_content_fraction", "noise_substitution_rate", "bigram_weight",
        "structural_divergence", "third_language_divergence",
    )
    @classmethod
    def _fraction(cls, v: float, info) -> float:
        return _check_fraction(v, info.field_name)

    @field_validator("zipf_exponent")
    @classmethod
    def _zipf(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"zipf_exponent must be positive, got {v}")
        return v


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

class SgnsConfig(BaseModel):
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    max_learning_rate: float = 1.0
    subsample: float = 1e-3
    min_count: int = 1
    batch_size: int = 256
    threads: int = 1
    rng_seed: int = 0

    @field_validator("dim")
    @classmethod
    def _dim(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"dim must be >= 2, got {v}")
        return v

    @field_validator("window", "negatives", "epochs", "min_count", "batch_size", "threads")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("subsample")
    @classmethod
    def _subsample(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"subsample must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _learning_rates(self) -> "SgnsConfig":
        if not 0 < self.learning_rate <= self.max_learning_rate:
            raise ValueError(
                f"learning_rate must be in (0, {self.max_learning_rate}], got {self.learning_rate}"
            )
        if not 0 <= self.min_learning_rate <= self.learning_rate:
            raise ValueError("min_learning_rate must be in [0, learning_rate]")
        return self


# ---------------------------------------------------------------------------
# crossmap
# ---------------------------------------------------------------------------

class SelfLearnConfig(BaseModel):
    max_iterations: int = 50
    tolerance: float = 1e-6
    direction: Direction = "union"
    retrieval: Retrieval = "csls"
    csls_k: int = 10
    vocab_cutoff: int = 4000
    dropout: float = 0.9
    dropout_decay: float = 2.0
    mode: MappingMode = "orthogonal"
    rng_seed: int = 0

    @field_validator("max_iterations")
    @classmethod
    def _iterations(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"max_iterations must be >= 0, got {v}")
        return v

    @field_validator("tolerance")
    @classmethod
    def _tolerance(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"tolerance must be > 0, got {v}")
        return v

    @field_validator("csls_k", "vocab_cutoff")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("dropout")
    @classmethod
    def _dropout(cls, v: float) -> float:
        return _check_fraction(v, "dropout", upper_open=True)

    @field_validator("dropout_decay")
    @classmethod
    def _decay(cls, v: float) -> float:
        if v < 1.0:
            raise ValueError(f"dropout_decay must be >= 1, got {v}")
        return v


class MappingConfig(BaseModel):
    seed_cutoff: int = 4000
    signature_normalization: bool = False
    self_learn: SelfLearnConfig = Field(default_factory=SelfLearnConfig)

    @field_validator("seed_cutoff")
    @classmethod
    def _cutoff(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"seed_cutoff must be >= 1, got {v}")
        return v


# ---------------------------------------------------------------------------
# structsim
# ---------------------------------------------------------------------------

class EigsimConfig(BaseModel):
    top_m: int = 1000
    k_nn: int = 10
    threshold: float = 0.9
    rule: KRule = "cumulative_ge"
    combine: KCombine = "min"

    @field_validator("threshold")
    @classmethod
    def _threshold(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"threshold must be in (0,1], got {v}")
        return v

    @field_validator("top_m", "k_nn")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v


# ---------------------------------------------------------------------------
# umt
# ---------------------------------------------------------------------------

class LmConfig(BaseModel):
    order: int = 5
    discount: float = 0.75

    @field_validator("order")
    @classmethod
    def _order(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"order must be >= 1, got {v}")
        return v

    @field_validator("discount")
    @classmethod
    def _discount(cls, v: float) -> float:
        if not 0 <= v < 1:
            raise ValueError(f"discount must be in [0,1), got {v}")
        return v


class PhraseInductionConfig(BaseModel):
    top_phrases: int = 2000
    n_neighbors: int = 20
    temperature: float = 0.1
    retrieval: Retrieval = "csls"
    csls_k: int = 10

    @field_validator("top_phrases", "n_neighbors", "csls_k")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("temperature")
    @classmethod
    def _temperature(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"temperature must be > 0, got {v}")
        return v


class DecoderConfig(BaseModel):
    beam_size: Optional[int] = 10
    w_tm: float = 1.0
    w_lm: float = 1.0
    w_wp: float = 0.0
    max_phrase_len: int = 4
    max_candidates: Optional[int] = 10
    threads: int = 1

    @field_validator("beam_size", "max_candidates")
    @classmethod
    def _optional_positive(cls, v: Optional[int], info) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError(f"{info.field_name} must be >= 1 or null, got {v}")
        return v

    @field_validator("max_phrase_len", "threads")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v


class BacktransConfig(BaseModel):
    steps: int = 3
    sample_size: int = 5000
    em_iterations: int = 5
    max_phrase_len: int = 4
    keep_induced_table: bool = True
    rng_seed: int = 0

    @field_validator("steps")
    @classmethod
    def _steps(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"steps must be >= 0, got {v}")
        return v

    @field_validator("sample_size", "em_iterations", "max_phrase_len")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v


class UmtConfig(BaseModel):
    lm: LmConfig = Field(default_factory=LmConfig)
    phrase_induction: PhraseInductionConfig = Field(default_factory=PhraseInductionConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    backtrans: BacktransConfig = Field(default_factory=BacktransConfig)


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

class EvalConfig(BaseModel):
    retrieval: Retrieval = "csls"
    csls_k: int = 10
    candidate_cutoff: Optional[int] = None
    test_dictionary: Optional[str] = None
    reverse_test_dictionary: Optional[str] = None
    synthetic_test_top: int = 1000
    wordsim_source: Optional[str] = None
    wordsim_target: Optional[str] = None

    @field_validator("csls_k", "synthetic_test_top")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

class PipelineConfig(BaseModel):
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    synthetic: Optional[SynthPairSpec] = Field(default_factory=SynthPairSpec)
    embedding: SgnsConfig = Field(default_factory=SgnsConfig)
    mapping: MappingConfig = Field(default_factory=MappingConfig)
    umt: UmtConfig = Field(default_factory=UmtConfig)
    augmentation: AugmentationPlan = "none"
    pseudo_weight: int = 1
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    eigsim: EigsimConfig = Field(default_factory=EigsimConfig)
    seed: int = 0
    threads: int = 1
    output_dir: str = DEFAULT_OUT_DIR
    cache_dir: Optional[str] = None

    @field_validator("pseudo_weight", "threads")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def _corpus_source(self) -> "PipelineConfig":
        has_paths = bool(self.corpus.source_path and self.corpus.target_path)
        if not has_paths and self.synthetic is None:
            raise ValueError("either corpus.source_path/target_path or a synthetic spec is required")
        return self

    @property
    def uses_synthetic(self) -> bool:
        return not (self.corpus.source_path and self.corpus.target_path)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with every stage seed derived from one run seed."""
        cfg = self.model_copy(deep=True)
        cfg.seed = seed
        if cfg.synthetic is not None:
            cfg.synthetic.rng_seed = seed
        cfg.embedding.rng_seed = seed
        cfg.mapping.self_learn.rng_seed = seed
        cfg.umt.backtrans.rng_seed = seed
        return cfg

    def with_threads(self, threads: int) -> "PipelineConfig":
        cfg = self.model_copy(deep=True)
        cfg.threads = threads
        cfg.embedding.threads = threads
        cfg.umt.decoder.threads = threads
        return cfg


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

class ClweSettings(BaseSettings):
    """Environment overrides (CLWE_SEED, CLWE_THREADS, ...)."""
    model_config = SettingsConfigDict(env_prefix="CLWE_", env_file=".env", extra="ignore")

    seed: Optional[int] = None
    threads: Optional[int] = None
    out: Optional[str] = None
    cache_dir: Optional[str] = None
    log_level: str = "INFO"


def load_settings() -> ClweSettings:
    load_dotenv()
    return ClweSettings()


# ---------------------------------------------------------------------------
# loader
# ---------------------------------------------------------------------------

def _validate(data: dict, origin: str) -> PipelineConfig:
    try:
        return PipelineConfig(**(data or {}))
    except ValidationError as e:
        raise InvalidConfig(f"{origin}: {e}") from e


def load_config(path: Optional[str | Path] = None) -> PipelineConfig:
    """Load a pipeline config; the packaged defaults when no path is given."""
    config_path = Path(path) if path else default_config_path()
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise InvalidConfig(f"config file not found: {config_path}") from e
    except yaml.YAMLError as e:
        raise InvalidConfig(f"{config_path}: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise InvalidConfig(f"{config_path}: top level must be a mapping")
    logger.debug(f"Loaded config from {config_path}")
    return _validate(data or {}, str(config_path))


def save_config(cfg: PipelineConfig, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.model_dump(mode="json"), f, sort_keys=False)
    return out


def resolve_config(
    path: Optional[str | Path] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out: Optional[str] = None,
    settings: Optional[ClweSettings] = None,
) -> PipelineConfig:
    """Apply environment then CLI overrides on top of the config file."""
    cfg = load_config(path)
    env = settings or load_settings()

    run_seed = seed if seed is not None else env.seed
    run_threads = threads if threads is not None else env.threads
    run_out = out if out is not None else env.out

    if run_seed is not None:
        cfg = cfg.with_seed(run_seed)
    if run_threads is not None:
        if run_threads < 1:
            raise InvalidConfig(f"threads must be >= 1, got {run_threads}")
        cfg = cfg.with_threads(run_threads)
    if run_out is not None:
        cfg.output_dir = run_out
    if env.cache_dir and cfg.cache_dir is None:
        cfg.cache_dir = env.cache_dir
    return cfg
