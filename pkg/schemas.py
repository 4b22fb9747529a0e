from pydantic import BaseModel, Field, model_validator
from typing import Optional, List, Dict
import json


# Corpus Schemas
class CorpusStats(BaseModel):
    language_tag: str
    sentences: int
    tokens: int
    types: int
    ttr: float
    mean_sentence_length: float


# Evaluation Schemas
class BliReport(BaseModel):
    mrr: float = Field(ge=0.0, le=1.0)
    p_at_1: float = Field(ge=0.0, le=1.0)
    ranks: List[int] = Field(default_factory=list, description="Best gold rank per evaluated query, in query order")
    query_ids: List[int] = Field(default_factory=list)
    oov_count: int = 0
    retrieval: str = "csls"
    csls_k: Optional[int] = None

    @model_validator(mode="after")
    def _p1_bounded_by_mrr(self):
        if self.p_at_1 > self.mrr + 1e-12:
            raise ValueError(f"p_at_1 ({self.p_at_1}) cannot exceed mrr ({self.mrr})")
        return self

    @property
    def evaluated(self) -> int:
        return len(self.ranks)


class WordSimReport(BaseModel):
    spearman_rho: float = Field(ge=-1.0, le=1.0)
    pair_coverage: float = Field(ge=0.0, le=1.0)
    covered_pairs: int
    total_pairs: int


class EigsimReport(BaseModel):
    eig_sim: float = Field(ge=0.0)
    k_used: int
    k_x: int
    k_y: int
    lambda_top_x: List[float] = Field(default_factory=list)
    lambda_top_y: List[float] = Field(default_factory=list)
    threshold: float = 0.9
    rule: str = "cumulative_ge"


class BleuReport(BaseModel):
    score: float = Field(ge=0.0, le=1.0, description="Unsmoothed corpus BLEU")
    smoothed_score: float = Field(ge=0.0, le=1.0)
    smoothed: bool = Field(description="True when at least one precision was zero and floored")
    precisions: List[float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    max_n: int = 4


# UMT Schemas
class BacktransStep(BaseModel):
    step: int
    bleu_st: Optional[float] = None
    bleu_ts: Optional[float] = None
    synthetic_pairs_st: int = 0
    synthetic_pairs_ts: int = 0


# Pipeline Schemas
class RunReport(BaseModel):
    plan: str
    seed: int
    artifacts: Dict[str, str] = Field(default_factory=dict)
    bli: Dict[str, BliReport] = Field(default_factory=dict, description="Keyed by direction, e.g. 'src->trg'")
    bli_baseline: Dict[str, BliReport] = Field(default_factory=dict)
    eigsim: Optional[EigsimReport] = None
    eigsim_baseline: Optional[EigsimReport] = None
    ttr: Dict[str, float] = Field(default_factory=dict)
    backtrans: List[BacktransStep] = Field(default_factory=list)
    wordsim: Dict[str, WordSimReport] = Field(default_factory=dict)
    pseudo_corpora: List[str] = Field(default_factory=list)
    timings: Dict[str, float] = Field(default_factory=dict)

    def to_json(self, include_timings: bool = True) -> str:
        data = self.model_dump(mode="json", exclude=None if include_timings else {"timings"})
        return json.dumps(data, indent=2, sort_keys=True)


class ExperimentRow(BaseModel):
    label: str
    bli: BliReport
    reverse_bli: Optional[BliReport] = None
    eigsim: Optional[EigsimReport] = None
    source_ttr: Optional[float] = None
    bleu: Optional[float] = None
    bleu_history: List[float] = Field(default_factory=list)


class ComparativeReport(BaseModel):
    kind: str
    seed: int
    rows: List[ExperimentRow] = Field(default_factory=list)

    def row(self, label: str) -> ExperimentRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)
