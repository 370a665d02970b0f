from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, PositiveInt

from lutnet.config_search import ParetoPoint, ScoredConfig, ScoreEntry


class LutCostRequest(BaseModel):
    X: PositiveInt  # fan-in bits
    Y: PositiveInt  # output bits
    k_lut: PositiveInt = 6


class LutCostResponse(BaseModel):
    luts: int


class ValidationResponse(BaseModel):
    valid: bool
    violations: List[str]


class FilterSpec(BaseModel):
    c: PositiveInt
    k: PositiveInt
    f: PositiveInt


# unset fields fall back to conf/base/compiler_defaults.yml
class SearchRequest(BaseModel):
    filters: List[FilterSpec]
    phi_max: Optional[PositiveInt] = None
    kernel_orders: Literal["both", "k0_first", "k0_last"] = "both"
    budget_luts: Optional[PositiveInt] = None
    top: Optional[PositiveInt] = None
    score_threshold: Optional[float] = None
    k_lut: Optional[PositiveInt] = None
    architecture: Optional[str] = None


class SearchResult(BaseModel):
    filter: FilterSpec
    enumerated: int
    configs: List[ScoredConfig]


class SearchResponse(BaseModel):
    results: List[SearchResult]


class ParetoRequest(BaseModel):
    points: List[ParetoPoint]


class ParetoResponse(BaseModel):
    front: List[ParetoPoint]


class ScoreConditionRequest(BaseModel):
    entries: List[ScoreEntry]


class ScoreConditionResponse(BaseModel):
    pairs: List[tuple[str, str]]


ModelDocument = Dict
