import logging

import requests
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from lutnet.architectures import architecture_cost, load_architecture
from lutnet.config_search import KernelOrder, find_filter_pairs, pareto_front, rank_configs, score_condition_violations
from lutnet.cost_model import CostReport, lut_cost, network_cost
from lutnet.errors import DomainError, LutnetError
from lutnet.ir import ConvParams, model_from_document, validate_network
from lutnet.transform import reorder_for_deployment
from model_service.schemas import (
    LutCostRequest,
    LutCostResponse,
    ModelDocument,
    ParetoRequest,
    ParetoResponse,
    ScoreConditionRequest,
    ScoreConditionResponse,
    SearchRequest,
    SearchResponse,
    SearchResult,
    ValidationResponse,
)
from utils.config import CompilerDefaults, get_api_base_url, load_compiler_defaults

LOGGER = logging.getLogger(__name__)

app = FastAPI(title="LUT Compiler Service")

API_BASE_URL = get_api_base_url()


def post_search(payload: dict) -> dict:
    resp = requests.post(f"{API_BASE_URL}/search", json=payload, timeout=60)
    resp.raise_for_status()
    return resp.json()


def post_pareto(points: list[dict]) -> dict:
    resp = requests.post(f"{API_BASE_URL}/pareto", json={"points": points}, timeout=10)
    resp.raise_for_status()
    return resp.json()


def fetch_defaults() -> dict:
    resp = requests.get(f"{API_BASE_URL}/defaults", timeout=5)
    resp.raise_for_status()
    return resp.json()


@app.exception_handler(LutnetError)
def lutnet_error_handler(request: Request, exc: LutnetError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health():
    return {"status": "ok"}


@app.get("/defaults", response_model=CompilerDefaults)
def get_defaults():
    return load_compiler_defaults()


@app.post("/cost/lut", response_model=LutCostResponse)
def cost_lut(req: LutCostRequest):
    return {"luts": lut_cost(req.X, req.Y, req.k_lut)}


@app.post("/network/validate", response_model=ValidationResponse)
def network_validate(doc: ModelDocument):
    violations = validate_network(model_from_document(doc))
    return {"valid": not violations, "violations": violations}


@app.post("/network/cost", response_model=CostReport)
def network_cost_endpoint(doc: ModelDocument, k_lut: int = 6):
    spec = model_from_document(doc)
    if spec.phase == "training":
        spec = reorder_for_deployment(spec)
    return network_cost(spec, k_lut)


@app.post("/search", response_model=SearchResponse)
def search(req: SearchRequest):
    defaults = load_compiler_defaults()
    phi_max = req.phi_max or defaults.phi_max
    k_lut = req.k_lut or defaults.k_lut
    budget = req.budget_luts or defaults.budget_luts
    threshold = req.score_threshold if req.score_threshold is not None else defaults.score_threshold
    template = load_architecture(req.architecture) if req.architecture else None

    results = []
    for f in req.filters:
        dense = ConvParams(c=f.c, k=f.k, g=1, f=f.f)
        network_cost_of = None
        if template is not None:
            if dense.c != dense.f or dense.k != template.hidden_kernel:
                raise DomainError(f"filter {dense.as_tuple()} is not a hidden filter of {template.name}",
                                  module="model_service")

            def network_cost_of(cfg, template=template):
                return architecture_cost(template, cfg, k_lut=k_lut)

        configs = find_filter_pairs(dense, phi_max, KernelOrder.parse(req.kernel_orders))
        ranked = rank_configs(configs, cost_budget=budget, top_n=req.top, threshold=threshold,
                              k_lut=k_lut, network_cost_of=network_cost_of)
        results.append(SearchResult(filter=f, enumerated=len(configs), configs=ranked))
    return {"results": results}


@app.post("/pareto", response_model=ParetoResponse)
def pareto(req: ParetoRequest):
    return {"front": pareto_front(req.points)}


@app.post("/score-condition", response_model=ScoreConditionResponse)
def score_condition(req: ScoreConditionRequest):
    return {"pairs": score_condition_violations(req.entries)}
