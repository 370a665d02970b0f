"""
Split-configuration search: enumeration, cross layer connectivity, score, ranking, Pareto front and
score-condition checks on measured results.
"""

import itertools
import logging
import math
from enum import Enum
from fractions import Fraction
from typing import Annotated, Callable, Iterable, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, PlainSerializer, PlainValidator, WithJsonSchema, computed_field

from lutnet.cost_model import DEFAULT_K_LUT, fan_in, lut_cost, split_block_cost
from lutnet.ir import ConvParams, NetworkSpec, SplitConfig

LOGGER = logging.getLogger(__name__)

ExactRational = Annotated[
    Fraction,
    PlainValidator(lambda v: Fraction(v)),
    PlainSerializer(str, return_type=str),
    WithJsonSchema({"type": "string", "examples": ["2/3"]}),
]


class KernelOrder(str, Enum):
    K0_FIRST = "k0_first"
    K0_LAST = "k0_last"

    def kernels(self, k0: int) -> tuple[int, int]:
        return (k0, 1) if self is KernelOrder.K0_FIRST else (1, k0)

    @classmethod
    def parse(cls, text: str) -> tuple["KernelOrder", ...]:
        if text == "both":
            return (cls.K0_FIRST, cls.K0_LAST)
        return (cls(text),)


BOTH_ORDERS = (KernelOrder.K0_FIRST, KernelOrder.K0_LAST)


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def find_filter_pairs(
    dense: ConvParams, phi_max: int, kernel_orders: Iterable[KernelOrder] = BOTH_ORDERS
) -> list[SplitConfig]:
    """
    All split configurations replacing `dense` whose two fan-ins stay within `phi_max`.

    For each kernel order and each group count g_alpha of c_0 with an admissible first fan-in, every
    group count g_beta of f_0 is paired with the intermediate channel counts c = g_alpha, 2 g_alpha, ...
    that g_beta divides, until the second fan-in exceeds `phi_max`.

    Returns
    -------
    list[SplitConfig]
        Distinct configurations sorted by tuple form.
    """
    c0, k0, f0 = dense.c, dense.k, dense.f
    found: dict[tuple, SplitConfig] = {}
    for order in dict.fromkeys(kernel_orders):
        k_alpha, k_beta = order.kernels(k0)
        alpha_groups = [g for g in _divisors(c0) if (c0 // g) * k_alpha <= phi_max]
        for g_alpha in alpha_groups:
            for g_beta in _divisors(f0):
                c = g_alpha
                while Fraction(c, g_beta) * k_beta <= phi_max:
                    if c % g_beta == 0:
                        cfg = SplitConfig.from_tuple((c0, k_alpha, g_alpha, c, k_beta, g_beta, f0))
                        found[cfg.tuple_form] = cfg
                    c += g_alpha
    configs = [found[key] for key in sorted(found)]
    LOGGER.debug("dense filter %s, phi_max %d: %d split configurations", dense.as_tuple(), phi_max, len(configs))
    return configs


def clc(cfg: SplitConfig) -> Fraction:
    """Cross layer connectivity: ceil(g_alpha / g_beta) / g_alpha."""
    g_alpha, g_beta = cfg.alpha.g, cfg.beta.g
    return Fraction(-(-g_alpha // g_beta), g_alpha)


def score(cfg: SplitConfig, k_lut: int = DEFAULT_K_LUT) -> float:
    """
    CLC^2 * phi_alpha * phi_beta / ln(C_alpha + C_beta)^2, with C the per-layer LUT costs.
    """
    phi_alpha, phi_beta = fan_in(cfg.alpha), fan_in(cfg.beta)
    cost = lut_cost(phi_alpha, cfg.alpha.f, k_lut) + lut_cost(phi_beta, cfg.beta.f, k_lut)
    return float(clc(cfg) ** 2) * phi_alpha * phi_beta / math.log(cost) ** 2


class ScoredConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    cfg: SplitConfig
    phi_alpha: int
    phi_beta: int
    clc: ExactRational
    score: float
    block_cost: int
    # set when a whole-network template was costed
    network_cost: int | None = None

    @computed_field
    @property
    def analytic_cost(self) -> int:
        return self.block_cost if self.network_cost is None else self.network_cost

    @computed_field
    @property
    def tuple_form(self) -> tuple[int, int, int, int, int, int, int]:
        return self.cfg.tuple_form


def score_config(
    cfg: SplitConfig,
    k_lut: int = DEFAULT_K_LUT,
    network_cost_of: Callable[[SplitConfig], int] | None = None,
) -> ScoredConfig:
    return ScoredConfig(
        cfg=cfg,
        phi_alpha=fan_in(cfg.alpha),
        phi_beta=fan_in(cfg.beta),
        clc=clc(cfg),
        score=score(cfg, k_lut),
        block_cost=split_block_cost(cfg, k_lut),
        network_cost=network_cost_of(cfg) if network_cost_of else None,
    )


def rank_configs(
    configs: Iterable[SplitConfig | ScoredConfig],
    cost_budget: int | None = None,
    top_n: int | None = None,
    threshold: float | None = None,
    k_lut: int = DEFAULT_K_LUT,
    network_cost_of: Callable[[SplitConfig], int] | None = None,
) -> list[ScoredConfig]:
    """
    Score, filter and order candidate configurations.

    Configurations above `cost_budget` (network cost when `network_cost_of` is given, block cost otherwise)
    are dropped, as are scores not above `threshold`. The rest is sorted by descending score, then
    ascending analytic cost, then tuple form, and cut to `top_n`.
    """
    scored = [
        c if isinstance(c, ScoredConfig) else score_config(c, k_lut, network_cost_of)
        for c in configs
    ]
    kept = [s for s in scored if cost_budget is None or s.analytic_cost <= cost_budget]
    if scored and not kept:
        LOGGER.warning("cost budget %s removed all %d configurations", cost_budget, len(scored))
    if threshold is not None:
        kept = [s for s in kept if s.score > threshold]
    kept.sort(key=lambda s: (-s.score, s.analytic_cost, s.tuple_form))
    if top_n is not None:
        kept = kept[:top_n]
    LOGGER.info("ranked %d of %d configurations", len(kept), len(scored))
    return kept


def network_score(spec: NetworkSpec, k_lut: int = DEFAULT_K_LUT) -> float:
    """Mean score over the network's split convolutional blocks (0.0 without any)."""
    blocks = spec.split_blocks()
    if not blocks:
        return 0.0
    return sum(score(b.config, k_lut) for b in blocks) / len(blocks)


class ParetoPoint(BaseModel):
    id: str
    cost: float
    accuracy: float


def pareto_front(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """
    Points not dominated in (cost, accuracy): no other point is at most as expensive and at least as
    accurate with one of the two strict. Ordered by ascending cost.
    """
    ordered = sorted(points, key=lambda p: (p.cost, -p.accuracy, p.id))
    front = []
    best_cheaper = -math.inf
    for _, group in itertools.groupby(ordered, key=lambda p: p.cost):
        group = list(group)
        group_best = group[0].accuracy
        if group_best > best_cheaper:
            front.extend(p for p in group if p.accuracy == group_best)
        best_cheaper = max(best_cheaper, group_best)
    return front


class ScoreEntry(BaseModel):
    id: str
    score: float
    cost: float
    accuracy: float


def score_condition_violations(entries: Sequence[ScoreEntry]) -> list[tuple[str, str]]:
    """
    Ordered pairs (i, j) breaking S_i < S_j => (A_i < A_j or C_i > C_j),
    i.e. i scores lower although it is at least as accurate and at most as expensive as j.
    """
    violations = []
    for i, j in itertools.permutations(entries, 2):
        if i.score < j.score and not i.accuracy < j.accuracy and not i.cost > j.cost:
            violations.append((i.id, j.id))
    return violations


def population_best(
    ranked: Sequence[ScoredConfig], accuracies: Mapping[tuple, float], sizes: Iterable[int]
) -> list[tuple[int, float | None]]:
    """
    Best measured accuracy among the first n ranked configurations, for each population size n.
    Configurations without a measurement are skipped; a size with no measured member yields None.
    """
    result = []
    for n in sizes:
        measured = [accuracies[s.tuple_form] for s in ranked[:n] if s.tuple_form in accuracies]
        result.append((n, max(measured) if measured else None))
    return result
