"""
Analytic worst-case LUT counts.

A table with n input bits and one output bit fits a single k_lut-input LUT when n <= k_lut. Above that it
is composed from smaller tables: an odd step adds one select bit with two (n-1)-trees and a 3-input
combiner, an even step adds two select bits with four (n-2)-trees and a k_lut-input combiner. For
k_lut = 6 this gives C_n = 2 * C_{n-1} - (-1)^n, i.e. 1, 3, 5, 11, 21, 43, 85 for n = 6..12.
"""

import logging
from fractions import Fraction
from functools import lru_cache

from pydantic import BaseModel, computed_field

from lutnet.errors import DomainError, StateError
from lutnet.ir import (
    BatchNorm,
    ConvParams,
    Linear,
    MaxPool1d,
    NetworkSpec,
    QuantizedInputConv,
    SplitConfig,
    SplitConvBlock,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_K_LUT = 6


@lru_cache(maxsize=None)
def lut_cost_recursive(n: int, k_lut: int = DEFAULT_K_LUT) -> int:
    """Number of k_lut-input LUTs composing an n-to-1 truth table."""
    if n < 1:
        raise DomainError(f"fan-in must be >= 1, got {n}", module="cost_model")
    if k_lut < 1:
        raise DomainError(f"k_lut must be >= 1, got {k_lut}", module="cost_model")
    cost = 1
    for m in range(k_lut + 1, n + 1):
        cost = 2 * cost + (1 if (m - k_lut) % 2 else -1)
    return cost


def lut_cost(fan_in: int, outputs: int, k_lut: int = DEFAULT_K_LUT) -> int:
    """
    Cost of a table with `fan_in` input bits and `outputs` output bits: outputs * C_{fan_in}.

    Below five inputs the closed form goes negative, so the recursion's base case
    (one LUT per output) is used throughout.
    """
    if outputs < 1:
        raise DomainError(f"output count must be >= 1, got {outputs}", module="cost_model")
    return outputs * lut_cost_recursive(fan_in, k_lut)


def lut_cost_closed_form(fan_in: int, outputs: int) -> Fraction:
    """(Y/3) * (2^(X-4) - (-1)^X), exact. Agrees with `lut_cost` for X >= 5 and k_lut = 6."""
    return Fraction(outputs, 3) * (Fraction(2) ** (fan_in - 4) - (-1) ** fan_in)


def fan_in(params: ConvParams) -> int:
    """phi = k * c / g."""
    return params.k * params.c // params.g


def split_block_cost(cfg: SplitConfig, k_lut: int = DEFAULT_K_LUT) -> int:
    problems = cfg.violations()
    if problems:
        raise DomainError(f"invalid split configuration {cfg}: {problems[0]}", module="cost_model")
    return lut_cost(fan_in(cfg.alpha), cfg.alpha.f, k_lut) + lut_cost(fan_in(cfg.beta), cfg.beta.f, k_lut)


def pool_cost(kernel: int, channels: int, k_lut: int = DEFAULT_K_LUT) -> int:
    """Each channel's reduction is costed as a single-output table of `kernel` bits."""
    return channels * lut_cost_recursive(kernel, k_lut)


class CostItem(BaseModel):
    name: str
    kind: str
    fan_in: int
    outputs: int
    luts: int


class CostReport(BaseModel):
    k_lut: int = DEFAULT_K_LUT
    per_layer: list[CostItem] = []
    note: str = "pool stages are costed as one kernel-input table per channel"

    @computed_field
    @property
    def total(self) -> int:
        return sum(item.luts for item in self.per_layer)


def network_cost(spec: NetworkSpec, k_lut: int = DEFAULT_K_LUT) -> CostReport:
    """
    Itemized analytic cost of a deployment-order network.

    Raises
    ------
    StateError
        If the network is still in training order.
    """
    if spec.phase != "deployment":
        raise StateError("network cost needs a deployment-order network", module="cost_model")

    items: list[CostItem] = []
    channels = 0
    for layer in spec.layers:
        if isinstance(layer, QuantizedInputConv):
            phi = layer.conv.k * layer.input_bits
            channels = layer.conv.f
            items.append(CostItem(name=layer.name, kind="input", fan_in=phi, outputs=channels,
                                  luts=lut_cost(phi, channels, k_lut)))
        elif isinstance(layer, SplitConvBlock):
            for half, params in (("alpha", layer.config.alpha), ("beta", layer.config.beta)):
                phi = fan_in(params)
                items.append(CostItem(name=f"{layer.name}.{half}", kind="hidden", fan_in=phi, outputs=params.f,
                                      luts=lut_cost(phi, params.f, k_lut)))
            channels = layer.config.beta.f
        elif isinstance(layer, MaxPool1d):
            items.append(CostItem(name=layer.name, kind="pool", fan_in=layer.kernel, outputs=channels,
                                  luts=pool_cost(layer.kernel, channels, k_lut)))
        elif isinstance(layer, Linear):
            items.append(CostItem(name=layer.name, kind="output", fan_in=layer.in_features,
                                  outputs=layer.out_features,
                                  luts=lut_cost(layer.in_features, layer.out_features, k_lut)))
            channels = layer.out_features
        elif isinstance(layer, BatchNorm):
            channels = layer.bnorm.channels or channels

    report = CostReport(k_lut=k_lut, per_layer=items)
    LOGGER.debug("network cost: %d LUTs over %d items", report.total, len(items))
    return report
