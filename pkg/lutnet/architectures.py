"""
Architecture templates: a training-order layer list in YAML whose split convolutional blocks are filled
in with a chosen configuration, so candidate configurations can be costed on the whole network.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from lutnet.cost_model import DEFAULT_K_LUT, network_cost
from lutnet.errors import DomainError, StructureError
from lutnet.ir import (
    BatchNorm,
    BatchNormParams,
    Binarize,
    ConvParams,
    ConvWeights,
    Linear,
    MaxPool1d,
    NetworkSpec,
    QuantizedInputConv,
    Sigmoid,
    SplitConfig,
    SplitConvBlock,
)
from lutnet.transform import reorder_for_deployment
from utils.config import conf_dir

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArchitectureTemplate:
    name: str
    description: str
    input_bits: int
    layers: tuple[dict, ...]

    def _rows(self, role: str) -> list[dict]:
        return [row for row in self.layers if row["kind"] == "split_conv" and row.get("role") == role]

    @property
    def hidden_kernel(self) -> int:
        rows = self._rows("hidden")
        if not rows:
            raise StructureError(f"{self.name}: template has no hidden split block", module="architectures")
        return rows[0]["k"]

    @property
    def input_channels(self) -> int:
        """Channels produced by the input convolution."""
        return next(row["f"] for row in self.layers if row["kind"] == "input_conv")

    def hidden_filter(self, c0: int) -> ConvParams:
        """The dense filter every hidden split block replaces."""
        return ConvParams(c=c0, k=self.hidden_kernel, g=1, f=c0)

    def depthwise_first(self, c0: int) -> SplitConfig:
        """Depthwise separable configuration of the first split block."""
        row = self._rows("first")[0]
        c = self.input_channels
        return SplitConfig.from_tuple((c, row["k"], c, c, 1, 1, c0))


def load_architecture(name_or_path: str) -> ArchitectureTemplate:
    """Load a template by file path, or by name from <conf dir>/architectures/<name>.yml."""
    path = Path(name_or_path)
    if not path.exists():
        path = conf_dir() / "architectures" / f"{name_or_path}.yml"
    if not path.exists():
        raise StructureError(f"unknown architecture {name_or_path!r}", module="architectures")
    with open(path, "r", encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    return ArchitectureTemplate(
        name=doc["name"],
        description=doc.get("description", ""),
        input_bits=doc.get("input_bits", 12),
        layers=tuple(doc["layers"]),
    )


class _Weights:
    """Zero weights with identity batchnorm, or seeded random parameters."""

    def __init__(self, rng: np.random.Generator | None):
        self.rng = rng

    def conv(self, params: ConvParams, scale: float = 1.0) -> ConvWeights:
        shape = (params.f, params.s_in, params.k)
        if self.rng is None:
            return ConvWeights(weight=np.zeros(shape).tolist(), bias=[0.0] * params.f)
        return ConvWeights(
            weight=self.rng.normal(0.0, 1.0, shape).tolist(),
            bias=(self.rng.normal(0.0, 0.1, params.f) * scale).tolist(),
        )

    def bnorm(self, channels: int, mu_scale: float = 1.0) -> BatchNormParams:
        if self.rng is None:
            return BatchNormParams(mu=[0.0] * channels, sigma_sq=[1.0] * channels,
                                   gamma=[1.0] * channels, beta=[0.0] * channels)
        return BatchNormParams(
            mu=(self.rng.normal(0.0, 1.0, channels) * mu_scale).tolist(),
            sigma_sq=self.rng.uniform(0.5, 2.0, channels).tolist(),
            gamma=self.rng.normal(0.0, 1.0, channels).tolist(),
            beta=self.rng.normal(0.0, 0.5, channels).tolist(),
        )

    def linear(self, features: int) -> tuple[list, list]:
        if self.rng is None:
            return [[0.0] * features], [0.0]
        return [self.rng.normal(0.0, 1.0, features).tolist()], [float(self.rng.normal(0.0, 0.1))]


def build_network(
    template: ArchitectureTemplate,
    hidden: SplitConfig,
    first: SplitConfig | None = None,
    phase: str = "deployment",
    rng: np.random.Generator | None = None,
    input_bits: int | None = None,
) -> NetworkSpec:
    """
    Instantiate a template with `hidden` in every hidden split block and `first` (default: depthwise
    separable) in the first one. c0 = c_alpha of the hidden configuration.

    Raises
    ------
    DomainError
        If a configuration is invalid or does not fit the template's channels and kernels.
    """
    c0 = hidden.alpha.c
    first = first or template.depthwise_first(c0)
    for cfg in (first, hidden):
        problems = cfg.violations()
        if problems:
            raise DomainError(f"{cfg}: {problems[0]}", module="architectures")
    if hidden.beta.f != c0:
        raise DomainError(f"hidden configuration {hidden} must map c0={c0} channels to c0", module="architectures")
    if first.alpha.c != template.input_channels or first.beta.f != c0:
        raise DomainError(
            f"first configuration {first} must map {template.input_channels} channels to c0={c0}",
            module="architectures",
        )

    bits = input_bits or template.input_bits
    weights = _Weights(rng)
    layers = []
    channels = 1
    for row in template.layers:
        kind, name = row["kind"], row["name"]
        if kind == "input_conv":
            conv = ConvParams(c=1, k=row.get("k", 1), g=1, f=row["f"])
            # samples span +-2^(bits-1): keep thresholds in that range
            layers.append(QuantizedInputConv(name=name, conv=conv, input_bits=bits,
                                             weights=weights.conv(conv, scale=2.0 ** (bits - 1))))
            channels = conv.f
        elif kind == "bnorm":
            mu_scale = 2.0 ** (bits - 1) if layers and isinstance(layers[-1], QuantizedInputConv) else 1.0
            layers.append(BatchNorm(name=name, bnorm=weights.bnorm(channels, mu_scale)))
        elif kind == "binarize":
            layers.append(Binarize(name=name))
        elif kind == "split_conv":
            cfg = first if row.get("role") == "first" else hidden
            if cfg.alpha.k + cfg.beta.k - 1 != row["k"]:
                raise DomainError(
                    f"{name}: configuration {cfg} does not realise kernel size {row['k']}", module="architectures"
                )
            layers.append(SplitConvBlock(
                name=name, config=cfg, alpha=weights.conv(cfg.alpha),
                bnorm=weights.bnorm(cfg.alpha.f), beta=weights.conv(cfg.beta),
            ))
            channels = cfg.beta.f
        elif kind == "maxpool":
            layers.append(MaxPool1d(name=name, kernel=row["kernel"], stride=row["stride"]))
        elif kind == "linear":
            weight, bias = weights.linear(channels)
            layers.append(Linear(name=name, in_features=channels, out_features=1, weight=weight, bias=bias))
            channels = 1
        elif kind == "sigmoid":
            layers.append(Sigmoid(name=name))
        else:
            raise StructureError(f"{template.name}: unknown layer kind {kind!r}", module="architectures")

    spec = NetworkSpec(phase="training", layers=tuple(layers))
    return reorder_for_deployment(spec) if phase == "deployment" else spec


def architecture_cost(
    template: ArchitectureTemplate,
    hidden: SplitConfig,
    first: SplitConfig | None = None,
    k_lut: int = DEFAULT_K_LUT,
    input_bits: int | None = None,
) -> int:
    """Total analytic LUT count of the template instantiated with the given configurations."""
    spec = build_network(template, hidden, first, phase="deployment", input_bits=input_bits)
    return network_cost(spec, k_lut).total
