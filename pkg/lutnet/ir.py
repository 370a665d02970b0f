"""
Network intermediate representation.

Immutable pydantic models for convolution parameters, split configurations, batchnorm parameters and
the ordered layer list of a network, plus validation, shape propagation and the on-disk model format
(see docs/model_format.md).
"""

import json
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    PositiveInt,
    ValidationError,
    model_serializer,
    model_validator,
)

from lutnet.errors import ModelParseError, StructureError

LOGGER = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


def _parse_exact(value: Any) -> Any:
    if isinstance(value, str):
        return float(value)
    return value


def _exact_text(value: float) -> str:
    # repr() is the shortest string that round-trips to the same double
    return repr(float(value))


ExactFloat = Annotated[
    float,
    BeforeValidator(_parse_exact),
    PlainSerializer(_exact_text, return_type=str, when_used="json"),
]
Vector = tuple[ExactFloat, ...]
Matrix = tuple[Vector, ...]
Tensor3 = tuple[Matrix, ...]

PoolMode = Literal["OR", "AND"]
Phase = Literal["training", "deployment"]


class ConvParams(BaseModel):
    """Filter tuple F = (c, k, g, f) of a (grouped) 1D convolution."""

    model_config = ConfigDict(frozen=True)

    c: PositiveInt
    k: PositiveInt
    g: PositiveInt = 1
    f: PositiveInt
    stride: PositiveInt = 1

    @property
    def s_in(self) -> int:
        return self.c // self.g

    @property
    def s_out(self) -> int:
        return self.f // self.g

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.c, self.k, self.g, self.f)

    def violations(self) -> list[str]:
        problems = []
        if self.c % self.g:
            problems.append(f"g does not divide c (c={self.c}, g={self.g})")
        if self.f % self.g:
            problems.append(f"g does not divide f (f={self.f}, g={self.g})")
        return problems


class SplitConfig(BaseModel):
    """
    Pair (F_alpha, F_beta) replacing a dense convolution F_0.
    Serialized as the 7-tuple (c_a, k_a, g_a, f_a, k_b, g_b, f_b).
    """

    model_config = ConfigDict(frozen=True)

    alpha: ConvParams
    beta: ConvParams

    @model_validator(mode="before")
    @classmethod
    def _from_tuple_form(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            if len(data) != 7:
                raise ValueError(f"tuple_form needs 7 entries, got {len(data)}")
            c_a, k_a, g_a, f_a, k_b, g_b, f_b = data
            return {
                "alpha": {"c": c_a, "k": k_a, "g": g_a, "f": f_a},
                "beta": {"c": f_a, "k": k_b, "g": g_b, "f": f_b},
            }
        return data

    @model_serializer
    def _to_tuple_form(self) -> list[int]:
        return list(self.tuple_form)

    @classmethod
    def from_tuple(cls, values) -> "SplitConfig":
        return cls.model_validate(tuple(values))

    @property
    def tuple_form(self) -> tuple[int, int, int, int, int, int, int]:
        a, b = self.alpha, self.beta
        return (a.c, a.k, a.g, a.f, b.k, b.g, b.f)

    def violations(self) -> list[str]:
        a, b = self.alpha, self.beta
        problems = []
        if b.c != a.f:
            problems.append(f"split condition violated: c_beta={b.c} != f_alpha={a.f}")
        if a.c % a.g:
            problems.append(f"split condition violated: g_alpha={a.g} does not divide c_alpha={a.c}")
        if a.f % a.g:
            problems.append(f"split condition violated: g_alpha={a.g} does not divide f_alpha={a.f}")
        if a.f % b.g:
            problems.append(f"split condition violated: g_beta={b.g} does not divide f_alpha={a.f}")
        if b.f % b.g:
            problems.append(f"split condition violated: g_beta={b.g} does not divide f_beta={b.f}")
        if min(a.k, b.k) != 1:
            problems.append(f"kernel order ({a.k}, {b.k}) is neither (k0, 1) nor (1, k0)")
        if a.stride != 1 or b.stride != 1:
            problems.append("split convolutions must use stride 1")
        return problems

    def __str__(self) -> str:
        return "(" + ",".join(str(v) for v in self.tuple_form) + ")"


class BatchNormParams(BaseModel):
    """Per-channel parameters of bnorm(x) = (x - mu) / sigma_sq * gamma - beta."""

    model_config = ConfigDict(frozen=True)

    mu: Vector
    sigma_sq: Vector
    gamma: Vector
    beta: Vector

    @property
    def channels(self) -> int:
        return len(self.mu)

    def violations(self) -> list[str]:
        problems = []
        lengths = {len(self.mu), len(self.sigma_sq), len(self.gamma), len(self.beta)}
        if len(lengths) != 1:
            problems.append("mu, sigma_sq, gamma and beta must have one entry per channel")
        for ch, s in enumerate(self.sigma_sq):
            if not s > 0:
                problems.append(f"sigma_sq must be > 0 (channel {ch}: {s!r})")
        if not _finite(self.mu, self.sigma_sq, self.gamma, self.beta):
            problems.append("batchnorm parameters must be finite")
        return problems

    def channel(self, ch: int) -> tuple[float, float, float, float]:
        return (self.mu[ch], self.sigma_sq[ch], self.gamma[ch], self.beta[ch])


class ConvWeights(BaseModel):
    """Real-valued weights (f, c/g, k) and bias (f,) of one convolution."""

    model_config = ConfigDict(frozen=True)

    weight: Tensor3
    bias: Vector

    def violations(self, params: ConvParams) -> list[str]:
        shape = np.shape(np.asarray(self.weight, dtype=object))
        expected = (params.f, params.s_in, params.k)
        problems = []
        if params.c % params.g == 0 and shape != expected:
            problems.append(f"weight shape {shape} does not match (f, c/g, k) = {expected}")
        if len(self.bias) != params.f:
            problems.append(f"bias has {len(self.bias)} entries, expected {params.f}")
        if shape == expected and not _finite(np.asarray(self.weight, dtype=np.float64).ravel(), self.bias):
            problems.append("weights must be finite")
        return problems

    def window_weights(self, out_channel: int) -> np.ndarray:
        """Weights of one filter flattened in window bit order (t * s_in + i)."""
        return np.asarray(self.weight[out_channel], dtype=np.float64).T.reshape(-1)


class _Layer(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = ""


class QuantizedInputConv(_Layer):
    """First convolution, reading signed `input_bits`-bit samples of a single channel."""

    kind: Literal["input_conv"] = "input_conv"
    conv: ConvParams
    input_bits: PositiveInt = 12
    weights: ConvWeights


class BatchNorm(_Layer):
    kind: Literal["bnorm"] = "bnorm"
    bnorm: BatchNormParams


class Binarize(_Layer):
    kind: Literal["binarize"] = "binarize"


class SplitConvBlock(_Layer):
    """conv alpha -> bnorm -> binarize -> conv beta."""

    kind: Literal["split_conv"] = "split_conv"
    config: SplitConfig
    alpha: ConvWeights
    bnorm: BatchNormParams
    beta: ConvWeights


class MaxPool1d(_Layer):
    kind: Literal["maxpool"] = "maxpool"
    kernel: PositiveInt
    stride: PositiveInt
    # deployment order only: per-channel reduction on bits
    modes: tuple[PoolMode, ...] | None = None


class Linear(_Layer):
    kind: Literal["linear"] = "linear"
    in_features: PositiveInt
    out_features: PositiveInt
    weight: Matrix
    bias: Vector

    def violations(self) -> list[str]:
        problems = []
        if len(self.weight) != self.out_features or any(len(r) != self.in_features for r in self.weight):
            problems.append(f"weight shape does not match (out, in) = ({self.out_features}, {self.in_features})")
        if len(self.bias) != self.out_features:
            problems.append(f"bias has {len(self.bias)} entries, expected {self.out_features}")
        if not _finite(*self.weight, self.bias):
            problems.append("weights must be finite")
        return problems


class Sigmoid(_Layer):
    kind: Literal["sigmoid"] = "sigmoid"


Layer = Annotated[
    Union[QuantizedInputConv, BatchNorm, Binarize, SplitConvBlock, MaxPool1d, Linear, Sigmoid],
    Field(discriminator="kind"),
]


class NetworkSpec(BaseModel):
    """Ordered layer list in training or deployment order."""

    model_config = ConfigDict(frozen=True)

    version: int = MODEL_FORMAT_VERSION
    phase: Phase
    layers: tuple[Layer, ...] = ()

    @model_validator(mode="before")
    @classmethod
    def _default_names(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "layers" not in data:
            return data
        named = []
        for i, layer in enumerate(data["layers"]):
            if isinstance(layer, BaseModel) and not layer.name:
                layer = layer.model_copy(update={"name": f"{layer.kind}_{i}"})
            elif isinstance(layer, dict) and not layer.get("name"):
                layer = {**layer, "name": f"{layer.get('kind', 'layer')}_{i}"}
            named.append(layer)
        return {**data, "layers": named}

    def split_blocks(self) -> list[SplitConvBlock]:
        return [layer for layer in self.layers if isinstance(layer, SplitConvBlock)]

    def input_bits(self) -> int | None:
        for layer in self.layers:
            if isinstance(layer, QuantizedInputConv):
                return layer.input_bits
        return None


def _finite(*arrays) -> bool:
    return all(all(math.isfinite(float(v)) for v in np.ravel(np.asarray(a, dtype=np.float64))) for a in arrays)


def validate_network(spec: NetworkSpec) -> list[str]:
    """
    Check type invariants, channel chaining and the phase rules of a network.

    Returns
    -------
    list[str]
        One message per violation, prefixed with the layer name. Empty for a valid network.
    """
    report: list[str] = []
    names = [layer.name for layer in spec.layers]
    for dup in sorted({n for n in names if names.count(n) > 1}):
        report.append(f"{dup}: layer name is not unique")

    channels: int | None = None
    previous = None
    for i, layer in enumerate(spec.layers):
        where = layer.name
        problems: list[str] = []

        if isinstance(layer, QuantizedInputConv):
            problems += layer.conv.violations()
            problems += layer.weights.violations(layer.conv)
            if i != 0:
                problems.append("the quantized input convolution must be the first layer")
            if layer.conv.c != 1 or layer.conv.g != 1:
                problems.append("the quantized input convolution reads a single channel (c=1, g=1)")
            if layer.conv.stride != 1:
                problems.append("stride must be 1")
            channels = layer.conv.f

        elif isinstance(layer, BatchNorm):
            problems += layer.bnorm.violations()
            if channels is not None and layer.bnorm.channels != channels:
                problems.append(f"batchnorm has {layer.bnorm.channels} channels, input has {channels}")

        elif isinstance(layer, SplitConvBlock):
            cfg = layer.config
            problems += cfg.violations()
            problems += [f"alpha {p}" for p in layer.alpha.violations(cfg.alpha)]
            problems += [f"beta {p}" for p in layer.beta.violations(cfg.beta)]
            problems += layer.bnorm.violations()
            if layer.bnorm.channels != cfg.alpha.f:
                problems.append(f"internal batchnorm has {layer.bnorm.channels} channels, f_alpha={cfg.alpha.f}")
            if channels is not None and cfg.alpha.c != channels:
                problems.append(f"c_alpha={cfg.alpha.c} does not match {channels} input channels")
            channels = cfg.beta.f

        elif isinstance(layer, MaxPool1d):
            if spec.phase == "deployment":
                if not isinstance(previous, Binarize):
                    problems.append("in deployment order a maxpool must directly follow a binarize")
                if layer.modes is None:
                    problems.append("deployment-order maxpool needs a per-channel pool mode")
                elif channels is not None and len(layer.modes) != channels:
                    problems.append(f"{len(layer.modes)} pool modes for {channels} channels")
            elif layer.modes is not None:
                problems.append("pool modes are only defined in deployment order")

        elif isinstance(layer, Linear):
            problems += layer.violations()
            if channels is not None and layer.in_features != channels:
                problems.append(f"in_features={layer.in_features} does not match {channels} input channels")
            if layer.out_features != 1:
                problems.append("the output layer must produce a single decision bit (out_features=1)")
            channels = layer.out_features

        report.extend(f"{where}: {p}" for p in problems)
        previous = layer

    if report:
        LOGGER.debug("validate_network found %d violations", len(report))
    return report


def infer_shapes(spec: NetworkSpec, length: int) -> list[tuple[str, int, int]]:
    """
    Symbolic shape propagation.

    Returns
    -------
    list of (layer name, channels, time length) after each layer.

    Raises
    ------
    StructureError
        If a layer receives fewer time steps than its kernel needs.
    """
    shapes = []
    channels = 1
    for layer in spec.layers:
        if isinstance(layer, QuantizedInputConv):
            length = _consume(layer.name, length, layer.conv.k)
            channels = layer.conv.f
        elif isinstance(layer, SplitConvBlock):
            length = _consume(layer.name, length, layer.config.alpha.k)
            length = _consume(layer.name, length, layer.config.beta.k)
            channels = layer.config.beta.f
        elif isinstance(layer, MaxPool1d):
            if length < layer.kernel:
                raise StructureError(
                    f"{layer.name}: pool kernel {layer.kernel} larger than available history {length}", module="ir"
                )
            length = (length - layer.kernel) // layer.stride + 1
        elif isinstance(layer, Linear):
            channels = layer.out_features
        shapes.append((layer.name, channels, length))
    return shapes


def _consume(name: str, length: int, kernel: int) -> int:
    if length < kernel:
        raise StructureError(f"{name}: kernel {kernel} larger than available history {length}", module="ir")
    return length - kernel + 1


def receptive_field(spec: NetworkSpec) -> int:
    """Smallest input length for which every layer produces at least one time step."""
    need = 1
    for layer in reversed(spec.layers):
        if isinstance(layer, QuantizedInputConv):
            need += layer.conv.k - 1
        elif isinstance(layer, SplitConvBlock):
            need += layer.config.alpha.k - 1 + layer.config.beta.k - 1
        elif isinstance(layer, MaxPool1d):
            need = (need - 1) * layer.stride + layer.kernel
    return need


def split_shapes_match(dense: ConvParams, cfg: SplitConfig, length: int) -> bool:
    """True if conv alpha followed by conv beta yields the same (channels, length) as the dense filter."""
    if length < dense.k:
        return False
    dense_shape = (dense.f, length - dense.k + 1)
    after_alpha = length - cfg.alpha.k + 1
    split_shape = (cfg.beta.f, after_alpha - cfg.beta.k + 1)
    return cfg.alpha.c == dense.c and cfg.beta.c == cfg.alpha.f and split_shape == dense_shape


def parse_model(text: str) -> NetworkSpec:
    """Parse a model document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError(e.msg, location=f"line {e.lineno}, column {e.colno}") from e
    return model_from_document(doc)


def model_from_document(doc: Any) -> NetworkSpec:
    if isinstance(doc, dict) and doc.get("version", MODEL_FORMAT_VERSION) != MODEL_FORMAT_VERSION:
        raise ModelParseError(f"unsupported model format version {doc.get('version')!r}", location="version")
    try:
        return NetworkSpec.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ModelParseError(first["msg"], location=location) from e


def model_to_document(spec: NetworkSpec) -> dict:
    return spec.model_dump(mode="json")


def load_model(path) -> NetworkSpec:
    path = Path(path)
    spec = parse_model(path.read_text(encoding="utf-8"))
    LOGGER.debug("loaded %s: %d layers, %s order", path, len(spec.layers), spec.phase)
    return spec


def save_model(spec: NetworkSpec, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_document(spec), indent=2) + "\n", encoding="utf-8")
    return path
