"""
Network transformations ahead of hardware generation.

1. reorder_for_deployment: conv -> maxpool -> bnorm -> binarize becomes conv -> bnorm -> binarize -> maxpool,
   with each channel pooled by OR (gamma >= 0) or AND (gamma < 0).
2. identify_precomputable_blocks: cut the deployment-order layer list at its binary activations.
3. precompute_block: enumerate every input pattern of a block into a truth table.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from lutnet import numerics
from lutnet.errors import CapacityError, NumericError, StateError, StructureError
from lutnet.ir import (
    BatchNorm,
    BatchNormParams,
    Binarize,
    ConvParams,
    Linear,
    MaxPool1d,
    NetworkSpec,
    QuantizedInputConv,
    Sigmoid,
    SplitConvBlock,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_FAN_IN_CAP = 20
ROW_CHUNK = 1 << 16


def reorder_for_deployment(spec: NetworkSpec) -> NetworkSpec:
    """
    Move every max pooling behind the binarization that follows it.

    Because bnorm is monotone per channel and bin is nondecreasing, bin(bnorm(max(x))) equals
    OR(bin(bnorm(x))) for gamma > 0 and AND(bin(bnorm(x))) for gamma < 0. gamma = 0 channels are constant.

    Raises
    ------
    StateError
        If the network already is in deployment order.
    StructureError
        If a pool is neither followed by bnorm + binarize nor preceded by a binarize.
    """
    if spec.phase != "training":
        raise StateError("network is already in deployment order", module="transform")

    layers = list(spec.layers)
    out = []
    i = 0
    while i < len(layers):
        layer = layers[i]
        if not isinstance(layer, MaxPool1d):
            out.append(layer)
            i += 1
            continue

        follows_binarize = bool(out) and isinstance(out[-1], Binarize)
        nxt = layers[i + 1] if i + 1 < len(layers) else None
        if isinstance(nxt, BatchNorm):
            after = layers[i + 2] if i + 2 < len(layers) else None
            if not isinstance(after, Binarize):
                raise StructureError(f"{nxt.name}: batchnorm after {layer.name} is not followed by binarize",
                                     module="transform")
            modes = _pool_modes(nxt.bnorm, layer.name)
            out += [nxt, after, layer.model_copy(update={"modes": modes})]
            i += 3
        elif follows_binarize:
            # max over bits
            channels = _channels_before(out)
            out.append(layer.model_copy(update={"modes": ("OR",) * channels}))
            i += 1
        else:
            raise StructureError(f"{layer.name}: maxpool is not followed by batchnorm", module="transform")

    LOGGER.debug("reordered %d pool stages for deployment", sum(isinstance(x, MaxPool1d) for x in out))
    return NetworkSpec(version=spec.version, phase="deployment", layers=tuple(out))


def _pool_modes(bnorm: BatchNormParams, pool_name: str) -> tuple[str, ...]:
    modes = []
    for ch, gamma in enumerate(bnorm.gamma):
        if gamma == 0:
            LOGGER.warning("%s: channel %d has gamma = 0, its activation is constant", pool_name, ch)
        modes.append("AND" if gamma < 0 else "OR")
    return tuple(modes)


def _channels_before(layers) -> int:
    for layer in reversed(layers):
        if isinstance(layer, QuantizedInputConv):
            return layer.conv.f
        if isinstance(layer, SplitConvBlock):
            return layer.config.beta.f
        if isinstance(layer, BatchNorm):
            return layer.bnorm.channels
    raise StructureError("pool without a preceding convolution", module="transform")


@dataclass(frozen=True, eq=False)
class PrecomputableBlock:
    """
    Layers between two binary activations, evaluated as one function of a φ-bit window.

    Output o reads the window of its own group: channels [g*s_in, (g+1)*s_in) with g = o // s_out,
    over `conv.k` taps. For the input block every tap carries `input_bits` two's-complement bits.
    """

    name: str
    kind: str  # input | hidden | output
    conv: ConvParams
    weight: np.ndarray  # (f, s_in, k)
    bias: np.ndarray  # (f,)
    bnorm: BatchNormParams | None
    input_bits: int = 1
    layers: tuple[str, ...] = ()

    @property
    def phi(self) -> int:
        return self.conv.k * self.conv.s_in * self.input_bits

    @property
    def m(self) -> int:
        return self.conv.f

    def group_of(self, output: int) -> int:
        return output // self.conv.s_out

    def group_channels(self, group: int) -> slice:
        return slice(group * self.conv.s_in, (group + 1) * self.conv.s_in)

    def window_weights(self, output: int) -> np.ndarray:
        return self.weight[output].T.reshape(-1)

    def decode_rows(self, start: int, stop: int) -> np.ndarray:
        """Window values of table rows [start, stop): signed samples or ±1."""
        bits = numerics.row_bits(start, stop, self.phi)
        if self.kind == "input":
            return numerics.decode_sample_window(bits, self.conv.k, self.input_bits).astype(np.float64)
        return numerics.to_signs(bits)

    def evaluate(self, values: np.ndarray, output: int) -> np.ndarray:
        """Output bit of one filter for (N, φ_values) window values in window order."""
        acc = numerics.accumulate(values, self.window_weights(output), self.bias[output])
        if self.bnorm is not None:
            acc = numerics.batchnorm(acc, *self.bnorm.channel(output))
        return numerics.binarize(acc)

    def check_finite(self) -> None:
        arrays = [self.weight, self.bias]
        if self.bnorm is not None:
            arrays += [np.asarray(v, dtype=np.float64) for v in
                       (self.bnorm.mu, self.bnorm.sigma_sq, self.bnorm.gamma, self.bnorm.beta)]
        if not all(np.isfinite(a).all() for a in arrays):
            raise NumericError(f"{self.name}: non-finite parameter", module="transform")


@dataclass(frozen=True)
class PoolStageSpec:
    name: str
    kernel: int
    stride: int
    modes: tuple[str, ...]


def identify_precomputable_blocks(
    spec: NetworkSpec, fan_in_cap: int = DEFAULT_FAN_IN_CAP
) -> list[PrecomputableBlock | PoolStageSpec]:
    """
    Partition a deployment-order network into precomputable blocks and binary pool stages.

    Raises
    ------
    StateError
        For a training-order network.
    StructureError
        If a non-binary value crosses a block boundary or channel counts do not chain.
    CapacityError
        If a block's fan-in exceeds `fan_in_cap`.
    """
    if spec.phase != "deployment":
        raise StateError("block identification needs a deployment-order network", module="transform")

    layers = list(spec.layers)
    if not layers or not isinstance(layers[0], QuantizedInputConv):
        raise StructureError("network must start with a quantized input convolution", module="transform")
    stages: list[PrecomputableBlock | PoolStageSpec] = []
    channels = None
    i = 0

    def expect(j: int, kind: type, owner: str):
        if j >= len(layers) or not isinstance(layers[j], kind):
            found = layers[j].name if j < len(layers) else "end of network"
            raise StructureError(
                f"{owner}: expected {kind.__name__} before {found}, non-binary value between blocks",
                module="transform",
            )
        return layers[j]

    while i < len(layers):
        layer = layers[i]
        if isinstance(layer, QuantizedInputConv):
            if i != 0:
                raise StructureError(f"{layer.name}: input convolution must come first", module="transform")
            bn = expect(i + 1, BatchNorm, layer.name)
            binz = expect(i + 2, Binarize, layer.name)
            stages.append(PrecomputableBlock(
                name=layer.name, kind="input", conv=layer.conv,
                weight=np.asarray(layer.weights.weight, dtype=np.float64),
                bias=np.asarray(layer.weights.bias, dtype=np.float64),
                bnorm=bn.bnorm, input_bits=layer.input_bits, layers=(layer.name, bn.name, binz.name),
            ))
            channels = layer.conv.f
            i += 3
        elif isinstance(layer, SplitConvBlock):
            cfg = layer.config
            _chain(layer.name, channels, cfg.alpha.c)
            bn = expect(i + 1, BatchNorm, layer.name)
            binz = expect(i + 2, Binarize, layer.name)
            stages.append(PrecomputableBlock(
                name=f"{layer.name}.alpha", kind="hidden", conv=cfg.alpha,
                weight=np.asarray(layer.alpha.weight, dtype=np.float64),
                bias=np.asarray(layer.alpha.bias, dtype=np.float64),
                bnorm=layer.bnorm, layers=(layer.name,),
            ))
            stages.append(PrecomputableBlock(
                name=f"{layer.name}.beta", kind="hidden", conv=cfg.beta,
                weight=np.asarray(layer.beta.weight, dtype=np.float64),
                bias=np.asarray(layer.beta.bias, dtype=np.float64),
                bnorm=bn.bnorm, layers=(layer.name, bn.name, binz.name),
            ))
            channels = cfg.beta.f
            i += 3
        elif isinstance(layer, MaxPool1d):
            if not stages or isinstance(stages[-1], PrecomputableBlock) and stages[-1].kind == "output":
                raise StructureError(f"{layer.name}: pool does not follow a binary activation", module="transform")
            modes = layer.modes or ("OR",) * (channels or 0)
            if len(modes) != channels:
                raise StructureError(f"{layer.name}: {len(modes)} pool modes for {channels} channels",
                                     module="transform")
            stages.append(PoolStageSpec(name=layer.name, kernel=layer.kernel, stride=layer.stride, modes=tuple(modes)))
            i += 1
        elif isinstance(layer, Linear):
            _chain(layer.name, channels, layer.in_features)
            enclosed = (layer.name,)
            if i + 1 < len(layers):
                sig = expect(i + 1, Sigmoid, layer.name)
                enclosed += (sig.name,)
                if i + 2 < len(layers):
                    raise StructureError(f"{layers[i + 2].name}: layers after the output layer", module="transform")
            stages.append(PrecomputableBlock(
                name=layer.name, kind="output",
                conv=ConvParams(c=layer.in_features, k=1, g=1, f=layer.out_features),
                weight=np.asarray(layer.weight, dtype=np.float64)[:, :, None],
                bias=np.asarray(layer.bias, dtype=np.float64),
                bnorm=None, layers=enclosed,
            ))
            break
        else:
            raise StructureError(f"{layer.name}: {layer.kind} outside a precomputable block", module="transform")

    for stage in stages:
        if isinstance(stage, PrecomputableBlock):
            if stage.phi > fan_in_cap:
                raise CapacityError(
                    f"{stage.name}: fan-in {stage.phi} exceeds the cap of {fan_in_cap} bits", module="transform"
                )
            LOGGER.debug("block %s (%s): phi=%d m=%d", stage.name, stage.kind, stage.phi, stage.m)
    LOGGER.info("identified %d precomputable blocks", sum(isinstance(s, PrecomputableBlock) for s in stages))
    return stages


def _chain(name: str, have: int | None, want: int) -> None:
    if have is not None and have != want:
        raise StructureError(f"{name}: expects {want} input channels, got {have}", module="transform")


@dataclass(frozen=True, eq=False)
class TruthTable:
    """2^phi rows of m output bits; row index = window bits with bit 0 least significant."""

    name: str
    kind: str
    phi: int
    m: int
    rows: np.ndarray = field(repr=False)  # (2^phi, m) uint8

    def __eq__(self, other) -> bool:
        if not isinstance(other, TruthTable):
            return NotImplemented
        return (
            (self.name, self.kind, self.phi, self.m) == (other.name, other.kind, other.phi, other.m)
            and np.array_equal(self.rows, other.rows)
        )

    def column(self, output: int) -> np.ndarray:
        return self.rows[:, output]

    def to_bytes(self) -> bytes:
        header = json.dumps({"name": self.name, "kind": self.kind, "phi": self.phi, "m": self.m}, sort_keys=True)
        payload = np.packbits(self.rows, axis=1, bitorder="little")
        return header.encode("utf-8") + b"\n" + payload.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TruthTable":
        header_line, payload = data.split(b"\n", 1)
        header = json.loads(header_line)
        width = math.ceil(header["m"] / 8)
        packed = np.frombuffer(payload, dtype=np.uint8).reshape(1 << header["phi"], width)
        rows = np.unpackbits(packed, axis=1, count=header["m"], bitorder="little")
        return cls(name=header["name"], kind=header["kind"], phi=header["phi"], m=header["m"], rows=rows)

    def to_hex(self) -> str:
        """One line per row: row index and the m output bits as a hex number (bit 0 = output 0)."""
        digits = max(1, math.ceil(self.m / 4))
        index_digits = max(1, math.ceil(self.phi / 4))
        lines = [f"# {self.name} {self.kind} phi={self.phi} m={self.m}"]
        for idx, row in enumerate(self.rows.tolist()):
            value = sum(bit << o for o, bit in enumerate(row))
            lines.append(f"{idx:0{index_digits}x} {value:0{digits}x}")
        return "\n".join(lines) + "\n"

    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{self.name}.lutt"
        path.write_bytes(self.to_bytes())
        (directory / f"{self.name}.hex").write_text(self.to_hex(), encoding="utf-8")
        return path


def precompute_block(block: PrecomputableBlock, fan_in_cap: int = DEFAULT_FAN_IN_CAP) -> TruthTable:
    """
    Evaluate the block on all 2^phi input patterns.

    Raises
    ------
    CapacityError
        If phi exceeds `fan_in_cap`.
    NumericError
        If a parameter is NaN or infinite.
    """
    if block.phi > fan_in_cap:
        raise CapacityError(f"{block.name}: fan-in {block.phi} exceeds the cap of {fan_in_cap} bits",
                            module="transform")
    block.check_finite()

    n_rows = 1 << block.phi
    rows = np.zeros((n_rows, block.m), dtype=np.uint8)
    for start in range(0, n_rows, ROW_CHUNK):
        stop = min(n_rows, start + ROW_CHUNK)
        values = block.decode_rows(start, stop)
        for o in range(block.m):
            rows[start:stop, o] = block.evaluate(values, o)
    return TruthTable(name=block.name, kind=block.kind, phi=block.phi, m=block.m, rows=rows)


def precompute_tables(
    blocks: list[PrecomputableBlock], n_jobs: int = 1, fan_in_cap: int = DEFAULT_FAN_IN_CAP
) -> list[TruthTable]:
    """Tables for several blocks; identical to sequential evaluation for any `n_jobs`."""
    tables = Parallel(n_jobs=n_jobs)(delayed(precompute_block)(b, fan_in_cap) for b in blocks)
    LOGGER.info("precomputed %d truth tables", len(tables))
    return list(tables)
