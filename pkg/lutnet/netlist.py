"""
LUT netlist: decomposition of truth tables into trees of k_lut-input LUTs, the streaming stage list
(blocks, binary pools, delay lines), its timing-annotated functional simulation, the float reference
forward pass and the equivalence check between the two.

Timing contract
---------------
One input sample per clock, sample i available at cycle i + 1. Every stage registers its output once,
so a stage output whose window ends at input element e is available one cycle after e. The `last`
flag runs through every stage register: an inference over T samples is done at cycle T + depth,
depth being the number of stages.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, computed_field

from lutnet import numerics
from lutnet.cost_model import DEFAULT_K_LUT
from lutnet.errors import DomainError, InputRangeError, StructureError
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
    SplitConvBlock,
    receptive_field,
)
from lutnet.transform import (
    DEFAULT_FAN_IN_CAP,
    PoolStageSpec,
    PrecomputableBlock,
    TruthTable,
    identify_precomputable_blocks,
    precompute_tables,
    reorder_for_deployment,
)

LOGGER = logging.getLogger(__name__)


def _mux_config(data: int, select: int) -> int:
    """Config of a LUT passing data input number `sel` through; inputs are (d0..d_{data-1}, s0..)."""
    config = 0
    for idx in range(1 << (data + select)):
        sel = idx >> data
        config |= ((idx >> sel) & 1) << idx
    return config


MUX3_CONFIG = _mux_config(2, 1)
MUX6_CONFIG = _mux_config(4, 2)


@dataclass(frozen=True)
class LutNode:
    id: str
    inputs: tuple[str, ...]
    config: int

    @property
    def arity(self) -> int:
        return len(self.inputs)

    @cached_property
    def lookup(self) -> np.ndarray:
        return np.array([(self.config >> i) & 1 for i in range(1 << self.arity)], dtype=np.uint8)

    def evaluate(self, signals: dict[str, np.ndarray]) -> np.ndarray:
        idx = np.zeros(len(next(iter(signals.values()))), dtype=np.int64)
        for j, name in enumerate(self.inputs):
            idx |= signals[name].astype(np.int64) << j
        return self.lookup[idx]

    def config_hex(self) -> str:
        return format(self.config, f"0{max(1, (1 << self.arity) // 4)}x")


@dataclass(frozen=True, eq=False)
class LutTree:
    """LUT nodes in evaluation order computing one output bit from inputs x0..x{phi-1}."""

    output: int
    phi: int
    nodes: tuple[LutNode, ...]

    @property
    def root(self) -> str:
        return self.nodes[-1].id

    def evaluate(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        signals = {f"x{b}": bits[:, b] for b in range(self.phi)}
        for node in self.nodes:
            signals[node.id] = node.evaluate(signals)
        return signals[self.root]


def decompose_function(column: np.ndarray, phi: int, k_lut: int = DEFAULT_K_LUT, prefix: str = "n") -> list[LutNode]:
    """
    LUT nodes computing the function with truth vector `column` (length 2^phi).

    phi <= k_lut gives a single node. Above that, when (phi - k_lut) is odd the top input selects between
    two (phi-1)-input trees through a 3-input combiner; when it is even the top two inputs select among
    four (phi-2)-input trees through a 6-input combiner. Below k_lut = 6 only the first step is used.
    """
    if k_lut < 3:
        raise DomainError(f"k_lut must be >= 3 to compose larger tables, got {k_lut}", module="netlist")
    nodes: list[LutNode] = []
    ids = itertools.count()

    def build(col: np.ndarray, variables: list[str]) -> str:
        n = len(variables)
        if n <= k_lut:
            config = sum(bit << i for i, bit in enumerate(col.tolist()))
            node = LutNode(f"{prefix}{next(ids)}", tuple(variables), config)
        elif k_lut >= 6 and (n - k_lut) % 2 == 0:
            quarter = 1 << (n - 2)
            data = [build(col[q * quarter:(q + 1) * quarter], variables[:n - 2]) for q in range(4)]
            node = LutNode(f"{prefix}{next(ids)}", tuple(data) + (variables[n - 2], variables[n - 1]), MUX6_CONFIG)
        else:
            half = 1 << (n - 1)
            data = [build(col[:half], variables[:n - 1]), build(col[half:], variables[:n - 1])]
            node = LutNode(f"{prefix}{next(ids)}", tuple(data) + (variables[n - 1],), MUX3_CONFIG)
        nodes.append(node)
        return node.id

    build(np.asarray(column, dtype=np.uint8), [f"x{b}" for b in range(phi)])
    return nodes


def decompose_table(table: TruthTable, k_lut: int = DEFAULT_K_LUT) -> tuple[LutTree, ...]:
    return tuple(
        LutTree(output=o, phi=table.phi,
                nodes=tuple(decompose_function(table.column(o), table.phi, k_lut, prefix=f"{table.name}.o{o}.n")))
        for o in range(table.m)
    )


@dataclass(frozen=True)
class DelayNode:
    """Shift register holding the last `depth` input words of `width` bits."""

    id: str
    depth: int
    width: int


@dataclass(frozen=True)
class PoolNode:
    id: str
    kernel: int
    stride: int
    modes: tuple[str, ...]

    @property
    def name(self) -> str:
        return self.id

    @property
    def channels(self) -> int:
        return len(self.modes)

    def output_length(self, length: int) -> int:
        return numerics.pool_output_length(length, self.kernel, self.stride)

    def evaluate(self, stream: np.ndarray) -> np.ndarray:
        windows = numerics.pool_windows(stream, self.kernel, self.stride)
        and_mask = np.array([mode == "AND" for mode in self.modes])
        return np.where(and_mask, windows.min(axis=1), windows.max(axis=1)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class BlockStage:
    name: str
    kind: str
    conv: ConvParams
    input_bits: int
    trees: tuple[LutTree, ...]
    delay: DelayNode

    @property
    def phi(self) -> int:
        return self.conv.k * self.conv.s_in * self.input_bits

    @property
    def m(self) -> int:
        return self.conv.f

    @property
    def lut_count(self) -> int:
        return sum(len(tree.nodes) for tree in self.trees)

    def group_of(self, output: int) -> int:
        return output // self.conv.s_out

    def output_length(self, length: int) -> int:
        return max(0, length - self.conv.k + 1)

    def truth_table(self) -> TruthTable:
        """Table realised by the LUT trees, enumerated over every input pattern."""
        bits = numerics.row_bits(0, 1 << self.phi, self.phi)
        rows = np.stack([tree.evaluate(bits) for tree in self.trees], axis=1)
        return TruthTable(name=self.name, kind=self.kind, phi=self.phi, m=self.m, rows=rows)

    def evaluate(self, stream: np.ndarray) -> np.ndarray:
        """(N, c) bits, or (N,) samples for the input block -> (N - k + 1, f) bits."""
        k = self.conv.k
        if self.kind == "input":
            window_bits = numerics.sample_window_bits(stream, k, self.input_bits)
            return np.stack([tree.evaluate(window_bits) for tree in self.trees], axis=1)
        out = np.zeros((self.output_length(stream.shape[0]), self.m), dtype=np.uint8)
        for group in range(self.conv.g):
            channels = slice(group * self.conv.s_in, (group + 1) * self.conv.s_in)
            window_bits = numerics.binary_windows(stream[:, channels], k)
            for o in range(group * self.conv.s_out, (group + 1) * self.conv.s_out):
                out[:, o] = self.trees[o].evaluate(window_bits)
        return out


@dataclass(frozen=True)
class InputPort:
    name: str
    bits: int


@dataclass(frozen=True)
class OutputPort:
    name: str
    bits: int = 1


Stage = BlockStage | PoolNode


@dataclass(frozen=True, eq=False)
class LutNetlist:
    name: str
    k_lut: int
    input: InputPort
    output: OutputPort
    stages: tuple[Stage, ...]

    @property
    def pipeline_depth(self) -> int:
        return len(self.stages)

    @property
    def lut_count(self) -> int:
        return sum(s.lut_count for s in self.blocks())

    def blocks(self) -> list[BlockStage]:
        return [s for s in self.stages if isinstance(s, BlockStage)]

    def pools(self) -> list[PoolNode]:
        return [s for s in self.stages if isinstance(s, PoolNode)]

    def stage_lengths(self, length: int) -> list[int]:
        """Output length of every stage for an inference over `length` samples."""
        lengths = []
        for stage in self.stages:
            needed = stage.kernel if isinstance(stage, PoolNode) else stage.conv.k
            if length < needed:
                raise StructureError(
                    f"{stage.name}: kernel {needed} larger than the available history {length}", module="netlist"
                )
            length = stage.output_length(length)
            lengths.append(length)
        return lengths

    def estimated_cycles(self, length: int) -> int:
        self.stage_lengths(length)
        return length + self.pipeline_depth


def build_netlist(
    stages: list[PrecomputableBlock | PoolStageSpec],
    tables: list[TruthTable],
    k_lut: int = DEFAULT_K_LUT,
    name: str = "top",
) -> LutNetlist:
    """
    Assemble the streaming netlist: one block stage per table (LUT trees plus a k-1 deep delay line)
    and one pool node per binary pool stage, in network order.
    """
    by_name = {t.name: t for t in tables}
    built: list[Stage] = []
    for stage in stages:
        if isinstance(stage, PoolStageSpec):
            built.append(PoolNode(id=stage.name, kernel=stage.kernel, stride=stage.stride, modes=stage.modes))
            continue
        if stage.name not in by_name:
            raise StructureError(f"{stage.name}: no truth table for block", module="netlist")
        table = by_name[stage.name]
        if (table.phi, table.m) != (stage.phi, stage.m):
            raise StructureError(f"{stage.name}: table shape does not match the block", module="netlist")
        built.append(BlockStage(
            name=stage.name, kind=stage.kind, conv=stage.conv, input_bits=stage.input_bits,
            trees=decompose_table(table, k_lut),
            delay=DelayNode(id=f"{stage.name}.delay", depth=stage.conv.k - 1, width=stage.conv.c * stage.input_bits),
        ))
    if not built or not isinstance(built[0], BlockStage) or built[0].kind != "input":
        raise StructureError("netlist must start with the input block", module="netlist")
    input_bits = built[0].input_bits
    netlist = LutNetlist(name=name, k_lut=k_lut, input=InputPort("s_data", input_bits),
                         output=OutputPort("decision"), stages=tuple(built))
    LOGGER.info("netlist %s: %d stages, %d LUT nodes", name, netlist.pipeline_depth, netlist.lut_count)
    return netlist


@dataclass(frozen=True, eq=False)
class CompiledNetwork:
    spec: NetworkSpec
    stages: list
    tables: list[TruthTable]
    netlist: LutNetlist


def compile_network(
    spec: NetworkSpec,
    k_lut: int = DEFAULT_K_LUT,
    fan_in_cap: int = DEFAULT_FAN_IN_CAP,
    n_jobs: int = 1,
    name: str = "top",
) -> CompiledNetwork:
    """Reorder (if needed), cut into blocks, precompute every table and build the netlist."""
    if spec.phase == "training":
        spec = reorder_for_deployment(spec)
    stages = identify_precomputable_blocks(spec, fan_in_cap)
    tables = precompute_tables([s for s in stages if isinstance(s, PrecomputableBlock)], n_jobs, fan_in_cap)
    netlist = build_netlist(stages, tables, k_lut, name=name)
    return CompiledNetwork(spec=spec, stages=stages, tables=tables, netlist=netlist)


def _check_samples(samples, bits: int) -> np.ndarray:
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise InputRangeError("samples must be a one-dimensional integer series", module="netlist")
    if samples.size and not np.issubdtype(samples.dtype, np.integer):
        if not np.all(np.equal(np.mod(samples, 1), 0)):
            raise InputRangeError("samples must be integers", module="netlist")
    samples = samples.astype(np.int64)
    lo, hi = numerics.sample_range(bits)
    if samples.size and (samples.min() < lo or samples.max() > hi):
        bad = samples[(samples < lo) | (samples > hi)][0]
        raise InputRangeError(f"sample {bad} outside the signed {bits}-bit range [{lo}, {hi}]", module="netlist")
    return samples


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """
    Sample i enters at cycle i + 1 and every stage registers once, so the last flag reaches `done` at
    `cycles` = T + pipeline_depth; `decision_cycle` is when the final output bit left the last stage,
    earlier than `cycles` when trailing samples do not complete a pool window.
    """

    decision: bool
    outputs: np.ndarray  # output bit per remaining time step
    trace: dict[str, np.ndarray] = field(repr=False)
    cycles: int
    decision_cycle: int


def simulate_netlist(netlist: LutNetlist, samples) -> SimulationResult:
    """
    Run one inference window through the netlist.

    Raises
    ------
    InputRangeError
        If a sample does not fit the input port.
    StructureError
        If the window is shorter than the netlist's receptive field.
    """
    samples = _check_samples(samples, netlist.input.bits)
    netlist.stage_lengths(samples.shape[0])

    available = np.arange(1, samples.shape[0] + 1)
    last_flag = int(available[-1])
    trace: dict[str, np.ndarray] = {}
    stream = samples
    for stage in netlist.stages:
        stream = stage.evaluate(stream)
        if isinstance(stage, PoolNode):
            available = available[stage.kernel - 1::stage.stride][:stream.shape[0]] + 1
        else:
            available = available[stage.conv.k - 1:] + 1
        last_flag += 1
        trace[stage.name] = stream

    outputs = stream[:, 0]
    return SimulationResult(
        decision=bool(outputs[-1]),
        outputs=outputs,
        trace=trace,
        cycles=last_flag,
        decision_cycle=int(available[-1]),
    )


def simulate_windows(netlist: LutNetlist, windows, n_jobs: int = 1) -> list[SimulationResult]:
    results = Parallel(n_jobs=n_jobs)(delayed(simulate_netlist)(netlist, w) for w in windows)
    return list(results)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    probabilities: np.ndarray
    pre_activation: np.ndarray
    decision: bool
    trace: dict[str, np.ndarray] = field(repr=False)


def _grouped_binary_conv(name: str, bits: np.ndarray, conv: ConvParams, weights: ConvWeights) -> np.ndarray:
    if bits.shape[1] != conv.c:
        raise StructureError(f"{name}: expects {conv.c} channels, got {bits.shape[1]}", module="netlist")
    _need_length(name, bits.shape[0], conv.k)
    out = np.empty((bits.shape[0] - conv.k + 1, conv.f), dtype=np.float64)
    for o in range(conv.f):
        group = o // conv.s_out
        windows = numerics.to_signs(numerics.binary_windows(bits[:, group * conv.s_in:(group + 1) * conv.s_in], conv.k))
        out[:, o] = numerics.accumulate(windows, weights.window_weights(o), weights.bias[o])
    return out


def _bnorm(name: str, values: np.ndarray, params: BatchNormParams) -> np.ndarray:
    if values.shape[1] != params.channels:
        raise StructureError(f"{name}: batchnorm over {params.channels} channels, got {values.shape[1]}",
                             module="netlist")
    return np.stack([numerics.batchnorm(values[:, ch], *params.channel(ch)) for ch in range(params.channels)],
                    axis=1).reshape(values.shape)


def _need_length(name: str, length: int, kernel: int) -> None:
    if length < kernel:
        raise StructureError(f"{name}: window shorter than the receptive field", module="netlist")


def reference_forward(spec: NetworkSpec, samples) -> ForwardResult:
    """
    Double-precision forward pass of a network in either order.

    The trace maps stage names (input conv name, "<split>.alpha", "<split>.beta", pool names, linear
    name) to the binary activations each stage hands on. Training order has no "<split>.beta" entry
    for pooled blocks since pooling happens before binarization there.

    Raises
    ------
    StructureError
        On channel mismatches, a missing output layer or a window shorter than the receptive field.
    """
    samples = _check_samples(samples, spec.input_bits() or 12)
    trace: dict[str, np.ndarray] = {}
    value: np.ndarray = samples
    state = "samples"
    pending: str | None = None
    pre = None
    probabilities = None

    def need(layer, wanted):
        if state != wanted:
            raise StructureError(f"{layer.name}: expects {wanted} input, got {state}", module="netlist")

    for layer in spec.layers:
        if isinstance(layer, QuantizedInputConv):
            need(layer, "samples")
            _need_length(layer.name, value.shape[0], layer.conv.k)
            windows = numerics.sample_windows(value, layer.conv.k).astype(np.float64)
            value = np.stack([numerics.accumulate(windows, layer.weights.window_weights(o), layer.weights.bias[o])
                              for o in range(layer.conv.f)], axis=1)
            state, pending = "float", layer.name
        elif isinstance(layer, BatchNorm):
            need(layer, "float")
            value = _bnorm(layer.name, value, layer.bnorm)
        elif isinstance(layer, Binarize):
            need(layer, "float")
            value = numerics.binarize(value)
            state = "bits"
            if pending:
                trace[pending] = value
                pending = None
        elif isinstance(layer, SplitConvBlock):
            need(layer, "bits")
            cfg = layer.config
            hidden = _grouped_binary_conv(layer.name, value, cfg.alpha, layer.alpha)
            hidden = numerics.binarize(_bnorm(layer.name, hidden, layer.bnorm))
            trace[f"{layer.name}.alpha"] = hidden
            value = _grouped_binary_conv(layer.name, hidden, cfg.beta, layer.beta)
            state, pending = "float", f"{layer.name}.beta"
        elif isinstance(layer, MaxPool1d):
            if state == "samples":
                raise StructureError(f"{layer.name}: pooling raw samples", module="netlist")
            _need_length(layer.name, value.shape[0], layer.kernel)
            windows = numerics.pool_windows(value, layer.kernel, layer.stride)
            if state == "float":
                value = windows.max(axis=1)
                pending = layer.name
            else:
                modes = layer.modes or ("OR",) * value.shape[1]
                and_mask = np.array([mode == "AND" for mode in modes])
                value = np.where(and_mask, windows.min(axis=1), windows.max(axis=1)).astype(np.uint8)
                trace[layer.name] = value
        elif isinstance(layer, Linear):
            need(layer, "bits")
            if value.shape[1] != layer.in_features:
                raise StructureError(f"{layer.name}: expects {layer.in_features} features, got {value.shape[1]}",
                                     module="netlist")
            signs = numerics.to_signs(value)
            pre = np.stack([numerics.accumulate(signs, layer.weight[o], layer.bias[o])
                            for o in range(layer.out_features)], axis=1)
            trace[layer.name] = numerics.binarize(pre)
            value, state = pre, "float"
        elif isinstance(layer, Sigmoid):
            need(layer, "float")
            probabilities = 1.0 / (1.0 + np.exp(-value))
            value = probabilities

    if pre is None:
        raise StructureError("network has no output layer", module="netlist")
    if pre.shape[0] == 0:
        raise StructureError("window shorter than the receptive field", module="netlist")
    if probabilities is None:
        probabilities = 1.0 / (1.0 + np.exp(-pre))
    return ForwardResult(
        probabilities=probabilities[:, 0],
        pre_activation=pre[:, 0],
        decision=bool(pre[-1, 0] >= 0),
        trace=trace,
    )


class Divergence(BaseModel):
    window: int
    stage: str


class VerificationReport(BaseModel):
    count: int
    seed: int
    window_length: int
    mismatches: int = 0
    decision_mismatches: int = 0
    first_divergence: list[Divergence] = []

    @computed_field
    @property
    def passed(self) -> bool:
        return self.mismatches == 0


def verify_equivalence(
    spec: NetworkSpec,
    netlist: LutNetlist,
    count: int,
    window_length: int | None = None,
    seed: int = 0,
    windows=None,
    max_reported: int = 20,
) -> VerificationReport:
    """
    Compare the netlist against the float reference on `count` windows.

    Windows are drawn uniformly over the input range from `numpy.random.default_rng(seed)` unless
    given. A window counts as a mismatch when any stage output or the decision differs; the first
    differing stage (in pipeline order) is recorded for up to `max_reported` windows.
    """
    if spec.phase == "training":
        spec = reorder_for_deployment(spec)
    length = window_length or receptive_field(spec)
    if windows is None:
        lo, hi = numerics.sample_range(netlist.input.bits)
        rng = np.random.default_rng(seed)
        windows = rng.integers(lo, hi + 1, size=(count, length))
    else:
        windows = list(windows)[:count]

    report = VerificationReport(count=count, seed=seed, window_length=length)
    mismatches = decision_mismatches = 0
    divergences = []
    for index, window in enumerate(windows):
        reference = reference_forward(spec, window)
        simulated = simulate_netlist(netlist, window)
        stage = next((s.name for s in netlist.stages
                      if s.name in reference.trace and not np.array_equal(reference.trace[s.name], simulated.trace[s.name])),
                     None)
        decision_differs = reference.decision != simulated.decision
        if stage is None and decision_differs:
            stage = netlist.output.name
        if stage is not None:
            mismatches += 1
            decision_mismatches += decision_differs
            if len(divergences) < max_reported:
                divergences.append(Divergence(window=index, stage=stage))

    report = report.model_copy(update={"mismatches": mismatches, "decision_mismatches": decision_mismatches,
                                       "first_divergence": divergences})
    LOGGER.info("verified %d windows: %d mismatches", count, mismatches)
    return report


def netlist_to_document(netlist: LutNetlist) -> dict:
    stages = []
    for stage in netlist.stages:
        if isinstance(stage, PoolNode):
            stages.append({"type": "pool", "id": stage.id, "kernel": stage.kernel, "stride": stage.stride,
                           "modes": list(stage.modes)})
            continue
        c = stage.conv
        stages.append({
            "type": "block",
            "name": stage.name,
            "kind": stage.kind,
            "conv": {"c": c.c, "k": c.k, "g": c.g, "f": c.f},
            "input_bits": stage.input_bits,
            "phi": stage.phi,
            "m": stage.m,
            "delay": {"id": stage.delay.id, "depth": stage.delay.depth, "width": stage.delay.width},
            "trees": [
                {
                    "output": tree.output,
                    "root": tree.root,
                    "nodes": [{"id": n.id, "inputs": list(n.inputs), "config": n.config_hex()} for n in tree.nodes],
                }
                for tree in stage.trees
            ],
        })
    return {
        "name": netlist.name,
        "k_lut": netlist.k_lut,
        "input": {"name": netlist.input.name, "bits": netlist.input.bits},
        "output": {"name": netlist.output.name, "bits": netlist.output.bits},
        "pipeline_depth": netlist.pipeline_depth,
        "stages": stages,
    }


def netlist_from_document(doc: dict) -> LutNetlist:
    try:
        stages: list[Stage] = []
        for item in doc["stages"]:
            if item["type"] == "pool":
                stages.append(PoolNode(id=item["id"], kernel=item["kernel"], stride=item["stride"],
                                       modes=tuple(item["modes"])))
                continue
            trees = tuple(
                LutTree(output=t["output"], phi=item["phi"],
                        nodes=tuple(LutNode(n["id"], tuple(n["inputs"]), int(n["config"], 16)) for n in t["nodes"]))
                for t in item["trees"]
            )
            delay = item["delay"]
            stages.append(BlockStage(
                name=item["name"], kind=item["kind"], conv=ConvParams(**item["conv"]), input_bits=item["input_bits"],
                trees=trees, delay=DelayNode(delay["id"], delay["depth"], delay["width"]),
            ))
        return LutNetlist(
            name=doc["name"],
            k_lut=doc["k_lut"],
            input=InputPort(doc["input"]["name"], doc["input"]["bits"]),
            output=OutputPort(doc["output"]["name"], doc["output"]["bits"]),
            stages=tuple(stages),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise StructureError(f"malformed netlist document: {e!r}", module="netlist") from e


def save_netlist(netlist: LutNetlist, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(netlist_to_document(netlist), indent=1) + "\n", encoding="utf-8")
    return path


def load_netlist(path) -> LutNetlist:
    return netlist_from_document(json.loads(Path(path).read_text(encoding="utf-8")))
