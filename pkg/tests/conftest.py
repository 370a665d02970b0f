"""Shared network builders for the test suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from lutnet.architectures import build_network, load_architecture
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
from lutnet.netlist import compile_network
from lutnet.transform import reorder_for_deployment

FIXTURES = Path(__file__).parent / "fixtures"

ECG_HIDDEN = SplitConfig.from_tuple((6, 6, 6, 6, 1, 1, 6))

# small split configurations, every fan-in <= 8
TINY_CONFIGS = [
    (4, 2, 4, 4, 1, 1, 4),
    (4, 2, 2, 4, 1, 2, 4),
    (4, 1, 1, 4, 2, 2, 4),
    (4, 2, 2, 2, 1, 1, 4),
    (4, 3, 4, 8, 1, 4, 4),
    (4, 1, 2, 4, 2, 4, 4),
]


def random_bnorm(rng, channels, mu_scale=1.0, zero_gamma=0.0):
    gamma = rng.normal(0.0, 1.0, channels)
    gamma[rng.random(channels) < zero_gamma] = 0.0
    return BatchNormParams(
        mu=(rng.normal(0.0, 1.0, channels) * mu_scale).tolist(),
        sigma_sq=rng.uniform(0.5, 2.0, channels).tolist(),
        gamma=gamma.tolist(),
        beta=rng.normal(0.0, 0.5, channels).tolist(),
    )


def random_weights(rng, params: ConvParams, bias_scale=0.1):
    return ConvWeights(
        weight=rng.normal(0.0, 1.0, (params.f, params.s_in, params.k)).tolist(),
        bias=(rng.normal(0.0, 1.0, params.f) * bias_scale).tolist(),
    )


def tiny_network(
    rng: np.random.Generator,
    input_bits: int = 4,
    input_kernel: int = 1,
    channels: int = 4,
    config=None,
    pool=(2, 2),
    phase: str = "training",
    zero_gamma: float = 0.0,
) -> NetworkSpec:
    """
    input conv -> bnorm -> binarize -> split block [-> maxpool] -> bnorm -> binarize -> linear -> sigmoid,
    with seeded random parameters. Every block reads at most max(input_kernel * input_bits, 8) bits.
    """
    if config is None:
        config = TINY_CONFIGS[rng.integers(len(TINY_CONFIGS))]
    cfg = SplitConfig.from_tuple(config) if not isinstance(config, SplitConfig) else config
    assert cfg.alpha.c == channels

    conv = ConvParams(c=1, k=input_kernel, g=1, f=channels)
    scale = 2.0 ** (input_bits - 1)
    layers = [
        QuantizedInputConv(name="conv1", conv=conv, input_bits=input_bits,
                           weights=random_weights(rng, conv, bias_scale=scale)),
        BatchNorm(name="bn1", bnorm=random_bnorm(rng, channels, mu_scale=scale, zero_gamma=zero_gamma)),
        Binarize(name="bin1"),
        SplitConvBlock(name="split1", config=cfg, alpha=random_weights(rng, cfg.alpha),
                       bnorm=random_bnorm(rng, cfg.alpha.f, zero_gamma=zero_gamma),
                       beta=random_weights(rng, cfg.beta)),
    ]
    if pool is not None:
        layers.append(MaxPool1d(name="pool1", kernel=pool[0], stride=pool[1]))
    layers += [
        BatchNorm(name="bn2", bnorm=random_bnorm(rng, cfg.beta.f, zero_gamma=zero_gamma)),
        Binarize(name="bin2"),
        Linear(name="fc", in_features=cfg.beta.f, out_features=1,
               weight=[rng.normal(0.0, 1.0, cfg.beta.f).tolist()], bias=[float(rng.normal(0.0, 0.1))]),
        Sigmoid(name="prob"),
    ]
    spec = NetworkSpec(phase="training", layers=tuple(layers))
    if phase == "deployment":
        spec = reorder_for_deployment(spec)
    return spec


def random_windows(rng, count: int, length: int, bits: int) -> np.ndarray:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    return rng.integers(lo, hi + 1, size=(count, length))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_tiny_network():
    return tiny_network


@pytest.fixture(scope="session")
def mitbih_template():
    return load_architecture("mitbih_af")


@pytest.fixture(scope="session")
def ecg_network(mitbih_template):
    """Deployment-order network of the ECG architecture with c0 = 6 and seeded random weights."""
    return build_network(mitbih_template, ECG_HIDDEN, rng=np.random.default_rng(7))


@pytest.fixture(scope="session")
def ecg_training(mitbih_template):
    return build_network(mitbih_template, ECG_HIDDEN, phase="training", rng=np.random.default_rng(7))


@pytest.fixture(scope="session")
def ecg_compiled(ecg_network):
    return compile_network(ecg_network)


@pytest.fixture(scope="session")
def score_outlier_pairs():
    return json.loads((FIXTURES / "score_outlier_pairs.json").read_text(encoding="utf-8"))["pairs"]


@pytest.fixture(scope="session")
def pareto_rows():
    return json.loads((FIXTURES / "measured_pareto.json").read_text(encoding="utf-8"))["rows"]
