"""Architecture templates and whole-network costing of candidate configurations."""

import numpy as np
import pytest

from lutnet.architectures import architecture_cost, build_network, load_architecture
from lutnet.errors import DomainError, StructureError
from lutnet.ir import MaxPool1d, SplitConfig, SplitConvBlock, receptive_field, validate_network


def _cfg(*values):
    return SplitConfig.from_tuple(values)


class TestTemplate:
    def test_ecg_template(self, mitbih_template):
        assert mitbih_template.name == "mitbih_af"
        assert mitbih_template.input_bits == 12
        assert mitbih_template.hidden_kernel == 6
        assert mitbih_template.input_channels == 12
        assert mitbih_template.hidden_filter(6).as_tuple() == (6, 6, 1, 6)

    def test_depthwise_first_block(self, mitbih_template):
        assert mitbih_template.depthwise_first(6).tuple_form == (12, 10, 12, 12, 1, 1, 6)

    def test_unknown_name(self):
        with pytest.raises(StructureError):
            load_architecture("no_such_template")

    def test_load_by_path(self, tmp_path):
        path = tmp_path / "small.yml"
        path.write_text(
            "name: small\nlayers:\n  - {kind: input_conv, name: conv1, f: 4}\n"
            "  - {kind: bnorm, name: bn1}\n  - {kind: binarize, name: bin1}\n",
            encoding="utf-8",
        )
        template = load_architecture(str(path))
        assert (template.name, template.input_bits, template.input_channels) == ("small", 12, 4)
        with pytest.raises(StructureError):
            template.hidden_kernel


class TestBuildNetwork:
    def test_deployment_network_is_valid(self, ecg_network):
        assert validate_network(ecg_network) == []
        pools = [layer for layer in ecg_network.layers if isinstance(layer, MaxPool1d)]
        assert len(pools) == 4 and all(pool.modes for pool in pools)
        assert receptive_field(ecg_network) == 311

    def test_blocks_carry_the_configurations(self, ecg_network):
        blocks = [layer for layer in ecg_network.layers if isinstance(layer, SplitConvBlock)]
        assert [b.config.tuple_form for b in blocks] == [(12, 10, 12, 12, 1, 1, 6)] + [(6, 6, 6, 6, 1, 1, 6)] * 3

    def test_seeded(self, mitbih_template):
        hidden = _cfg(6, 6, 6, 6, 1, 1, 6)
        a = build_network(mitbih_template, hidden, rng=np.random.default_rng(3))
        b = build_network(mitbih_template, hidden, rng=np.random.default_rng(3))
        assert a == b

    def test_training_phase(self, ecg_training):
        assert ecg_training.phase == "training"
        assert all(layer.modes is None for layer in ecg_training.layers if isinstance(layer, MaxPool1d))

    def test_input_bits_override(self, mitbih_template):
        spec = build_network(mitbih_template, _cfg(6, 6, 6, 6, 1, 1, 6), input_bits=8)
        assert spec.input_bits() == 8

    @pytest.mark.parametrize("hidden", [
        (6, 6, 6, 6, 1, 1, 12),   # does not map c0 to c0
        (6, 5, 6, 6, 1, 1, 6),    # kernel 5 instead of 6
        (6, 6, 4, 6, 1, 1, 6),    # g does not divide c
    ])
    def test_rejected_hidden_configurations(self, mitbih_template, hidden):
        with pytest.raises(DomainError):
            build_network(mitbih_template, _cfg(*hidden))

    def test_first_block_must_read_the_input_channels(self, mitbih_template):
        with pytest.raises(DomainError):
            build_network(mitbih_template, _cfg(6, 6, 6, 6, 1, 1, 6), first=_cfg(6, 10, 6, 6, 1, 1, 6))


class TestArchitectureCost:
    @pytest.mark.parametrize("hidden, total", [
        ((6, 6, 6, 6, 1, 1, 6), 1867),
        ((12, 6, 12, 12, 1, 1, 12), 5569),
    ])
    def test_totals(self, mitbih_template, hidden, total):
        assert architecture_cost(mitbih_template, _cfg(*hidden)) == total

    def test_narrower_input(self, mitbih_template):
        assert architecture_cost(mitbih_template, _cfg(6, 6, 6, 6, 1, 1, 6), input_bits=8) < 1867
