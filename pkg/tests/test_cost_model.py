"""Analytic LUT cost model."""

from fractions import Fraction

import pytest

from lutnet.cost_model import (
    fan_in,
    lut_cost,
    lut_cost_closed_form,
    lut_cost_recursive,
    network_cost,
    pool_cost,
    split_block_cost,
)
from lutnet.errors import DomainError, StateError
from lutnet.ir import ConvParams, NetworkSpec, SplitConfig


class TestRecursion:
    def test_sequence_for_six_input_luts(self):
        assert [lut_cost_recursive(n) for n in range(6, 13)] == [1, 3, 5, 11, 21, 43, 85]

    def test_base_case(self):
        assert lut_cost_recursive(4) == 1
        assert lut_cost_recursive(1) == 1

    def test_zero_fan_in(self):
        with pytest.raises(DomainError):
            lut_cost_recursive(0)

    @pytest.mark.parametrize("x", range(5, 21))
    def test_closed_form_agrees(self, x):
        """The closed form equals the recursion exactly for 5 <= X <= 20."""
        assert lut_cost_closed_form(x, 1) == Fraction(lut_cost_recursive(x))

    def test_closed_form_is_negative_below_five_inputs(self):
        assert lut_cost_closed_form(2, 1) < 0


class TestLutCost:
    @pytest.mark.parametrize("x, y, expected", [(6, 1, 1), (12, 12, 1020), (2, 4, 4), (7, 2, 6)])
    def test_examples(self, x, y, expected):
        assert lut_cost(x, y) == expected

    @pytest.mark.parametrize("x, y", [(0, 1), (1, 0)])
    def test_domain(self, x, y):
        with pytest.raises(DomainError):
            lut_cost(x, y)

    @pytest.mark.parametrize("params, expected", [
        (ConvParams(c=12, k=6, g=12, f=12), 6),
        (ConvParams(c=12, k=1, g=1, f=12), 12),
        (ConvParams(c=4, k=2, g=4, f=4), 2),
    ])
    def test_fan_in(self, params, expected):
        assert fan_in(params) == expected


class TestSplitBlockCost:
    @pytest.mark.parametrize("cfg, expected", [
        ((4, 2, 4, 4, 1, 1, 2), 6),  # depthwise separable
        ((4, 2, 2, 2, 1, 1, 2), 4),  # grouped
        ((6, 6, 6, 6, 1, 1, 6), 12),
    ])
    def test_examples(self, cfg, expected):
        assert split_block_cost(SplitConfig.from_tuple(cfg)) == expected

    def test_invalid_configuration(self):
        with pytest.raises(DomainError):
            split_block_cost(SplitConfig.from_tuple((5, 2, 5, 5, 1, 2, 4)))


class TestNetworkCost:
    def test_pool_cost(self):
        assert pool_cost(3, 6) == 6
        assert pool_cost(8, 6) == 30

    def test_ecg_itemization(self, ecg_network):
        """c0 = 6, hidden (6,6,6,6,1,1,6), 12-bit input: 1020 + 762 + 3*12 + 48 + 1 = 1867."""
        report = network_cost(ecg_network)
        by_name = {item.name: item for item in report.per_layer}
        assert by_name["conv1"].luts == 1020
        assert by_name["split1.alpha"].luts + by_name["split1.beta"].luts == 762
        assert sum(by_name[f"split{i}.{h}"].luts for i in (2, 3, 4) for h in ("alpha", "beta")) == 36
        assert sum(item.luts for item in report.per_layer if item.kind == "pool") == 48
        assert by_name["fc"].luts == 1
        assert report.total == 1867
        assert report.total == sum(item.luts for item in report.per_layer)

    def test_within_ten_percent_of_the_measured_total(self, ecg_network):
        assert abs(network_cost(ecg_network).total - 1915) / 1915 < 0.10

    def test_training_order_is_rejected(self, ecg_training):
        with pytest.raises(StateError):
            network_cost(ecg_training)

    def test_empty_network(self):
        assert network_cost(NetworkSpec(phase="deployment")).total == 0

    def test_other_lut_sizes(self, ecg_network):
        assert network_cost(ecg_network, k_lut=4).total > network_cost(ecg_network).total
