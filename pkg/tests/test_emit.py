"""VHDL emission and the compilation report."""

import dataclasses
import json
import re

import numpy as np
import pytest

from conftest import tiny_network
from lutnet.emit import (
    emit_report,
    emit_vhdl,
    sanitize_id,
    table_literal,
    vendor_references,
    write_report,
)
from lutnet.errors import StructureError
from lutnet.ir import NetworkSpec
from lutnet.netlist import InputPort, compile_network, verify_equivalence

TABLE_RE = re.compile(r'constant TABLE_(\d+) : std_logic_vector\(0 to (\d+)\) :=((?:\s+"[01]*"(?: &)?)+);')


def _parse_tables(text: str) -> dict[int, str]:
    tables = {}
    for match in TABLE_RE.finditer(text):
        bits = "".join(re.findall(r'"([01]*)"', match.group(3)))
        assert len(bits) == int(match.group(2)) + 1
        tables[int(match.group(1))] = bits
    return tables


class TestSanitize:
    @pytest.mark.parametrize("name, ident", [
        ("split1.alpha", "split1_alpha"),
        ("conv1", "conv1"),
        ("top", "s_top"),
        ("1st", "s_1st"),
        ("pool..2", "pool_2"),
    ])
    def test_examples(self, name, ident):
        assert sanitize_id(name) == ident

    def test_nothing_left(self):
        with pytest.raises(StructureError):
            sanitize_id("...")


class TestTableLiteral:
    def test_chunks(self):
        literal = table_literal([1, 0] * 40)
        assert len(literal) == 2
        assert literal[0] == '"' + "10" * 32 + '"'
        assert literal[1] == '"' + "10" * 8 + '"'


class TestEmitVhdl:
    def test_tables_parse_back(self, tmp_path):
        """For 20 random networks every TABLE_o constant reads back as the precomputed column."""
        rng = np.random.default_rng(8)
        for n in range(20):
            compiled = compile_network(tiny_network(rng))
            out = tmp_path / str(n)
            emit_vhdl(compiled.netlist, out)
            for table in compiled.tables:
                parsed = _parse_tables((out / f"{sanitize_id(table.name)}.vhd").read_text(encoding="utf-8"))
                assert sorted(parsed) == list(range(table.m))
                for o, bits in parsed.items():
                    assert bits == "".join(str(b) for b in table.column(o).tolist())

    def test_file_set(self, tmp_path, ecg_compiled):
        netlist = ecg_compiled.netlist
        paths = emit_vhdl(netlist, tmp_path, window_length=311)
        names = {p.name for p in paths}
        assert len(paths) == len(netlist.blocks()) + len(netlist.pools()) + 2
        assert {"top.vhd", "tb_top.vhd", "conv1.vhd", "split1_alpha.vhd", "pool1.vhd", "fc.vhd"} <= names

    def test_top_level_ports(self, tmp_path, ecg_compiled):
        emit_vhdl(ecg_compiled.netlist, tmp_path)
        top = (tmp_path / "top.vhd").read_text(encoding="utf-8")
        assert re.search(r"s_data\s+: in\s+std_logic_vector\(11 downto 0\)", top)
        assert re.search(r"decision\s+: out std_logic;", top)
        assert "entity work.split1_alpha" in top

    def test_done_and_decision_share_the_last_stage(self, tmp_path, ecg_compiled):
        """Both outputs read the final stage's registers directly, so decision is valid while done is high."""
        netlist = ecg_compiled.netlist
        emit_vhdl(netlist, tmp_path)
        top = (tmp_path / "top.vhd").read_text(encoding="utf-8")
        last = netlist.pipeline_depth - 1
        done = re.search(r"^\s*done <= l(\d+);$", top, re.M)
        decision = re.search(r"^\s*decision <= d(\d+)\(0\) when v(\d+) = '1' else decision_q;$", top, re.M)
        assert done and decision
        assert int(done.group(1)) == int(decision.group(1)) == int(decision.group(2)) == last

    def test_last_flag_passes_every_stage(self, tmp_path, ecg_compiled):
        for path in emit_vhdl(ecg_compiled.netlist, tmp_path):
            if path.name in ("top.vhd", "tb_top.vhd"):
                continue
            text = path.read_text(encoding="utf-8")
            assert "out_last <= in_last;" in text, path.name
            assert "in_valid and in_last" not in text, path.name

    def test_byte_identical_reruns(self, tmp_path, rng):
        netlist = compile_network(tiny_network(rng)).netlist
        first = emit_vhdl(netlist, tmp_path / "a")
        second = emit_vhdl(netlist, tmp_path / "b")
        assert [p.read_bytes() for p in first] == [p.read_bytes() for p in second]

    def test_no_vendor_primitives(self, tmp_path, ecg_compiled):
        for path in emit_vhdl(ecg_compiled.netlist, tmp_path):
            text = path.read_text(encoding="utf-8")
            assert vendor_references(text) == [], path.name
            assert "use ieee.std_logic_1164.all;" in text

    def test_denylist(self):
        assert vendor_references("library UNISIM;\nuse unisim.vcomponents.all;") == ["unisim", "vcomponents"]

    def test_unnamed_port(self, tmp_path, rng):
        netlist = compile_network(tiny_network(rng)).netlist
        with pytest.raises(StructureError):
            emit_vhdl(dataclasses.replace(netlist, input=InputPort("", 4)), tmp_path)

    def test_identifier_clash(self, tmp_path, rng):
        netlist = compile_network(tiny_network(rng)).netlist
        stages = tuple(dataclasses.replace(s, id="split1_alpha") if s.name == "pool1" else s for s in netlist.stages)
        with pytest.raises(StructureError, match="split1_alpha"):
            emit_vhdl(dataclasses.replace(netlist, stages=stages), tmp_path)


class TestReport:
    def test_ecg_network(self, ecg_network, ecg_compiled):
        report = emit_report(ecg_network, ecg_compiled.netlist, window_length=5250)
        assert report.cost.total == 1867
        assert report.pipeline_depth == 14
        assert report.cycles == 5264
        assert len(report.split_configs) == 4
        assert report.network_score > 0
        assert report.pools == ["pool1", "pool2", "pool3", "pool4"]

    def test_empty_network(self):
        report = emit_report(NetworkSpec(phase="deployment"))
        assert report.cost.total == 0
        assert report.blocks == [] and report.cycles is None

    def test_write(self, tmp_path, rng):
        compiled = compile_network(tiny_network(rng))
        verification = verify_equivalence(compiled.spec, compiled.netlist, 5, window_length=24)
        report = emit_report(compiled.spec, compiled.netlist, verification, window_length=24)
        doc = json.loads(write_report(report, tmp_path / "report.json").read_text(encoding="utf-8"))
        assert doc["verification"]["passed"] is True
        assert doc["cost"]["total"] == report.cost.total
        assert isinstance(doc["split_configs"][0]["clc"], str)
        assert doc["split_configs"][0]["cfg"] == list(report.split_configs[0].tuple_form)
