"""
VHDL-93 emission for a compiled netlist and the compilation report.

Each precomputed block becomes one entity with a shift register for its kernel history and one
constant truth table per output bit; each pool stage becomes an OR/AND reduction entity with a stride
counter; `top.vhd` chains them behind a valid/ready sample stream. Only ieee.std_logic_1164 and
ieee.numeric_std are used.
"""

import json
import logging
import re
from pathlib import Path

from pydantic import BaseModel

from lutnet.config_search import ScoredConfig, network_score, score_config
from lutnet.cost_model import DEFAULT_K_LUT, CostReport, network_cost
from lutnet.errors import StructureError
from lutnet.ir import NetworkSpec
from lutnet.netlist import BlockStage, LutNetlist, PoolNode, VerificationReport
from utils.config import normalize_params

LOGGER = logging.getLogger(__name__)

TABLE_CHUNK = 64
VENDOR_DENYLIST = ("unisim", "unimacro", "vcomponents", "xilinx", "altera", "intel_fpga", "lattice", "ecp5",
                   "ice40", "gowin", "microsemi", "dsp48", "lut6", "ramb")
_RESERVED = {"abs", "and", "begin", "block", "end", "entity", "in", "inout", "is", "not", "or", "out", "port",
             "process", "signal", "top", "xor", "clk", "rst"}


def sanitize_id(name: str) -> str:
    """VHDL basic identifier for a stage name ("split1.alpha" -> "split1_alpha")."""
    ident = re.sub(r"_+", "_", re.sub(r"[^A-Za-z0-9]", "_", name)).strip("_")
    if not ident:
        raise StructureError(f"cannot derive an identifier from {name!r}", module="emit")
    if ident[0].isdigit() or ident.lower() in _RESERVED:
        ident = f"s_{ident}"
    return ident


def _libraries() -> list[str]:
    return ["library ieee;", "use ieee.std_logic_1164.all;", "use ieee.numeric_std.all;", ""]


def _header(text: str) -> list[str]:
    return [f"-- {text}", "-- generated by lutnet, do not edit", ""]


def _port_block(ports: list[tuple[str, str, str]]) -> list[str]:
    lines = ["  port ("]
    for i, (name, direction, kind) in enumerate(ports):
        sep = ";" if i < len(ports) - 1 else ""
        lines.append(f"    {name:<9} : {direction:<3} {kind}{sep}")
    lines.append("  );")
    return lines


def _vector(width: int) -> str:
    return f"std_logic_vector({width - 1} downto 0)"


def _stream_ports(in_width: int, out_width: int) -> list[tuple[str, str, str]]:
    return [
        ("clk", "in", "std_logic"),
        ("rst", "in", "std_logic"),
        ("in_valid", "in", "std_logic"),
        ("in_last", "in", "std_logic"),
        ("in_data", "in", _vector(in_width)),
        ("out_valid", "out", "std_logic"),
        ("out_last", "out", "std_logic"),
        ("out_data", "out", _vector(out_width)),
    ]


def table_literal(bits) -> list[str]:
    """Bit string of a truth table column, index 0 first, split into concatenated chunks."""
    text = "".join("1" if b else "0" for b in bits)
    chunks = [text[i:i + TABLE_CHUNK] for i in range(0, len(text), TABLE_CHUNK)]
    return [f'"{chunk}"' for chunk in chunks]


def _history(depth: int, width: int) -> list[str]:
    if depth == 0:
        return []
    return [
        f"  type hist_t is array (0 to {depth - 1}) of {_vector(width)};",
        "  signal hist : hist_t := (others => (others => '0'));",
    ]


def _shift(depth: int) -> list[str]:
    if depth == 0:
        return []
    lines = []
    if depth > 1:
        lines.append(f"          hist(0 to {depth - 2}) <= hist(1 to {depth - 1});")
    lines.append(f"          hist({depth - 1}) <= in_data;")
    return lines


def _tap(bit: int, tap: int, depth: int) -> str:
    """Input word bit at window tap `tap` (0 oldest); the newest tap is the current input."""
    return f"in_data({bit})" if tap == depth else f"hist({tap})({bit})"


def block_entity(stage: BlockStage) -> str:
    ident = sanitize_id(stage.name)
    conv = stage.conv
    depth = conv.k - 1
    width = conv.c * stage.input_bits
    table = stage.truth_table()

    lines = _header(f"{stage.kind} block {stage.name}: phi={stage.phi}, m={stage.m}, k={conv.k}, "
                    f"groups={conv.g}, {stage.lut_count} LUT nodes")
    lines += _libraries()
    lines += [f"entity {ident} is"] + _port_block(_stream_ports(width, stage.m)) + [f"end entity {ident};", ""]
    lines += [f"architecture rtl of {ident} is"]
    lines += _history(depth, width)
    if depth:
        lines.append(f"  signal fill : integer range 0 to {depth} := 0;")
    for o in range(stage.m):
        literal = table_literal(table.column(o))
        lines.append(f"  constant TABLE_{o} : std_logic_vector(0 to {(1 << stage.phi) - 1}) :=")
        lines += [f"    {chunk} &" for chunk in literal[:-1]] + [f"    {literal[-1]};"]
        lines.append(f"  signal addr_{o} : {_vector(stage.phi)};")
    lines += ["begin", ""]

    for o in range(stage.m):
        group = stage.group_of(o)
        lines.append(f"  -- output {o}, group {group}")
        for t in range(conv.k):
            for i in range(conv.s_in):
                for j in range(stage.input_bits):
                    window_bit = (t * conv.s_in + i) * stage.input_bits + j
                    word_bit = (group * conv.s_in + i) * stage.input_bits + j
                    lines.append(f"  addr_{o}({window_bit}) <= {_tap(word_bit, t, depth)};")
        lines.append("")

    lines += [
        "  process (clk)",
        "  begin",
        "    if rising_edge(clk) then",
        "      if rst = '1' then",
        "        out_valid <= '0';",
        "        out_last <= '0';",
    ]
    if depth:
        lines.append("        fill <= 0;")
    lines += [
        "      else",
        "        out_valid <= '0';",
        "        out_last <= in_last;",
        "        if in_valid = '1' then",
    ]
    lines += _shift(depth)
    indent = "          "
    if depth:
        lines += [f"          if fill = {depth} then"]
        indent = "            "
    lines.append(f"{indent}out_valid <= '1';")
    for o in range(stage.m):
        lines.append(f"{indent}out_data({o}) <= TABLE_{o}(to_integer(unsigned(addr_{o})));")
    if depth:
        lines += ["          else", "            fill <= fill + 1;", "          end if;"]
    lines += [
        "        end if;",
        "      end if;",
        "    end if;",
        "  end process;",
        "",
        "end architecture rtl;",
    ]
    return "\n".join(lines) + "\n"


def pool_entity(pool: PoolNode) -> str:
    ident = sanitize_id(pool.id)
    depth = pool.kernel - 1
    width = pool.channels

    lines = _header(f"pool {pool.id}: kernel={pool.kernel}, stride={pool.stride}, modes={''.join(m[0] for m in pool.modes)}")
    lines += _libraries()
    lines += [f"entity {ident} is"] + _port_block(_stream_ports(width, width)) + [f"end entity {ident};", ""]
    lines += [f"architecture rtl of {ident} is"]
    lines += _history(depth, width)
    lines += [
        f"  signal seen : integer range 0 to {depth} := 0;",
        f"  signal skip : integer range 0 to {pool.stride - 1} := 0;",
        f"  signal reduced : {_vector(width)};",
        "begin",
        "",
    ]
    for ch, mode in enumerate(pool.modes):
        op = " and " if mode == "AND" else " or "
        terms = [_tap(ch, t, depth) for t in range(pool.kernel)]
        lines.append(f"  reduced({ch}) <= {op.join(terms)};")
    lines += [
        "",
        "  process (clk)",
        "  begin",
        "    if rising_edge(clk) then",
        "      if rst = '1' then",
        "        out_valid <= '0';",
        "        out_last <= '0';",
        "        seen <= 0;",
        "        skip <= 0;",
        "      else",
        "        out_valid <= '0';",
        "        out_last <= in_last;",
        "        if in_valid = '1' then",
    ]
    lines += _shift(depth)
    lines += [
        f"          if seen < {depth} then",
        "            seen <= seen + 1;",
        "          else",
        "            if skip = 0 then",
        "              out_valid <= '1';",
        "              out_data <= reduced;",
        "            end if;",
        f"            if skip = {pool.stride - 1} then",
        "              skip <= 0;",
        "            else",
        "              skip <= skip + 1;",
        "            end if;",
        "          end if;",
        "        end if;",
        "      end if;",
        "    end if;",
        "  end process;",
        "",
        "end architecture rtl;",
    ]
    return "\n".join(lines) + "\n"


def _stage_width(stage) -> tuple[int, int]:
    if isinstance(stage, PoolNode):
        return stage.channels, stage.channels
    return stage.conv.c * stage.input_bits, stage.m


def top_entity(netlist: LutNetlist) -> str:
    in_bits = netlist.input.bits
    lines = _header(f"top level {netlist.name}: {netlist.pipeline_depth} pipeline stages, {netlist.lut_count} LUT nodes")
    lines += _libraries()
    lines += ["entity top is"] + _port_block([
        ("clk", "in", "std_logic"),
        ("rst", "in", "std_logic"),
        ("s_valid", "in", "std_logic"),
        ("s_ready", "out", "std_logic"),
        (netlist.input.name, "in", _vector(in_bits)),
        ("s_last", "in", "std_logic"),
        (netlist.output.name, "out", "std_logic"),
        ("done", "out", "std_logic"),
    ]) + ["end entity top;", "", "architecture rtl of top is"]

    for n, stage in enumerate(netlist.stages):
        _, out_width = _stage_width(stage)
        lines += [
            f"  signal v{n}, l{n} : std_logic;",
            f"  signal d{n} : {_vector(out_width)};",
        ]
    last = netlist.pipeline_depth - 1
    lines += ["  signal decision_q : std_logic := '0';", "begin", "", "  s_ready <= '1';", ""]

    for n, stage in enumerate(netlist.stages):
        ident = sanitize_id(stage.name)
        if n == 0:
            valid, flag, data = "s_valid", "s_last", netlist.input.name
        else:
            valid, flag, data = f"v{n - 1}", f"l{n - 1}", f"d{n - 1}"
        lines += [
            f"  u{n}_{ident} : entity work.{ident}",
            "    port map (",
            "      clk => clk,",
            "      rst => rst,",
            f"      in_valid => {valid},",
            f"      in_last => {flag},",
            f"      in_data => {data},",
            f"      out_valid => v{n},",
            f"      out_last => l{n},",
            f"      out_data => d{n}",
            "    );",
            "",
        ]
    lines += [
        "  -- holds the output bit of the last completed time step",
        "  process (clk)",
        "  begin",
        "    if rising_edge(clk) then",
        "      if rst = '1' then",
        "        decision_q <= '0';",
        f"      elsif v{last} = '1' then",
        f"        decision_q <= d{last}(0);",
        "      end if;",
        "    end if;",
        "  end process;",
        "",
        f"  {netlist.output.name} <= d{last}(0) when v{last} = '1' else decision_q;",
        f"  done <= l{last};",
        "",
        "end architecture rtl;",
    ]
    return "\n".join(lines) + "\n"


def testbench(netlist: LutNetlist, window_length: int) -> str:
    in_bits = netlist.input.bits
    lines = _header(f"testbench skeleton: streams {window_length} zero samples, replace with recorded data")
    lines += _libraries()
    lines += [
        "entity tb_top is",
        "end entity tb_top;",
        "",
        "architecture sim of tb_top is",
        "  signal clk : std_logic := '0';",
        "  signal rst : std_logic := '1';",
        "  signal s_valid, s_ready, s_last, decision, done : std_logic := '0';",
        f"  signal s_data : {_vector(in_bits)} := (others => '0');",
        "begin",
        "",
        "  clk <= not clk after 5 ns;",
        "",
        "  dut : entity work.top",
        "    port map (clk => clk, rst => rst, s_valid => s_valid, s_ready => s_ready,",
        f"              {netlist.input.name} => s_data, s_last => s_last,",
        f"              {netlist.output.name} => decision, done => done);",
        "",
        "  stimulus : process",
        "  begin",
        "    wait until rising_edge(clk);",
        "    rst <= '0';",
        f"    for i in 0 to {window_length - 1} loop",
        "      s_valid <= '1';",
        f"      s_data <= std_logic_vector(to_signed(0, {in_bits}));",
        f"      if i = {window_length - 1} then",
        "        s_last <= '1';",
        "      end if;",
        "      wait until rising_edge(clk);",
        "    end loop;",
        "    s_valid <= '0';",
        "    s_last <= '0';",
        "    wait until done = '1';",
        "    report \"decision = \" & std_logic'image(decision);",
        "    wait;",
        "  end process;",
        "",
        "end architecture sim;",
    ]
    return "\n".join(lines) + "\n"


def vendor_references(text: str) -> list[str]:
    lowered = text.lower()
    return [word for word in VENDOR_DENYLIST if word in lowered]


def emit_vhdl(netlist: LutNetlist, out_dir, window_length: int | None = None) -> list[Path]:
    """
    Write `<stage-id>.vhd` per block and pool, `top.vhd` and `tb_top.vhd`.

    Raises
    ------
    StructureError
        If a port or stage has no name, or two stage names map to the same identifier.
    """
    if not netlist.input.name or not netlist.output.name:
        raise StructureError("netlist ports must be named", module="emit")
    idents = [sanitize_id(s.name) for s in netlist.stages]
    clashes = sorted({i for i in idents if idents.count(i) > 1})
    if clashes:
        raise StructureError(f"stage names collide after sanitizing: {', '.join(clashes)}", module="emit")

    files: dict[str, str] = {}
    for ident, stage in zip(idents, netlist.stages):
        files[f"{ident}.vhd"] = pool_entity(stage) if isinstance(stage, PoolNode) else block_entity(stage)
    files["top.vhd"] = top_entity(netlist)
    files["tb_top.vhd"] = testbench(netlist, window_length or 64)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(files):
        path = out_dir / name
        path.write_text(files[name], encoding="utf-8", newline="\n")
        paths.append(path)
    LOGGER.info("wrote %d VHDL files to %s", len(paths), out_dir)
    return paths


class BlockSummary(BaseModel):
    name: str
    kind: str
    phi: int
    m: int
    lut_nodes: int


class CompilationReport(BaseModel):
    k_lut: int = DEFAULT_K_LUT
    cost: CostReport
    blocks: list[BlockSummary] = []
    pools: list[str] = []
    split_configs: list[ScoredConfig] = []
    network_score: float = 0.0
    pipeline_depth: int = 0
    window_length: int | None = None
    cycles: int | None = None
    verification: VerificationReport | None = None


def emit_report(
    spec: NetworkSpec,
    netlist: LutNetlist | None = None,
    verification: VerificationReport | None = None,
    window_length: int | None = None,
    scored: list[ScoredConfig] | None = None,
    k_lut: int = DEFAULT_K_LUT,
) -> CompilationReport:
    """Collect analytic costs, scores, pipeline depth, cycle estimate and verification status."""
    blocks = []
    pools = []
    depth = 0
    cycles = None
    if netlist is not None:
        blocks = [BlockSummary(name=s.name, kind=s.kind, phi=s.phi, m=s.m, lut_nodes=s.lut_count)
                  for s in netlist.blocks()]
        pools = [p.id for p in netlist.pools()]
        depth = netlist.pipeline_depth
        if window_length is not None:
            cycles = netlist.estimated_cycles(window_length)
    if scored is None:
        scored = [score_config(b.config, k_lut) for b in spec.split_blocks()]
    return CompilationReport(
        k_lut=k_lut,
        cost=network_cost(spec, k_lut),
        blocks=blocks,
        pools=pools,
        split_configs=scored,
        network_score=network_score(spec, k_lut),
        pipeline_depth=depth,
        window_length=window_length,
        cycles=cycles,
        verification=verification,
    )


def write_report(report: CompilationReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = normalize_params(report.model_dump(mode="json"))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
