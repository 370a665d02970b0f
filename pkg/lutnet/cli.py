"""
lutnet command line.

    lutnet validate MODEL
    lutnet cost MODEL [--out cost.json]
    lutnet search --filter 12,6,12 [--architecture mitbih_af] [--phi-max 12] [--budget-luts 8000] ...
    lutnet compile MODEL --out build/
    lutnet simulate build/ samples.txt
    lutnet verify MODEL [--count 1000] [--seed 0]
    lutnet emit MODEL --out hdl/

Exit status: 0 success, 2 usage, 3 model parse error, 4 structure or state error (and invalid networks
in `validate`), 5 capacity error, 6 numeric or input error, 7 verification mismatch, 1 anything else.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, NonNegativeInt, PositiveInt, ValidationError

from lutnet.architectures import architecture_cost, load_architecture
from lutnet.config_search import KernelOrder, ScoredConfig, find_filter_pairs, rank_configs
from lutnet.cost_model import network_cost
from lutnet.emit import emit_report, emit_vhdl, write_report
from lutnet.errors import DomainError, InputRangeError, LutnetError
from lutnet.ir import ConvParams, NetworkSpec, QuantizedInputConv, load_model, receptive_field, save_model, validate_network
from lutnet.netlist import compile_network, load_netlist, save_netlist, simulate_netlist, verify_equivalence
from lutnet.transform import reorder_for_deployment
from utils.config import load_compiler_defaults, normalize_params
from utils.functions.helper import H

LOGGER = logging.getLogger("lutnet")

VERIFICATION_FAILED = 7
INVALID_NETWORK = 4

Subcommand = Literal["validate", "cost", "search", "compile", "simulate", "verify", "emit"]


class CommandConfig(BaseModel):
    subcommand: Subcommand
    model: Optional[Path] = None
    netlist: Optional[Path] = None
    data: Optional[Path] = None
    out: Optional[Path] = None
    filters: list[ConvParams] = []
    kernel_orders: tuple[KernelOrder, ...] = (KernelOrder.K0_FIRST, KernelOrder.K0_LAST)
    architecture: Optional[str] = None
    phi_max: PositiveInt = 12
    budget_luts: Optional[PositiveInt] = None
    top: Optional[PositiveInt] = None
    score_threshold: Optional[float] = None
    k_lut: PositiveInt = 6
    input_bits: Optional[PositiveInt] = None
    fan_in_cap: PositiveInt = 20
    seed: NonNegativeInt = 0
    count: NonNegativeInt = 1000
    window_length: Optional[PositiveInt] = None
    n_jobs: int = 1
    verbose: bool = False


def _filter_arg(text: str) -> ConvParams:
    try:
        c, k, f = (int(v) for v in text.split(","))
        return ConvParams(c=c, k=k, g=1, f=f)
    except (ValueError, ValidationError):
        raise argparse.ArgumentTypeError(f"expected c,k,f with positive integers, got {text!r}")


def build_arg_parser() -> argparse.ArgumentParser:
    defaults = load_compiler_defaults()

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k-lut", type=int, default=defaults.k_lut, help=H("cli.k_lut"))
    common.add_argument("--verbose", action="store_true", help=H("cli.verbose"))

    compiling = argparse.ArgumentParser(add_help=False)
    compiling.add_argument("--input-bits", type=int, default=None, help=H("cli.input_bits"))
    compiling.add_argument("--fan-in-cap", type=int, default=defaults.fan_in_cap, help=H("cli.fan_in_cap"))
    compiling.add_argument("--n-jobs", type=int, default=defaults.n_jobs, help=H("cli.n_jobs"))

    checking = argparse.ArgumentParser(add_help=False)
    checking.add_argument("--count", type=int, default=defaults.verify_count, help=H("cli.count"))
    checking.add_argument("--seed", type=int, default=defaults.seed, help=H("cli.seed"))
    checking.add_argument("--window-length", type=int, default=defaults.window_length, help=H("cli.window_length"))

    p = argparse.ArgumentParser(prog="lutnet", description=H("cli.description"))
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("validate", parents=[common], help=H("cli.validate"))
    s.add_argument("model", type=Path, help=H("cli.model"))

    s = sub.add_parser("cost", parents=[common], help=H("cli.cost"))
    s.add_argument("model", type=Path, help=H("cli.model"))
    s.add_argument("--input-bits", type=int, default=None, help=H("cli.input_bits"))
    s.add_argument("--out", type=Path, default=None, help=H("cli.out"))

    s = sub.add_parser("search", parents=[common], help=H("cli.search"))
    s.add_argument("--filter", dest="filters", type=_filter_arg, action="append", required=True, help=H("cli.filter"))
    s.add_argument("--kernel-orders", choices=["both", "k0_first", "k0_last"], default="both",
                   help=H("cli.kernel_orders"))
    s.add_argument("--phi-max", type=int, default=defaults.phi_max, help=H("cli.phi_max"))
    s.add_argument("--budget-luts", type=int, default=defaults.budget_luts, help=H("cli.budget_luts"))
    s.add_argument("--top", type=int, default=defaults.top, help=H("cli.top"))
    s.add_argument("--score-threshold", type=float, default=None, help=H("cli.score_threshold"))
    s.add_argument("--architecture", type=str, default=None, help=H("cli.architecture"))
    s.add_argument("--input-bits", type=int, default=None, help=H("cli.input_bits"))
    s.add_argument("--out", type=Path, default=None, help=H("cli.out"))

    s = sub.add_parser("compile", parents=[common, compiling], help=H("cli.compile"))
    s.add_argument("model", type=Path, help=H("cli.model"))
    s.add_argument("--out", type=Path, required=True, help=H("cli.out"))

    s = sub.add_parser("simulate", parents=[common], help=H("cli.simulate"))
    s.add_argument("netlist", type=Path, help="netlist.json or the output directory of `compile`")
    s.add_argument("data", type=Path, help="one integer sample per line")
    s.add_argument("--n-jobs", type=int, default=defaults.n_jobs, help=H("cli.n_jobs"))
    s.add_argument("--out", type=Path, default=None, help=H("cli.out"))

    s = sub.add_parser("verify", parents=[common, compiling, checking], help=H("cli.verify"))
    s.add_argument("model", type=Path, help=H("cli.model"))
    s.add_argument("--out", type=Path, default=None, help=H("cli.out"))

    s = sub.add_parser("emit", parents=[common, compiling, checking], help=H("cli.emit"))
    s.add_argument("model", type=Path, help=H("cli.model"))
    s.add_argument("--out", type=Path, required=True, help=H("cli.out"))

    return p


def _configure_logging(verbose: bool) -> None:
    lvl = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=lvl, format="%(levelname)s: %(message)s")


def _config_from_args(args: argparse.Namespace) -> CommandConfig:
    values = {k: v for k, v in vars(args).items() if v is not None}
    if "kernel_orders" in values:
        values["kernel_orders"] = KernelOrder.parse(values["kernel_orders"])
    return CommandConfig(**values)


def _load(config: CommandConfig) -> NetworkSpec:
    spec = load_model(config.model)
    if config.input_bits is None:
        return spec
    layers = tuple(
        layer.model_copy(update={"input_bits": config.input_bits}) if isinstance(layer, QuantizedInputConv) else layer
        for layer in spec.layers
    )
    return spec.model_copy(update={"layers": layers})


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    LOGGER.info("wrote %s", path)


def cmd_validate(config: CommandConfig) -> int:
    violations = validate_network(load_model(config.model))
    if not violations:
        print(f"{config.model}: valid")
        return 0
    for v in violations:
        print(v)
    return INVALID_NETWORK


def cmd_cost(config: CommandConfig) -> int:
    spec = _load(config)
    if spec.phase == "training":
        LOGGER.info("reordering %s to deployment order", config.model)
        spec = reorder_for_deployment(spec)
    report = network_cost(spec, config.k_lut)
    table = pd.DataFrame([item.model_dump() for item in report.per_layer], columns=["name", "kind", "fan_in", "outputs", "luts"])
    print(table.to_string(index=False))
    print(f"total: {report.total} LUTs (k_lut={report.k_lut}; {report.note})")
    if config.out:
        _write_json(config.out, report.model_dump(mode="json"))
    return 0


def _ranked_table(ranked: list[ScoredConfig]) -> pd.DataFrame:
    rows = [
        {
            "tuple_form": "(" + ",".join(map(str, s.tuple_form)) + ")",
            "phi_alpha": s.phi_alpha,
            "phi_beta": s.phi_beta,
            "clc": str(s.clc),
            "score": round(s.score, 3),
            "block_luts": s.block_cost,
            "network_luts": s.network_cost,
        }
        for s in ranked
    ]
    return pd.DataFrame(rows, columns=["tuple_form", "phi_alpha", "phi_beta", "clc", "score", "block_luts", "network_luts"])


def cmd_search(config: CommandConfig) -> int:
    template = load_architecture(config.architecture) if config.architecture else None
    results = []
    for dense in config.filters:
        network_cost_of = None
        if template is not None:
            if dense.c != dense.f or dense.k != template.hidden_kernel:
                raise DomainError(
                    f"filter {dense.as_tuple()} is not a hidden filter of {template.name} "
                    f"(needs c = f and k = {template.hidden_kernel})",
                    module="cli",
                )

            def network_cost_of(cfg, template=template):
                return architecture_cost(template, cfg, k_lut=config.k_lut, input_bits=config.input_bits)

        configs = find_filter_pairs(dense, config.phi_max, config.kernel_orders)
        LOGGER.info("filter (c=%d, k=%d, f=%d): %d split configurations", dense.c, dense.k, dense.f, len(configs))
        ranked = rank_configs(configs, cost_budget=config.budget_luts, top_n=config.top,
                              threshold=config.score_threshold, k_lut=config.k_lut, network_cost_of=network_cost_of)
        print(f"# filter c={dense.c} k={dense.k} f={dense.f}: {len(ranked)} of {len(configs)} configurations")
        if ranked:
            print(_ranked_table(ranked).to_string(index=False))
        results.append({"filter": {"c": dense.c, "k": dense.k, "f": dense.f},
                        "configs": [s.model_dump(mode="json") for s in ranked]})
    if config.out:
        _write_json(config.out, {
            "phi_max": config.phi_max,
            "k_lut": config.k_lut,
            "budget_luts": config.budget_luts,
            "score_threshold": config.score_threshold,
            "top": config.top,
            "kernel_orders": [o.value for o in config.kernel_orders],
            "architecture": config.architecture,
            "score": "CLC^2 * phi_alpha * phi_beta / ln(C_alpha + C_beta)^2",
            "results": results,
        })
    return 0


def cmd_compile(config: CommandConfig) -> int:
    compiled = compile_network(_load(config), config.k_lut, config.fan_in_cap, config.n_jobs)
    out = config.out
    for table in compiled.tables:
        table.save(out / "tables")
    save_netlist(compiled.netlist, out / "netlist.json")
    save_model(compiled.spec, out / "model.deployment.json")
    LOGGER.info("wrote %d tables and the netlist to %s", len(compiled.tables), out)
    print(f"{compiled.netlist.pipeline_depth} stages, {compiled.netlist.lut_count} LUT nodes, "
          f"receptive field {receptive_field(compiled.spec)} samples")
    return 0


def read_windows(path: Path) -> list[np.ndarray]:
    """One integer per line; blank lines separate windows."""
    windows, current = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.strip()
        if not text:
            if current:
                windows.append(np.array(current, dtype=np.int64))
                current = []
            continue
        try:
            current.append(int(text))
        except ValueError:
            raise InputRangeError(f"{path}:{lineno}: {text!r} is not an integer sample", module="cli")
    if current:
        windows.append(np.array(current, dtype=np.int64))
    return windows


def cmd_simulate(config: CommandConfig) -> int:
    path = config.netlist / "netlist.json" if config.netlist.is_dir() else config.netlist
    netlist = load_netlist(path)
    windows = read_windows(config.data)
    results = []
    for i, window in enumerate(windows):
        result = simulate_netlist(netlist, window)
        print(f"window {i}: decision {int(result.decision)} after {result.cycles} cycles")
        results.append({"window": i, "samples": int(window.shape[0]), "decision": int(result.decision),
                        "cycles": result.cycles, "decision_cycle": result.decision_cycle,
                        "outputs": result.outputs.tolist()})
    if config.out:
        _write_json(config.out, normalize_params({"netlist": str(path), "windows": results}))
    return 0


def _window_length(config: CommandConfig, spec: NetworkSpec) -> int:
    return max(config.window_length or 1, receptive_field(spec))


def cmd_verify(config: CommandConfig) -> int:
    spec = _load(config)
    compiled = compile_network(spec, config.k_lut, config.fan_in_cap, config.n_jobs)
    report = verify_equivalence(compiled.spec, compiled.netlist, config.count,
                                _window_length(config, compiled.spec), config.seed)
    doc = report.model_dump(mode="json")
    print(json.dumps(doc, indent=2))
    if config.out:
        _write_json(config.out, doc)
    return 0 if report.passed else VERIFICATION_FAILED


def cmd_emit(config: CommandConfig) -> int:
    compiled = compile_network(_load(config), config.k_lut, config.fan_in_cap, config.n_jobs)
    length = _window_length(config, compiled.spec)
    verification = None
    if config.count:
        verification = verify_equivalence(compiled.spec, compiled.netlist, config.count, length, config.seed)
    emit_vhdl(compiled.netlist, config.out, window_length=length)
    report = emit_report(compiled.spec, compiled.netlist, verification, length, k_lut=config.k_lut)
    write_report(report, config.out / "report.json")
    print(f"total {report.cost.total} LUTs, depth {report.pipeline_depth}, {report.cycles} cycles for {length} samples")
    if verification is not None and not verification.passed:
        LOGGER.error("verification found %d mismatching windows", verification.mismatches)
        return VERIFICATION_FAILED
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "cost": cmd_cost,
    "search": cmd_search,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "emit": cmd_emit,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_arg_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.verbose)

    try:
        config = _config_from_args(args)
    except ValidationError as e:
        first = e.errors()[0]
        print(f"cli: usage error: --{str(first['loc'][0]).replace('_', '-')}: {first['msg']}", file=sys.stderr)
        return 2

    try:
        return COMMANDS[config.subcommand](config)
    except LutnetError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"cli: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
