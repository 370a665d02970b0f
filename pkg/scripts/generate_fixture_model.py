"""
Write a seeded random model of an architecture template, e.g.

    uv run python scripts/generate_fixture_model.py --hidden 12,6,12,12,1,1,12 --out model.json

The weights are random: the file exercises the compiler, it is not a trained classifier.
"""
import argparse
import logging

import numpy as np

from lutnet.architectures import build_network, load_architecture
from lutnet.cost_model import network_cost
from lutnet.ir import SplitConfig, save_model

LOGGER = logging.getLogger("generate_fixture_model")


def _config(text: str) -> SplitConfig:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected seven comma separated integers, got {text!r}")
    if len(values) != 7:
        raise argparse.ArgumentTypeError(f"expected seven comma separated integers, got {text!r}")
    return SplitConfig.from_tuple(values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--architecture", default="mitbih_af", help="template name or YAML path")
    parser.add_argument("--hidden", type=_config, default=_config("6,6,6,6,1,1,6"),
                        help="hidden split configuration c,k_alpha,g_alpha,f_alpha,k_beta,g_beta,f")
    parser.add_argument("--first", type=_config, default=None,
                        help="first split configuration (default: depthwise separable)")
    parser.add_argument("--phase", choices=["training", "deployment"], default="training")
    parser.add_argument("--input-bits", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    template = load_architecture(args.architecture)
    spec = build_network(template, args.hidden, args.first, phase=args.phase,
                         rng=np.random.default_rng(args.seed), input_bits=args.input_bits)
    path = save_model(spec, args.out)
    deployment = spec if spec.phase == "deployment" else build_network(
        template, args.hidden, args.first, input_bits=args.input_bits)
    LOGGER.info("wrote %s (%d layers, %d analytic LUTs)", path, len(spec.layers), network_cost(deployment).total)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
