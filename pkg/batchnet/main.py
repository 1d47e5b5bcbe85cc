"""Command line for batchnet: inspect, capacity, bound, verify, simulate, sweep."""

import argparse
import logging
import math
import sys
from collections.abc import Mapping, Sequence
from typing import Any

from .bounds import BoundReport, applicable_bound, regime_curve
from .channels import channel_summary
from .composition import BatchNetwork, end_to_end
from .config import override
from .errors import (
    BatchNetError,
    BoundPreconditionError,
    ConsistencyError,
    DegenerateDecompositionError,
    ValidationError,
)
from .evaluator import (
    check_decomposition,
    check_witness,
    display_decomposition,
    display_witness,
)
from .export import format_number, write_csv, write_json, write_matrix_csv
from .infotheory import NATS_PER_BIT, blahut_arimoto
from .montecarlo import SWEEP_COLUMNS, simulate, summarize, sweep
from .parser import RunConfig, dump_config, load_config
from .recoding import scheme_buffer_bits

logger = logging.getLogger(__name__)

BOUND_COLUMNS = ("regime", "L", "N", "M", "K", "eps", "bound_nats", "log_bound")
# Columns in nats whose names do not say so.
_NATS_COLUMNS = {"mi_stderr"}
INSPECT_COLUMNS = (
    "link",
    "capacity_nats",
    "epsilon_q",
    "canonical_output",
    "canonical_eps",
    "erasure_probability",
)
CAPACITY_COLUMNS = (
    "L",
    "N",
    "M",
    "capacity_nats_per_use",
    "gap_bound_nats",
    "iterations",
    "buffer_bits",
)


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser."""
    parser = argparse.ArgumentParser(
        prog="batchnet",
        description="Capacity, converse bounds and simulation of batched codes "
        "on line networks",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    helps = {
        "inspect": "channel parameters of every link",
        "capacity": "exact end-to-end batch capacity C_L",
        "bound": "converse bound for the configured network",
        "verify": "check the bottleneck decomposition and the collapse witness",
        "simulate": "Monte-Carlo run of the configured network",
        "sweep": "Monte-Carlo runs over simulation.lengths with bounds",
    }
    for name, text in helps.items():
        sub = subparsers.add_parser(name, help=text)
        sub.add_argument("--config", required=True, help="JSON run configuration")
        sub.add_argument("--out", help="write CSV or JSON results to this path")
        sub.add_argument("--format", choices=("csv", "json"), help="output format")
        sub.add_argument("--units", choices=("nats", "bits"), default="nats")
        sub.add_argument("--seed", type=int, help="override the configured seed")
        sub.add_argument("--tol", type=float, help="Blahut-Arimoto tolerance")
        if name == "capacity":
            sub.add_argument("--matrix", help="write the end-to-end matrix W_L as CSV")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point for the application."""
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        cfg = load_config(args.config)
        changes: dict[str, Any] = {}
        if cfg.max_matrix_entries is not None:
            changes["max_matrix_entries"] = cfg.max_matrix_entries
        if args.tol is not None:
            changes["capacity_tol"] = args.tol
        with override(**changes):
            return COMMANDS[args.command](cfg, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConsistencyError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return 2
    except BatchNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _scale(value: float, units: str) -> float:
    return value / NATS_PER_BIT if units == "bits" else value


def _in_units(row: Mapping[str, Any], units: str) -> dict[str, Any]:
    """Convert every *_nats column (and log_bound) to the requested units."""
    if units == "nats":
        return dict(row)
    converted: dict[str, Any] = {}
    for key, value in row.items():
        if ("nats" in key or key in _NATS_COLUMNS) and isinstance(value, float):
            converted[key.replace("nats", "bits")] = value / NATS_PER_BIT
        elif key == "log_bound":
            converted[key] = value - math.log(NATS_PER_BIT)
        else:
            converted[key] = value
    return converted


def _columns(columns: Sequence[str], units: str) -> list[str]:
    if units == "nats":
        return list(columns)
    return [c.replace("nats", "bits") for c in columns]


def _emit(
    args: argparse.Namespace,
    rows: list[dict[str, Any]],
    columns: Sequence[str],
    extra: Mapping[str, Any] | None = None,
) -> None:
    if not args.out:
        return
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "json")
    rows = [_in_units(row, args.units) for row in rows]
    if fmt == "csv":
        write_csv(rows, _columns(columns, args.units), args.out)
    else:
        write_json({**(extra or {}), "units": args.units, "rows": rows}, args.out)
    print(f"\nWrote {len(rows)} rows to {args.out}")


def run_inspect(cfg: RunConfig, args: argparse.Namespace) -> int:
    net = cfg.network()
    units = args.units
    rows = []
    seen: list[int] = []
    print(f"Loaded a line network of {net.length} links")
    _print_buffer(net)
    for position, link in enumerate(net.links, start=1):
        if id(link) in seen:
            continue
        seen.append(id(link))
        summary = channel_summary(link)
        capacity = blahut_arimoto(link).capacity_nats
        print(f"\nLink {position}:")
        print(f"  inputs:  {', '.join(link.input_alphabet)}")
        print(f"  outputs: {', '.join(link.output_alphabet)}")
        print(f"  capacity = {format_number(_scale(capacity, units))} {units}")
        print(f"  eps_Q = {format_number(summary['epsilon_q'])}")
        if summary["canonical_output"] is not None:
            print(
                f"  canonical output {summary['canonical_output']!r} with eps "
                f"{format_number(summary['canonical_eps'])}"
            )
        else:
            print("  no canonical output")
        if summary["erasure_probability"] is not None:
            print(
                "  packet erasure channel, erasure probability "
                f"{format_number(summary['erasure_probability'])}"
            )
        rows.append(
            {
                "link": position,
                "capacity_nats": capacity,
                "epsilon_q": summary["epsilon_q"],
                "canonical_output": summary["canonical_output"],
                "canonical_eps": summary["canonical_eps"],
                "erasure_probability": summary["erasure_probability"],
            }
        )
    _emit(args, rows, INSPECT_COLUMNS, {"config": dump_config(cfg)})
    return 0


def run_capacity(cfg: RunConfig, args: argparse.Namespace) -> int:
    net = cfg.network()
    units = args.units
    print(
        f"Composing {net.length} links "
        f"(N={net.inner_blocklength}, M={net.batch_size})"
    )
    channel = end_to_end(net)
    _print_buffer(net)
    result = blahut_arimoto(channel, tol=args.tol)
    rate = result.capacity_nats / net.inner_blocklength
    print(f"\nC_L = {format_number(_scale(rate, units))} {units} per channel use")
    print(f"  iterations: {result.iterations}")
    print(f"  gap bound: {format_number(result.gap_bound)} nats")
    if not result.converged:
        print("  ⚠️  Blahut-Arimoto did not converge")
    rows = [
        {
            "L": net.length,
            "N": net.inner_blocklength,
            "M": net.batch_size,
            "capacity_nats_per_use": rate,
            "gap_bound_nats": result.gap_bound,
            "iterations": result.iterations,
            "buffer_bits": scheme_buffer_bits(net.scheme),
        }
    ]
    if args.matrix:
        write_matrix_csv(channel, args.matrix)
        shape = f"{channel.num_inputs} x {channel.num_outputs}"
        print(f"\nWrote the {shape} matrix to {args.matrix}")
    _emit(
        args,
        rows,
        CAPACITY_COLUMNS,
        {"config": dump_config(cfg), "optimizer": result.optimizer.as_dict()},
    )
    return 0


def _print_buffer(net: BatchNetwork) -> None:
    bits = scheme_buffer_bits(net.scheme)
    if bits is None:
        print("  buffer: no state-machine nodes")
    else:
        print(f"  buffer B = {format_number(bits)} bits per node")


def run_bound(cfg: RunConfig, args: argparse.Namespace) -> int:
    net = cfg.network()
    section = cfg.bound
    report = applicable_bound(net, section.regime, section.group_size)
    _print_bound(report, args.units)
    reports = [report]
    if section.lengths:
        reports = regime_curve(
            report.regime,
            section.lengths,
            report.params.eps,
            batch_size=section.batch_schedule or net.batch_size,
            inner_blocklength=(
                section.blocklength_schedule or net.inner_blocklength
            ),
            group_size=section.group_size,
            batch_alphabet_size=net.batch_alphabet.size,
            input_alphabet_size=net.input_alphabet.size,
            output_alphabet_size=net.output_alphabet.size,
        )
        print(f"\nEvaluated the {report.regime} bound at {len(reports)} lengths")
    rows = [r.as_row() for r in reports]
    _emit(args, rows, BOUND_COLUMNS, {"config": dump_config(cfg)})
    return 0


def _print_bound(report: BoundReport, units: str) -> None:
    p = report.params
    print(f"Regime: {report.regime}")
    print(f"  L={p.length} N={p.inner_blocklength} M={p.batch_size} K={p.group_size}")
    print(f"  eps = {format_number(p.eps)}")
    if report.y0 is not None:
        print(f"  collapse outputs: {', '.join(report.y0)}")
    value = _scale(report.value_nats, units)
    print(f"  bound = {format_number(value)} {units} per channel use")


def run_verify(cfg: RunConfig, args: argparse.Namespace) -> int:
    net = cfg.network()
    seed = cfg.simulation.seed if args.seed is None else args.seed
    ok, ran = True, 0
    row: dict[str, Any] = {}
    try:
        decomposition = check_decomposition(net, samples=100, seed=seed)
    except DegenerateDecompositionError as exc:
        print(f"Bottleneck decomposition skipped: {exc}")
    else:
        display_decomposition(decomposition, args.units)
        ok, ran = decomposition.ok, ran + 1
        row.update(
            {
                "p0": decomposition.p0,
                "max_w0_information_nats": decomposition.max_w0_information,
                "reconstruction_error": decomposition.reconstruction_error,
                "decomposition_ok": decomposition.ok,
            }
        )
    if net.scheme.is_deterministic:
        witness = check_witness(net, cfg.bound.group_size)
        display_witness(witness)
        ok, ran = ok and witness.ok, ran + 1
        row.update(
            {
                "witness_set_sizes": "-".join(str(s) for s in witness.set_sizes),
                "witness_probability": witness.probability,
                "witness_lower_bound": witness.probability_lower_bound,
                "witness_ok": witness.ok,
            }
        )
    else:
        print("\nCollapse witness skipped: the scheme is not deterministic")
    if not ran:
        raise BoundPreconditionError("nothing to verify for this network")
    _emit(args, [row], list(row), {"config": dump_config(cfg)})
    if not ok:
        print("\n❌ verification failed")
        return 2
    print("\n✅ All checks passed!")
    return 0


def run_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    sim = cfg.sim_config(args.seed)
    net = sim.network()
    print(f"Simulating {sim.trials} trials over {sim.length} links...")
    report = simulate(sim, net)
    units = args.units
    mi = _scale(report.mi_nats_per_use, units)
    stderr = _scale(report.mi_stderr / sim.inner_blocklength, units)
    print(f"  delivery fraction: {format_number(report.delivery_fraction)}")
    print(f"  I(X;Y)/N = {format_number(mi)} ± {format_number(stderr)} {units}")
    print(f"  elapsed: {report.elapsed:.2f}s")
    row = summarize(report, net, cfg.bound.regime, cfg.bound.group_size)
    _emit(
        args,
        [row.as_row()],
        SWEEP_COLUMNS,
        {
            "config": sim.to_dict(),
            "delivery_fraction": report.delivery_fraction,
            "empirical_matrix": report.empirical_rows(
                net.output_alphabet.power(net.inner_blocklength)
            ),
        },
    )
    return 0


def run_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    sim = cfg.sim_config(args.seed)
    lengths = cfg.simulation.lengths or (cfg.length,)
    print(f"Sweeping {len(lengths)} lengths with {sim.trials} trials each...")
    rows = sweep(sim, lengths, cfg.bound.regime, cfg.bound.group_size)
    units = args.units
    for row in rows:
        print(
            f"  L={row.length:<5d} I/N = "
            f"{format_number(_scale(row.mi_nats_per_use, units))} "
            f"bound = {format_number(_scale(row.bound_nats_per_use, units))} {units}"
        )
    _emit(args, [r.as_row() for r in rows], SWEEP_COLUMNS, {"config": sim.to_dict()})
    return 0


COMMANDS = {
    "inspect": run_inspect,
    "capacity": run_capacity,
    "bound": run_bound,
    "verify": run_verify,
    "simulate": run_simulate,
    "sweep": run_sweep,
}


if __name__ == "__main__":
    sys.exit(main())
