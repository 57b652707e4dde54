"""Command line entry point: ``spikenorm {generate-data,run,analyze,replay}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis, evolution
from .config import CONFIG_ECHO_NAME, ConfigError, load_config, write_echo
from .dynamics import SimulationError, TraceRecorder, run_sequence
from .normalization import POLICY_NAMES
from .stimulus import export_dataset, make_dataset

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SIMULATION = 4
EXIT_DATA = 5

log = logging.getLogger("spikenorm")


def _policies(values: list[str] | None) -> list[str] | None:
    if not values:
        return None
    names: list[str] = []
    for v in values:
        names.extend(POLICY_NAMES if v == "all" else v.split(","))
    bad = [n for n in names if n not in POLICY_NAMES]
    if bad:
        raise ConfigError(f"unknown policy {', '.join(bad)}; choose from {', '.join(POLICY_NAMES)} or 'all'")
    return list(dict.fromkeys(names))


def cmd_generate_data(args) -> int:
    sequences = make_dataset(args.inputs, args.frames, args.seed)
    manifest = export_dataset(args.out, sequences, args.seed)
    print(f"wrote {len(sequences)} sequences; manifest {manifest}")
    return EXIT_OK


def cmd_run(args) -> int:
    policies = _policies(args.policy)
    cfg = load_config(
        args.config,
        scale=args.scale,
        seed=args.seed,
        repeats=args.repeats,
        generations=args.generations,
        population=args.population,
        output_dir=args.out,
        workers=args.workers,
        fixed_data=True if args.fixed_data else None,
        policy=policies[0] if policies and len(policies) == 1 else None,
    )
    out_dir = Path(cfg.output_dir)
    write_echo(cfg, out_dir)
    for policy in policies or [cfg.policy]:
        result = evolution.run_experiment(cfg, policy, out_dir)
        best = max(r.purity for r in result.rows if r.generation == max(x.generation for x in result.rows))
        print(f"{policy}: {len(result.rows)} log rows, best final purity {best:.3f} -> {out_dir / f'log_{policy}.csv'}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = []
    for path in args.logs:
        rows.extend(evolution.read_log(path))
    if not rows:
        raise ValueError("logs contain no rows")
    written = analysis.write_analysis(rows, args.out, sample=args.sample, method=args.method, plots=args.plots)
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    run_dir = Path(args.run_dir)
    cfg = load_config(run_dir / CONFIG_ECHO_NAME)
    ckpt = evolution.checkpoint_path(run_dir, args.policy, args.repeat, args.generation)
    population, policy, repeat = evolution.load_checkpoint(ckpt, cfg)
    exp = evolution.Experiment(cfg, policy)

    if args.spike_trace or args.membrane_trace:
        ind = next((i for i in population.individuals if i.id == args.individual), None)
        if ind is None:
            raise ValueError(f"no individual {args.individual} in {ckpt}")
        with _maybe_open(args.spike_trace) as sf, _maybe_open(args.membrane_trace) as mf:
            recorder = TraceRecorder(population.topology, sf, mf)
            run_sequence(ind.network, exp.test_set(repeat, population.generation), plasticity_on=False,
                         recorder=recorder)

    rows = exp.run_repeat(repeat, start=population)
    out = Path(args.out) if args.out else run_dir / f"replay_{policy}_r{repeat:02d}_g{population.generation:03d}.csv"
    evolution.write_log(out, rows)
    original = run_dir / f"log_{policy}.csv"
    if original.exists():
        expected = [r for r in evolution.read_log(original)
                    if r.repeat == repeat and r.generation >= population.generation]
        status = "identical" if expected == evolution.read_log(out) else "DIFFERENT"
        print(f"replay of generations {population.generation}..end is {status} to {original}")
        if status != "identical":
            return EXIT_SIMULATION
    print(f"wrote {out}")
    return EXIT_OK


class _maybe_open:
    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path:
            self.fh = open(self.path, "w", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh:
            self.fh.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikenorm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate-data", help="write moving-shape stimuli as plain PBM bitmaps plus a manifest")
    p.add_argument("--inputs", type=int, default=80)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("run", help="run the evolutionary experiment for one or more policies")
    p.add_argument("--config", help="JSON config file (missing keys take defaults)")
    p.add_argument("--policy", action="append", help=f"one of {', '.join(POLICY_NAMES)}, comma list, or 'all'")
    p.add_argument("--scale", choices=("full", "desk"))
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--fixed-data", action="store_true", help="reuse generation-0 stimuli in every generation")
    p.add_argument("--out", help="output directory (default $SPIKENORM_OUTPUT_DIR or ./runs)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="summarise experiment logs and test for significance")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--sample", choices=("best", "mean"), default="best",
                   help="per-repeat fitness sample fed to the tests")
    p.add_argument("--method", choices=("chi2", "permutation"), default="chi2")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("replay", help="re-simulate a run from a generation checkpoint")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--policy", required=True, choices=POLICY_NAMES)
    p.add_argument("--repeat", type=int, default=0)
    p.add_argument("--generation", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--individual", type=int, default=0, help="individual traced with --spike-trace/--membrane-trace")
    p.add_argument("--spike-trace", help="CSV of (iteration, layer, neuron, spiked) for the traced test evaluation")
    p.add_argument("--membrane-trace", help="CSV of (iteration, layer, neuron, v) for the traced test evaluation")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except (OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
