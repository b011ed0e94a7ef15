"""alcc-bench command line: experiments, bounds, share files and reproductions."""

import argparse
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pyarrow as pa

from alcc import accuracy, privacy
from alcc.core import AlccParams, ShareSet, decode, encode, evaluate_shares, sample_noise
from alcc.lcc import FieldParams, FieldShareSet, lcc_encode, lcc_eval_and_decode, quantize
from alcc.selftest import run_selftest
from alcc.simulator import AXES, ExperimentConfig, relative_error, results_table, run_experiment, sweep
from alcc_utils import (
    ConfigError,
    debug,
    get_out_dir,
    get_threads,
    load_config,
    load_matrices,
    load_nodes,
    save_json,
    save_matrices,
    save_table,
    validate_environment,
    write_manifest,
)

COMMANDS = ("encode", "decode", "run", "sweep", "privacy-bounds", "accuracy-bounds",
            "compare-lcc", "selftest", "reproduce")

COMPARE_M_PRIME = [2_000, 5_000, 10_000, 20_000, 40_000, 60_000, 80_000, 100_000]
COMPARE_P_BITS = [25, 26, 28]
COMPARE_BETAS = [1.5, 2.0]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def parse_values(text: str) -> list[float]:
    """'1.1,1.5,2' or 'start:stop:step' (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"values: cannot parse {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--out", help="output directory (default: $ALCC_OUT_DIR or results)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    common.add_argument("--quiet", action="store_true")

    parser = _Parser(prog="alcc-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("encode", parents=[common], help="encode a generated batch into share files")
    sub.add_parser("decode", parents=[common], help="evaluate and decode share files")
    sub.add_parser("run", parents=[common], help="run one experiment")
    p = sub.add_parser("sweep", parents=[common], help="run an experiment per axis value")
    p.add_argument("--axis", required=True, choices=["m_prime", "beta", "sigma_n", "b", "p"])
    p.add_argument("--values", required=True)
    p = sub.add_parser("privacy-bounds", parents=[common], help="MIS / DS privacy bounds")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta-sweep")
    g.add_argument("--sigma-sweep")
    p.add_argument("--samples", type=int, help="sample this many colluding sets instead of enumerating")
    p = sub.add_parser("accuracy-bounds", parents=[common], help="ALCC and LCC accuracy bounds")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bits-sweep", default="12:256:4")
    g.add_argument("--beta-sweep")
    sub.add_parser("compare-lcc", parents=[common], help="paired LCC / ALCC m' sweep")
    sub.add_parser("selftest", parents=[common], help="closed-form sanity checks")
    p = sub.add_parser("reproduce", parents=[common], help="run the reproduction nodes")
    p.add_argument("--target", action="append", help="node name (repeatable)")
    return parser


def load_experiment(args) -> ExperimentConfig:
    """Config file, then --set, then --seed/--threads."""
    flat = load_config(args.config, args.set, allowed=ExperimentConfig.keys())
    if args.seed is not None:
        flat["seed"] = args.seed
    flat["threads"] = get_threads(args.threads if args.threads is not None else flat.get("threads"))
    try:
        return ExperimentConfig.from_flat(flat)
    except ValueError as e:
        raise ConfigError(str(e))


def emit(table: pa.Table, name: str, args, out_dir: Path):
    if args.fmt == "json":
        save_json(table.to_pylist(), name, out_dir)
    else:
        save_table(table, name, out_dir)


def cmd_encode(args, cfg: ExperimentConfig, out_dir: Path):
    rng = np.random.default_rng([cfg.seed, 0, 0])
    batch = cfg.data_spec.generate(rng)
    save_matrices("batch", batch.matrices, {"kind": "batch", "config": cfg.to_flat()}, out_dir)
    if cfg.protocol == "alcc":
        r = max(cfg.r, float(np.max(np.abs(batch.matrices))))
        params = cfg.alcc_params(r, cfg.seed)
        shares = encode(batch, params, sample_noise(params, rng))
        header = {"kind": "alcc_shares", "params": asdict(params), "params_fingerprint": shares.params_fingerprint,
                  "worker_indices": list(shares.indices)}
        save_matrices("shares", shares.shares, header, out_dir)
    else:
        field = cfg.field_params()
        shares = lcc_encode(quantize(batch, field), cfg.k, cfg.t, cfg.N, field, seed=cfg.seed)
        header = {"kind": "lcc_shares", "field": asdict(field), "worker_indices": list(shares.indices),
                  "N": shares.N, "r": float(np.max(np.abs(batch.matrices)))}
        save_matrices("shares", shares.shares, header, out_dir, word_bits=field.b)
    debug.echo(f"[encode] {len(shares)} shares written to {out_dir}")


def cmd_decode(args, cfg: ExperimentConfig, out_dir: Path):
    array, header = load_matrices("shares", out_dir)
    indices = tuple(header["worker_indices"])
    stragglers = set(cfg.straggler_spec.pick(len(indices), np.random.default_rng([cfg.seed, 0, 1])))
    returned = [i for i in indices if i not in stragglers]
    f = cfg.poly

    if header["kind"] == "alcc_shares":
        params = AlccParams(**header["params"])
        if params.fingerprint() != header["params_fingerprint"]:
            raise ValueError("shares file: parameter fingerprint does not match its parameters")
        shares = ShareSet(indices, array, header["params_fingerprint"])
        evals = evaluate_shares(shares, f, returned, threads=cfg.threads)
        decoded = decode(evals, params, use_all=cfg.use_all)
        outputs, extra = decoded.outputs, {"imag_residue_max": decoded.imag_residue_max}
    elif header["kind"] == "lcc_shares":
        field = FieldParams(**header["field"])
        shares = FieldShareSet(indices, array, field, header["N"]).subset(returned)
        decoded = lcc_eval_and_decode(shares, f, field, cfg.k, cfg.t, r=header.get("r"), threads=cfg.threads)
        outputs, extra = decoded.outputs, {"overflow_flag": bool(decoded.overflow_flag)}
    else:
        raise ValueError(f"shares file has unknown kind {header['kind']!r}")

    save_matrices("decoded", outputs, {"kind": "decoded", "worker_indices": returned}, out_dir)
    summary = {"returned": returned, "stragglers": sorted(stragglers), **extra}
    if (out_dir / "batch.json").exists():
        batch, _ = load_matrices("batch", out_dir)
        reference = np.stack([f(x) for x in batch])
        summary["e_rel"] = relative_error(outputs, reference)
        debug.echo(f"[decode] e_rel = {summary['e_rel']:.6g}")
    save_json(summary, "decode_summary", out_dir)


def cmd_run(args, cfg: ExperimentConfig, out_dir: Path):
    result = run_experiment(cfg)
    emit(results_table([result]), "run", args, out_dir)


def cmd_sweep(args, cfg: ExperimentConfig, out_dir: Path):
    if args.axis not in AXES[cfg.protocol]:
        raise ConfigError(f"axis {args.axis!r} not applicable to {cfg.protocol}; choose from {AXES[cfg.protocol]}")
    values = parse_values(args.values)
    results = sweep(cfg, args.axis, values)
    emit(results_table(results, args.axis), f"sweep_{args.axis}", args, out_dir)


def cmd_privacy(args, cfg: ExperimentConfig, out_dir: Path):
    params = cfg.alcc_params(cfg.r, cfg.seed)
    search = privacy.SearchMode("sampled", args.samples, cfg.seed) if args.samples else privacy.SearchMode()
    if args.sigma_sweep:
        axis, values = "sigma_n", parse_values(args.sigma_sweep)
        reports = privacy.sigma_sweep(params, values, search)
    else:
        axis, values = "beta", parse_values(args.beta_sweep) if args.beta_sweep else [params.beta]
        reports = privacy.beta_sweep(params, values, search)
    emit(privacy.reports_table(axis, values, reports), f"privacy_{axis}", args, out_dir)
    save_json([asdict(r) for r in reports], "privacy_reports", out_dir)


def cmd_accuracy(args, cfg: ExperimentConfig, out_dir: Path):
    params = cfg.alcc_params(cfg.r, cfg.seed)
    f = cfg.poly
    if args.beta_sweep:
        axis, values = "beta", parse_values(args.beta_sweep)
        reports = accuracy.beta_sweep(params, f, values)
    else:
        axis, values = "b", [int(v) for v in parse_values(args.bits_sweep)]
        reports = accuracy.bits_sweep(params, f, values)
    emit(accuracy.reports_table(axis, values, reports), f"accuracy_{axis}", args, out_dir)
    if axis == "b":
        b_star = next((r.b for r in reports
                       if r.alcc_upper_bound < min(r.lcc_lower_bound_case1, r.lcc_lower_bound_case2)), None)
        save_json({"crossover_bits": b_star}, "accuracy_crossover", out_dir)
        debug.echo(f"[bounds] ALCC bound below both LCC bounds from b = {b_star}")


def compare_lcc(cfg: ExperimentConfig, m_primes=COMPARE_M_PRIME, p_bits=COMPARE_P_BITS,
                betas=COMPARE_BETAS) -> pa.Table:
    """LCC m' sweep per prime size next to ALCC m' sweep per beta."""
    results = []
    for bits in p_bits:
        lcc_cfg = cfg.with_(protocol="lcc", p=None, p_bits=bits)
        results += sweep(lcc_cfg, "m_prime", m_primes)
    for beta in betas:
        results += sweep(cfg.with_(protocol="alcc", beta=beta), "m_prime", m_primes)
    return results_table(results, "m_prime")


def cmd_compare(args, cfg: ExperimentConfig, out_dir: Path):
    emit(compare_lcc(cfg), "compare_lcc", args, out_dir)


def cmd_selftest(args, cfg, out_dir) -> int:
    results = run_selftest()
    for r in results:
        debug.echo(f"  {'PASS' if r.passed else 'FAIL'} {r.name}" + (f": {r.detail}" if r.detail else ""))
    failed = [r for r in results if not r.passed]
    print(f"selftest: {len(results) - len(failed)}/{len(results)} passed")
    return 1 if failed else 0


def cmd_reproduce(args, cfg, out_dir) -> int:
    os.environ["ALCC_OUT_DIR"] = str(out_dir)
    dag = load_nodes().run(targets=args.target)
    return 1 if dag.failed else 0


HANDLERS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "privacy-bounds": cmd_privacy,
    "accuracy-bounds": cmd_accuracy,
    "compare-lcc": cmd_compare,
    "selftest": cmd_selftest,
    "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    """Exit codes: 0 success, 1 runtime error, 2 configuration error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise ConfigError(f"missing subcommand; choose from {', '.join(COMMANDS)}")
        debug.set_quiet(args.quiet)
        validate_environment()
        needs_config = args.command not in ("selftest", "reproduce")
        cfg = load_experiment(args) if needs_config else None
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else get_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    debug.log_run_start(args.command)
    try:
        code = HANDLERS[args.command](args, cfg, out_dir) or 0
        if cfg is not None:
            write_manifest(args.command, cfg.to_flat(), cfg.seed, out_dir,
                           extra={"argv": list(argv) if argv is not None else sys.argv[1:]})
    except ConfigError as e:
        debug.log_run_end(args.command, "failed", e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        debug.log_run_end(args.command, "failed", e)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    debug.log_run_end(args.command, "completed" if code == 0 else "failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
