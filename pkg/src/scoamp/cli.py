"""Command-line driver: ``scoamp {run,se,diag,version}``."""

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .harness import (DESK_PRESET, ConfigError, ExperimentConfig, best_results, emit_csv,
                      gaussianity_report, run_sweep, se_trajectories, write_metadata,
                      write_rows)

log = logging.getLogger("scoamp")

SE_COLUMNS = ("L", "W", "N", "M", "delta", "overall_rate", "iteration", "section", "v_b",
              "converged_at")
DIAG_COLUMNS = ("L", "W", "N", "M", "delta", "t", "section", "n_c", "samples",
                "excess_kurtosis", "skewness", "corr", "empirical_var", "se_v_ab", "rel_gap")

# command-line flag -> ExperimentConfig field, for scalar overrides
_SCALARS = {"L": int, "W": int, "N": int, "kappa": float, "rho": float, "snr_db": float,
            "T": int, "trials": int, "seed": int, "chunk_size": int, "workers": int,
            "se_max_iter": int}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment file (default: desk preset)")
    common.add_argument("--delta", type=float, nargs="+", help="compression rates M/N")
    common.add_argument("--zeta", type=float, nargs="+", help="damping grid")
    common.add_argument("--out", help="CSV path (default: stdout)")
    common.add_argument("--ensemble", choices=("structured", "haar"))
    common.add_argument("--uncoupled", action="store_true", help="force L=1, W=0")
    common.add_argument("--random-signs", action="store_true", default=None,
                        help="random sign flips in the Hadamard factor")
    for name, kind in _SCALARS.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="scoamp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="Monte-Carlo sweep over delta and zeta")
    run.add_argument("--compare", action="store_true",
                     help="also sweep the uncoupled system (L=1, W=0) into the same CSV")
    sub.add_parser("se", parents=[common], help="state evolution only")
    diag = sub.add_parser("diag", parents=[common], help="Gaussianity report of h_t")
    diag.add_argument("--checkpoints", type=int, nargs="+")
    sub.add_parser("version", help="print the package version")
    return p


def build_config(args):
    """Preset or ``--config`` file, then command-line overrides."""
    base = ExperimentConfig.from_file(args.config) if args.config else DESK_PRESET
    data = base.to_dict()
    for name in _SCALARS:
        if getattr(args, name, None) is not None:
            data[name] = getattr(args, name)
    if args.delta:
        data["deltas"] = tuple(args.delta)
    if args.zeta:
        data["zetas"] = tuple(args.zeta)
    if args.ensemble:
        data["ensemble"] = args.ensemble
    if args.random_signs:
        data["random_signs"] = True
    if args.out:
        data["out"] = args.out
    if getattr(args, "checkpoints", None):
        data["checkpoints"] = tuple(args.checkpoints)
    if args.uncoupled:
        data.update(L=1, W=0)
    return ExperimentConfig.from_dict(data)


def _progress(done, total):
    log.info("chunk %d/%d", done, total)


def _cmd_run(cfg, args, out):
    results = run_sweep(cfg, _progress)
    if args.compare and not (cfg.L == 1 and cfg.W == 0):
        results += run_sweep(cfg.uncoupled(), _progress)
    emit_csv(results, out, cfg)
    for r in best_results(results):
        log.info("L=%d W=%d delta=%.4g zeta=%.3g largest MSE %.2f dB (SE %.2f dB), failed %d",
                 r.L, r.W, r.delta, r.zeta, 10 * np.log10(r.largest_mse_mean),
                 10 * np.log10(r.se_largest_mse), r.failed)


def _cmd_se(cfg, args, out):
    rows = []
    for delta, coupling, traj in se_trajectories(cfg):
        head = dict(L=cfg.L, W=cfg.W, N=cfg.N, M=coupling.M, delta=delta,
                    overall_rate=coupling.overall_rate, converged_at=traj.converged_at)
        for t, v in enumerate(traj.v_b):
            rows.extend({**head, "iteration": t, "section": l, "v_b": float(x)}
                        for l, x in enumerate(v))
        if not traj.converged:
            log.warning("delta=%g: no fixed point within %d iterations", delta, cfg.se_max_iter)
    write_rows(rows, out, SE_COLUMNS)
    write_metadata(out, cfg)


def _cmd_diag(cfg, args, out):
    rows = []
    for delta in cfg.deltas:
        coupling = cfg.coupling(delta)
        head = dict(L=cfg.L, W=cfg.W, N=cfg.N, M=coupling.M, delta=delta)
        rows.extend({**head, **r} for r in gaussianity_report(cfg, delta=delta))
    write_rows(rows, out, DIAG_COLUMNS)
    write_metadata(out, cfg)


_COMMANDS = {"run": _cmd_run, "se": _cmd_se, "diag": _cmd_diag}


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = build_config(args)
        out = cfg.out or sys.stdout
        _COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"scoamp: configuration error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # reader went away (e.g. piped into head); stay quiet like other filters
        sys.stderr.close()
        return 0
    except OSError as exc:
        print(f"scoamp: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
