"""``seqdet`` command line.

Exit codes: 0 success, 1 a verification check failed or a numerical/runtime
failure (for example "truncation dominates"), 2 invalid config or arguments,
3 file I/O failure.  The seed is taken from ``--seed``, then the
``SEQDET_SEED`` environment variable, then the config file.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import io, kl, reproduce as repro, verify as ver
from .channels import BSC
from .config import build_experiment, load_config
from .detection import Hypothesis
from .sim import ConfigError, calibrate_thresholds, default_workers, prepare, run_trials, summarize, \
    sweep_operating_characteristic

EPILOG = """\
exit codes: 0 ok, 1 verification or runtime failure, 2 bad config or arguments, 3 I/O error.
overrides use dotted keys, e.g. --override fusion.mode=conventional-bsc --override channel.snr_db=-5
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"seqdet: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _common(p, config_required=True):
    p.add_argument("--config", required=config_required, help="YAML experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (fallback: $SEQDET_SEED, then config)")
    p.add_argument("--trials", type=int, default=None, help="override the number of trials")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--override", action="append", default=[], metavar="K=V", help="dotted config override")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="seqdet", description="Channel-aware decentralized sequential detection toolkit.",
                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("simulate", help="Monte Carlo run; writes summary.csv and trials.csv"))
    p = sub.add_parser("sweep", help="operating characteristic over a target-error grid")
    _common(p)
    p.add_argument("--alphas", default="1e-1,1e-2,1e-3,1e-4", help="comma-separated target errors")
    p = sub.add_parser("analyze", help="KL grids and, with --config, per-sensor KL report")
    _common(p, config_required=False)
    p.add_argument("--full", action="store_true", help="denser grids")
    p = sub.add_parser("calibrate", help="search fusion thresholds meeting the target errors")
    _common(p)
    p = sub.add_parser("verify", help="run invariant suites; nonzero exit on any failure")
    _common(p, config_required=False)
    p.add_argument("--check", action="append", default=[], choices=ver.FAMILIES + tuple(ver.ALIASES),
                   help="run only this family (repeatable)")
    p.add_argument("--fault-epsilon", type=float, default=None,
                   help="negative control: transmit over BSC(eps) while fusing with the labelled channel")
    p = sub.add_parser("reproduce", help="regenerate a figure's data as CSV")
    p.add_argument("figure", help=", ".join(repro.FIGURES))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--full", action="store_true", help="denser grids and more trials")
    return ap


def _seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SEQDET_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SEQDET_SEED={env!r} is not an integer") from None
    return None


def _load(args):
    if args.config is None:
        exp, hyps = build_experiment({}, _seed(args))
    else:
        exp, hyps = load_config(args.config, args.override, _seed(args))
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        exp = exp.replace(trials=args.trials)
    return exp, hyps


def _workers(args) -> int:
    w = args.workers if args.workers is not None else default_workers()
    if w < 1:
        raise ConfigError("--workers must be >= 1")
    return w


def _outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    exp, hyps = _load(args)
    workers = _workers(args)
    prep = prepare(exp)
    summaries, trials = [], []
    for h in hyps:
        res = run_trials(prep, h, exp.trials, workers)
        summaries.append(summarize(res, prep, h))
        trials += res
    out = _outdir(args.out)
    io.write_csv(os.path.join(out, "summary.csv"), io.SUMMARY_HEADER, io.summary_rows(summaries))
    io.write_csv(os.path.join(out, "trials.csv"), io.trial_header(len(exp.sensors)), io.trial_rows(trials))
    for s in summaries:
        print(f"{s.hypothesis.name} {s.mode} {s.channel}: error={s.error_rate:.6g}±{s.error_se:.2g} "
              f"delay={s.mean_delay:.6g}±{s.delay_se:.2g} truncated={s.truncation_rate:.3g}")
    return 0


def cmd_sweep(args) -> int:
    exp, hyps = _load(args)
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError:
        raise ConfigError(f"--alphas {args.alphas!r} is not a comma-separated list of numbers") from None
    if not alphas or not all(0 < a < 1 for a in alphas):
        raise ConfigError("--alphas must list values in (0, 1)")
    workers = _workers(args)
    pts = sweep_operating_characteristic(prepare(exp), alpha_grid=alphas, trials=exp.trials, workers=workers,
                                         hypotheses=hyps)
    header = ["threshold_up", "threshold_down"] + io.SUMMARY_HEADER
    rows = []
    for p in pts:
        for s in (p.h0, p.h1):
            if s is not None:
                rows.append([p.threshold_up, p.threshold_down] + io.summary_rows([s])[0])
    io.write_csv(os.path.join(_outdir(args.out), "sweep.csv"), header, rows)
    print(f"{len(pts)} grid points written")
    return 0


def kl_report_rows(exp, trials: int = 100_000) -> list[list]:
    prep = prepare(exp)
    rows = []
    for k, link in enumerate(prep.links):
        rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(k, 17)))
        s = exp.sensors[k].with_error_probs(link.alpha_k, link.beta_k)
        r = kl.kl_report(s, link.channel, link.signaling, trials, rng)
        for i, h in enumerate(("H1", "H0")):
            rows.append([k, h, link.channel.name, r.observed_I[i], r.transmitted_I_hat[i], r.received_I_tilde[i],
                         r.per_obs_I[i], r.ratio_hat[i], r.ratio_tilde[i], r.penalty_C[i], r.mean_intersample[i]])
    return rows


KL_REPORT_HEADER = ["sensor", "hypothesis", "channel", "observed_I", "transmitted_I_hat", "received_I_tilde",
                    "per_obs_I", "ratio_hat", "ratio_tilde", "penalty_C", "mean_intersample"]


def cmd_analyze(args) -> int:
    exp = _load(args)[0] if args.config is not None else None
    out = _outdir(args.out)
    for fig in ("fig2", "fig4", "fig5", "fig6"):
        for name, (header, rows) in repro.reproduce(fig, full=args.full, seed=exp.seed if exp else 0).items():
            io.write_csv(os.path.join(out, name), header, rows)
    if exp is not None:
        io.write_csv(os.path.join(out, "kl_report.csv"), KL_REPORT_HEADER, kl_report_rows(exp))
    print(f"analysis grids written to {out}")
    return 0


def cmd_calibrate(args) -> int:
    exp, _ = _load(args)
    c = calibrate_thresholds(prepare(exp), exp.target_alpha, exp.target_beta, exp.trials, _workers(args))
    io.write_csv(os.path.join(_outdir(args.out), "calibration.csv"),
                 ["target_alpha", "target_beta", "threshold_up", "threshold_down", "achieved_alpha",
                  "achieved_beta", "theta", "log_alpha_bound", "log_beta_bound"],
                 [[exp.target_alpha, exp.target_beta, c.threshold_up, c.threshold_down, c.achieved_alpha,
                   c.achieved_beta, c.theta, abs(math.log(exp.target_alpha)), abs(math.log(exp.target_beta))]])
    print(f"A~={c.threshold_up:.6g} B~={c.threshold_down:.6g} (alpha={c.achieved_alpha:.3g}, beta={c.achieved_beta:.3g})")
    return 0


def cmd_verify(args) -> int:
    exp, _ = _load(args)
    families = tuple(dict.fromkeys(args.check)) or ver.FAMILIES
    actual = None
    if args.fault_epsilon is not None:
        try:
            actual = [BSC(args.fault_epsilon)] * len(exp.sensors)
        except ValueError as exc:
            raise ConfigError(f"--fault-epsilon: {exc}") from None
    results = ver.run_checks(exp, families, exp.trials, _workers(args), exp.seed, actual)
    io.write_csv(os.path.join(_outdir(args.out), "verify.csv"), ver.HEADER, ver.as_rows(results))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.family}/{r.name} value={r.value:.6g} "
              f"reference={r.reference:.6g} tol={r.tolerance:.3g}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_reproduce(args) -> int:
    if args.figure not in repro.FIGURES:
        raise ConfigError(f"unknown figure {args.figure!r}; expected one of {', '.join(repro.FIGURES)}")
    seed = _seed(args)
    tables = repro.reproduce(args.figure, full=args.full, seed=seed if seed is not None else 0,
                             workers=_workers(args), trials=args.trials)
    out = _outdir(args.out)
    for name, (header, rows) in tables.items():
        io.write_csv(os.path.join(out, name), header, rows)
        print(f"wrote {os.path.join(out, name)}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "analyze": cmd_analyze, "calibrate": cmd_calibrate,
            "verify": cmd_verify, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"seqdet: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"seqdet: I/O error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"seqdet: invalid value: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"seqdet: runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
