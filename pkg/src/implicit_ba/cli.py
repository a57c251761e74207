"""``implicit-ba`` command line: run one trial, sweep sizes, or verify the committee statistics."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from .adversary import STRATEGIES, max_faults
from .engine import INPUT_MODES, MODES, PROFILES, run_trial
from .errors import ConfigError
from .experiment import ExperimentConfig, run_sweep, summarize, write_csv
from . import stats

OUTPUT_ENV = "IMPLICIT_BA_OUTPUT_DIR"


def _output_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output or os.environ.get(OUTPUT_ENV) or "out")


def _add_common(p: argparse.ArgumentParser, multi_n: bool) -> None:
    if multi_n:
        p.add_argument("--n", type=int, nargs="+", default=[256, 1024, 4096], help="network sizes")
        p.add_argument("--trials", type=int, default=10)
    else:
        p.add_argument("--n", type=int, default=256, help="network size")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--f", type=int, default=None, help="corrupt nodes (default: floor((1/2 - eps) n))")
    p.add_argument("--c", type=float, default=None, help="committee constant (overrides --profile)")
    p.add_argument("--profile", choices=PROFILES, default="paper")
    p.add_argument("--mode", choices=MODES, default="implicit")
    p.add_argument("--adversary", default="silent", help=f"one of {', '.join(sorted(STRATEGIES))}")
    p.add_argument("--adversary-seed", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="trial seed (base seed for sweeps)")
    p.add_argument("--inputs", choices=INPUT_MODES, default="unanimous")
    p.add_argument("--input-value", type=int, default=5)
    p.add_argument("--value-domain", type=int, default=16)
    p.add_argument("--word-factor", type=int, default=8)
    p.add_argument("--output", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./out)")
    p.add_argument("--config", default=None, help="JSON config file; its keys override flags")


def _experiment(args: argparse.Namespace, multi_n: bool) -> ExperimentConfig:
    cfg = ExperimentConfig(
        n=list(args.n) if multi_n else [args.n],
        eps=args.eps,
        f=args.f,
        c=args.c,
        profile=args.profile,
        mode=args.mode,
        adversary=args.adversary,
        adversary_seed=args.adversary_seed,
        trials=getattr(args, "trials", 1),
        seed=args.seed,
        inputs=args.inputs,
        input_value=args.input_value,
        value_domain=args.value_domain,
        word_factor=args.word_factor,
        output=args.output,
        trace=getattr(args, "trace", None),
    )
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        override = ExperimentConfig.from_json(text)
        given = json.loads(text)
        cfg = replace(cfg, **{k: getattr(override, k) for k in given})
    cfg.validate()
    return cfg


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _experiment(args, multi_n=False)
    if len(cfg.n) != 1:
        raise ConfigError("run takes a single n")
    trial = cfg.trial(cfg.n[0], cfg.seed)
    out = _output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.trace:
        with open(cfg.trace, "w") as fh:
            report = run_trial(trial, trace=fh)
    else:
        report = run_trial(trial)
    name = f"report_n{trial.n}_{trial.mode}_{trial.adversary}_s{trial.seed}.json"
    path = out / name
    path.write_text(report.to_json() + "\n")
    v = report.verdict or {}
    ok = v.get("consistency") and v.get("validity") and v.get("termination") and v.get("implicit_states")
    decided = sorted(report.decided_values)
    print(
        f"n={report.n} |C|={report.committee_size} corrupt_in_C={report.corrupt_in_committee} "
        f"messages={report.honest_messages} rounds={report.rounds} decided={decided} "
        f"verdict={'ok' if ok else 'VIOLATION'} -> {path}"
    )
    return 0 if ok else 1


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _experiment(args, multi_n=True)
    out = _output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    csv_text = write_csv(run_sweep(cfg))
    summary = summarize(csv_text)
    summary["config"] = asdict(cfg)
    (out / "sweep.csv").write_text(csv_text)
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    for row in summary["per_n"]:
        print(
            f"n={row['n']:<6} trials={row['trials']:<4} mean_messages={row['mean_messages']:.1f} "
            f"mean_rounds={row['mean_rounds']:.1f} violations={row['consistency_violations']}/"
            f"{row['validity_violations']}/{row['termination_failures']}"
        )
    if summary["beta"] is not None:
        print(f"beta={summary['beta']:.3f} beta_rounds={summary['beta_rounds']:.3f}")
    for note in summary["notices"]:
        print(f"notice: {note}")
    for warn in summary["warnings"]:
        print(f"warning: {warn}", file=sys.stderr)
    print(f"csv sha256 {summary['csv_sha256']} -> {out / 'sweep.csv'}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    if args.trials < 1 or args.leader_trials < 1:
        raise ConfigError("trial counts must be positive")
    results = []
    for n in args.n:
        f = max_faults(n, args.eps) if args.f is None else args.f
        if not 0 <= f <= max_faults(n, args.eps):
            raise ConfigError(f"f={f} exceeds floor((1/2 - eps) n) for n={n}")
        results.append(stats.honest_majority_suite(n, args.eps, args.trials, args.seed, profile="paper", f=f))
        results.append(
            stats.honest_majority_suite(n, args.eps, args.trials, args.seed, profile="desk", f=f, threshold=0.95)
        )
        results.append(stats.referee_coverage_suite(n, args.eps, args.trials, args.seed, profile="desk", f=f))
    n_lead = max(args.n)
    f_lead = max_faults(n_lead, args.eps) if args.f is None else args.f
    leader, messages = stats.leader_suite(n_lead, f_lead, args.leader_trials, args.seed, args.eps)
    results.append(leader)
    lines = [r.line() for r in results]
    lines.append(f"{'PASS' if messages == 0 else 'FAIL'}  leader-election messages      total={messages}")
    print("\n".join(lines))
    ok = all(r.passed for r in results) and messages == 0
    out = Path(args.output or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "suites": [dict(asdict(r), rate=r.rate, passed=r.passed) for r in results],
        "leader_messages": messages,
        "passed": ok,
    }
    (out / "verify.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="implicit-ba", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one trial and write its JSON report")
    _add_common(p_run, multi_n=False)
    p_run.add_argument("--trace", default=None, help="write a JSONL fragment trace here")
    p_run.set_defaults(func=cmd_run)
    p_sweep = sub.add_parser("sweep", help="run trials over several n; write CSV and summary")
    _add_common(p_sweep, multi_n=True)
    p_sweep.set_defaults(func=cmd_sweep)
    p_verify = sub.add_parser("verify", help="committee honest-majority, referee coverage, leader honesty")
    p_verify.add_argument("--n", type=int, nargs="+", default=[256, 1024])
    p_verify.add_argument("--eps", type=float, default=0.1)
    p_verify.add_argument("--f", type=int, default=None)
    p_verify.add_argument("--trials", type=int, default=500)
    p_verify.add_argument("--leader-trials", type=int, default=10_000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--output", default=None)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"implicit-ba: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
