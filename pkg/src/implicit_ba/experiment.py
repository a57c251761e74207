"""Experiment configuration, CSV rows and sweep summaries."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Optional

import numpy as np

from .adversary import get_strategy, max_faults
from .engine import INPUT_MODES, MODES, PROFILES, TrialConfig, TrialReport, run_trial
from .errors import ConfigError
from .stats import loglog_slope

CSV_COLUMNS = (
    "n", "eps", "f", "c", "mode", "adversary", "seed", "messages", "bits", "rounds", "iterations",
    "decided_value", "consistency", "validity", "termination", "committee_corrupt_frac", "referee_coverage_ok",
)

# sublinearity warning threshold on the fitted message exponent
BETA_WARN = 0.8


@dataclass
class ExperimentConfig:
    """Parameters of a run or sweep; a JSON file with these keys can stand in for flags."""

    n: list[int] = field(default_factory=lambda: [256])
    eps: float = 0.1
    f: Optional[int] = None
    c: Optional[float] = None
    profile: str = "paper"
    mode: str = "implicit"
    adversary: str = "silent"
    adversary_seed: Optional[int] = None
    trials: int = 1
    seed: int = 0
    inputs: str = "unanimous"
    input_value: int = 5
    value_domain: int = 16
    word_factor: int = 8
    output: Optional[str] = None
    trace: Optional[str] = None

    def validate(self) -> None:
        if not self.n:
            raise ConfigError("at least one n is required")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        for key, allowed in (("mode", MODES), ("profile", PROFILES), ("inputs", INPUT_MODES)):
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}")
        get_strategy(self.adversary)
        for n in self.n:
            limit = max_faults(n, self.eps)
            if self.f is not None and not 0 <= self.f <= limit:
                raise ConfigError(f"f={self.f} exceeds floor((1/2 - eps) n) = {limit} for n={n}")
            self.trial(n, self.seed).validate()

    def trial(self, n: int, seed: int) -> TrialConfig:
        return TrialConfig(
            n=n, eps=self.eps, f=self.f, c=self.c, profile=self.profile, mode=self.mode,
            adversary=self.adversary, seed=seed, adversary_seed=self.adversary_seed, inputs=self.inputs,
            input_value=self.input_value, value_domain=self.value_domain, word_factor=self.word_factor,
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data = dict(data)
        if "n" in data and isinstance(data["n"], int):
            data["n"] = [data["n"]]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)


def _fmt_float(x: float) -> str:
    return f"{x:.6g}"


def csv_row(report: TrialReport) -> dict[str, Any]:
    values = sorted(report.decided_values)
    v = report.verdict or {}
    return {
        "n": report.n,
        "eps": _fmt_float(report.eps),
        "f": report.f,
        "c": _fmt_float(report.c),
        "mode": report.mode,
        "adversary": report.adversary,
        "seed": report.seed,
        "messages": report.honest_messages,
        "bits": report.honest_bits,
        "rounds": report.rounds,
        "iterations": report.iterations,
        # several values only appear when consistency fails
        "decided_value": "|".join(str(x) for x in values),
        "consistency": int(bool(v.get("consistency"))),
        "validity": int(bool(v.get("validity"))),
        "termination": int(bool(v.get("termination"))),
        "committee_corrupt_frac": f"{report.committee_corrupt_frac:.6f}",
        "referee_coverage_ok": int(report.referee_coverage_ok),
    }


def write_csv(rows: Iterable[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def run_sweep(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """One CSV row per trial, ordered by (n, seed)."""
    cfg.validate()
    rows = []
    for n in sorted(cfg.n):
        for t in range(cfg.trials):
            rows.append(csv_row(run_trial(cfg.trial(n, cfg.seed + t))))
    return rows


def read_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def summarize(csv_text: str) -> dict[str, Any]:
    """Per-n aggregates and scaling fits, recomputed from the CSV text alone."""
    rows = read_csv(csv_text)
    by_n: dict[int, list[dict[str, str]]] = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(r)
    per_n = []
    for n in sorted(by_n):
        rs = by_n[n]
        msgs = np.array([int(r["messages"]) for r in rs], dtype=float)
        bits = np.array([int(r["bits"]) for r in rs], dtype=float)
        rounds = np.array([int(r["rounds"]) for r in rs], dtype=float)
        log_n = math.ceil(math.log2(n))
        per_n.append({
            "n": n,
            "trials": len(rs),
            "mean_messages": float(msgs.mean()),
            "max_messages": int(msgs.max()),
            "mean_bits": float(bits.mean()),
            "max_bits": int(bits.max()),
            "mean_rounds": float(rounds.mean()),
            "max_rounds": int(rounds.max()),
            "rounds_per_log2_sq": float(rounds.mean()) / (log_n * log_n),
            "consistency_violations": sum(r["consistency"] == "0" for r in rs),
            "validity_violations": sum(r["validity"] == "0" for r in rs),
            "termination_failures": sum(r["termination"] == "0" for r in rs),
            "mean_committee_corrupt_frac": float(np.mean([float(r["committee_corrupt_frac"]) for r in rs])),
            "referee_coverage_rate": float(np.mean([int(r["referee_coverage_ok"]) for r in rs])),
        })
    summary: dict[str, Any] = {
        "csv_sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
        "per_n": per_n,
        "beta": None,
        "beta_rounds": None,
        "notices": [],
        "warnings": [],
    }
    if len(per_n) < 2:
        summary["notices"].append("single n in sweep: scaling fit skipped")
        return summary
    ns = [p["n"] for p in per_n]
    beta = loglog_slope(ns, [p["mean_messages"] for p in per_n])
    beta_r = loglog_slope([math.log2(n) for n in ns], [p["mean_rounds"] for p in per_n])
    summary["beta"] = round(beta, 6)
    summary["beta_rounds"] = round(beta_r, 6)
    if beta >= BETA_WARN:
        summary["warnings"].append(f"fitted message exponent {beta:.3f} >= {BETA_WARN}: growth is not clearly sublinear")
    if max(ns) < 16 * min(ns) or len(ns) < 3:
        summary["notices"].append("fewer than 3 sizes or a span under 16x: fit is indicative only")
    return summary
