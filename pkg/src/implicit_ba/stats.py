"""Monte-Carlo suites and fits behind the ``verify`` and ``sweep`` commands."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import committee as cm
from .crypto import DIGEST_BITS, lottery_digests
from .engine import TrialConfig, build_setup, run_leader_election


@dataclass(frozen=True)
class SuiteResult:
    name: str
    n: int
    trials: int
    successes: int
    threshold: float
    # a two-sided band (expected, tolerance) replaces the one-sided threshold when set
    band: Optional[tuple[float, float]] = None

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def passed(self) -> bool:
        if self.band is not None:
            expected, tol = self.band
            return abs(self.rate - expected) <= tol
        return self.rate >= self.threshold

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if self.band is not None:
            target = f"{self.band[0]:.3f} +/- {self.band[1]:.3f}"
        else:
            target = f">= {self.threshold:.3f}"
        return f"{verdict}  {self.name:<28} n={self.n:<5} trials={self.trials:<6} rate={self.rate:.4f}  target {target}"


def _cfg(n: int, eps: float, c: Optional[float], profile: str, seed: int, f: Optional[int]) -> TrialConfig:
    return TrialConfig(n=n, eps=eps, c=c, profile=profile, seed=seed, f=f)


def honest_majority_suite(
    n: int, eps: float = 0.1, trials: int = 500, seed_base: int = 0, c: Optional[float] = None,
    profile: str = "paper", f: Optional[int] = None, threshold: float = 0.99,
) -> SuiteResult:
    """Fraction of trials whose committee has strictly fewer than half corrupt members."""
    ok = 0
    for t in range(trials):
        s = build_setup(_cfg(n, eps, c, profile, seed_base + t, f))
        ok += cm.honest_majority(s.committee, s.corrupt)
    label = f"honest-majority[{profile if c is None else f'c={c:g}'}]"
    return SuiteResult(label, n, trials, ok, threshold)


def referee_coverage_suite(
    n: int, eps: float = 0.1, trials: int = 500, seed_base: int = 0, c: Optional[float] = None,
    profile: str = "desk", f: Optional[int] = None, threshold: float = 0.99,
) -> SuiteResult:
    """Fraction of trials in which every pair of honest candidates shares an honest referee."""
    ok = 0
    for t in range(trials):
        s = build_setup(_cfg(n, eps, c, profile, seed_base + t, f))
        ok += cm.referee_coverage(s.committee, s.referees, s.corrupt, n)
    label = f"referee-coverage[{profile if c is None else f'c={c:g}'}]"
    return SuiteResult(label, n, trials, ok, threshold)


def leader_suite(n: int, f: int, trials: int = 10_000, seed_base: int = 0, eps: float = 0.1,
                 tolerance: float = 0.02) -> tuple[SuiteResult, int]:
    """Honest-leader rate against 1 - f/n; also returns the total messages sent (always zero)."""
    honest = 0
    messages = 0
    for t in range(trials):
        res = run_leader_election(n, f, seed_base + t, eps=eps)
        honest += res.honest
        messages += res.messages
    return SuiteResult("leader-honest", n, trials, honest, 0.0, band=(1 - f / n, tolerance)), messages


def keyed_hash_uniformity(key: int, messages: int = 1 << 16, buckets: int = 256, bits: int = DIGEST_BITS) -> float:
    """Chi-squared p-value of the top bits of H_key over consecutive messages."""
    digests = lottery_digests(key, np.arange(messages, dtype=np.uint64), bits)
    shift = np.uint64(bits - int(math.log2(buckets)))
    counts = np.bincount((digests >> shift).astype(np.int64), minlength=buckets)
    return float(sps.chisquare(counts).pvalue)


def coin_uniformity(seeds: int = 10_000, buckets: int = 64, bits: int = DIGEST_BITS) -> float:
    """Chi-squared p-value of the top bits of the coin over consecutive trial seeds."""
    top = [cm.draw_coin(s, bits) >> (bits - int(math.log2(buckets))) for s in range(seeds)]
    counts = np.bincount(np.array(top, dtype=np.int64), minlength=buckets)
    return float(sps.chisquare(counts).pvalue)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """OLS slope of log2(y) on log2(x)."""
    if len(xs) < 2:
        raise ValueError("a fit needs at least two points")
    res = sps.linregress(np.log2(np.asarray(xs, dtype=float)), np.log2(np.asarray(ys, dtype=float)))
    return float(res.slope)
