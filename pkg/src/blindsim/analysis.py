"""Closed-form predictions, efficiency estimators, and detection bounds.

The oracle_* functions are the independent targets the Monte-Carlo engine
is tested against; they are evaluated straight from the model geometry and
never share code with the simulator. The chsh_bound_* functions give the
largest CHSH value a local model exploiting undetected rounds can fake at
a given efficiency, which is what makes the weak-pulse attack's operating
point interesting: its efficiencies sit exactly on both thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .protocol import public_rounds
from .sources import WeakSide

QUANTUM_CHSH_MAX = 2.0 * math.sqrt(2.0)

_QUARTER = math.pi / 4.0
_HALF = math.pi / 2.0
_TOL = 1e-12


def _check_delta(delta: float) -> float:
    d = float(delta)
    if abs(d) > _HALF + _TOL:
        raise ValueError(f"delta must lie in [-pi/2, pi/2], got {delta}")
    return d


def _check_alpha(alpha: float) -> float:
    a = float(alpha)
    if not 0.0 < a < _QUARTER:
        raise ValueError(f"alpha must lie strictly between 0 and pi/4, got {alpha}")
    return a


def oracle_corr_bbm92(delta: float) -> float:
    """Correlation of the strong/strong faked states at analyzer offset delta.

    Linear in |delta|: -1 at matched settings, +1 at pi/2.
    """
    d = _check_delta(delta)
    return -1.0 + (4.0 / math.pi) * abs(d)


def oracle_corr_ekert(delta: float, alpha: float) -> float:
    """Coincidence-conditioned correlation of the weak/strong faked states.

    Piecewise linear: clamped at -1 / +1 outside the band |delta| in
    [pi/4 - alpha, pi/4 + alpha], ramping through it with slope 1/alpha.
    Continuous at both breakpoints.
    """
    a = _check_alpha(alpha)
    d = abs(_check_delta(delta))
    if d < _QUARTER - a:
        return -1.0
    if d > _QUARTER + a:
        return 1.0
    return (d - _QUARTER) / a


def oracle_weak_detection_prob(alpha: float) -> float:
    """Click probability of the weakened station: 4*alpha/pi."""
    return 4.0 * _check_alpha(alpha) / math.pi


def oracle_eta(alpha: float) -> float:
    """Single-side detection efficiency of the weak/strong attack: (1 + 4a/pi)/2."""
    return (1.0 + oracle_weak_detection_prob(alpha)) / 2.0


def oracle_eta_conditional(alpha: float) -> float:
    """Conditional efficiency (coincidences over singles): p_weak / eta."""
    return oracle_weak_detection_prob(alpha) / oracle_eta(alpha)


def chsh_bound_conditional(eta_21: float) -> float:
    """Largest CHSH value a local model can fake at conditional efficiency eta_21.

    4/eta_21 - 2, valid for eta_21 in [2/3, 1]; below 2/3 every value up to
    the algebraic maximum 4 is reachable and the bound is out of domain.
    """
    v = float(eta_21)
    if v < 2.0 / 3.0 - _TOL:
        raise ValueError(f"eta_21={eta_21} is below the bound's domain [2/3, 1]")
    if v > 1.0 + _TOL:
        raise ValueError(f"eta_21={eta_21} exceeds 1; efficiencies live in (0, 1]")
    return 4.0 / v - 2.0


def chsh_bound_detection(eta: float) -> float:
    """Largest CHSH value a local model can fake at detection efficiency eta.

    2/(2*eta - 1), valid for eta in [3/4, 1]; out of domain below 3/4.
    """
    v = float(eta)
    if v < 3.0 / 4.0 - _TOL:
        raise ValueError(f"eta={eta} is below the bound's domain [3/4, 1]")
    if v > 1.0 + _TOL:
        raise ValueError(f"eta={eta} exceeds 1; efficiencies live in (0, 1]")
    return 2.0 / (2.0 * v - 1.0)


@dataclass(frozen=True)
class EfficiencyReport:
    """Observed detection efficiencies.

    eta, per-side rates, and their errors need the emission count; when it is
    unknown they are None. eta_21 only needs observed clicks / coincidences.
    Counting gives eta_21 >= 2 - 1/eta whenever both are defined.
    """

    eta: float | None
    eta_21: float | None
    rate_a: float | None
    rate_b: float | None
    n_emitted: int | None
    eta_stderr: float | None = None
    eta_21_stderr: float | None = None


def estimate_efficiencies(records, n_emitted: int | None = None) -> EfficiencyReport:
    """Empirical single and conditional detection efficiencies.

    Pass n_emitted=len(records) when the record list covers every emission
    (true for the simulator's sessions); None models parties who never learn
    how many pairs the source produced.
    """
    pub = public_rounds(records)
    ca = pub.clicked_a
    cb = pub.clicked_b
    singles_a = int(np.count_nonzero(ca))
    singles_b = int(np.count_nonzero(cb))
    coincidences = int(np.count_nonzero(ca & cb))
    n_rounds = ca.shape[0]

    eta_21 = None
    eta_21_stderr = None
    if singles_a + singles_b > 0:
        eta_21 = 2.0 * coincidences / (singles_a + singles_b)
        # ratio estimator x/y with x = coincidence indicator, y = clicks/2
        if n_rounds > 1:
            x = (ca & cb).astype(np.float64)
            y = (ca.astype(np.float64) + cb.astype(np.float64)) / 2.0
            ybar = float(np.mean(y))
            r = eta_21
            resid = x - r * y
            eta_21_stderr = float(
                math.sqrt(max(0.0, np.mean(resid**2)) / n_rounds) / ybar
            )

    eta = rate_a = rate_b = eta_stderr = None
    if n_emitted is not None:
        n_emitted = int(n_emitted)
        if n_emitted < 1:
            raise ValueError(f"n_emitted must be >= 1, got {n_emitted}")
        eta = (singles_a + singles_b) / (2.0 * n_emitted)
        rate_a = singles_a / n_emitted
        rate_b = singles_b / n_emitted
        if n_emitted == n_rounds and n_rounds > 1:
            s = (ca.astype(np.float64) + cb.astype(np.float64)) / 2.0
            eta_stderr = float(np.std(s, ddof=1) / math.sqrt(n_rounds))

    return EfficiencyReport(
        eta=eta,
        eta_21=eta_21,
        rate_a=rate_a,
        rate_b=rate_b,
        n_emitted=n_emitted,
        eta_stderr=eta_stderr,
        eta_21_stderr=eta_21_stderr,
    )


def weak_side_detection_rate(records) -> float | None:
    """Fraction of weak-pulse rounds whose weakened station clicked.

    None when the session contains no weak-pulse rounds.
    """
    weak = records.weak_side
    on_a = weak == int(WeakSide.A)
    on_b = weak == int(WeakSide.B)
    n_weak = int(np.count_nonzero(on_a)) + int(np.count_nonzero(on_b))
    if n_weak == 0:
        return None
    hits = int(np.count_nonzero(records.clicked_a & on_a)) + int(
        np.count_nonzero(records.clicked_b & on_b)
    )
    return hits / n_weak


@dataclass(frozen=True)
class RateCheck:
    """One homogeneity check: does a rate depend on the local setting?"""

    name: str
    labels: tuple[str, ...]
    trials: tuple[int, ...]
    hits: tuple[int, ...]
    statistic: float | None
    dof: int
    p_value: float | None
    verdict: str  # "pass" | "fail" | "inconclusive"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cells": [
                {"label": lbl, "trials": t, "hits": h, "rate": h / t if t else None}
                for lbl, t, h in zip(self.labels, self.trials, self.hits)
            ],
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class FairSamplingReport:
    """Chi-square fair-sampling monitor output."""

    significance: float
    min_cell: int
    checks: tuple[RateCheck, ...]
    verdict: str

    def to_dict(self) -> dict:
        return {
            "significance": self.significance,
            "min_cell": self.min_cell,
            "verdict": self.verdict,
            "checks": [c.to_dict() for c in self.checks],
        }


def _rate_check(name: str, labels, trials, hits, significance: float, min_cell: int) -> RateCheck:
    trials = np.asarray(trials, dtype=np.int64)
    hits = np.asarray(hits, dtype=np.int64)
    dof = trials.size - 1
    if np.any(trials < min_cell):
        return RateCheck(
            name, tuple(labels), tuple(int(t) for t in trials), tuple(int(h) for h in hits),
            None, dof, None, "inconclusive",
        )
    pooled = hits.sum() / trials.sum()
    if pooled <= 0.0 or pooled >= 1.0:
        # every cell at exactly 0 or 1: rates are identical by construction
        statistic, p_value = 0.0, 1.0
    else:
        expected_hit = trials * pooled
        expected_miss = trials * (1.0 - pooled)
        statistic = float(
            np.sum((hits - expected_hit) ** 2 / expected_hit)
            + np.sum(((trials - hits) - expected_miss) ** 2 / expected_miss)
        )
        p_value = float(stats.chi2.sf(statistic, dof)) if dof > 0 else 1.0
    verdict = "fail" if p_value < significance else "pass"
    return RateCheck(
        name, tuple(labels), tuple(int(t) for t in trials), tuple(int(h) for h in hits),
        statistic, dof, p_value, verdict,
    )


def fair_sampling_monitor(records, significance: float = 0.01, min_cell: int = 100) -> FairSamplingReport:
    """Test whether click and coincidence rates depend on the local settings.

    Chi-square homogeneity across setting cells, one check per side plus one
    for coincidences across setting pairs. Any cell with fewer than min_cell
    rounds makes that check (and at best the report) inconclusive. The
    blinding attacks are engineered to pass this monitor; an efficiency
    mismatch between settings fails it.
    """
    if not 0.0 < significance < 1.0:
        raise ValueError(f"significance must lie in (0, 1), got {significance}")
    pub = public_rounds(records)
    vals_a, inv_a = np.unique(pub.theta_a, return_inverse=True)
    vals_b, inv_b = np.unique(pub.theta_b, return_inverse=True)
    if vals_a.size < 2 or vals_b.size < 2:
        raise ValueError("fair-sampling monitor needs >= 2 settings per side")

    checks = []
    for side, vals, inv, clicked in (
        ("alice", vals_a, inv_a, pub.clicked_a),
        ("bob", vals_b, inv_b, pub.clicked_b),
    ):
        trials = np.bincount(inv, minlength=vals.size)
        hits = np.bincount(inv, weights=clicked.astype(np.float64), minlength=vals.size).astype(np.int64)
        labels = [f"{v:.9g}" for v in vals]
        checks.append(_rate_check(f"{side}-click-rate", labels, trials, hits, significance, min_cell))

    pair_inv = inv_a * vals_b.size + inv_b
    n_pairs = vals_a.size * vals_b.size
    trials = np.bincount(pair_inv, minlength=n_pairs)
    coinc = (pub.clicked_a & pub.clicked_b).astype(np.float64)
    hits = np.bincount(pair_inv, weights=coinc, minlength=n_pairs).astype(np.int64)
    present = trials > 0
    labels = [
        f"{vals_a[i // vals_b.size]:.9g}/{vals_b[i % vals_b.size]:.9g}"
        for i in range(n_pairs)
        if present[i]
    ]
    checks.append(
        _rate_check(
            "coincidence-rate", labels, trials[present], hits[present], significance, min_cell
        )
    )

    verdicts = [c.verdict for c in checks]
    if "fail" in verdicts:
        overall = "fail"
    elif "inconclusive" in verdicts:
        overall = "inconclusive"
    else:
        overall = "pass"
    return FairSamplingReport(significance, min_cell, tuple(checks), overall)
