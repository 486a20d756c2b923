"""Session engine: run a protocol against a source, sift keys, score CHSH.

A session draws independent uniform settings for both stations each round,
asks the configured source for that round's physics, and records the public
transcript plus whatever hidden side-information the scenario carries
(the faked-state polarization, Eve's intercept results). Sifting and the
correlation estimators only ever look at the public projection.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .optics import Outcome, canon_angle, click_codes, split_intensities
from .sources import (
    CHUNK_ROUNDS,
    DOUBLE_BLIND_KINDS,
    ScenarioConfig,
    ScenarioKind,
    WeakSide,
    chunk_stream,
    faked_pulse_params,
    honest_outcome_codes,
    intercept_pulse_directions,
    predict_outcome_codes,
    sample_lambda,
    weak_side_codes,
)


class ProtocolKind(str, enum.Enum):
    BBM92 = "bbm92"
    EKERT = "ekert"


BBM92_SETTINGS = (0.0, math.pi / 4.0)
EKERT_ALICE_SETTINGS = (0.0, math.pi / 8.0, math.pi / 4.0)
EKERT_BOB_SETTINGS = (math.pi / 8.0, math.pi / 4.0, 3.0 * math.pi / 8.0)

# CHSH quadruple (a, a_prime, b, b_prime); all four appear in the default
# Ekert setting sets
CHSH_QUAD = (0.0, math.pi / 4.0, math.pi / 8.0, 3.0 * math.pi / 8.0)


def _canon_settings(name: str, values) -> tuple[float, ...]:
    settings = tuple(canon_angle(float(v)) for v in values)
    if not settings:
        raise ValueError(f"{name} must be non-empty")
    if len(set(settings)) != len(settings):
        raise ValueError(f"{name} must be distinct angles, got {values}")
    return settings


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol choice plus session size and randomness seed.

    Setting lists default per protocol; overrides are canonicalized to
    [0, pi) and must be distinct.
    """

    protocol: ProtocolKind
    rounds: int
    seed: int = 0
    alice_settings: tuple[float, ...] | None = None
    bob_settings: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", ProtocolKind(self.protocol))
        object.__setattr__(self, "rounds", int(self.rounds))
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        object.__setattr__(self, "seed", int(self.seed))
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.protocol is ProtocolKind.BBM92:
            default_a = default_b = BBM92_SETTINGS
        else:
            default_a, default_b = EKERT_ALICE_SETTINGS, EKERT_BOB_SETTINGS
        alice = self.alice_settings if self.alice_settings is not None else default_a
        bob = self.bob_settings if self.bob_settings is not None else default_b
        object.__setattr__(self, "alice_settings", _canon_settings("alice_settings", alice))
        object.__setattr__(self, "bob_settings", _canon_settings("bob_settings", bob))


@dataclass(frozen=True)
class RoundRecord:
    """One round as seen with full (Eve-level) information."""

    index: int
    theta_a: float
    theta_b: float
    outcome_a: Outcome
    outcome_b: Outcome
    weak_side: WeakSide
    hidden_lambda: float | None = None


@dataclass(frozen=True)
class PublicRounds:
    """The transcript Alice and Bob actually share: settings and outcomes only."""

    theta_a: np.ndarray
    theta_b: np.ndarray
    outcome_a: np.ndarray
    outcome_b: np.ndarray

    @property
    def clicked_a(self) -> np.ndarray:
        return np.abs(self.outcome_a) == 1

    @property
    def clicked_b(self) -> np.ndarray:
        return np.abs(self.outcome_b) == 1


class SessionRecords(Sequence):
    """Columnar record of a full session, indexable as RoundRecord objects.

    Hidden columns (the faked-state polarization, the weakened side, Eve's
    intercept basis/outcome) ride along for analysis and audits; honest-party
    computations must go through public_view().
    """

    def __init__(
        self,
        protocol: ProtocolConfig,
        scenario: ScenarioConfig,
        theta_a,
        theta_b,
        outcome_a,
        outcome_b,
        weak_side,
        hidden_lambda=None,
        eve_basis=None,
        eve_outcome=None,
    ):
        self.protocol = protocol
        self.scenario = scenario
        self.theta_a = np.asarray(theta_a, dtype=np.float64)
        self.theta_b = np.asarray(theta_b, dtype=np.float64)
        self.outcome_a = np.asarray(outcome_a, dtype=np.int8)
        self.outcome_b = np.asarray(outcome_b, dtype=np.int8)
        self.weak_side = np.asarray(weak_side, dtype=np.int8)
        self.hidden_lambda = None if hidden_lambda is None else np.asarray(hidden_lambda, dtype=np.float64)
        self.eve_basis = None if eve_basis is None else np.asarray(eve_basis, dtype=np.float64)
        self.eve_outcome = None if eve_outcome is None else np.asarray(eve_outcome, dtype=np.int8)
        n = self.theta_a.shape[0]
        for name in ("theta_b", "outcome_a", "outcome_b", "weak_side", "hidden_lambda", "eve_basis", "eve_outcome"):
            col = getattr(self, name)
            if col is not None and col.shape[0] != n:
                raise ValueError(f"column {name} has length {col.shape[0]}, expected {n}")

    def __len__(self) -> int:
        return self.theta_a.shape[0]

    def __getitem__(self, index: int) -> RoundRecord:
        if not isinstance(index, (int, np.integer)):
            raise TypeError("SessionRecords supports integer indexing only")
        i = int(index)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(f"round index {index} out of range")
        lam = None if self.hidden_lambda is None else float(self.hidden_lambda[i])
        return RoundRecord(
            index=i,
            theta_a=float(self.theta_a[i]),
            theta_b=float(self.theta_b[i]),
            outcome_a=Outcome(int(self.outcome_a[i])),
            outcome_b=Outcome(int(self.outcome_b[i])),
            weak_side=WeakSide(int(self.weak_side[i])),
            hidden_lambda=lam,
        )

    @property
    def clicked_a(self) -> np.ndarray:
        return np.abs(self.outcome_a) == 1

    @property
    def clicked_b(self) -> np.ndarray:
        return np.abs(self.outcome_b) == 1

    def public_view(self) -> PublicRounds:
        """Strip all source-side information."""
        return PublicRounds(self.theta_a, self.theta_b, self.outcome_a, self.outcome_b)


def public_rounds(records) -> PublicRounds:
    """The public projection of a record set (pass-through for PublicRounds)."""
    view = getattr(records, "public_view", None)
    return view() if callable(view) else records


def _simulate_chunk(pc: ProtocolConfig, sc: ScenarioConfig, chunk_index: int):
    """Simulate rounds [chunk*CHUNK_ROUNDS, ...) of the session.

    Every chunk draws full-size arrays in a fixed per-scenario order and
    slices afterwards, so per-round values never depend on how many rounds
    the final chunk actually covers.
    """
    lo = chunk_index * CHUNK_ROUNDS
    hi = min(pc.rounds, lo + CHUNK_ROUNDS)
    m = hi - lo
    g = chunk_stream(pc.seed, chunk_index)
    alice = np.asarray(pc.alice_settings)
    bob = np.asarray(pc.bob_settings)

    if sc.kind in DOUBLE_BLIND_KINDS:
        lam = sample_lambda(g, CHUNK_ROUNDS)[:m]
        coin = g.integers(0, 2, CHUNK_ROUNDS)[:m]
        a_idx = g.integers(0, alice.size, CHUNK_ROUNDS)[:m]
        b_idx = g.integers(0, bob.size, CHUNK_ROUNDS)[:m]
        theta_a = alice[a_idx]
        theta_b = bob[b_idx]
        weak = weak_side_codes(sc, coin, lo)
        ia, pa, ib, pb = faked_pulse_params(lam, sc, weak)
        out_a = click_codes(*split_intensities(ia, pa, theta_a))
        out_b = click_codes(*split_intensities(ib, pb, theta_b))
        return theta_a, theta_b, out_a, out_b, weak, lam, None, None

    if sc.kind is ScenarioKind.HONEST_SINGLET:
        a_idx = g.integers(0, alice.size, CHUNK_ROUNDS)[:m]
        b_idx = g.integers(0, bob.size, CHUNK_ROUNDS)[:m]
        a_coin = g.integers(0, 2, CHUNK_ROUNDS)[:m]
        u_flip = g.random(CHUNK_ROUNDS)[:m]
        depol_u = g.random(CHUNK_ROUNDS)[:m]
        a_repl = g.integers(0, 2, CHUNK_ROUNDS)[:m]
        b_repl = g.integers(0, 2, CHUNK_ROUNDS)[:m]
        theta_a = alice[a_idx]
        theta_b = bob[b_idx]
        out_a, out_b = honest_outcome_codes(
            theta_a, theta_b, a_coin, u_flip, depol_u, a_repl, b_repl, sc.depolarize_prob
        )
        return theta_a, theta_b, out_a, out_b, np.zeros(m, np.int8), None, None, None

    # single blinding: Eve measures in a basis from Bob's configured set
    a_idx = g.integers(0, alice.size, CHUNK_ROUNDS)[:m]
    b_idx = g.integers(0, bob.size, CHUNK_ROUNDS)[:m]
    e_idx = g.integers(0, bob.size, CHUNK_ROUNDS)[:m]
    a_coin = g.integers(0, 2, CHUNK_ROUNDS)[:m]
    u_flip = g.random(CHUNK_ROUNDS)[:m]
    depol_u = g.random(CHUNK_ROUNDS)[:m]
    a_repl = g.integers(0, 2, CHUNK_ROUNDS)[:m]
    b_repl = g.integers(0, 2, CHUNK_ROUNDS)[:m]
    theta_a = alice[a_idx]
    theta_b = bob[b_idx]
    eve_basis = bob[e_idx]
    out_a, eve_out = honest_outcome_codes(
        theta_a, eve_basis, a_coin, u_flip, depol_u, a_repl, b_repl, sc.depolarize_prob
    )
    direction = intercept_pulse_directions(eve_basis, eve_out)
    out_b = click_codes(
        *split_intensities(np.full(m, sc.single_blind_intensity), direction, theta_b)
    )
    return theta_a, theta_b, out_a, out_b, np.zeros(m, np.int8), None, eve_basis, eve_out


def run_session(
    protocol_cfg: ProtocolConfig, scenario_cfg: ScenarioConfig, workers: int = 1
) -> SessionRecords:
    """Simulate a full session.

    Deterministic for a given (protocol_cfg, scenario_cfg): the chunked RNG
    scheme makes the output byte-identical for any workers >= 1.
    """
    if int(workers) < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if (
        scenario_cfg.kind is ScenarioKind.SINGLE_BLINDING
        and protocol_cfg.protocol is not ProtocolKind.BBM92
    ):
        raise ValueError("scenario single-blinding runs under protocol bbm92 only")

    n_chunks = -(-protocol_cfg.rounds // CHUNK_ROUNDS)
    if workers == 1 or n_chunks == 1:
        parts = [_simulate_chunk(protocol_cfg, scenario_cfg, c) for c in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(
                pool.map(lambda c: _simulate_chunk(protocol_cfg, scenario_cfg, c), range(n_chunks))
            )

    def cat(j):
        if parts[0][j] is None:
            return None
        return np.concatenate([p[j] for p in parts]) if len(parts) > 1 else parts[0][j]

    return SessionRecords(
        protocol_cfg,
        scenario_cfg,
        theta_a=cat(0),
        theta_b=cat(1),
        outcome_a=cat(2),
        outcome_b=cat(3),
        weak_side=cat(4),
        hidden_lambda=cat(5),
        eve_basis=cat(6),
        eve_outcome=cat(7),
    )


@dataclass(frozen=True)
class SiftedKey:
    """Matched-basis key material. bits_bob is already anticorrelation-flipped.

    bits_eve holds Eve's prediction of Bob's (flipped) bits when the scenario
    gives her one, else None. All present arrays have equal length.
    """

    bits_alice: np.ndarray
    bits_bob: np.ndarray
    bits_eve: np.ndarray | None
    round_indices: np.ndarray


def sift_bbm92(records) -> tuple[SiftedKey, float | None]:
    """Keep equal-setting rounds where both stations clicked; score disagreement.

    Alice's bit is 1 for a MINUS outcome; Bob's raw bit is flipped before
    comparison because the source anticorrelates the stations. Returns the
    key and the QBER, which is None (undefined, not zero) when nothing
    survives sifting.
    """
    pub = public_rounds(records)
    keep = (pub.theta_a == pub.theta_b) & pub.clicked_a & pub.clicked_b
    idx = np.flatnonzero(keep)
    bits_alice = (pub.outcome_a[idx] == int(Outcome.MINUS)).astype(np.uint8)
    bits_bob = (pub.outcome_b[idx] != int(Outcome.MINUS)).astype(np.uint8)

    bits_eve = None
    scenario = getattr(records, "scenario", None)
    if scenario is not None and scenario.kind in DOUBLE_BLIND_KINDS and idx.size:
        _, pred_b = predict_outcome_codes(
            records.hidden_lambda[idx],
            records.theta_a[idx],
            records.theta_b[idx],
            scenario,
            records.weak_side[idx],
        )
        bits_eve = (pred_b != int(Outcome.MINUS)).astype(np.uint8)

    qber = float(np.mean(bits_alice != bits_bob)) if idx.size else None
    return SiftedKey(bits_alice, bits_bob, bits_eve, idx), qber


@dataclass(frozen=True)
class CorrelationEstimate:
    """Coincidence-conditioned product average at one setting pair."""

    theta_a: float
    theta_b: float
    value: float | None
    stderr: float | None
    n_coincidences: int


def correlation_estimate(records, theta_a: float, theta_b: float) -> CorrelationEstimate:
    """E-hat at one setting pair, conditioned on both stations clicking.

    Standard error is sqrt((1 - E^2) / n); value and stderr are None when
    the pair has no coincidences.
    """
    pub = public_rounds(records)
    a = canon_angle(float(theta_a))
    b = canon_angle(float(theta_b))
    mask = (pub.theta_a == a) & (pub.theta_b == b) & pub.clicked_a & pub.clicked_b
    n = int(np.count_nonzero(mask))
    if n == 0:
        return CorrelationEstimate(a, b, None, None, 0)
    products = pub.outcome_a[mask].astype(np.int32) * pub.outcome_b[mask].astype(np.int32)
    value = float(np.mean(products))
    stderr = math.sqrt(max(0.0, 1.0 - value * value) / n)
    return CorrelationEstimate(a, b, value, stderr, n)


def _require_setting(name: str, value: float, settings: tuple[float, ...]) -> float:
    v = canon_angle(float(value))
    if not any(abs(v - s) < 1e-12 for s in settings):
        raise ValueError(f"{name}={value} is not one of the configured settings {settings}")
    return v


def chsh_select(
    records, a: float, a_prime: float, b: float, b_prime: float
) -> tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]:
    """Correlation estimates for the four CHSH pairs (a,b), (a,b'), (a',b), (a',b').

    All four angles must appear in the session's configured setting sets.
    """
    protocol = getattr(records, "protocol", None)
    if protocol is not None:
        a = _require_setting("a", a, protocol.alice_settings)
        a_prime = _require_setting("a_prime", a_prime, protocol.alice_settings)
        b = _require_setting("b", b, protocol.bob_settings)
        b_prime = _require_setting("b_prime", b_prime, protocol.bob_settings)
    return (
        correlation_estimate(records, a, b),
        correlation_estimate(records, a, b_prime),
        correlation_estimate(records, a_prime, b),
        correlation_estimate(records, a_prime, b_prime),
    )


def chsh_value(e_ab: float, e_ab_prime: float, e_a_prime_b: float, e_a_prime_b_prime: float) -> float:
    """|E(a,b) - E(a,b') + E(a',b) + E(a',b')|."""
    return abs(e_ab - e_ab_prime + e_a_prime_b + e_a_prime_b_prime)


@dataclass(frozen=True)
class ChshResult:
    """CHSH score assembled from the four pair estimates.

    value/stderr are None when any pair had zero coincidences (undefined,
    flagged rather than silently zero).
    """

    value: float | None
    stderr: float | None
    pairs: tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]


def chsh_score(records, quad: tuple[float, float, float, float] = CHSH_QUAD) -> ChshResult:
    """chsh_select + chsh_value with error propagation across the four pairs."""
    pairs = chsh_select(records, *quad)
    if any(p.value is None for p in pairs):
        return ChshResult(None, None, pairs)
    value = chsh_value(*(p.value for p in pairs))
    stderr = math.sqrt(sum(p.stderr**2 for p in pairs))
    return ChshResult(value, stderr, pairs)


def eve_knowledge_audit(records, sifted: SiftedKey) -> float | None:
    """Fraction of sifted bits where Eve's predicted bit equals Bob's.

    None when the scenario gives Eve no prediction or the key is empty.
    """
    if sifted.bits_eve is None or sifted.bits_bob.size == 0:
        return None
    return float(np.mean(sifted.bits_eve == sifted.bits_bob))


def eve_prediction_report(records) -> dict | None:
    """Round-level audit of Eve's knowledge, serializable to JSON.

    Faked-state scenarios: her predicted outcome pair is compared to the
    recorded pair on every round. Single blinding: Bob's clicks are compared
    to her intercept outcome. None for honest sessions.
    """
    scenario = getattr(records, "scenario", None)
    if scenario is None:
        return None
    if scenario.kind in DOUBLE_BLIND_KINDS:
        pred_a, pred_b = predict_outcome_codes(
            records.hidden_lambda,
            records.theta_a,
            records.theta_b,
            scenario,
            records.weak_side,
        )
        mismatches = int(np.count_nonzero(pred_a != records.outcome_a)) + int(
            np.count_nonzero(pred_b != records.outcome_b)
        )
        rounds = len(records)
        return {
            "mode": "faked-state",
            "rounds": rounds,
            "mismatched_outcomes": mismatches,
            "match_fraction": 1.0 - mismatches / (2 * rounds) if rounds else None,
        }
    if scenario.kind is ScenarioKind.SINGLE_BLINDING:
        clicked = records.clicked_b
        clicks = int(np.count_nonzero(clicked))
        mismatched = int(np.count_nonzero(clicked & (records.outcome_b != records.eve_outcome)))
        return {
            "mode": "intercept",
            "bob_clicks": clicks,
            "mismatched_clicks": mismatched,
            "match_fraction": 1.0 - mismatched / clicks if clicks else None,
        }
    return None
