"""Round emitters: honest entangled pairs and Eve's tailored bright pulses.

The attack source replaces the entangled-pair source with classical pulse
pairs: a hidden polarization lambda drawn uniformly on [0, pi), sent to
Alice as-is and to Bob rotated by pi/2. At intensity 2 (in threshold units)
a blinded station then clicks deterministically on the detector matching
sign cos 2(lambda - setting); lowering one side's intensity to
1/cos^2(alpha) opens a no-click band of half-width alpha around the
splitter diagonal, which is what fakes a CHSH violation once results are
post-selected on coincidences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .optics import (
    HALF_PERIOD,
    PERIOD,
    Outcome,
    Pulse,
    canon_angle,
    click_codes,
    split_intensities,
)

# weak-pulse tuning angle that saturates the CHSH maximum reachable by the
# coincidence-conditioned faked states
DEFAULT_ALPHA = math.pi / (4.0 * math.sqrt(2.0))

# rounds per RNG chunk; every chunk draws full-size arrays in a fixed order,
# so any per-round value is a pure function of (seed, round index, config)
CHUNK_ROUNDS = 1 << 16


class ScenarioKind(str, enum.Enum):
    HONEST_SINGLET = "honest"
    SINGLE_BLINDING = "single-blinding"
    DOUBLE_BLIND_BBM92 = "double-bbm92"
    DOUBLE_BLIND_EKERT = "double-ekert"


DOUBLE_BLIND_KINDS = (ScenarioKind.DOUBLE_BLIND_BBM92, ScenarioKind.DOUBLE_BLIND_EKERT)


class WeakSidePolicy(str, enum.Enum):
    ALTERNATE = "alternate"
    RANDOM = "random"
    FIXED_A = "fixed-a"
    FIXED_B = "fixed-b"


class WeakSide(enum.IntEnum):
    NONE = 0
    A = 1
    B = 2

    @property
    def label(self) -> str:
        return {WeakSide.NONE: "none", WeakSide.A: "A", WeakSide.B: "B"}[self]


def weak_intensity(alpha: float) -> float:
    """Pulse intensity whose click boundary sits at polarizer offset alpha."""
    return 1.0 / math.cos(alpha) ** 2


@dataclass(frozen=True)
class ScenarioConfig:
    """What the source between the two stations actually emits.

    depolarize_prob applies to genuine entangled pairs only (honest rounds,
    and the Alice-Eve pair in single blinding); the faked-state scenarios
    are fully classical and ignore it.
    """

    kind: ScenarioKind
    alpha: float = DEFAULT_ALPHA
    strong_intensity: float = 2.0
    single_blind_intensity: float = 1.5
    weak_side_policy: WeakSidePolicy = WeakSidePolicy.RANDOM
    depolarize_prob: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "weak_side_policy", WeakSidePolicy(self.weak_side_policy))
        if not 0.0 <= self.depolarize_prob <= 1.0:
            raise ValueError(
                f"depolarize_prob must lie in [0, 1], got {self.depolarize_prob}"
            )
        if not 1.0 < self.strong_intensity <= 2.0:
            # above 2 both outputs can exceed the threshold at once (double
            # clicks); at or below 1 nothing ever fires
            raise ValueError(
                f"strong_intensity must lie in (1, 2] threshold units, got {self.strong_intensity}"
            )
        if not 1.0 < self.single_blind_intensity < 2.0:
            raise ValueError(
                f"single_blind_intensity must lie strictly between 1 and 2 threshold units, "
                f"got {self.single_blind_intensity}"
            )
        if self.kind is ScenarioKind.DOUBLE_BLIND_EKERT:
            if not 0.0 < self.alpha < math.pi / 4.0:
                raise ValueError(
                    f"alpha must lie strictly between 0 and pi/4, got {self.alpha}"
                )


@dataclass(frozen=True)
class EmittedRound:
    """One faked-state emission: the hidden polarization and both pulses."""

    hidden_lambda: float
    pulse_a: Pulse
    pulse_b: Pulse
    weak_side: WeakSide


def chunk_stream(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent generator for rounds [chunk*CHUNK_ROUNDS, (chunk+1)*CHUNK_ROUNDS).

    Chunks are keyed by (seed, chunk index), never by worker layout, so a
    session partitioned across any number of workers replays identically.
    """
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if chunk_index < 0:
        raise ValueError(f"chunk_index must be >= 0, got {chunk_index}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk_index),))
    return np.random.default_rng(ss)


def sample_lambda(rng: np.random.Generator, size=None):
    """Hidden source polarization(s), uniform on [0, pi)."""
    return rng.uniform(0.0, PERIOD, size)


def weak_side_codes(cfg: ScenarioConfig, coin: np.ndarray, start_index: int) -> np.ndarray:
    """Per-round weak-side assignment as WeakSide codes (vectorized).

    coin is the pre-drawn fair bit used by the random policy; the alternate
    policy weakens side A on even absolute round indices.
    """
    n = coin.shape[0]
    if cfg.kind is not ScenarioKind.DOUBLE_BLIND_EKERT:
        return np.zeros(n, dtype=np.int8)
    policy = cfg.weak_side_policy
    if policy is WeakSidePolicy.RANDOM:
        return np.where(coin == 0, np.int8(WeakSide.A), np.int8(WeakSide.B))
    if policy is WeakSidePolicy.ALTERNATE:
        idx = start_index + np.arange(n, dtype=np.int64)
        return np.where(idx % 2 == 0, np.int8(WeakSide.A), np.int8(WeakSide.B))
    if policy is WeakSidePolicy.FIXED_A:
        return np.full(n, np.int8(WeakSide.A))
    return np.full(n, np.int8(WeakSide.B))


def faked_pulse_params(lam, cfg: ScenarioConfig, weak_side):
    """Intensities and polarizations of both faked pulses (vectorized).

    Alice receives the hidden polarization as-is, Bob the pi/2-rotated copy;
    the weakened side (if any) is driven at 1/cos^2(alpha).
    """
    lam = np.asarray(lam, dtype=np.float64)
    weak_side = np.asarray(weak_side)
    pol_a = lam
    pol_b = canon_angle(lam + HALF_PERIOD)
    intensity_a = np.full(lam.shape, cfg.strong_intensity)
    intensity_b = np.full(lam.shape, cfg.strong_intensity)
    if cfg.kind is ScenarioKind.DOUBLE_BLIND_EKERT:
        iw = weak_intensity(cfg.alpha)
        intensity_a = np.where(weak_side == WeakSide.A, iw, intensity_a)
        intensity_b = np.where(weak_side == WeakSide.B, iw, intensity_b)
    return intensity_a, pol_a, intensity_b, pol_b


def _round_from_lambda(lam: float, cfg: ScenarioConfig, side: WeakSide) -> EmittedRound:
    arr = np.asarray([lam])
    codes = np.full(1, np.int8(side))
    ia, pa, ib, pb = faked_pulse_params(arr, cfg, codes)
    return EmittedRound(
        hidden_lambda=float(lam),
        pulse_a=Pulse(float(ia[0]), float(pa[0])),
        pulse_b=Pulse(float(ib[0]), float(pb[0])),
        weak_side=side,
    )


def emit_double_blind_bbm92(rng: np.random.Generator, cfg: ScenarioConfig) -> EmittedRound:
    """One strong/strong faked-state round: both stations at full intensity."""
    if cfg.kind is not ScenarioKind.DOUBLE_BLIND_BBM92:
        raise ValueError(f"scenario kind must be double-bbm92, got {cfg.kind.value}")
    lam = float(sample_lambda(rng))
    return _round_from_lambda(lam, cfg, WeakSide.NONE)


def emit_double_blind_ekert(
    rng: np.random.Generator, cfg: ScenarioConfig, index: int = 0
) -> EmittedRound:
    """One weak/strong faked-state round; the policy picks the weakened side.

    index is the absolute round number, driving the alternate policy (side A
    on even rounds).
    """
    if cfg.kind is not ScenarioKind.DOUBLE_BLIND_EKERT:
        raise ValueError(f"scenario kind must be double-ekert, got {cfg.kind.value}")
    lam = float(sample_lambda(rng))
    policy = cfg.weak_side_policy
    if policy is WeakSidePolicy.RANDOM:
        side = WeakSide.A if int(rng.integers(0, 2)) == 0 else WeakSide.B
    elif policy is WeakSidePolicy.ALTERNATE:
        side = WeakSide.A if index % 2 == 0 else WeakSide.B
    elif policy is WeakSidePolicy.FIXED_A:
        side = WeakSide.A
    else:
        side = WeakSide.B
    return _round_from_lambda(lam, cfg, side)


def honest_outcome_codes(
    theta_a,
    theta_b,
    a_coin,
    u_flip,
    depol_u,
    a_repl,
    b_repl,
    depolarize_prob: float,
):
    """Outcome codes for ideal anticorrelated pairs at unit efficiency.

    The second outcome disagrees with the first with probability
    (1 + cos 2(theta_a - theta_b)) / 2, which realizes the joint law
    P(a, b) = (1 - a*b*cos 2(theta_a - theta_b)) / 4. With probability
    depolarize_prob the pair is replaced by two independent fair coins.
    """
    a = (2 * np.asarray(a_coin, dtype=np.int8) - 1).astype(np.int8)
    p_opp = (1.0 + np.cos(2.0 * (np.asarray(theta_a) - np.asarray(theta_b)))) / 2.0
    b = np.where(u_flip < p_opp, -a, a).astype(np.int8)
    if depolarize_prob > 0.0:
        noisy = np.asarray(depol_u) < depolarize_prob
        a = np.where(noisy, (2 * np.asarray(a_repl, dtype=np.int8) - 1), a).astype(np.int8)
        b = np.where(noisy, (2 * np.asarray(b_repl, dtype=np.int8) - 1), b).astype(np.int8)
    return a, b


def emit_honest_singlet(
    rng: np.random.Generator, theta_a, theta_b, depolarize_prob: float = 0.0
) -> tuple[Outcome, Outcome]:
    """One genuine pair measured at the two settings; both sides always click."""
    if not 0.0 <= depolarize_prob <= 1.0:
        raise ValueError(f"depolarize_prob must lie in [0, 1], got {depolarize_prob}")
    a_coin = rng.integers(0, 2, 1)
    u_flip = rng.random(1)
    depol_u = rng.random(1)
    a_repl = rng.integers(0, 2, 1)
    b_repl = rng.integers(0, 2, 1)
    a, b = honest_outcome_codes(
        np.asarray([theta_a], dtype=np.float64),
        np.asarray([theta_b], dtype=np.float64),
        a_coin,
        u_flip,
        depol_u,
        a_repl,
        b_repl,
        depolarize_prob,
    )
    return Outcome(int(a[0])), Outcome(int(b[0]))


def emit_single_blinding(
    rng: np.random.Generator,
    eve_basis_set,
    theta_a,
    cfg: ScenarioConfig,
) -> tuple[Outcome, float, Outcome, Pulse]:
    """One intercept round: Eve measures Bob's photon, then drives his blinded station.

    Eve picks a basis uniformly from eve_basis_set and measures genuinely, so
    her outcome and Alice's are one honest joint draw. She forwards a pulse
    polarized along her result direction (basis for +1, basis + pi/2 for -1)
    at single_blind_intensity, which makes Bob click exactly when his basis
    matches hers, reproducing her outcome.

    Returns (alice outcome, eve basis, eve outcome, pulse forwarded to Bob).
    """
    basis_list = [canon_angle(b) for b in eve_basis_set]
    if not basis_list:
        raise ValueError("eve_basis_set must be non-empty")
    e_basis = basis_list[int(rng.integers(0, len(basis_list)))]
    alice_out, eve_out = emit_honest_singlet(rng, theta_a, e_basis, cfg.depolarize_prob)
    direction = e_basis if eve_out is Outcome.PLUS else e_basis + HALF_PERIOD
    return alice_out, e_basis, eve_out, Pulse(cfg.single_blind_intensity, direction)


def intercept_pulse_directions(eve_basis, eve_outcome):
    """Polarization of the pulse Eve forwards after an intercept measurement.

    Vectorized: basis direction for a +1 outcome, the orthogonal direction
    for -1.
    """
    basis = np.asarray(eve_basis, dtype=np.float64)
    return np.where(
        np.asarray(eve_outcome) == int(Outcome.PLUS),
        basis,
        canon_angle(basis + HALF_PERIOD),
    )


def predict_outcome_codes(lam, theta_a, theta_b, cfg: ScenarioConfig, weak_side):
    """Eve's per-round predictions (vectorized outcome codes for both stations).

    The pulses are rebuilt from the hidden polarization and pushed through
    the same split/threshold code path the simulation uses, so predictions
    cannot drift from simulated outcomes.
    """
    ia, pa, ib, pb = faked_pulse_params(lam, cfg, weak_side)
    code_a = click_codes(*split_intensities(ia, pa, np.asarray(theta_a)))
    code_b = click_codes(*split_intensities(ib, pb, np.asarray(theta_b)))
    return code_a, code_b


def eve_predict(
    hidden_lambda: float,
    theta_a: float,
    theta_b: float,
    cfg: ScenarioConfig,
    weak_side: WeakSide = WeakSide.NONE,
):
    """Predict both stations' outcomes for one faked-state round.

    Returns None for scenarios without a hidden pulse state (honest rounds,
    single blinding): there is nothing for this bookkeeping to predict.
    weak_side must name the weakened station for the weak/strong variant.
    """
    if cfg.kind not in DOUBLE_BLIND_KINDS:
        return None
    weak_side = WeakSide(weak_side)
    if cfg.kind is ScenarioKind.DOUBLE_BLIND_EKERT and weak_side is WeakSide.NONE:
        raise ValueError("weak_side must be A or B for the weak-pulse variant")
    if cfg.kind is ScenarioKind.DOUBLE_BLIND_BBM92:
        weak_side = WeakSide.NONE
    code_a, code_b = predict_outcome_codes(
        np.asarray([hidden_lambda], dtype=np.float64),
        np.asarray([canon_angle(theta_a)]),
        np.asarray([canon_angle(theta_b)]),
        cfg,
        np.full(1, np.int8(weak_side)),
    )
    return Outcome(int(code_a[0])), Outcome(int(code_b[0]))
