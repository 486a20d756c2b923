"""Detector-blinding attack simulator for entanglement-based QKD.

The package models threshold detector stations driven into linear mode by
bright light, an eavesdropper source that exploits that regime in BBM92 and
Ekert sessions, and the analysis layer (correlations, CHSH, efficiencies,
fair-sampling monitors) used to study when the attack stays invisible.
"""

from __future__ import annotations

from .analysis import (
    EfficiencyReport,
    FairSamplingReport,
    QUANTUM_CHSH_MAX,
    chsh_bound_conditional,
    chsh_bound_detection,
    estimate_efficiencies,
    fair_sampling_monitor,
    oracle_corr_bbm92,
    oracle_corr_ekert,
    oracle_eta,
    oracle_eta_conditional,
    oracle_weak_detection_prob,
    weak_side_detection_rate,
)
from .optics import (
    DetectorStation,
    Outcome,
    Pulse,
    canon_angle,
    malus_split,
    measure_pulse,
    threshold_click,
    wrap_diff,
)
from .protocol import (
    BBM92_SETTINGS,
    CHSH_QUAD,
    ChshResult,
    CorrelationEstimate,
    EKERT_ALICE_SETTINGS,
    EKERT_BOB_SETTINGS,
    ProtocolConfig,
    ProtocolKind,
    RoundRecord,
    SessionRecords,
    SiftedKey,
    chsh_score,
    chsh_select,
    chsh_value,
    correlation_estimate,
    eve_knowledge_audit,
    eve_prediction_report,
    public_rounds,
    run_session,
    sift_bbm92,
)
from .sources import (
    DEFAULT_ALPHA,
    EmittedRound,
    ScenarioConfig,
    ScenarioKind,
    WeakSide,
    WeakSidePolicy,
    emit_double_blind_bbm92,
    emit_double_blind_ekert,
    emit_honest_singlet,
    emit_single_blinding,
    eve_predict,
    weak_intensity,
)

__version__ = "0.1.0"

__all__ = [
    "BBM92_SETTINGS",
    "CHSH_QUAD",
    "ChshResult",
    "CorrelationEstimate",
    "DEFAULT_ALPHA",
    "DetectorStation",
    "EKERT_ALICE_SETTINGS",
    "EKERT_BOB_SETTINGS",
    "EfficiencyReport",
    "EmittedRound",
    "FairSamplingReport",
    "Outcome",
    "ProtocolConfig",
    "ProtocolKind",
    "Pulse",
    "QUANTUM_CHSH_MAX",
    "RoundRecord",
    "ScenarioConfig",
    "ScenarioKind",
    "SessionRecords",
    "SiftedKey",
    "WeakSide",
    "WeakSidePolicy",
    "canon_angle",
    "chsh_bound_conditional",
    "chsh_bound_detection",
    "chsh_score",
    "chsh_select",
    "chsh_value",
    "correlation_estimate",
    "emit_double_blind_bbm92",
    "emit_double_blind_ekert",
    "emit_honest_singlet",
    "emit_single_blinding",
    "estimate_efficiencies",
    "eve_knowledge_audit",
    "eve_prediction_report",
    "eve_predict",
    "fair_sampling_monitor",
    "malus_split",
    "measure_pulse",
    "oracle_corr_bbm92",
    "oracle_corr_ekert",
    "oracle_eta",
    "oracle_eta_conditional",
    "oracle_weak_detection_prob",
    "public_rounds",
    "run_session",
    "sift_bbm92",
    "threshold_click",
    "weak_intensity",
    "weak_side_detection_rate",
    "wrap_diff",
    "__version__",
]
