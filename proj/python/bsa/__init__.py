"""Anytime-valid behavioral shift auditing.

Sequential two-sample tolerance tests driven by a betting-score network and
a wealth e-process, with neural-net-distance calibration, synthetic
experiment harnesses, and a repeated-KS baseline.
"""

from ._bsa import (
    AuditError,
    AuditTrace,
    DistanceEstimate,
    NetConfig,
    RoundRecord,
    RunRecord,
    TestConfig,
    Verdict,
    calibrate_epsilon,
    detection_curve,
    estimate_nn_distance,
    false_positive_rate,
    fetch_scores,
    ks_pvalue,
    ks_statistic,
    mean_shift,
    repeated_ks_audit,
    run_audit,
    run_exact,
    run_experiment,
    sample_scores,
    wasserstein1,
)

__all__ = [
    "AuditError",
    "AuditTrace",
    "DistanceEstimate",
    "NetConfig",
    "RoundRecord",
    "RunRecord",
    "TestConfig",
    "Verdict",
    "calibrate_epsilon",
    "detection_curve",
    "estimate_nn_distance",
    "false_positive_rate",
    "fetch_scores",
    "ks_pvalue",
    "ks_statistic",
    "mean_shift",
    "repeated_ks_audit",
    "run_audit",
    "run_exact",
    "run_experiment",
    "sample_scores",
    "wasserstein1",
]
