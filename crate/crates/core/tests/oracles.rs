mod common;

use common::*;

#[test]
fn field_joint_normalises_and_telescopes() {
    let r = joint_oracle(100, 11);
    assert!(r.max_normalisation_error < 1e-10, "{r:?}");
    assert!(r.max_brook_error < 1e-10, "{r:?}");
}

#[test]
fn design_likelihood_normalises() {
    let r = design_oracle(60, 12);
    assert!(r.graphs_without_exhaustion >= 20, "{r:?}");
    assert!(r.max_normalisation_error < 1e-10, "{r:?}");
    assert!(r.max_trace_error < 1e-12, "{r:?}");
}

#[test]
fn kernel_ratios_match_log_joint_differences() {
    let r = kernel_oracle(60, 13);
    assert!(r.max_error < 1e-8, "{r:?}");
}

#[test]
fn chain_recovers_enumerated_posterior() {
    let r = posterior_oracle(4, 30_000, 14);
    assert!(r.states == 24, "{r:?}");
    assert!(r.z() < 2.0, "{r:?}");
}

#[test]
fn ppc_rarely_rejects_the_true_model() {
    let r = ppc_calibration(20, 15);
    assert!(r.rejections * 10 <= r.replications, "{r:?}");
}
