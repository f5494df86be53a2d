mod common;

use common::*;
use socpos::certify::{
    certify_internal, certify_soc, falsify_by_sampling, verify_certificate, CertifyOptions, CertifyOutcome,
};
use socpos::corpus::{generate, pad_nonminimal, random_similarity, CorpusConfig, SystemClass};
use socpos::lti::{impulse_response, minimal_realization, similarity_transform, StateSpace};
use socpos::Domain;

#[test]
fn curated_verdicts() {
    let opts = CertifyOptions::default();
    assert!(certify_soc(&two_state(), &opts).is_certified());
    let scalar = StateSpace::siso(&[-1.0], &[1.0], &[1.0], 0.0, Domain::Continuous).unwrap();
    assert!(certify_soc(&scalar, &opts).is_certified());
    match certify_soc(&oscillatory(), &opts) {
        CertifyOutcome::Refuted(cx) => {
            assert!((cx.time - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
            assert!((cx.value + (-std::f64::consts::FRAC_PI_2).exp()).abs() < 1e-4);
        }
        other => panic!("expected a refutation, got {}", other.label()),
    }
}

#[test]
fn certificate_of_two_state_reverifies() {
    let sys = two_state();
    let CertifyOutcome::Certified(cert) = certify_soc(&sys, &CertifyOptions::default()) else {
        panic!("two-state example must certify");
    };
    let rep = verify_certificate(&sys, &cert, 1e-6).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(falsify_by_sampling(&sys, &falsify_at_peak_tol()).is_none());
}

#[test]
fn negative_feedthrough_is_refuted_at_zero() {
    let sys = two_state().with_d(socpos::Matrix::from_element(1, 1, -1.0)).unwrap();
    match certify_soc(&sys, &CertifyOptions::default()) {
        CertifyOutcome::Refuted(cx) => {
            assert_eq!(cx.time, 0.0);
            assert_eq!(cx.value, -1.0);
        }
        other => panic!("expected a refutation at t = 0, got {}", other.label()),
    }
}

#[test]
fn certified_corpus_entries_sample_nonnegative() {
    let cfg = CorpusConfig {
        count: 120,
        seed: 99,
        classes: vec![SystemClass::Metzler, SystemClass::StableGeneric, SystemClass::Oscillatory],
        ..CorpusConfig::default()
    };
    let opts = CertifyOptions::default();
    let mut certified = 0;
    for e in generate(&cfg).unwrap() {
        let out = certify_soc(&e.system, &opts);
        if out.is_certified() {
            certified += 1;
            assert!(
                falsify_by_sampling(&e.system, &falsify_at_peak_tol()).is_none(),
                "{} certified but sampled negative",
                e.name
            );
        }
        // refutations carry a genuinely negative sample
        if let CertifyOutcome::Refuted(cx) = out {
            assert!(cx.value < 0.0);
        }
    }
    assert!(certified >= 20, "only {certified} certified");
}

#[test]
fn verdicts_are_deterministic() {
    let cfg = CorpusConfig {
        count: 30,
        seed: 5,
        ..CorpusConfig::default()
    };
    let opts = CertifyOptions::default();
    let first: Vec<_> = generate(&cfg).unwrap().iter().map(|e| certify_soc(&e.system, &opts).label()).collect();
    let second: Vec<_> = generate(&cfg).unwrap().iter().map(|e| certify_soc(&e.system, &opts).label()).collect();
    assert_eq!(first, second);
}

#[test]
fn certificates_survive_similarity() {
    let mut r = socpos::corpus::rng_from_seed(17);
    for (e, _) in certified_systems(&certified_supply(3, 40, 2, 6), 6) {
        for _ in 0..5 {
            let t = random_similarity(&mut r, e.system.order(), 1e3);
            let moved = similarity_transform(&e.system, &t).unwrap();
            assert!(
                certify_soc(&moved, &CertifyOptions::default()).is_certified(),
                "{} lost its certificate",
                e.name
            );
        }
    }
}

#[test]
fn padded_realizations_and_their_minimal_forms_certify() {
    let mut r = socpos::corpus::rng_from_seed(23);
    let opts = CertifyOptions::default();
    for (k, (e, _)) in certified_systems(&certified_supply(4, 40, 2, 5), 6).into_iter().enumerate() {
        let padded = pad_nonminimal(&mut r, &e.system, 1 + k % 3, k % 2 == 0).unwrap();
        assert!(certify_soc(&padded, &opts).is_certified(), "{} padded", e.name);
        let min = minimal_realization(&padded, 1e-8).unwrap();
        assert_eq!(min.order(), e.system.order());
        assert!(certify_soc(&min, &opts).is_certified(), "{} minimal", e.name);
    }
}

#[test]
fn internally_positive_systems_pass_both_checks() {
    let cfg = CorpusConfig {
        count: 20,
        seed: 8,
        classes: vec![SystemClass::Metzler],
        ..CorpusConfig::default()
    };
    for e in generate(&cfg).unwrap() {
        assert!(certify_internal(&e.system), "{}", e.name);
        assert!(falsify_by_sampling(&e.system, &falsify_at_peak_tol()).is_none());
        let h = impulse_response(&e.system, 10.0, 200).unwrap();
        assert!(h.min_value() >= -1e-12 * h.peak());
    }
}
