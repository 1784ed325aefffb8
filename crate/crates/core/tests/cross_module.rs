//! Cross-module consistency: the bound hierarchies and dual-route
//! identities that tie the quantifiers together.

mod common;

use steerkit::amm::{self, DiStatus};
use steerkit::entanglement::er_ppt;
use steerkit::incompat::incompatibility_robustness;
use steerkit::npa;
use steerkit::quantum::{
    assemblage_from_state, bell_value, born_correlation, chsh_optimal_settings, isotropic_state,
    phi_plus, seesaw_optimize, BellFunctional,
};
use steerkit::steering::{
    consistent_steering_robustness, steering_equivalent_observables, steering_robustness,
};

#[test]
fn er_dominates_sr_across_chsh_family() {
    let (alice, _) = chsh_optimal_settings();
    for &v in &[0.75, 0.9, 1.0] {
        let rho = isotropic_state(2, v).unwrap();
        let er = er_ppt(&rho, (2, 2)).unwrap();
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let sr = steering_robustness(&asm).unwrap().value;
        assert!(er >= sr - 1e-7, "v={v}: ER {er} < SR {sr}");
    }
}

#[test]
fn seesaw_never_exceeds_moment_bound() {
    let f = BellFunctional::chsh();
    let cap = npa::bell_qtilde_max(&f, 2).unwrap();
    for &v in &[0.8, 1.0] {
        let rho = isotropic_state(2, v).unwrap();
        let out = seesaw_optimize(&f, &rho, (2, 2), 6, 5).unwrap();
        assert!(out.value <= cap + 1e-5, "v={v}: seesaw {} above cap {cap}", out.value);
    }
}

#[test]
fn sr_di_bell_consistency_with_full_correlation() {
    let f = BellFunctional::chsh();
    let (alice, bob) = chsh_optimal_settings();
    let p = born_correlation(&phi_plus(2), &[&alice, &bob]).unwrap();
    let t = bell_value(&f, &p).unwrap();
    let full = amm::sr_di(&p, 1).unwrap().value;
    let weak = amm::sr_di_bell(&f, t, 1).unwrap().value;
    // The Bell-only bound is weaker in general and coincides at the
    // self-testing point.
    assert!(weak <= full + 1e-6, "weak {weak} > full {full}");
    assert!((weak - full).abs() < 1e-5, "weak {weak} vs full {full}");
}

#[test]
fn sr_di_bell_monotone_and_zero_at_local_bound() {
    let f = BellFunctional::chsh();
    let zero = amm::sr_di_bell(&f, 2.0, 1).unwrap();
    assert!(zero.value.abs() < 1e-6, "{}", zero.value);
    let mut prev = -1e-9;
    for &t in &[2.0, 2.3, 2.6, 2.0 * std::f64::consts::SQRT_2] {
        let b = amm::sr_di_bell(&f, t, 1).unwrap();
        assert!(b.status.is_bound());
        assert!(b.value >= prev - 1e-7, "t={t}: {} < {prev}", b.value);
        prev = b.value;
    }
}

#[test]
fn sr_di_bell_infeasible_above_quantum_maximum() {
    let f = BellFunctional::chsh();
    let b = amm::sr_di_bell(&f, 2.95, 1).unwrap();
    assert_eq!(b.status, DiStatus::Infeasible);
    assert!(b.value.is_nan());
}

#[test]
fn nr_lower_bounds_sr_on_quantum_data() {
    let (alice, bob) = chsh_optimal_settings();
    for &v in &[0.8, 0.95] {
        let rho = isotropic_state(2, v).unwrap();
        let p = born_correlation(&rho, &[&alice, &bob]).unwrap();
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let sr = steering_robustness(&asm).unwrap().value;
        let nr = npa::nonlocal_robustness(&p, 2, false).unwrap().value;
        assert!(nr <= sr + 1e-6, "v={v}: NR {nr} > SR {sr}");
        // The consistent variant still lower-bounds the consistent SR.
        let nrc = npa::nonlocal_robustness(&p, 2, true).unwrap().value;
        let src = consistent_steering_robustness(&asm).unwrap().value;
        assert!(nrc <= src + 1e-6, "v={v}: NRc {nrc} > SRc {src}");
    }
}

#[test]
fn elegant_er_bound_stays_below_closed_form() {
    // The closed form is an upper limit for any level of the relaxation;
    // desk-scale levels certify part of it.
    let f = BellFunctional::elegant();
    let qmax = 4.0 * 3.0f64.sqrt();
    for &t in &[6.3, 6.8] {
        let b = npa::er_di_bell_mixed(&f, t, 2, 1).unwrap();
        let form = (t - 6.0) / (qmax - 6.0);
        assert!(b.value <= form + 1e-6, "t={t}: {} above {form}", b.value);
        assert!(b.value > 0.0, "t={t}: no certification at all");
    }
}

#[test]
fn steering_equivalent_observables_give_equal_ir_and_src() {
    let mut rng = common::rng(99);
    for trial in 0..6 {
        let rho = common::random_state(4, &mut rng);
        let alice = common::random_qubit_pair(&mut rng);
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let src = consistent_steering_robustness(&asm).unwrap().value;
        let se = steering_equivalent_observables(&asm).unwrap();
        let ir = incompatibility_robustness(&se.observables).unwrap().value;
        assert!((src - ir).abs() < 1e-6, "trial {trial}: SRc {src} vs IR(B) {ir}");
    }
}

#[test]
fn separable_states_always_admit_lhs_models() {
    let mut rng = common::rng(123);
    for trial in 0..6 {
        let rho = common::random_separable_state(&mut rng);
        let alice = common::random_qubit_pair(&mut rng);
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let (feasible, _) = steerkit::steering::has_lhs_model(&asm).unwrap();
        assert!(feasible, "trial {trial}: separable state flagged steerable");
        assert!(steering_robustness(&asm).unwrap().value < 1e-6);
    }
}

#[test]
fn tripartite_rejects_signaling_correlations() {
    use steerkit::quantum::{Correlation, Scenario};
    let scenario = Scenario::tripartite([2, 2, 1], [2, 2, 2]);
    let mut values = vec![0.0; scenario.table_len()];
    // Charlie's outcome leaks Alice's setting: signaling.
    let shell = Correlation { scenario: scenario.clone(), values: values.clone() };
    for y in 0..2 {
        values[shell.index3(0, 0, 0, 0, y, 0)] = 1.0;
        values[shell.index3(0, 0, 1, 1, y, 0)] = 1.0;
    }
    assert!(Correlation::new(scenario, values).is_err());
}

#[test]
fn er_di_dominates_other_routes_on_chsh_family() {
    // The moment-matrix entanglement route outperforms the steering- and
    // nonlocality-based routes on this family.
    for &v in &[0.8, 0.95] {
        let (alice, bob) = chsh_optimal_settings();
        let p = born_correlation(&isotropic_state(2, v).unwrap(), &[&alice, &bob]).unwrap();
        let er = npa::er_di_mblhg(&p, 3).unwrap().value;
        let sr = amm::sr_di(&p, 2).unwrap().value;
        let nr = npa::nonlocal_robustness(&p, 2, false).unwrap().value;
        assert!(er >= sr.max(nr) - 1e-5, "v={v}: er {er} below max({sr}, {nr})");
    }
}

#[test]
fn membership_nests_across_levels() {
    let (alice, bob) = chsh_optimal_settings();
    let mut rng = common::rng(314);
    for _ in 0..3 {
        let rho = common::random_state(4, &mut rng);
        let p = born_correlation(&rho, &[&alice, &bob]).unwrap();
        let m2 = npa::q_membership(&p, 2).unwrap();
        let m1 = npa::q_membership(&p, 1).unwrap();
        assert!(m2.feasible && m1.feasible, "quantum data must stay feasible");
        // The level-2 completion restricts the level-1 one, so slack cannot
        // improve with depth.
        assert!(m1.slack <= m2.slack + 1e-7);
    }
}

#[test]
fn er_di_bell_relaxes_full_correlation_bound() {
    let f = BellFunctional::chsh();
    let (alice, bob) = chsh_optimal_settings();
    for &v in &[0.85, 1.0] {
        let p = born_correlation(&isotropic_state(2, v).unwrap(), &[&alice, &bob]).unwrap();
        let t = bell_value(&f, &p).unwrap();
        let full = npa::er_di_mblhg(&p, 2).unwrap().value;
        let bell_only = npa::er_di_bell(&f, t, 2).unwrap().value;
        assert!(bell_only <= full + 1e-5, "v={v}: {bell_only} > {full}");
    }
}

#[test]
fn subchannel_advantage_arithmetic() {
    let (alice, bob) = chsh_optimal_settings();
    let p = born_correlation(&isotropic_state(2, 0.9).unwrap(), &[&alice, &bob]).unwrap();
    let sr = amm::sr_di(&p, 1).unwrap().value;
    // The certified discrimination advantage is SR_DI + 1 by the scalar
    // identity; a local point certifies no advantage.
    assert!(sr + 1.0 > 1.0);
    let scenario = steerkit::quantum::Scenario::bipartite(2, 2, 2, 2);
    let local =
        steerkit::quantum::deterministic_correlation(&scenario, &[0, 0], &[0, 1]).unwrap();
    let sr0 = amm::sr_di(&local, 1).unwrap().value;
    assert!((sr0 + 1.0 - 1.0).abs() < 1e-6);
}
