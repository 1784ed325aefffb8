//! Device-dependent steering quantifiers: local-hidden-state membership,
//! steering robustness, consistent steering robustness, steerable weight,
//! and steering-equivalent observables.

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_psd, range_basis, ComplexMatrix};
use crate::quantum::{deterministic_strategies, Assemblage, MeasurementAssemblage};
use crate::solver::{
    embed_hermitian, hermitian_var, HermLmi, SdpBuilder, SdpSolution, SolveStatus, SolverOptions,
};
use crate::tol;

/// Solver diagnostics carried along with each quantifier value.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub status: SolveStatus,
    pub gap: f64,
    pub residuals: (f64, f64),
    pub iterations: usize,
}

impl Diagnostics {
    pub(crate) fn from_solution(s: &SdpSolution) -> Self {
        Self { status: s.status, gap: s.gap, residuals: s.residuals, iterations: s.iterations }
    }
}

/// Value of a steering quantifier together with the optimal hidden states.
#[derive(Debug, Clone)]
pub struct SteeringResult {
    pub value: f64,
    /// Optimal hidden-state family, indexed by the deterministic strategy.
    pub hidden_states: Vec<ComplexMatrix>,
    /// Dual witness operators F_{a|x} (order: x outer, a inner).
    pub dual_witness: Vec<ComplexMatrix>,
    pub diagnostics: Diagnostics,
}

fn solver_opts() -> SolverOptions {
    SolverOptions::default()
}

pub(crate) fn check_optimal(sol: &SdpSolution, what: &str) -> Result<()> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "{what}: {:?} (gap {:.2e}, residuals {:.2e}/{:.2e})",
            sol.status, sol.gap, sol.residuals.0, sol.residuals.1
        )));
    }
    Ok(())
}

/// Shared scaffolding: one Hermitian matrix variable per deterministic
/// strategy, plus the family of (a,x) LMIs
/// `sign * (sum_l D(a|x,l) rho_l - rho_{a|x}) >= 0` followed by the
/// positivity LMIs of the rho_l.
fn build_strategy_program(
    assemblage: &Assemblage,
    sign: f64,
) -> Result<(SdpBuilder, Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let strategies = deterministic_strategies(assemblage.n_settings, assemblage.n_outcomes)?;
    let d = assemblage.dim;
    let mut b = SdpBuilder::new();
    let vars: Vec<Vec<usize>> = strategies.iter().map(|_| hermitian_var(&mut b, d)).collect();
    for x in 0..assemblage.n_settings {
        for a in 0..assemblage.n_outcomes {
            let mut lmi = HermLmi::new(d);
            for (lam, strat) in strategies.iter().enumerate() {
                if strat[x] == a {
                    lmi.add_hermitian_var(&vars[lam], sign);
                }
            }
            lmi.add_const(assemblage.state(a, x), -sign);
            lmi.finish(&mut b);
        }
    }
    for v in &vars {
        let mut psd = HermLmi::new(d);
        psd.add_hermitian_var(v, 1.0);
        psd.finish(&mut b);
    }
    Ok((b, vars, strategies))
}

fn extract_hidden_states(sol: &SdpSolution, vars: &[Vec<usize>], d: usize) -> Vec<ComplexMatrix> {
    let emb = embed_hermitian(d);
    vars.iter()
        .map(|v| {
            let coords: Vec<f64> = v.iter().map(|&i| sol.primal_point[i]).collect();
            emb.from_coordinates(&coords)
        })
        .collect()
}

fn extract_witness(sol: &SdpSolution, n_constraints: usize, d: usize) -> Vec<ComplexMatrix> {
    let emb = embed_hermitian(d);
    // The complex dual operator pairs as <emb(M), Z> = 2 tr(M extract(Z)).
    sol.lmi_duals[..n_constraints].iter().map(|z| emb.extract(z).scale_re(2.0)).collect()
}

/// Steering robustness: minimal noise weight whose admixture makes the
/// assemblage unsteerable, as the SDP
/// `min sum_l tr(rho_l) - 1  s.t.  sum_l D(a|x,l) rho_l >= rho_{a|x}`.
pub fn steering_robustness(assemblage: &Assemblage) -> Result<SteeringResult> {
    let (mut b, vars, _) = build_strategy_program(assemblage, 1.0)?;
    for v in &vars {
        for &dvar in &v[..assemblage.dim] {
            b.add_objective(dvar, 1.0);
        }
    }
    b.set_objective_offset(-1.0);
    let sol = b.build().solve(&solver_opts())?;
    check_optimal(&sol, "steering robustness")?;
    let n_ax = assemblage.n_settings * assemblage.n_outcomes;
    Ok(SteeringResult {
        value: sol.optimum,
        hidden_states: extract_hidden_states(&sol, &vars, assemblage.dim),
        dual_witness: extract_witness(&sol, n_ax, assemblage.dim),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Consistent steering robustness: steering robustness with the noise
/// constrained to reproduce the reduced state. The trace-product constraint
/// `sum_l sigma_l = tr[sum_l sigma_l] * rho_B` is linear because rho_B is
/// data.
pub fn consistent_steering_robustness(assemblage: &Assemblage) -> Result<SteeringResult> {
    let (mut b, vars, _) = build_strategy_program(assemblage, 1.0)?;
    for v in &vars {
        for &dvar in &v[..assemblage.dim] {
            b.add_objective(dvar, 1.0);
        }
    }
    b.set_objective_offset(-1.0);
    let d = assemblage.dim;
    let emb = embed_hermitian(d);
    let rho_b = assemblage.reduced_state();
    let rho_b_coords = emb.coordinates(&rho_b);
    for (p, &target) in rho_b_coords.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for v in &vars {
            coeffs.push((v[p], 1.0));
        }
        for v in &vars {
            for &dvar in &v[..d] {
                coeffs.push((dvar, -target));
            }
        }
        b.add_equality(coeffs, 0.0);
    }
    let sol = b.build().solve(&solver_opts())?;
    check_optimal(&sol, "consistent steering robustness")?;
    let n_ax = assemblage.n_settings * assemblage.n_outcomes;
    Ok(SteeringResult {
        value: sol.optimum,
        hidden_states: extract_hidden_states(&sol, &vars, d),
        dual_witness: extract_witness(&sol, n_ax, d),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Steerable weight: minimal steerable fraction over convex splits, as
/// `min 1 - tr sum_l rho_l  s.t.  rho_{a|x} >= sum_l D(a|x,l) rho_l`.
pub fn steerable_weight(assemblage: &Assemblage) -> Result<SteeringResult> {
    let (mut b, vars, _) = build_strategy_program(assemblage, -1.0)?;
    for v in &vars {
        for &dvar in &v[..assemblage.dim] {
            b.add_objective(dvar, -1.0);
        }
    }
    b.set_objective_offset(1.0);
    let sol = b.build().solve(&solver_opts())?;
    check_optimal(&sol, "steerable weight")?;
    let n_ax = assemblage.n_settings * assemblage.n_outcomes;
    Ok(SteeringResult {
        value: sol.optimum,
        hidden_states: extract_hidden_states(&sol, &vars, assemblage.dim),
        dual_witness: extract_witness(&sol, n_ax, assemblage.dim),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Local-hidden-state membership, decided by a dedicated feasibility mode:
/// minimize the uniform slack t subject to
/// `sum_l D(a|x,l) sigma_l = rho_{a|x}` (equalities, not inequalities) and
/// `sigma_l + t I >= 0`. The assemblage is unsteerable exactly when the
/// optimal slack is (numerically) nonpositive.
pub fn has_lhs_model(assemblage: &Assemblage) -> Result<(bool, Option<Vec<ComplexMatrix>>)> {
    let strategies = deterministic_strategies(assemblage.n_settings, assemblage.n_outcomes)?;
    let d = assemblage.dim;
    let emb = embed_hermitian(d);
    let mut b = SdpBuilder::new();
    let vars: Vec<Vec<usize>> = strategies.iter().map(|_| hermitian_var(&mut b, d)).collect();
    let t = b.free_var();
    b.add_objective(t, 1.0);
    let id = ComplexMatrix::identity(d);
    for v in &vars {
        let mut lmi = HermLmi::new(d);
        lmi.add_hermitian_var(v, 1.0);
        lmi.add_scalar_times_const(t, &id, 1.0);
        lmi.finish(&mut b);
    }
    // The last outcome of every setting beyond the first is linearly
    // dependent on the other rows and is dropped.
    for x in 0..assemblage.n_settings {
        let a_max = if x == 0 { assemblage.n_outcomes } else { assemblage.n_outcomes - 1 };
        for a in 0..a_max {
            let target = emb.coordinates(assemblage.state(a, x));
            for (p, &rhs) in target.iter().enumerate() {
                let coeffs: Vec<(usize, f64)> = strategies
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s[x] == a)
                    .map(|(l, _)| (vars[l][p], 1.0))
                    .collect();
                b.add_equality(coeffs, rhs);
            }
        }
    }
    let sol = b.build().solve(&solver_opts())?;
    check_optimal(&sol, "LHS feasibility probe")?;
    if sol.optimum <= tol::FEASIBILITY {
        Ok((true, Some(extract_hidden_states(&sol, &vars, d))))
    } else {
        Ok((false, None))
    }
}

/// Steering-equivalent observables B_{a|x} = rho_B^{-1/2} rho_{a|x}
/// rho_B^{-1/2}, compressed to the range of rho_B when it is rank deficient.
#[derive(Debug, Clone)]
pub struct SteeringEquivalent {
    /// Observables in range coordinates (a complete POVM there).
    pub observables: MeasurementAssemblage,
    /// Isometry from range coordinates back to the original space.
    pub range_basis: ComplexMatrix,
}

pub fn steering_equivalent_observables(assemblage: &Assemblage) -> Result<SteeringEquivalent> {
    let rho_b = assemblage.reduced_state();
    let inv_sqrt = inv_sqrt_psd(&rho_b, true)?;
    let basis = range_basis(&rho_b)?;
    let mut settings = Vec::with_capacity(assemblage.n_settings);
    for x in 0..assemblage.n_settings {
        let mut row = Vec::with_capacity(assemblage.n_outcomes);
        for a in 0..assemblage.n_outcomes {
            let big = inv_sqrt.matmul(assemblage.state(a, x)).matmul(&inv_sqrt);
            let compressed = basis.adjoint().matmul(&big).matmul(&basis);
            row.push(compressed.add(&compressed.adjoint()).scale_re(0.5));
        }
        settings.push(row);
    }
    let observables = MeasurementAssemblage::new(basis.cols(), settings)?;
    Ok(SteeringEquivalent { observables, range_basis: basis })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::quantum::{
        assemblage_from_state, chsh_optimal_settings, phi_plus, qubit_measurements,
    };

    fn phi_plus_zx_assemblage() -> Assemblage {
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        assemblage_from_state(&phi_plus(2), &alice).unwrap()
    }

    fn separable_assemblage() -> Assemblage {
        // Explicit mixture of product states measured on the A side.
        let rho = kron(&ComplexMatrix::diag(&[0.5, 0.5]), &ComplexMatrix::diag(&[0.3, 0.7]))
            .scale_re(0.6)
            .add(
                &kron(&ComplexMatrix::diag(&[0.8, 0.2]), &ComplexMatrix::diag(&[0.9, 0.1]))
                    .scale_re(0.4),
            );
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        assemblage_from_state(&rho, &alice).unwrap()
    }

    #[test]
    fn sr_of_phi_plus_zx_matches_analytic_value() {
        // Primal ansatz a(P_z + P_x) + bI and the dual witness
        // F_{a|x} = (2 - sqrt(2)) P_{a|x} meet at 3 - 2 sqrt(2).
        let asm = phi_plus_zx_assemblage();
        let sr = steering_robustness(&asm).unwrap();
        let expect = 3.0 - 2.0 * std::f64::consts::SQRT_2;
        assert!((sr.value - expect).abs() < 1e-6, "SR {}", sr.value);
        // Dual certificate: value = sum tr(F_{a|x} rho_{a|x}) - 1 and the
        // witness satisfies sum_{ax} D(a|x,l) F_{a|x} <= I for every l.
        let mut dual_val = -1.0;
        for x in 0..2 {
            for a in 0..2 {
                dual_val += sr.dual_witness[x * 2 + a].matmul(asm.state(a, x)).real_trace();
            }
        }
        assert!((dual_val - sr.value).abs() < 1e-6, "dual {dual_val} vs {}", sr.value);
        for strat in deterministic_strategies(2, 2).unwrap() {
            let mut m = ComplexMatrix::zeros(2, 2);
            for (x, &a) in strat.iter().enumerate() {
                m = m.add(&sr.dual_witness[x * 2 + a]);
            }
            let max_eig = *crate::linalg::eig_hermitian(&m).unwrap().0.last().unwrap();
            assert!(max_eig <= 1.0 + 1e-6, "dual infeasible: {max_eig}");
        }
    }

    #[test]
    fn unsteerable_assemblage_has_zero_quantifiers() {
        let asm = separable_assemblage();
        assert!(steering_robustness(&asm).unwrap().value.abs() < 1e-6);
        assert!(steerable_weight(&asm).unwrap().value.abs() < 1e-6);
        let (feasible, model) = has_lhs_model(&asm).unwrap();
        assert!(feasible);
        let model = model.unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let mut rec = ComplexMatrix::zeros(2, 2);
                for (l, strat) in deterministic_strategies(2, 2).unwrap().iter().enumerate() {
                    if strat[x] == a {
                        rec = rec.add(&model[l]);
                    }
                }
                assert!(rec.sub(asm.state(a, x)).max_abs() < 2e-6);
            }
        }
    }

    #[test]
    fn phi_plus_zx_is_steerable_with_unit_weight() {
        let asm = phi_plus_zx_assemblage();
        let (feasible, _) = has_lhs_model(&asm).unwrap();
        assert!(!feasible);
        let sw = steerable_weight(&asm).unwrap();
        assert!((sw.value - 1.0).abs() < 1e-6, "SW {}", sw.value);
    }

    #[test]
    fn single_setting_never_steers() {
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let asm = assemblage_from_state(&phi_plus(2), &alice).unwrap();
        let (feasible, _) = has_lhs_model(&asm).unwrap();
        assert!(feasible);
        assert!(steering_robustness(&asm).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn consistent_sr_dominates_sr() {
        let (alice, _) = chsh_optimal_settings();
        for &v in &[0.5, 0.85, 1.0] {
            let rho = crate::quantum::isotropic_state(2, v).unwrap();
            let asm = assemblage_from_state(&rho, &alice).unwrap();
            let sr = steering_robustness(&asm).unwrap().value;
            let src = consistent_steering_robustness(&asm).unwrap().value;
            assert!(src >= sr - 1e-7, "v={v}: SRc {src} < SR {sr}");
        }
    }

    #[test]
    fn sr_piecewise_linear_in_visibility() {
        let (alice, _) = chsh_optimal_settings();
        let sr_at = |v: f64| {
            let rho = crate::quantum::isotropic_state(2, v).unwrap();
            let asm = assemblage_from_state(&rho, &alice).unwrap();
            steering_robustness(&asm).unwrap().value
        };
        let (v1, v2) = (0.8, 1.0);
        let (s1, s2) = (sr_at(v1), sr_at(v2));
        let slope = (s2 - s1) / (v2 - v1);
        let midpoint = sr_at(0.9);
        assert!((midpoint - (s1 + slope * 0.1)).abs() < 1e-6, "not linear: {midpoint}");
        // Kink at v = 1/sqrt(2): zero below; linear segment
        // (sqrt(2) v - 1)(sqrt(2) - 1) above.
        assert!(sr_at(0.65).abs() < 1e-6);
        let sq = std::f64::consts::SQRT_2;
        assert!((s2 - (sq - 1.0) * (sq - 1.0)).abs() < 1e-6);
        assert!((s1 - (sq * 0.8 - 1.0) * (sq - 1.0)).abs() < 1e-6, "{s1}");
    }

    #[test]
    fn sr_convex_in_assemblage() {
        let asm1 = phi_plus_zx_assemblage();
        let asm2 = separable_assemblage();
        let s1 = steering_robustness(&asm1).unwrap().value;
        let s2 = steering_robustness(&asm2).unwrap().value;
        for &p in &[0.25, 0.5, 0.75] {
            let mixed = asm1.mix(&asm2, 1.0 - p).unwrap();
            let sm = steering_robustness(&mixed).unwrap().value;
            assert!(sm <= p * s1 + (1.0 - p) * s2 + 1e-7, "p={p}: {sm}");
        }
    }

    #[test]
    fn sw_monotone_under_unsteerable_noise() {
        let asm = phi_plus_zx_assemblage();
        let noise = separable_assemblage();
        let mut prev = steerable_weight(&asm).unwrap().value;
        for &p in &[0.2, 0.4, 0.6] {
            let mixed = asm.mix(&noise, p).unwrap();
            let sw = steerable_weight(&mixed).unwrap().value;
            assert!(sw <= prev + 1e-7, "p={p}: SW {sw} > {prev}");
            prev = sw;
        }
    }

    #[test]
    fn steering_equivalent_observables_structure() {
        // LHS single-state assemblage: B_{a|x} = P(a|x) * identity-on-range.
        let rho_hat = ComplexMatrix::diag(&[0.4, 0.6]);
        let probs = [[0.3, 0.7], [0.5, 0.5]];
        let mut settings = Vec::new();
        for row in probs {
            settings.push(vec![rho_hat.scale_re(row[0]), rho_hat.scale_re(row[1])]);
        }
        let asm = Assemblage::new(2, settings).unwrap();
        let se = steering_equivalent_observables(&asm).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let expect = ComplexMatrix::identity(2).scale_re(probs[x][a]);
                assert!(se.observables.element(a, x).sub(&expect).max_abs() < 1e-8);
            }
        }

        // Phi+ with sigma_z steers to the computational projectors.
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let asm = assemblage_from_state(&phi_plus(2), &alice).unwrap();
        let se = steering_equivalent_observables(&asm).unwrap();
        assert!(
            se.observables.element(0, 0).sub(&ComplexMatrix::diag(&[1.0, 0.0])).max_abs() < 1e-8
        );
        assert!(
            se.observables.element(1, 0).sub(&ComplexMatrix::diag(&[0.0, 1.0])).max_abs() < 1e-8
        );
    }
}
