//! Measurement-incompatibility quantifiers: joint-measurability test,
//! incompatibility robustness, incompatibility weight.

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::quantum::{deterministic_strategies, MeasurementAssemblage};
use crate::solver::{embed_hermitian, hermitian_var, HermLmi, SdpBuilder, SolverOptions};
use crate::steering::{check_optimal, Diagnostics};
use crate::tol;

/// Value of an incompatibility quantifier with the optimal parent operators.
#[derive(Debug, Clone)]
pub struct IncompatResult {
    pub value: f64,
    /// Optimal parent family G_lambda, indexed by deterministic strategy.
    pub parent: Vec<ComplexMatrix>,
    pub diagnostics: Diagnostics,
}

fn extract_parents(
    sol: &crate::solver::SdpSolution,
    vars: &[Vec<usize>],
    d: usize,
) -> Vec<ComplexMatrix> {
    let emb = embed_hermitian(d);
    vars.iter()
        .map(|v| {
            let coords: Vec<f64> = v.iter().map(|&i| sol.primal_point[i]).collect();
            emb.from_coordinates(&coords)
        })
        .collect()
}

/// Joint measurability: minimize the uniform slack t with
/// `sum_l D(a|x,l) G_l = E_{a|x}` and `G_l + t I >= 0`; jointly measurable
/// exactly when the optimal slack is (numerically) nonpositive.
pub fn is_jointly_measurable(
    meas: &MeasurementAssemblage,
) -> Result<(bool, Option<Vec<ComplexMatrix>>)> {
    let strategies = deterministic_strategies(meas.n_settings, meas.n_outcomes)?;
    let d = meas.dim;
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
    // Drop the dependent last-outcome rows of every setting beyond the
    // first (they follow from completeness).
    for x in 0..meas.n_settings {
        let a_max = if x == 0 { meas.n_outcomes } else { meas.n_outcomes - 1 };
        for a in 0..a_max {
            let target = emb.coordinates(meas.element(a, x));
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
    let sol = b.build().solve(&SolverOptions::default())?;
    check_optimal(&sol, "joint-measurability probe")?;
    if sol.optimum <= tol::FEASIBILITY {
        Ok((true, Some(extract_parents(&sol, &vars, d))))
    } else {
        Ok((false, None))
    }
}

/// Incompatibility robustness:
/// `min (1/d) sum_l tr G_l - 1` subject to
/// `sum_l D(a|x,l) G_l >= E_{a|x}`, `G_l >= 0`, and
/// `sum_l G_l = I (1/d) sum_l tr G_l`.
pub fn incompatibility_robustness(meas: &MeasurementAssemblage) -> Result<IncompatResult> {
    let strategies = deterministic_strategies(meas.n_settings, meas.n_outcomes)?;
    let d = meas.dim;
    let emb = embed_hermitian(d);
    let mut b = SdpBuilder::new();
    let vars: Vec<Vec<usize>> = strategies.iter().map(|_| hermitian_var(&mut b, d)).collect();
    for v in &vars {
        for &dvar in &v[..d] {
            b.add_objective(dvar, 1.0 / d as f64);
        }
    }
    b.set_objective_offset(-1.0);
    for x in 0..meas.n_settings {
        for a in 0..meas.n_outcomes {
            let mut lmi = HermLmi::new(d);
            for (l, strat) in strategies.iter().enumerate() {
                if strat[x] == a {
                    lmi.add_hermitian_var(&vars[l], 1.0);
                }
            }
            lmi.add_const(meas.element(a, x), -1.0);
            lmi.finish(&mut b);
        }
    }
    for v in &vars {
        let mut psd = HermLmi::new(d);
        psd.add_hermitian_var(v, 1.0);
        psd.finish(&mut b);
    }
    // sum_l G_l[p] - I[p] (1/d) sum_l tr G_l = 0 for every parameter p.
    let id_coords = emb.coordinates(&ComplexMatrix::identity(d));
    for (p, &ip) in id_coords.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for v in &vars {
            coeffs.push((v[p], 1.0));
        }
        if ip != 0.0 {
            for v in &vars {
                for &dvar in &v[..d] {
                    coeffs.push((dvar, -ip / d as f64));
                }
            }
        }
        b.add_equality(coeffs, 0.0);
    }
    let sol = b.build().solve(&SolverOptions::default())?;
    check_optimal(&sol, "incompatibility robustness")?;
    Ok(IncompatResult {
        value: sol.optimum,
        parent: extract_parents(&sol, &vars, d),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Incompatibility weight, as the operator analog of the steerable-weight
/// SDP: `min 1 - (1/d) sum_l tr G_l` subject to
/// `E_{a|x} >= sum_l D(a|x,l) G_l` and `G_l >= 0`. The value is 0 exactly
/// for jointly measurable assemblages and at most 1.
pub fn incompatibility_weight(meas: &MeasurementAssemblage) -> Result<IncompatResult> {
    let strategies = deterministic_strategies(meas.n_settings, meas.n_outcomes)?;
    let d = meas.dim;
    let mut b = SdpBuilder::new();
    let vars: Vec<Vec<usize>> = strategies.iter().map(|_| hermitian_var(&mut b, d)).collect();
    for v in &vars {
        for &dvar in &v[..d] {
            b.add_objective(dvar, -1.0 / d as f64);
        }
    }
    b.set_objective_offset(1.0);
    for x in 0..meas.n_settings {
        for a in 0..meas.n_outcomes {
            let mut lmi = HermLmi::new(d);
            lmi.add_const(meas.element(a, x), 1.0);
            for (l, strat) in strategies.iter().enumerate() {
                if strat[x] == a {
                    lmi.add_hermitian_var(&vars[l], -1.0);
                }
            }
            lmi.finish(&mut b);
        }
    }
    for v in &vars {
        let mut psd = HermLmi::new(d);
        psd.add_hermitian_var(v, 1.0);
        psd.finish(&mut b);
    }
    let sol = b.build().solve(&SolverOptions::default())?;
    check_optimal(&sol, "incompatibility weight")?;
    Ok(IncompatResult {
        value: sol.optimum,
        parent: extract_parents(&sol, &vars, d),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

fn rectangular_check(meas: &MeasurementAssemblage) -> Result<()> {
    for e in &meas.elements {
        if !e.is_square() || e.rows() != meas.dim {
            return Err(Error::Dimension("POVM elements must be square of the stated dim".into()));
        }
    }
    Ok(())
}

/// Convenience wrapper validating shape before quantifying.
pub fn incompatibility_robustness_checked(
    meas: &MeasurementAssemblage,
) -> Result<IncompatResult> {
    rectangular_check(meas)?;
    incompatibility_robustness(meas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::qubit_measurements;

    fn zx_pair() -> MeasurementAssemblage {
        qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn single_setting_always_jm() {
        let m = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let (jm, parent) = is_jointly_measurable(&m).unwrap();
        assert!(jm);
        assert!(parent.is_some());
        assert!(incompatibility_robustness(&m).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn repeated_measurement_is_jm() {
        let m = qubit_measurements(&[[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
        let (jm, _) = is_jointly_measurable(&m).unwrap();
        assert!(jm);
        assert!(incompatibility_weight(&m).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn zx_pair_not_jointly_measurable() {
        let m = zx_pair();
        let (jm, _) = is_jointly_measurable(&m).unwrap();
        assert!(!jm);
        let ir = incompatibility_robustness(&m).unwrap();
        assert!(ir.value > 1e-3, "IR {}", ir.value);
    }

    #[test]
    fn ir_of_zx_pair_matches_analytic_value() {
        // alpha(P_z + P_x) + beta I primal and dual certificates meet at
        // 3 - 2 sqrt(2) (the generalized-robustness normalization).
        let ir = incompatibility_robustness(&zx_pair()).unwrap();
        let expect = 3.0 - 2.0 * std::f64::consts::SQRT_2;
        assert!((ir.value - expect).abs() < 1e-6, "IR {}", ir.value);
        // The parent reproduces the consistency normalization.
        let total: f64 = ir.parent.iter().map(|g| g.real_trace()).sum();
        let mut sum = ComplexMatrix::zeros(2, 2);
        for g in &ir.parent {
            sum = sum.add(g);
        }
        let target = ComplexMatrix::identity(2).scale_re(total / 2.0);
        assert!(sum.sub(&target).max_abs() < 1e-6);
    }

    #[test]
    fn iw_of_projective_zx_pair_is_one() {
        let iw = incompatibility_weight(&zx_pair()).unwrap();
        assert!((iw.value - 1.0).abs() < 1e-6, "IW {}", iw.value);
        assert!(iw.value <= 1.0 + 1e-8);
    }

    #[test]
    fn smeared_pair_becomes_compatible() {
        // Depolarized z/x pair: E' = eta E + (1-eta) I/2; jointly measurable
        // for eta <= 1/sqrt(2).
        let smear = |eta: f64| {
            let m = zx_pair();
            let id = ComplexMatrix::identity(2);
            let elements: Vec<Vec<ComplexMatrix>> = (0..2)
                .map(|x| {
                    (0..2)
                        .map(|a| {
                            m.element(a, x).scale_re(eta).add(&id.scale_re((1.0 - eta) * 0.5))
                        })
                        .collect()
                })
                .collect();
            MeasurementAssemblage::new(2, elements).unwrap()
        };
        let (jm_low, _) = is_jointly_measurable(&smear(0.6)).unwrap();
        assert!(jm_low);
        let (jm_high, _) = is_jointly_measurable(&smear(0.8)).unwrap();
        assert!(!jm_high);
        // IR and IW vanish together on the compatible instance.
        assert!(incompatibility_robustness(&smear(0.6)).unwrap().value.abs() < 1e-6);
        assert!(incompatibility_weight(&smear(0.6)).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn ir_invariant_under_global_unitary() {
        let m = zx_pair();
        // Rotation by pi/5 around y plus a phase: a generic unitary.
        let t = std::f64::consts::PI / 5.0;
        let u = ComplexMatrix::from_fn(2, 2, |i, j| {
            let c = t.cos();
            let s = t.sin();
            let m = [[c, -s], [s, c]];
            num_complex::Complex64::new(m[i][j], 0.0)
        });
        let rotated = m.conjugated(&u);
        let ir1 = incompatibility_robustness(&m).unwrap().value;
        let ir2 = incompatibility_robustness(&rotated).unwrap().value;
        assert!((ir1 - ir2).abs() < 1e-7, "{ir1} vs {ir2}");
    }
}
