//! Generalized robustness of entanglement: the PPT-relaxation SDP and the
//! closed form for isotropic states.

use crate::error::{Error, Result};
use crate::linalg::{partial_transpose, ComplexMatrix, Subsystem};
use crate::solver::{embed_hermitian, hermitian_var, HermLmi, SdpBuilder, SolverOptions};
use crate::steering::check_optimal;
use crate::tol;

/// PPT lower bound on the generalized robustness of entanglement:
/// `min tr(omega) - 1  s.t.  omega^{T_A} >= 0, omega >= rho`.
/// Exact for two-qubit and qubit-qutrit states.
pub fn er_ppt(rho: &ComplexMatrix, dims: (usize, usize)) -> Result<f64> {
    let (da, db) = dims;
    let n = da * db;
    if rho.rows() != n || !rho.is_square() {
        return Err(Error::Dimension(format!(
            "state is {}x{}, expected {n}x{n}",
            rho.rows(),
            rho.cols()
        )));
    }
    if rho.hermitian_defect() > 1e-8 {
        return Err(Error::NonHermitian(rho.hermitian_defect()));
    }
    if (rho.real_trace() - 1.0).abs() > tol::NORMALIZATION {
        return Err(Error::InvalidArgument("state must have unit trace".into()));
    }
    let emb = embed_hermitian(n);
    let mut b = SdpBuilder::new();
    let omega = hermitian_var(&mut b, n);
    for &dvar in &omega[..n] {
        b.add_objective(dvar, 1.0);
    }
    b.set_objective_offset(-1.0);

    // omega - rho >= 0.
    let mut dominate = HermLmi::new(n);
    dominate.add_hermitian_var(&omega, 1.0);
    dominate.add_const(rho, -1.0);
    dominate.finish(&mut b);

    // Partial transpose acts linearly on the Hermitian parameters.
    let mut ppt = HermLmi::new(n);
    for (p, param) in emb.params().into_iter().enumerate() {
        let basis_pt = partial_transpose(&emb.basis(param), dims, Subsystem::A)?;
        ppt.add_scalar_times_const(omega[p], &basis_pt, 1.0);
    }
    ppt.finish(&mut b);

    let sol = b.build().solve(&SolverOptions::default())?;
    check_optimal(&sol, "entanglement robustness (PPT)")?;
    Ok(sol.optimum)
}

/// Closed-form generalized robustness of entanglement for isotropic states:
/// `max{0, (d-1)/d * ((d+1) v - 1)}`.
pub fn er_isotropic_analytic(d: usize, v: f64) -> Result<f64> {
    let lo = -1.0 / ((d * d - 1) as f64);
    if !(lo..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("visibility {v} out of range for d = {d}")));
    }
    Ok((((d - 1) as f64 / d as f64) * ((d + 1) as f64 * v - 1.0)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::quantum::isotropic_state;

    #[test]
    fn separable_diagonal_state_has_zero_er() {
        let rho = kron(&ComplexMatrix::diag(&[0.3, 0.7]), &ComplexMatrix::diag(&[0.6, 0.4]));
        let er = er_ppt(&rho, (2, 2)).unwrap();
        assert!(er.abs() < 1e-7, "ER {er}");
    }

    #[test]
    fn analytic_formula_values() {
        assert!((er_isotropic_analytic(2, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(er_isotropic_analytic(3, 0.25).unwrap().abs() < 1e-15);
        assert!((er_isotropic_analytic(3, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(er_isotropic_analytic(2, 1.5).is_err());
    }

    #[test]
    fn phi_plus_er_is_one() {
        let er = er_ppt(&isotropic_state(2, 1.0).unwrap(), (2, 2)).unwrap();
        assert!((er - 1.0).abs() < 1e-6, "ER {er}");
    }

    #[test]
    fn qubit_isotropic_matches_analytic_on_grid() {
        for k in 0..=10 {
            let v = -1.0 / 3.0 + k as f64 * (1.0 + 1.0 / 3.0) / 10.0;
            let v = v.min(1.0);
            let sdp = er_ppt(&isotropic_state(2, v).unwrap(), (2, 2)).unwrap();
            let formula = er_isotropic_analytic(2, v).unwrap();
            assert!((sdp - formula).abs() < 1e-6, "v={v}: {sdp} vs {formula}");
        }
    }

    #[test]
    fn qutrit_ppt_lower_bounds_analytic() {
        for &v in &[0.2, 0.5, 0.8, 1.0] {
            let sdp = er_ppt(&isotropic_state(3, v).unwrap(), (3, 3)).unwrap();
            let formula = er_isotropic_analytic(3, v).unwrap();
            assert!(sdp <= formula + 1e-6, "v={v}: PPT {sdp} above {formula}");
        }
    }
}
