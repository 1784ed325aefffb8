//! Fixed suite of hand-built SDPs with analytically known optima.

use steerkit::linalg::ComplexMatrix;
use steerkit::solver::{embed_hermitian, AffineMat, SdpBuilder, SdpProblem};

pub struct Oracle {
    pub name: &'static str,
    pub problem: SdpProblem,
    pub optimum: f64,
}

/// min t s.t. t >= 0.
pub fn p1_scalar_nonneg() -> Oracle {
    let mut b = SdpBuilder::new();
    let blk = b.psd_block(1);
    b.add_objective(blk.slot(0, 0), 1.0);
    Oracle { name: "min t, t >= 0", problem: b.build(), optimum: 0.0 }
}

/// min tr X s.t. X >= diag(1,2): forced optimum X = diag(1,2).
pub fn p2_forced_diag() -> Oracle {
    let mut b = SdpBuilder::new();
    let x = b.psd_block(2);
    b.add_objective(x.slot(0, 0), 1.0);
    b.add_objective(x.slot(1, 1), 1.0);
    let mut lmi = AffineMat::new(2);
    lmi.add_const(0, 0, -1.0);
    lmi.add_const(1, 1, -2.0);
    lmi.add_term(0, 0, x.slot(0, 0), 1.0);
    lmi.add_term(0, 1, x.slot(0, 1), 1.0);
    lmi.add_term(1, 1, x.slot(1, 1), 1.0);
    b.add_lmi(lmi);
    Oracle { name: "min tr X, X >= diag(1,2)", problem: b.build(), optimum: 3.0 }
}

/// lambda_max of sigma_x as an SDP: min t s.t. t I - sigma_x >= 0.
pub fn p3_lambda_max_sigma_x() -> Oracle {
    let mut b = SdpBuilder::new();
    let t = b.free_var();
    b.add_objective(t, 1.0);
    let emb = embed_hermitian(2);
    let mut sx = ComplexMatrix::zeros(2, 2);
    sx.set(0, 1, 1.0.into());
    sx.set(1, 0, 1.0.into());
    let mut lmi = AffineMat::new(4);
    lmi.add_const_mat(&emb.embed(&sx), -1.0);
    for i in 0..4 {
        lmi.add_term(i, i, t, 1.0);
    }
    b.add_lmi(lmi);
    Oracle { name: "lambda_max(sigma_x)", problem: b.build(), optimum: 1.0 }
}

/// min x s.t. [[1, x],[x, 1]] >= 0: optimum -1.
pub fn p4_correlation_bound() -> Oracle {
    let mut b = SdpBuilder::new();
    let x = b.free_var();
    b.add_objective(x, 1.0);
    let mut lmi = AffineMat::new(2);
    lmi.add_const(0, 0, 1.0);
    lmi.add_const(1, 1, 1.0);
    lmi.add_term(0, 1, x, 1.0);
    b.add_lmi(lmi);
    Oracle { name: "min x, [[1,x],[x,1]] >= 0", problem: b.build(), optimum: -1.0 }
}

/// Schur complement: min t s.t. [[t, 3],[3, 1]] >= 0 gives t = 9, with the
/// off-diagonal fixed through an equality on a free variable.
pub fn p5_schur_equality() -> Oracle {
    let mut b = SdpBuilder::new();
    let t = b.free_var();
    let u = b.free_var();
    b.add_objective(t, 1.0);
    b.add_equality(vec![(u, 1.0)], 3.0);
    let mut lmi = AffineMat::new(2);
    lmi.add_const(1, 1, 1.0);
    lmi.add_term(0, 0, t, 1.0);
    lmi.add_term(0, 1, u, 1.0);
    b.add_lmi(lmi);
    Oracle { name: "schur complement t >= u^2, u = 3", problem: b.build(), optimum: 9.0 }
}

/// LP as 1x1 blocks: min 2a + b + 3c s.t. a + b + c = 1, vars >= 0.
pub fn p6_lp_simplex() -> Oracle {
    let mut b = SdpBuilder::new();
    let a = b.psd_block(1).slot(0, 0);
    let x = b.psd_block(1).slot(0, 0);
    let c = b.psd_block(1).slot(0, 0);
    b.add_objective(a, 2.0);
    b.add_objective(x, 1.0);
    b.add_objective(c, 3.0);
    b.add_equality(vec![(a, 1.0), (x, 1.0), (c, 1.0)], 1.0);
    Oracle { name: "lp over simplex", problem: b.build(), optimum: 1.0 }
}

/// lambda_max of diag(1,2,3): min t s.t. tI >= diag(1,2,3).
pub fn p7_lambda_max_diag() -> Oracle {
    let mut b = SdpBuilder::new();
    let t = b.free_var();
    b.add_objective(t, 1.0);
    let mut lmi = AffineMat::new(3);
    lmi.add_const(0, 0, -1.0);
    lmi.add_const(1, 1, -2.0);
    lmi.add_const(2, 2, -3.0);
    for i in 0..3 {
        lmi.add_term(i, i, t, 1.0);
    }
    b.add_lmi(lmi);
    Oracle { name: "lambda_max(diag(1,2,3))", problem: b.build(), optimum: 3.0 }
}

/// Trace-constrained ground-state energy: min <H, X> s.t. tr X = 1, X >= 0
/// with H = diag(0.5, 2): optimum 0.5.
pub fn p8_ground_state() -> Oracle {
    let mut b = SdpBuilder::new();
    let x = b.psd_block(2);
    b.add_objective(x.slot(0, 0), 0.5);
    b.add_objective(x.slot(1, 1), 2.0);
    b.add_equality(vec![(x.slot(0, 0), 1.0), (x.slot(1, 1), 1.0)], 1.0);
    Oracle { name: "ground state of diag(0.5,2)", problem: b.build(), optimum: 0.5 }
}

/// Hermitian embedding: lambda_min of sigma_y as max t s.t. sigma_y - tI >= 0
/// (returns -(optimum) = -1 -> objective -t minimized = ... optimum -1).
pub fn p9_lambda_min_sigma_y() -> Oracle {
    let mut b = SdpBuilder::new();
    let t = b.free_var();
    // max t  <=>  min -t; report optimum of -t which is -lambda_min = -(-1).
    b.add_objective(t, -1.0);
    let emb = embed_hermitian(2);
    let mut sy = ComplexMatrix::zeros(2, 2);
    sy.set(0, 1, num_complex::Complex64::new(0.0, -1.0));
    sy.set(1, 0, num_complex::Complex64::new(0.0, 1.0));
    let mut lmi = AffineMat::new(4);
    lmi.add_const_mat(&emb.embed(&sy), 1.0);
    for i in 0..4 {
        lmi.add_term(i, i, t, -1.0);
    }
    b.add_lmi(lmi);
    Oracle { name: "-lambda_min(sigma_y)", problem: b.build(), optimum: 1.0 }
}

/// Duplicated (linearly dependent) equality rows exercising the regularized
/// KKT path: min x + y s.t. x + y = 1 stated twice, x, y >= 0.
pub fn p10_dependent_rows() -> Oracle {
    let mut b = SdpBuilder::new();
    let x = b.psd_block(1).slot(0, 0);
    let y = b.psd_block(1).slot(0, 0);
    b.add_objective(x, 1.0);
    b.add_objective(y, 1.0);
    b.add_equality(vec![(x, 1.0), (y, 1.0)], 1.0);
    b.add_equality(vec![(x, 1.0), (y, 1.0)], 1.0);
    Oracle { name: "dependent equality rows", problem: b.build(), optimum: 1.0 }
}

pub fn suite() -> Vec<Oracle> {
    vec![
        p1_scalar_nonneg(),
        p2_forced_diag(),
        p3_lambda_max_sigma_x(),
        p4_correlation_bound(),
        p5_schur_equality(),
        p6_lp_simplex(),
        p7_lambda_max_diag(),
        p8_ground_state(),
        p9_lambda_min_sigma_y(),
        p10_dependent_rows(),
    ]
}

