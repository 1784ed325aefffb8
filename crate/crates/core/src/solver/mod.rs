//! Self-contained primal-dual interior-point solver for small dense
//! semidefinite programs.
//!
//! Problems are stated over a vector of scalar variables: the scalarized
//! upper triangles of PSD-constrained matrix blocks, followed by free
//! scalars. Constraints are explicit linear equalities plus affine linear
//! matrix inequalities (LMIs) mapping the variables to symmetric matrices
//! required to be positive semidefinite.
//!
//! The algorithm is primal-dual path following with a Mehrotra
//! predictor-corrector, the HKM search direction, and a dense factorization
//! of the reduced KKT system. Free variables are handled directly in the
//! (quasi-definite, regularized) KKT system rather than split into
//! differences of nonnegative variables; equality constraints are kept
//! explicit throughout.

pub mod dense;
mod ipm;

use std::io::Write;

use num_complex::Complex64;

pub use dense::SymMat;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Sparse symmetric coefficient matrix: entries on the upper triangle, each
/// standing for the matrix `v * (E_pq + E_qp)` (or `v * E_pp` on the
/// diagonal).
#[derive(Debug, Clone, Default)]
pub struct SparseSym {
    pub dim: usize,
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Adds `v` to the symmetric entry pair (p,q)/(q,p).
    pub fn add(&mut self, p: usize, q: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        self.entries.push((p as u32, q as u32, v));
    }

    /// Merges duplicate index pairs.
    pub fn compress(&mut self) {
        self.entries.sort_unstable_by_key(|&(p, q, _)| (p, q));
        let mut out: Vec<(u32, u32, f64)> = Vec::with_capacity(self.entries.len());
        for &(p, q, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == p && last.1 == q => last.2 += v,
                _ => out.push((p, q, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        self.entries = out;
    }

    pub fn to_dense(&self) -> SymMat {
        let mut m = SymMat::zeros(self.dim);
        for &(p, q, v) in &self.entries {
            m.add_sym(p as usize, q as usize, v);
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, e| m.max(e.2.abs()))
    }

    /// tr(F * G) for a general square row-major matrix G.
    pub fn dot_general(&self, g: &[f64]) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for &(p, q, v) in &self.entries {
            let (p, q) = (p as usize, q as usize);
            s += v * g[q * n + p];
            if p != q {
                s += v * g[p * n + q];
            }
        }
        s
    }
}

/// One linear equality `sum coeffs[i].1 * x[coeffs[i].0] = rhs`.
#[derive(Debug, Clone)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Affine matrix inequality `constant + sum x_i * terms_i >= 0`.
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub dim: usize,
    pub constant: SymMat,
    pub terms: Vec<(usize, SparseSym)>,
}

/// A conic program over PSD matrix blocks and free scalars.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    /// Dimensions of PSD-constrained matrix variable blocks; their upper
    /// triangles occupy the leading scalar variables in row-major order.
    pub psd_blocks: Vec<usize>,
    /// Number of unconstrained scalar variables after the blocks.
    pub free_vars: usize,
    /// Objective coefficients over all scalarized variables (minimized).
    pub objective: Vec<f64>,
    /// Constant added to the reported optimum.
    pub objective_offset: f64,
    pub equalities: Vec<Equality>,
    pub lmi_constraints: Vec<LmiConstraint>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.psd_blocks.iter().map(|&d| d * (d + 1) / 2).sum::<usize>() + self.free_vars
    }

    /// Writes a plain-text dump (sparse triplets per constraint) for
    /// cross-checking against external solvers. The format is documented in
    /// the repository README.
    pub fn dump_text(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# sdp problem dump v1")?;
        writeln!(w, "vars {}", self.num_vars())?;
        write!(w, "psd_blocks")?;
        for d in &self.psd_blocks {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
        writeln!(w, "free {}", self.free_vars)?;
        writeln!(w, "objective_offset {:.17e}", self.objective_offset)?;
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                writeln!(w, "obj {i} {c:.17e}")?;
            }
        }
        for (r, eq) in self.equalities.iter().enumerate() {
            writeln!(w, "eq {r} {:.17e}", eq.rhs)?;
            for &(i, c) in &eq.coeffs {
                writeln!(w, "eqc {r} {i} {c:.17e}")?;
            }
        }
        for (k, lmi) in self.lmi_constraints.iter().enumerate() {
            writeln!(w, "lmi {k} {}", lmi.dim)?;
            for i in 0..lmi.dim {
                for j in i..lmi.dim {
                    let v = lmi.constant.get(i, j);
                    if v != 0.0 {
                        writeln!(w, "lmic {k} {i} {j} {v:.17e}")?;
                    }
                }
            }
            for (var, f) in &lmi.terms {
                for &(p, q, v) in &f.entries {
                    writeln!(w, "lmit {k} {var} {p} {q} {v:.17e}")?;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution> {
        if self.num_vars() == 0 {
            return Err(Error::InvalidArgument("problem has no variables".into()));
        }
        if self.objective.len() != self.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "objective length {} does not match variable count {}",
                self.objective.len(),
                self.num_vars()
            )));
        }
        Ok(ipm::solve(self, opts))
    }
}

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Iterations of stalled residuals (above 1e-5 with tiny mu) before an
    /// infeasibility verdict is attempted.
    pub stall_iters: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 200, stall_iters: 30, verbose: false }
    }
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

/// Result of a solve. On `Optimal`, the reported optimum is within the gap
/// tolerance of both the primal and dual objective values.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub optimum: f64,
    /// Values of all scalarized variables.
    pub primal_point: Vec<f64>,
    /// Equality multipliers.
    pub dual_point: Vec<f64>,
    /// Relative duality gap at the returned iterate.
    pub gap: f64,
    /// (primal, dual) residual infinity norms.
    pub residuals: (f64, f64),
    pub iterations: usize,
    /// Dual PSD matrices for the explicit LMI constraints, in input order.
    pub lmi_duals: Vec<SymMat>,
    /// Dual PSD matrices for the PSD variable blocks, in input order.
    pub block_duals: Vec<SymMat>,
    /// On an infeasibility status, the normalized certificate direction:
    /// equality multipliers for `PrimalInfeasible`, a primal ray for
    /// `DualInfeasible`.
    pub certificate: Option<Vec<f64>>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Index helpers for one PSD matrix block inside the scalarized variables.
#[derive(Debug, Clone, Copy)]
pub struct BlockRef {
    pub dim: usize,
    pub offset: usize,
}

impl BlockRef {
    /// Scalar index of entry (i, j), i <= j, of this block.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.dim);
        // Row-major upper triangle offset.
        self.offset + i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn num_slots(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Reads the block out of a scalarized point.
    pub fn extract(&self, x: &[f64]) -> SymMat {
        let mut m = SymMat::zeros(self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                m.set_sym(i, j, x[self.slot(i, j)]);
            }
        }
        m
    }
}

/// Incremental construction of an [`SdpProblem`].
#[derive(Debug, Default)]
pub struct SdpBuilder {
    psd_blocks: Vec<usize>,
    free_vars: usize,
    objective: Vec<(usize, f64)>,
    objective_offset: f64,
    equalities: Vec<Equality>,
    lmis: Vec<LmiConstraint>,
    blocks_frozen: bool,
}

impl SdpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a PSD matrix variable block. All blocks must be declared
    /// before any free variable.
    pub fn psd_block(&mut self, dim: usize) -> BlockRef {
        assert!(!self.blocks_frozen, "declare PSD blocks before free variables");
        assert!(dim >= 1);
        let offset = self.psd_blocks.iter().map(|&d| d * (d + 1) / 2).sum();
        self.psd_blocks.push(dim);
        BlockRef { dim, offset }
    }

    pub fn free_var(&mut self) -> usize {
        self.blocks_frozen = true;
        let base: usize = self.psd_blocks.iter().map(|&d| d * (d + 1) / 2).sum();
        let id = base + self.free_vars;
        self.free_vars += 1;
        id
    }

    pub fn free_var_vec(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.free_var()).collect()
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.objective.push((var, coeff));
    }

    pub fn set_objective_offset(&mut self, v: f64) {
        self.objective_offset = v;
    }

    pub fn add_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Equality { coeffs, rhs });
    }

    pub fn add_lmi(&mut self, affine: AffineMat) {
        self.lmis.push(affine.into_constraint());
    }

    pub fn build(self) -> SdpProblem {
        let n: usize =
            self.psd_blocks.iter().map(|&d| d * (d + 1) / 2).sum::<usize>() + self.free_vars;
        let mut objective = vec![0.0; n];
        for (i, c) in self.objective {
            objective[i] += c;
        }
        SdpProblem {
            psd_blocks: self.psd_blocks,
            free_vars: self.free_vars,
            objective,
            objective_offset: self.objective_offset,
            equalities: self.equalities,
            lmi_constraints: self.lmis,
        }
    }
}

/// Affine symmetric-matrix expression accumulated entry by entry.
#[derive(Debug, Clone)]
pub struct AffineMat {
    pub dim: usize,
    constant: SymMat,
    terms: std::collections::BTreeMap<usize, SparseSym>,
}

impl AffineMat {
    pub fn new(dim: usize) -> Self {
        Self { dim, constant: SymMat::zeros(dim), terms: Default::default() }
    }

    /// Adds `v` to the constant at the symmetric entry pair (i,j)/(j,i).
    pub fn add_const(&mut self, i: usize, j: usize, v: f64) {
        self.constant.add_sym(i, j, v);
    }

    /// Adds `coeff * x[var]` at the symmetric entry pair (i,j)/(j,i).
    pub fn add_term(&mut self, i: usize, j: usize, var: usize, coeff: f64) {
        self.terms.entry(var).or_insert_with(|| SparseSym::new(self.dim)).add(i, j, coeff);
    }

    /// Adds a whole symmetric matrix to the constant part.
    pub fn add_const_mat(&mut self, m: &SymMat, scale: f64) {
        debug_assert_eq!(m.dim(), self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                self.add_const(i, j, scale * m.get(i, j));
            }
        }
    }

    /// Adds `scale * m * x[var]` for a symmetric coefficient matrix.
    pub fn add_term_mat(&mut self, var: usize, m: &SymMat, scale: f64) {
        debug_assert_eq!(m.dim(), self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = scale * m.get(i, j);
                if v != 0.0 {
                    self.add_term(i, j, var, v);
                }
            }
        }
    }

    fn into_constraint(self) -> LmiConstraint {
        let terms = self
            .terms
            .into_iter()
            .map(|(var, mut f)| {
                f.compress();
                (var, f)
            })
            .filter(|(_, f)| !f.entries.is_empty())
            .collect();
        LmiConstraint { dim: self.dim, constant: self.constant, terms }
    }
}

/// Real-symmetric embedding of a d x d Hermitian matrix as the 2d x 2d block
/// `[[Re, -Im], [Im, Re]]`. A Hermitian matrix is PSD exactly when its
/// embedding is, and traces double under the embedding (callers halve).
#[derive(Debug, Clone, Copy)]
pub struct HermitianEmbedding {
    pub dim: usize,
}

/// Coordinates of a Hermitian matrix: diagonal entries, then real and
/// imaginary parts of the strict upper triangle, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HermParam {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

pub fn embed_hermitian(dim: usize) -> HermitianEmbedding {
    assert!(dim >= 1);
    HermitianEmbedding { dim }
}

impl HermitianEmbedding {
    pub fn param_count(&self) -> usize {
        self.dim * self.dim
    }

    pub fn params(&self) -> Vec<HermParam> {
        let mut out = Vec::with_capacity(self.param_count());
        for i in 0..self.dim {
            out.push(HermParam::Diag(i));
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                out.push(HermParam::Re(i, j));
                out.push(HermParam::Im(i, j));
            }
        }
        out
    }

    /// Hermitian basis matrix of one parameter.
    pub fn basis(&self, p: HermParam) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        match p {
            HermParam::Diag(i) => m.set(i, i, Complex64::new(1.0, 0.0)),
            HermParam::Re(i, j) => {
                m.set(i, j, Complex64::new(1.0, 0.0));
                m.set(j, i, Complex64::new(1.0, 0.0));
            }
            HermParam::Im(i, j) => {
                m.set(i, j, Complex64::new(0.0, 1.0));
                m.set(j, i, Complex64::new(0.0, -1.0));
            }
        }
        m
    }

    /// Parameter values representing a given Hermitian matrix.
    pub fn coordinates(&self, m: &ComplexMatrix) -> Vec<f64> {
        self.params()
            .into_iter()
            .map(|p| match p {
                HermParam::Diag(i) => m.get(i, i).re,
                HermParam::Re(i, j) => m.get(i, j).re,
                HermParam::Im(i, j) => m.get(i, j).im,
            })
            .collect()
    }

    /// Hermitian matrix from parameter values.
    pub fn from_coordinates(&self, x: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d, d);
        let mut it = x.iter();
        for i in 0..d {
            m.set(i, i, Complex64::new(*it.next().unwrap(), 0.0));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let re = *it.next().unwrap();
                let im = *it.next().unwrap();
                m.set(i, j, Complex64::new(re, im));
                m.set(j, i, Complex64::new(re, -im));
            }
        }
        m
    }

    /// Embeds a Hermitian matrix as a real symmetric 2d x 2d matrix.
    pub fn embed(&self, m: &ComplexMatrix) -> SymMat {
        let d = self.dim;
        let mut out = SymMat::zeros(2 * d);
        for i in 0..d {
            for j in i..d {
                let v = m.get(i, j);
                out.set_sym(i, j, v.re);
                out.set_sym(d + i, d + j, v.re);
                if i != j {
                    // [[Re, -Im],[Im, Re]]: entry (i, d+j) = -Im_ij.
                    out.set_sym(i, d + j, -v.im);
                    out.set_sym(j, d + i, v.im);
                }
            }
        }
        out
    }

    /// Recovers the Hermitian matrix represented by a structured (or nearly
    /// structured) real symmetric 2d x 2d matrix, averaging the redundant
    /// copies. Traces halve here, undoing the doubling of `embed`.
    pub fn extract(&self, s: &SymMat) -> ComplexMatrix {
        let d = self.dim;
        debug_assert_eq!(s.dim(), 2 * d);
        ComplexMatrix::from_fn(d, d, |i, j| {
            let re = 0.5 * (s.get(i, j) + s.get(d + i, d + j));
            let im = 0.5 * (s.get(d + i, j) - s.get(i, d + j));
            Complex64::new(re, im)
        })
    }
}

/// Accumulator for an LMI over Hermitian-parameterized variables; produces
/// the embedded real LMI.
pub struct HermLmi {
    emb: HermitianEmbedding,
    affine: AffineMat,
}

impl HermLmi {
    pub fn new(dim: usize) -> Self {
        Self { emb: embed_hermitian(dim), affine: AffineMat::new(2 * dim) }
    }

    /// Adds `scale * M` (Hermitian constant) to the LMI.
    pub fn add_const(&mut self, m: &ComplexMatrix, scale: f64) {
        let e = self.emb.embed(m);
        self.affine.add_const_mat(&e, scale);
    }

    /// Adds `scale * x[var] * M` for a scalar variable and a Hermitian
    /// constant matrix.
    pub fn add_scalar_times_const(&mut self, var: usize, m: &ComplexMatrix, scale: f64) {
        let e = self.emb.embed(m);
        self.affine.add_term_mat(var, &e, scale);
    }

    /// Adds `scale * H(vars)` where `vars` are the Hermitian parameters of a
    /// d x d matrix variable, ordered as [`HermitianEmbedding::params`].
    pub fn add_hermitian_var(&mut self, vars: &[usize], scale: f64) {
        let params = self.emb.params();
        debug_assert_eq!(vars.len(), params.len());
        let d = self.emb.dim;
        for (&v, p) in vars.iter().zip(params) {
            match p {
                HermParam::Diag(i) => {
                    self.affine.add_term(i, i, v, scale);
                    self.affine.add_term(d + i, d + i, v, scale);
                }
                HermParam::Re(i, j) => {
                    self.affine.add_term(i, j, v, scale);
                    self.affine.add_term(d + i, d + j, v, scale);
                }
                HermParam::Im(i, j) => {
                    self.affine.add_term(i, d + j, v, -scale);
                    self.affine.add_term(j, d + i, v, scale);
                }
            }
        }
    }

    pub fn finish(self, builder: &mut SdpBuilder) {
        builder.add_lmi(self.affine);
    }
}

/// Declares the d^2 parameters of a Hermitian matrix variable and returns
/// their indices, ordered as [`HermitianEmbedding::params`].
pub fn hermitian_var(builder: &mut SdpBuilder, dim: usize) -> Vec<usize> {
    builder.free_var_vec(dim * dim)
}

/// Indices of the diagonal parameters of a Hermitian variable (its trace).
pub fn hermitian_trace_vars(vars: &[usize], dim: usize) -> Vec<usize> {
    vars[..dim].to_vec()
}
