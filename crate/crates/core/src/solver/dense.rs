//! Dense real symmetric kernels for the interior-point solver: Cholesky,
//! quasi-definite LDL^T, and step-length estimation by bisection.

/// Dense symmetric matrix, full row-major storage.
#[derive(Debug, Clone)]
pub struct SymMat {
    n: usize,
    a: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = s;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Sets entry (i,j) and its mirror.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    /// Adds to entry (i,j) and its mirror.
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
        if i != j {
            self.a[j * self.n + i] += v;
        }
    }

    pub fn raw(&self) -> &[f64] {
        &self.a
    }

    pub fn add_scaled(&mut self, other: &SymMat, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += s * y;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.a {
            *x *= s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &SymMat) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    /// Frobenius inner product with a general (not necessarily symmetric)
    /// matrix in row-major storage.
    pub fn dot_general(&self, g: &[f64]) -> f64 {
        self.a.iter().zip(g).map(|(x, y)| x * y).sum()
    }

    /// Symmetric part of a general square matrix.
    pub fn from_general_symmetrized(n: usize, g: &[f64]) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = 0.5 * (g[i * n + j] + g[j * n + i]);
            }
        }
        m
    }

    /// Cholesky factor L with `L L^T = self`; fails on non-positive pivots.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Inverse via Cholesky; `None` if not positive definite.
    pub fn inverse_spd(&self) -> Option<SymMat> {
        let ch = self.cholesky()?;
        let n = self.n;
        let mut inv = SymMat::zeros(n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            ch.solve_in_place(&mut col);
            for i in 0..n {
                inv.a[i * n + j] = col[i];
            }
        }
        // Symmetrize to remove roundoff drift.
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (inv.a[i * n + j] + inv.a[j * n + i]);
                inv.a[i * n + j] = v;
                inv.a[j * n + i] = v;
            }
        }
        Some(inv)
    }
}

/// Lower-triangular Cholesky factor.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Multiplies two general square row-major matrices.
pub fn gemm(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let av = a[i * n + k];
            if av == 0.0 {
                continue;
            }
            let row = &b[k * n..(k + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, &bv) in dst.iter_mut().zip(row) {
                *d += av * bv;
            }
        }
    }
    out
}

/// Largest step `alpha` in [0, 1] with `x + alpha dx` positive definite,
/// located by bisection on Cholesky success. The returned value is always
/// certified feasible (a successful factorization was observed at it), and
/// 0 is returned when even tiny steps fail.
pub fn psd_step_limit(x: &SymMat, dx: &SymMat) -> f64 {
    let n = x.dim();
    let mut trial = SymMat::zeros(n);
    let mut test = |alpha: f64| -> bool {
        trial.a.copy_from_slice(&x.a);
        trial.add_scaled(dx, alpha);
        trial.cholesky().is_some()
    };
    if test(1.0) {
        return 1.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if test(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Quasi-definite LDL^T factorization without pivoting: `K = L D L^T` with
/// unit lower-triangular L and diagonal D. Intended for KKT matrices of the
/// form `[[H + dI, A^T], [A, -dI]]`, which admit such a factorization.
pub struct Ldl {
    n: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    /// Factors a quasi-definite matrix whose leading `n_pos` pivots are
    /// expected positive and the rest negative. Pivots degraded by roundoff
    /// are clamped to a tiny value of the expected sign so the solve never
    /// produces infinities.
    pub fn factor(k: &SymMat, n_pos: usize) -> Ldl {
        let n = k.dim();
        let scale = k.max_abs().max(1.0);
        let eps = 1e-14 * scale;
        let mut l = vec![0.0; n * n];
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = k.get(j, j);
            for p in 0..j {
                dj -= l[j * n + p] * l[j * n + p] * d[p];
            }
            if j < n_pos {
                if !(dj > eps) {
                    dj = eps;
                }
            } else if !(dj < -eps) {
                dj = -eps;
            }
            d[j] = dj;
            l[j * n + j] = 1.0;
            for i in (j + 1)..n {
                let mut v = k.get(i, j);
                for p in 0..j {
                    v -= l[i * n + p] * l[j * n + p] * d[p];
                }
                l[i * n + j] = v / dj;
            }
        }
        Ldl { n, l, d }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let mut m = SymMat::zeros(3);
        m.set_sym(0, 0, 4.0);
        m.set_sym(1, 1, 5.0);
        m.set_sym(2, 2, 6.0);
        m.set_sym(0, 1, 1.0);
        m.set_sym(1, 2, 2.0);
        let ch = m.cholesky().unwrap();
        let mut b = vec![1.0, 2.0, 3.0];
        let expect = b.clone();
        ch.solve_in_place(&mut b);
        // multiply back
        let mut back = vec![0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                back[i] += m.get(i, j) * b[j];
            }
        }
        for (x, y) in back.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = SymMat::identity(2);
        m.set_sym(0, 1, 2.0);
        assert!(m.cholesky().is_none());
    }

    #[test]
    fn step_limit_boundary() {
        let x = SymMat::identity(2);
        let mut dx = SymMat::zeros(2);
        dx.set_sym(0, 0, -2.0); // singular at alpha = 0.5
        dx.set_sym(1, 1, 1.0);
        let a = psd_step_limit(&x, &dx);
        assert!(a <= 0.5 && a > 0.49, "{a}");
        let full = psd_step_limit(&x, &SymMat::identity(2));
        assert_eq!(full, 1.0);
    }

    #[test]
    fn ldl_solves_quasi_definite() {
        // [[2, 1],[1, -1]] is quasi-definite.
        let mut k = SymMat::zeros(2);
        k.set_sym(0, 0, 2.0);
        k.set_sym(0, 1, 1.0);
        k.set_sym(1, 1, -1.0);
        let f = Ldl::factor(&k, 1);
        let mut b = vec![3.0, 0.0];
        f.solve_in_place(&mut b);
        // Solution of 2x + y = 3, x - y = 0 is x = y = 1.
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }
}
