//! Bell-scenario bookkeeping: states, measurement assemblages, Born-rule
//! correlations, assemblages, deterministic strategies, Bell functionals,
//! and a see-saw heuristic for optimal measurement settings.
//!
//! Settings and outcomes are 0-based internally (1-based only in CLI
//! output).

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, kron, kron_all, partial_trace, ComplexMatrix, Subsystem};
use crate::solver::{hermitian_var, HermLmi, SdpBuilder, SolverOptions};
use crate::tol;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) })
}

pub fn sigma_y() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m.set(0, 1, c(0.0, -1.0));
    m.set(1, 0, c(0.0, 1.0));
    m
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::diag(&[1.0, -1.0])
}

/// Maximally entangled state |Phi+_d> = sum_i |ii> / sqrt(d), as a projector.
pub fn phi_plus(d: usize) -> ComplexMatrix {
    let mut v = vec![c(0.0, 0.0); d * d];
    for i in 0..d {
        v[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    ComplexMatrix::outer(&v)
}

/// Number of parties with their setting and outcome counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub parties: usize,
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
}

impl Scenario {
    pub fn bipartite(n_x: usize, n_y: usize, n_a: usize, n_b: usize) -> Self {
        Self { parties: 2, settings: vec![n_x, n_y], outcomes: vec![n_a, n_b] }
    }

    pub fn tripartite(s: [usize; 3], o: [usize; 3]) -> Self {
        Self { parties: 3, settings: s.to_vec(), outcomes: o.to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.parties == 2 || self.parties == 3) {
            return Err(Error::Schema("only 2- and 3-party scenarios are supported".into()));
        }
        if self.settings.len() != self.parties || self.outcomes.len() != self.parties {
            return Err(Error::Schema("settings/outcomes lists must match party count".into()));
        }
        if self.settings.iter().chain(&self.outcomes).any(|&n| n == 0) {
            return Err(Error::Schema("all setting and outcome counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn table_len(&self) -> usize {
        self.settings.iter().product::<usize>() * self.outcomes.iter().product::<usize>()
    }
}

/// Conditional probability table over a Bell scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Correlation {
    pub scenario: Scenario,
    /// Bipartite layout: `[((x*n_y + y)*n_a + a)*n_b + b]`; the tripartite
    /// layout appends Charlie's indices analogously.
    pub values: Vec<f64>,
}

impl Correlation {
    pub fn new(scenario: Scenario, values: Vec<f64>) -> Result<Self> {
        let corr = Self { scenario, values };
        corr.validate()?;
        Ok(corr)
    }

    #[inline]
    pub fn index2(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let (n_y, n_a, n_b) =
            (self.scenario.settings[1], self.scenario.outcomes[0], self.scenario.outcomes[1]);
        ((x * n_y + y) * n_a + a) * n_b + b
    }

    pub fn get2(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.values[self.index2(a, b, x, y)]
    }

    #[inline]
    pub fn index3(&self, a: usize, b: usize, cc: usize, x: usize, y: usize, z: usize) -> usize {
        let s = &self.scenario;
        let (n_y, n_z) = (s.settings[1], s.settings[2]);
        let (n_a, n_b, n_c) = (s.outcomes[0], s.outcomes[1], s.outcomes[2]);
        ((((x * n_y + y) * n_z + z) * n_a + a) * n_b + b) * n_c + cc
    }

    pub fn get3(&self, a: usize, b: usize, cc: usize, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.index3(a, b, cc, x, y, z)]
    }

    /// Alice's marginal P(a|x) (validated consistent across y).
    pub fn marginal_a(&self, a: usize, x: usize) -> f64 {
        (0..self.scenario.outcomes[1]).map(|b| self.get2(a, b, x, 0)).sum()
    }

    pub fn marginal_b(&self, b: usize, y: usize) -> f64 {
        (0..self.scenario.outcomes[0]).map(|a| self.get2(a, b, 0, y)).sum()
    }

    /// Two-outcome correlator E_xy = sum_ab (-1)^(a+b) P(a,b|x,y).
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let mut e = 0.0;
        for a in 0..self.scenario.outcomes[0] {
            for b in 0..self.scenario.outcomes[1] {
                let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                e += sign * self.get2(a, b, x, y);
            }
        }
        e
    }

    /// The same bipartite correlation with the two parties exchanged:
    /// P'(b,a|y,x) = P(a,b|x,y).
    pub fn swap_parties(&self) -> Result<Correlation> {
        if self.scenario.parties != 2 {
            return Err(Error::Schema("swap_parties needs a bipartite correlation".into()));
        }
        let s = &self.scenario;
        let out = Scenario::bipartite(s.settings[1], s.settings[0], s.outcomes[1], s.outcomes[0]);
        let shell = Correlation { scenario: out.clone(), values: vec![0.0; out.table_len()] };
        let mut values = vec![0.0; out.table_len()];
        for x in 0..s.settings[0] {
            for y in 0..s.settings[1] {
                for a in 0..s.outcomes[0] {
                    for b in 0..s.outcomes[1] {
                        values[shell.index2(b, a, y, x)] = self.get2(a, b, x, y);
                    }
                }
            }
        }
        Correlation::new(out, values)
    }

    /// Bipartite marginal P(a,b|x,y) of a tripartite correlation.
    pub fn marginal_ab(&self) -> Result<Correlation> {
        if self.scenario.parties != 3 {
            return Err(Error::Schema("marginal_ab needs a tripartite correlation".into()));
        }
        let s = self.scenario.clone();
        let out = Scenario::bipartite(s.settings[0], s.settings[1], s.outcomes[0], s.outcomes[1]);
        let shell = Correlation { scenario: out.clone(), values: vec![0.0; out.table_len()] };
        let mut values = vec![0.0; out.table_len()];
        for x in 0..s.settings[0] {
            for y in 0..s.settings[1] {
                for a in 0..s.outcomes[0] {
                    for b in 0..s.outcomes[1] {
                        let v: f64 =
                            (0..s.outcomes[2]).map(|cc| self.get3(a, b, cc, x, y, 0)).sum();
                        values[shell.index2(a, b, x, y)] = v;
                    }
                }
            }
        }
        Correlation::new(out, values)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.values.len() != self.scenario.table_len() {
            return Err(Error::Schema(format!(
                "correlation table length {} does not match scenario ({} expected)",
                self.values.len(),
                self.scenario.table_len()
            )));
        }
        if self.values.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::Schema("probabilities must be nonnegative".into()));
        }
        match self.scenario.parties {
            2 => self.validate2(),
            3 => self.validate3(),
            _ => unreachable!(),
        }
    }

    fn validate2(&self) -> Result<()> {
        let s = &self.scenario;
        for x in 0..s.settings[0] {
            for y in 0..s.settings[1] {
                let mut total = 0.0;
                for a in 0..s.outcomes[0] {
                    for b in 0..s.outcomes[1] {
                        total += self.get2(a, b, x, y);
                    }
                }
                if (total - 1.0).abs() > tol::NORMALIZATION {
                    return Err(Error::Schema(format!(
                        "normalization violated at (x,y)=({x},{y}): total {total}"
                    )));
                }
            }
        }
        // No-signaling: each marginal independent of the other setting.
        for a in 0..s.outcomes[0] {
            for x in 0..s.settings[0] {
                let m0: f64 = (0..s.outcomes[1]).map(|b| self.get2(a, b, x, 0)).sum();
                for y in 1..s.settings[1] {
                    let m: f64 = (0..s.outcomes[1]).map(|b| self.get2(a, b, x, y)).sum();
                    if (m - m0).abs() > tol::NORMALIZATION {
                        return Err(Error::Schema("no-signaling violated (A side)".into()));
                    }
                }
            }
        }
        for b in 0..s.outcomes[1] {
            for y in 0..s.settings[1] {
                let m0: f64 = (0..s.outcomes[0]).map(|a| self.get2(a, b, 0, y)).sum();
                for x in 1..s.settings[0] {
                    let m: f64 = (0..s.outcomes[0]).map(|a| self.get2(a, b, x, y)).sum();
                    if (m - m0).abs() > tol::NORMALIZATION {
                        return Err(Error::Schema("no-signaling violated (B side)".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate3(&self) -> Result<()> {
        let s = &self.scenario;
        for x in 0..s.settings[0] {
            for y in 0..s.settings[1] {
                for z in 0..s.settings[2] {
                    let mut total = 0.0;
                    for a in 0..s.outcomes[0] {
                        for b in 0..s.outcomes[1] {
                            for cc in 0..s.outcomes[2] {
                                total += self.get3(a, b, cc, x, y, z);
                            }
                        }
                    }
                    if (total - 1.0).abs() > tol::NORMALIZATION {
                        return Err(Error::Schema("tripartite normalization violated".into()));
                    }
                }
            }
        }
        // Pairwise marginals must not depend on the remaining setting.
        for a in 0..s.outcomes[0] {
            for b in 0..s.outcomes[1] {
                for x in 0..s.settings[0] {
                    for y in 0..s.settings[1] {
                        let m0: f64 =
                            (0..s.outcomes[2]).map(|cc| self.get3(a, b, cc, x, y, 0)).sum();
                        for z in 1..s.settings[2] {
                            let m: f64 =
                                (0..s.outcomes[2]).map(|cc| self.get3(a, b, cc, x, y, z)).sum();
                            if (m - m0).abs() > tol::NORMALIZATION {
                                return Err(Error::Schema("no-signaling violated (AB|z)".into()));
                            }
                        }
                    }
                }
            }
        }
        for b in 0..s.outcomes[1] {
            for cc in 0..s.outcomes[2] {
                for y in 0..s.settings[1] {
                    for z in 0..s.settings[2] {
                        let m0: f64 =
                            (0..s.outcomes[0]).map(|a| self.get3(a, b, cc, 0, y, z)).sum();
                        for x in 1..s.settings[0] {
                            let m: f64 =
                                (0..s.outcomes[0]).map(|a| self.get3(a, b, cc, x, y, z)).sum();
                            if (m - m0).abs() > tol::NORMALIZATION {
                                return Err(Error::Schema("no-signaling violated (BC|x)".into()));
                            }
                        }
                    }
                }
            }
        }
        for a in 0..s.outcomes[0] {
            for cc in 0..s.outcomes[2] {
                for x in 0..s.settings[0] {
                    for z in 0..s.settings[2] {
                        let m0: f64 =
                            (0..s.outcomes[1]).map(|b| self.get3(a, b, cc, x, 0, z)).sum();
                        for y in 1..s.settings[1] {
                            let m: f64 =
                                (0..s.outcomes[1]).map(|b| self.get3(a, b, cc, x, y, z)).sum();
                            if (m - m0).abs() > tol::NORMALIZATION {
                                return Err(Error::Schema("no-signaling violated (AC|y)".into()));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// POVM table E_{a|x} for one party.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementAssemblage {
    pub dim: usize,
    pub n_settings: usize,
    pub n_outcomes: usize,
    /// Elements indexed `[x * n_outcomes + a]`.
    pub elements: Vec<ComplexMatrix>,
}

impl MeasurementAssemblage {
    pub fn new(dim: usize, elements: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let n_settings = elements.len();
        let n_outcomes = elements.first().map(|v| v.len()).unwrap_or(0);
        if n_settings == 0 || n_outcomes == 0 {
            return Err(Error::Schema("empty measurement assemblage".into()));
        }
        if elements.iter().any(|v| v.len() != n_outcomes) {
            return Err(Error::Schema("ragged outcome counts are not supported".into()));
        }
        let flat: Vec<ComplexMatrix> = elements.into_iter().flatten().collect();
        let me = Self { dim, n_settings, n_outcomes, elements: flat };
        me.validate()?;
        Ok(me)
    }

    pub fn element(&self, a: usize, x: usize) -> &ComplexMatrix {
        &self.elements[x * self.n_outcomes + a]
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            if e.rows() != self.dim || e.cols() != self.dim {
                return Err(Error::Dimension("POVM element dimension mismatch".into()));
            }
            let defect = e.hermitian_defect();
            if defect > 1e-8 {
                return Err(Error::NonHermitian(defect));
            }
            let min = e.min_eigenvalue()?;
            if min < tol::PSD_MIN_EIG {
                return Err(Error::NotPsd(min));
            }
        }
        for x in 0..self.n_settings {
            let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
            for a in 0..self.n_outcomes {
                sum = sum.add(self.element(a, x));
            }
            if sum.sub(&ComplexMatrix::identity(self.dim)).max_abs() > tol::PSD_MIN_EIG.abs() {
                return Err(Error::Schema(format!(
                    "POVM for setting {x} does not sum to identity"
                )));
            }
        }
        Ok(())
    }

    /// Maximum deviation of any element from idempotency.
    pub fn projectivity_defect(&self) -> f64 {
        self.elements.iter().map(|e| e.matmul(e).sub(e).max_abs()).fold(0.0, f64::max)
    }

    pub fn is_projective(&self, tolerance: f64) -> bool {
        self.projectivity_defect() <= tolerance
    }

    /// Conjugates every element by a unitary.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        let elements = self.elements.iter().map(|e| u.matmul(e).matmul(&u.adjoint())).collect();
        Self { dim: self.dim, n_settings: self.n_settings, n_outcomes: self.n_outcomes, elements }
    }
}

/// Family of subnormalized conditional states {rho_{a|x}} on the trusted side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assemblage {
    pub dim: usize,
    pub n_settings: usize,
    pub n_outcomes: usize,
    /// States indexed `[x * n_outcomes + a]`.
    pub states: Vec<ComplexMatrix>,
}

impl Assemblage {
    pub fn new(dim: usize, states: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let n_settings = states.len();
        let n_outcomes = states.first().map(|v| v.len()).unwrap_or(0);
        if n_settings == 0 || n_outcomes == 0 {
            return Err(Error::Schema("empty assemblage".into()));
        }
        if states.iter().any(|v| v.len() != n_outcomes) {
            return Err(Error::Schema("ragged outcome counts are not supported".into()));
        }
        let flat: Vec<ComplexMatrix> = states.into_iter().flatten().collect();
        let asm = Self { dim, n_settings, n_outcomes, states: flat };
        asm.validate()?;
        Ok(asm)
    }

    pub fn state(&self, a: usize, x: usize) -> &ComplexMatrix {
        &self.states[x * self.n_outcomes + a]
    }

    /// P(a|x) = tr rho_{a|x}.
    pub fn outcome_probability(&self, a: usize, x: usize) -> f64 {
        self.state(a, x).real_trace()
    }

    /// Reduced state rho_B = sum_a rho_{a|x}, averaged over settings.
    pub fn reduced_state(&self) -> ComplexMatrix {
        let mut avg = ComplexMatrix::zeros(self.dim, self.dim);
        for x in 0..self.n_settings {
            for a in 0..self.n_outcomes {
                avg = avg.add(self.state(a, x));
            }
        }
        avg.scale_re(1.0 / self.n_settings as f64)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.states {
            if s.rows() != self.dim || s.cols() != self.dim {
                return Err(Error::Dimension("assemblage member dimension mismatch".into()));
            }
            let defect = s.hermitian_defect();
            if defect > 1e-8 {
                return Err(Error::NonHermitian(defect));
            }
            let min = s.min_eigenvalue()?;
            if min < tol::PSD_MIN_EIG {
                return Err(Error::NotPsd(min));
            }
        }
        let mut reduced: Option<ComplexMatrix> = None;
        for x in 0..self.n_settings {
            let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
            for a in 0..self.n_outcomes {
                sum = sum.add(self.state(a, x));
            }
            if (sum.real_trace() - 1.0).abs() > tol::NORMALIZATION {
                return Err(Error::Schema(format!(
                    "assemblage not normalized for setting {x}: trace {}",
                    sum.real_trace()
                )));
            }
            if let Some(r) = &reduced {
                if sum.sub(r).max_abs() > tol::CONSISTENCY {
                    return Err(Error::Schema("no-signaling consistency violated".into()));
                }
            } else {
                reduced = Some(sum);
            }
        }
        Ok(())
    }

    /// Convex mixture `(1-p) self + p other`.
    pub fn mix(&self, other: &Assemblage, p: f64) -> Result<Assemblage> {
        if self.dim != other.dim
            || self.n_settings != other.n_settings
            || self.n_outcomes != other.n_outcomes
        {
            return Err(Error::Dimension("assemblage shape mismatch in mix".into()));
        }
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(s, o)| s.scale_re(1.0 - p).add(&o.scale_re(p)))
            .collect();
        let asm = Assemblage {
            dim: self.dim,
            n_settings: self.n_settings,
            n_outcomes: self.n_outcomes,
            states,
        };
        asm.validate()?;
        Ok(asm)
    }
}

/// Tripartite assemblage {rho^C_{ab|xy}} steered by two untrusted parties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripartiteAssemblage {
    pub dim: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// States indexed `[((x*n_y + y)*n_a + a)*n_b + b]`.
    pub states: Vec<ComplexMatrix>,
}

impl TripartiteAssemblage {
    pub fn state(&self, a: usize, b: usize, x: usize, y: usize) -> &ComplexMatrix {
        &self.states[((x * self.n_y + y) * self.n_a + a) * self.n_b + b]
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.n_x * self.n_y * self.n_a * self.n_b {
            return Err(Error::Schema("tripartite assemblage table size mismatch".into()));
        }
        for s in &self.states {
            if s.rows() != self.dim || !s.is_square() {
                return Err(Error::Dimension("tripartite member dimension mismatch".into()));
            }
            if s.hermitian_defect() > 1e-8 {
                return Err(Error::NonHermitian(s.hermitian_defect()));
            }
            let min = s.min_eigenvalue()?;
            if min < tol::PSD_MIN_EIG {
                return Err(Error::NotPsd(min));
            }
        }
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                let mut t = 0.0;
                for a in 0..self.n_a {
                    for b in 0..self.n_b {
                        t += self.state(a, b, x, y).real_trace();
                    }
                }
                if (t - 1.0).abs() > tol::NORMALIZATION {
                    return Err(Error::Schema("tripartite normalization violated".into()));
                }
            }
        }
        // Marginal consistency over x and over y (the joint family follows).
        let sum_over_a = |x: usize, y: usize, b: usize| {
            let mut m = ComplexMatrix::zeros(self.dim, self.dim);
            for a in 0..self.n_a {
                m = m.add(self.state(a, b, x, y));
            }
            m
        };
        let sum_over_b = |x: usize, y: usize, a: usize| {
            let mut m = ComplexMatrix::zeros(self.dim, self.dim);
            for b in 0..self.n_b {
                m = m.add(self.state(a, b, x, y));
            }
            m
        };
        for y in 0..self.n_y {
            for b in 0..self.n_b {
                let base = sum_over_a(0, y, b);
                for x in 1..self.n_x {
                    if sum_over_a(x, y, b).sub(&base).max_abs() > tol::CONSISTENCY {
                        return Err(Error::Schema("consistency over x violated".into()));
                    }
                }
            }
        }
        for x in 0..self.n_x {
            for a in 0..self.n_a {
                let base = sum_over_b(x, 0, a);
                for y in 1..self.n_y {
                    if sum_over_b(x, y, a).sub(&base).max_abs() > tol::CONSISTENCY {
                        return Err(Error::Schema("consistency over y violated".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Correlation P(a,b,c|x,y,z) induced by measuring the trusted party.
    pub fn correlation_with(&self, charlie: &MeasurementAssemblage) -> Result<Correlation> {
        if charlie.dim != self.dim {
            return Err(Error::Dimension("trusted-party dimension mismatch".into()));
        }
        let scenario = Scenario::tripartite(
            [self.n_x, self.n_y, charlie.n_settings],
            [self.n_a, self.n_b, charlie.n_outcomes],
        );
        let shell = Correlation { scenario: scenario.clone(), values: vec![0.0; scenario.table_len()] };
        let mut values = vec![0.0; scenario.table_len()];
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                for z in 0..charlie.n_settings {
                    for a in 0..self.n_a {
                        for b in 0..self.n_b {
                            for cc in 0..charlie.n_outcomes {
                                let v = self
                                    .state(a, b, x, y)
                                    .matmul(charlie.element(cc, z))
                                    .real_trace();
                                values[shell.index3(a, b, cc, x, y, z)] = v.max(0.0);
                            }
                        }
                    }
                }
            }
        }
        Correlation::new(scenario, values)
    }
}

/// Bell functional with real coefficients over the probability table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellFunctional {
    pub scenario: Scenario,
    /// Same layout as [`Correlation::values`].
    pub coefficients: Vec<f64>,
    pub local_bound: f64,
    pub quantum_value: Option<f64>,
}

impl BellFunctional {
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let (n_y, n_a, n_b) =
            (self.scenario.settings[1], self.scenario.outcomes[0], self.scenario.outcomes[1]);
        ((x * n_y + y) * n_a + a) * n_b + b
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coefficients[self.index(a, b, x, y)]
    }

    /// Builds a two-outcome functional from correlator coefficients:
    /// beta^{xy}_{ab} = m[x][y] * (-1)^(a+b).
    pub fn from_correlators(m: &[Vec<f64>], local_bound: f64, quantum_value: Option<f64>) -> Self {
        let n_x = m.len();
        let n_y = m[0].len();
        let scenario = Scenario::bipartite(n_x, n_y, 2, 2);
        let shell = BellFunctional {
            scenario: scenario.clone(),
            coefficients: vec![0.0; scenario.table_len()],
            local_bound,
            quantum_value,
        };
        let mut coefficients = vec![0.0; scenario.table_len()];
        for x in 0..n_x {
            for y in 0..n_y {
                for a in 0..2 {
                    for b in 0..2 {
                        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        coefficients[shell.index(a, b, x, y)] = m[x][y] * sign;
                    }
                }
            }
        }
        BellFunctional { scenario, coefficients, local_bound, quantum_value }
    }

    /// CHSH: E11 + E12 + E21 - E22 <= 2, Tsirelson bound 2*sqrt(2).
    pub fn chsh() -> Self {
        Self::from_correlators(
            &[vec![1.0, 1.0], vec![1.0, -1.0]],
            2.0,
            Some(2.0 * std::f64::consts::SQRT_2),
        )
    }

    /// Clauser-Horne functional, (CHSH - 2)/4 <= 0 in probability form.
    pub fn ch() -> Self {
        let chsh = Self::chsh();
        let scenario = chsh.scenario.clone();
        let mut coefficients: Vec<f64> = chsh.coefficients.iter().map(|v| v / 4.0).collect();
        let shell = BellFunctional {
            scenario: scenario.clone(),
            coefficients: coefficients.clone(),
            local_bound: 0.0,
            quantum_value: None,
        };
        // Fold the constant -1/2 into the table using sum_ab P(a,b|0,0) = 1.
        for a in 0..2 {
            for b in 0..2 {
                coefficients[shell.index(a, b, 0, 0)] -= 0.5;
            }
        }
        BellFunctional {
            scenario,
            coefficients,
            local_bound: 0.0,
            quantum_value: Some((2.0 * std::f64::consts::SQRT_2 - 2.0) / 4.0),
        }
    }

    /// Four-by-three two-outcome functional with local bound 6 and quantum
    /// maximum 4*sqrt(3).
    pub fn elegant() -> Self {
        let mut m = vec![vec![0.0; 3]; 4];
        for (x, row) in m.iter_mut().enumerate() {
            for (y, v) in row.iter_mut().enumerate() {
                // 1-based: coefficient of E_xy is -(-1)^(d_{x,y+1} + d_{x,1}).
                let x1 = x + 1;
                let y1 = y + 1;
                let e = usize::from(x1 == y1 + 1) + usize::from(x1 == 1);
                *v = -f64::powi(-1.0, e as i32);
            }
        }
        Self::from_correlators(&m, 6.0, Some(4.0 * 3.0f64.sqrt()))
    }

    /// Three-setting two-outcome lifted functional with local bound 0 and
    /// maximal qubit violation 1/4.
    pub fn i3322() -> Self {
        let scenario = Scenario::bipartite(3, 3, 2, 2);
        let shell = BellFunctional {
            scenario: scenario.clone(),
            coefficients: vec![0.0; scenario.table_len()],
            local_bound: 0.0,
            quantum_value: None,
        };
        let mut coefficients = vec![0.0; scenario.table_len()];
        // Joint terms P(0,0|x,y) with signs [[1,1,1],[1,1,-1],[1,-1,0]].
        let joint = [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 0.0]];
        for x in 0..3 {
            for y in 0..3 {
                coefficients[shell.index(0, 0, x, y)] += joint[x][y];
            }
        }
        // Marginals -P_A(0|1) - 2 P_B(0|1) - P_B(0|2), via a fixed partner.
        for b in 0..2 {
            coefficients[shell.index(0, b, 0, 0)] += -1.0;
        }
        for a in 0..2 {
            coefficients[shell.index(a, 0, 0, 0)] += -2.0;
            coefficients[shell.index(a, 0, 0, 1)] += -1.0;
        }
        BellFunctional { scenario, coefficients, local_bound: 0.0, quantum_value: None }
    }

    /// Two-setting three-outcome functional (CGLMP form), local bound 2.
    pub fn i2233() -> Self {
        let scenario = Scenario::bipartite(2, 2, 3, 3);
        let shell = BellFunctional {
            scenario: scenario.clone(),
            coefficients: vec![0.0; scenario.table_len()],
            local_bound: 2.0,
            quantum_value: None,
        };
        let mut coefficients = vec![0.0; scenario.table_len()];
        let d = 3i32;
        {
            let mut add = |k: i32, swap: bool, x: usize, y: usize, w: f64| {
                for a in 0..3i32 {
                    for b in 0..3i32 {
                        let diff = if swap { b - a } else { a - b };
                        if diff.rem_euclid(d) == k.rem_euclid(d) {
                            coefficients[shell.index(a as usize, b as usize, x, y)] += w;
                        }
                    }
                }
            };
            // P(A1=B1) + P(B1=A2+1) + P(A2=B2) + P(B2=A1)
            add(0, false, 0, 0, 1.0);
            add(1, true, 1, 0, 1.0);
            add(0, false, 1, 1, 1.0);
            add(0, false, 0, 1, 1.0);
            // -P(A1=B1-1) - P(B1=A2) - P(A2=B2-1) - P(B2=A1-1)
            add(-1, false, 0, 0, -1.0);
            add(0, true, 1, 0, -1.0);
            add(-1, false, 1, 1, -1.0);
            add(1, false, 0, 1, -1.0);
        }
        BellFunctional { scenario, coefficients, local_bound: 2.0, quantum_value: None }
    }
}

/// Isotropic state v |Phi+_d><Phi+_d| + (1-v) I/d^2.
pub fn isotropic_state(d: usize, v: f64) -> Result<ComplexMatrix> {
    let lo = -1.0 / ((d * d - 1) as f64);
    if !(lo..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!(
            "visibility {v} outside [{lo}, 1] for d = {d}"
        )));
    }
    let mixed = ComplexMatrix::identity(d * d).scale_re((1.0 - v) / (d * d) as f64);
    Ok(phi_plus(d).scale_re(v).add(&mixed))
}

/// Pure partially entangled two-qubit state cos(theta)|00> + sin(theta)|11>.
pub fn pure_partially_entangled(theta: f64) -> ComplexMatrix {
    ComplexMatrix::outer(&[
        c(theta.cos(), 0.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        c(theta.sin(), 0.0),
    ])
}

/// Projector pair {(I + n.sigma)/2, (I - n.sigma)/2} for a unit Bloch vector.
pub fn qubit_projective(bloch: [f64; 3]) -> Result<[ComplexMatrix; 2]> {
    let norm = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("Bloch vector norm {norm} != 1")));
    }
    let ns = sigma_x()
        .scale_re(bloch[0])
        .add(&sigma_y().scale_re(bloch[1]))
        .add(&sigma_z().scale_re(bloch[2]));
    let id = ComplexMatrix::identity(2);
    Ok([id.add(&ns).scale_re(0.5), id.sub(&ns).scale_re(0.5)])
}

/// Measurement assemblage built from one Bloch vector per setting.
pub fn qubit_measurements(blochs: &[[f64; 3]]) -> Result<MeasurementAssemblage> {
    let mut settings = Vec::with_capacity(blochs.len());
    for &n in blochs {
        let [e0, e1] = qubit_projective(n)?;
        settings.push(vec![e0, e1]);
    }
    MeasurementAssemblage::new(2, settings)
}

/// Alice sigma_z, sigma_x; Bob (sigma_z +- sigma_x)/sqrt(2): the settings
/// attaining the Tsirelson bound of [`BellFunctional::chsh`] on isotropic
/// states.
pub fn chsh_optimal_settings() -> (MeasurementAssemblage, MeasurementAssemblage) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).expect("unit vectors");
    let bob = qubit_measurements(&[[s, 0.0, s], [-s, 0.0, s]]).expect("unit vectors");
    (alice, bob)
}

/// Born-rule correlation for two or three parties.
pub fn born_correlation(
    rho: &ComplexMatrix,
    parts: &[&MeasurementAssemblage],
) -> Result<Correlation> {
    let total_dim: usize = parts.iter().map(|p| p.dim).product();
    if rho.rows() != total_dim || !rho.is_square() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match measurement dimensions (product {})",
            rho.rows(),
            total_dim
        )));
    }
    match parts {
        [alice, bob] => {
            let scenario = Scenario::bipartite(
                alice.n_settings,
                bob.n_settings,
                alice.n_outcomes,
                bob.n_outcomes,
            );
            let shell =
                Correlation { scenario: scenario.clone(), values: vec![0.0; scenario.table_len()] };
            let mut values = vec![0.0; scenario.table_len()];
            for x in 0..alice.n_settings {
                for y in 0..bob.n_settings {
                    for a in 0..alice.n_outcomes {
                        for b in 0..bob.n_outcomes {
                            let op = kron(alice.element(a, x), bob.element(b, y));
                            values[shell.index2(a, b, x, y)] =
                                rho.matmul(&op).real_trace().max(0.0);
                        }
                    }
                }
            }
            Correlation::new(scenario, values)
        }
        [alice, bob, charlie] => {
            let scenario = Scenario::tripartite(
                [alice.n_settings, bob.n_settings, charlie.n_settings],
                [alice.n_outcomes, bob.n_outcomes, charlie.n_outcomes],
            );
            let shell =
                Correlation { scenario: scenario.clone(), values: vec![0.0; scenario.table_len()] };
            let mut values = vec![0.0; scenario.table_len()];
            for x in 0..alice.n_settings {
                for y in 0..bob.n_settings {
                    for z in 0..charlie.n_settings {
                        for a in 0..alice.n_outcomes {
                            for b in 0..bob.n_outcomes {
                                for cc in 0..charlie.n_outcomes {
                                    let op = kron_all(&[
                                        alice.element(a, x),
                                        bob.element(b, y),
                                        charlie.element(cc, z),
                                    ]);
                                    values[shell.index3(a, b, cc, x, y, z)] =
                                        rho.matmul(&op).real_trace().max(0.0);
                                }
                            }
                        }
                    }
                }
            }
            Correlation::new(scenario, values)
        }
        _ => Err(Error::Schema("born_correlation supports 2 or 3 parties".into())),
    }
}

/// Assemblage steered on B by Alice:
/// rho_{a|x} = tr_A((E_{a|x} (x) I) rho).
pub fn assemblage_from_state(
    rho: &ComplexMatrix,
    alice: &MeasurementAssemblage,
) -> Result<Assemblage> {
    if !rho.is_square() || rho.rows() % alice.dim != 0 {
        return Err(Error::Dimension("state dimension incompatible with Alice's POVMs".into()));
    }
    let d_b = rho.rows() / alice.dim;
    let id_b = ComplexMatrix::identity(d_b);
    let mut settings = Vec::with_capacity(alice.n_settings);
    for x in 0..alice.n_settings {
        let mut row = Vec::with_capacity(alice.n_outcomes);
        for a in 0..alice.n_outcomes {
            let op = kron(alice.element(a, x), &id_b);
            let cond = partial_trace(&op.matmul(rho), (alice.dim, d_b), Subsystem::A)?;
            // Hermitize away multiplication roundoff.
            row.push(cond.add(&cond.adjoint()).scale_re(0.5));
        }
        settings.push(row);
    }
    Assemblage::new(d_b, settings)
}

/// Tripartite assemblage on C steered by A and B.
pub fn tripartite_assemblage_from_state(
    rho: &ComplexMatrix,
    alice: &MeasurementAssemblage,
    bob: &MeasurementAssemblage,
) -> Result<TripartiteAssemblage> {
    let d_ab = alice.dim * bob.dim;
    if !rho.is_square() || rho.rows() % d_ab != 0 {
        return Err(Error::Dimension("state dimension incompatible with A/B POVMs".into()));
    }
    let d_c = rho.rows() / d_ab;
    let id_c = ComplexMatrix::identity(d_c);
    let mut states = Vec::new();
    for x in 0..alice.n_settings {
        for y in 0..bob.n_settings {
            for a in 0..alice.n_outcomes {
                for b in 0..bob.n_outcomes {
                    let op = kron_all(&[alice.element(a, x), bob.element(b, y), &id_c]);
                    let cond = partial_trace(&op.matmul(rho), (d_ab, d_c), Subsystem::A)?;
                    states.push(cond.add(&cond.adjoint()).scale_re(0.5));
                }
            }
        }
    }
    let asm = TripartiteAssemblage {
        dim: d_c,
        n_x: alice.n_settings,
        n_y: bob.n_settings,
        n_a: alice.n_outcomes,
        n_b: bob.n_outcomes,
        states,
    };
    asm.validate()?;
    Ok(asm)
}

/// Deterministic single-party strategies: all assignments of one outcome per
/// setting, as `strategy[x] = a`.
pub fn deterministic_strategies(n_x: usize, n_a: usize) -> Result<Vec<Vec<usize>>> {
    if n_x == 0 || n_a == 0 {
        return Err(Error::InvalidArgument("counts must be >= 1".into()));
    }
    let count = (n_a as f64).powi(n_x as i32);
    if count > 1e6 {
        return Err(Error::Overflow(format!(
            "{n_a}^{n_x} deterministic strategies exceed the 10^6 cap"
        )));
    }
    let count = count as usize;
    let mut out = Vec::with_capacity(count);
    for mut idx in 0..count {
        let mut st = vec![0usize; n_x];
        for slot in st.iter_mut() {
            *slot = idx % n_a;
            idx /= n_a;
        }
        out.push(st);
    }
    Ok(out)
}

/// Value of a Bell functional on a correlation.
pub fn bell_value(f: &BellFunctional, p: &Correlation) -> Result<f64> {
    if f.scenario != p.scenario {
        return Err(Error::Dimension("functional and correlation scenarios differ".into()));
    }
    Ok(f.coefficients.iter().zip(&p.values).map(|(w, v)| w * v).sum())
}

/// Deterministic local correlation from a pair of strategies.
pub fn deterministic_correlation(
    scenario: &Scenario,
    sa: &[usize],
    sb: &[usize],
) -> Result<Correlation> {
    let shell =
        Correlation { scenario: scenario.clone(), values: vec![0.0; scenario.table_len()] };
    let mut values = vec![0.0; scenario.table_len()];
    for x in 0..scenario.settings[0] {
        for y in 0..scenario.settings[1] {
            values[shell.index2(sa[x], sb[y], x, y)] = 1.0;
        }
    }
    Correlation::new(scenario.clone(), values)
}

/// Outcome of a see-saw optimization.
#[derive(Debug, Clone)]
pub struct SeesawOutcome {
    pub parties: Vec<MeasurementAssemblage>,
    pub value: f64,
    pub converged: bool,
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    // QR of a complex Gaussian-ish matrix by modified Gram-Schmidt.
    let mut cols: Vec<Vec<Complex64>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
                .collect()
        })
        .collect();
    for j in 0..d {
        for k in 0..j {
            let proj: Complex64 = cols[k].iter().zip(&cols[j]).map(|(u, v)| u.conj() * v).sum();
            for i in 0..d {
                let sub = proj * cols[k][i];
                cols[j][i] -= sub;
            }
        }
        let norm: f64 = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm.max(1e-300);
        }
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}

fn random_projective(
    d: usize,
    n_settings: usize,
    n_outcomes: usize,
    rng: &mut ChaCha8Rng,
) -> MeasurementAssemblage {
    assert!(n_outcomes <= d, "projective outcomes limited by dimension");
    let mut settings = Vec::with_capacity(n_settings);
    for _ in 0..n_settings {
        let u = random_unitary(d, rng);
        // Partition basis vectors into n_outcomes projectors; the last
        // outcome absorbs the remainder.
        let mut row = Vec::with_capacity(n_outcomes);
        for a in 0..n_outcomes {
            let lo = a * (d / n_outcomes);
            let hi = if a + 1 == n_outcomes { d } else { (a + 1) * (d / n_outcomes) };
            let mut e = ComplexMatrix::zeros(d, d);
            for k in lo..hi {
                let col: Vec<Complex64> = (0..d).map(|i| u.get(i, k)).collect();
                e = e.add(&ComplexMatrix::outer(&col));
            }
            row.push(e);
        }
        settings.push(row);
    }
    MeasurementAssemblage::new(d, settings).expect("projective construction is valid")
}

/// Best POVM for maximizing sum_a tr(E_a M_a): exact positive-part split for
/// two outcomes, a small SDP otherwise.
fn optimal_povm(ms: &[ComplexMatrix], d: usize) -> Result<Vec<ComplexMatrix>> {
    if ms.len() == 2 {
        let delta = ms[0].sub(&ms[1]);
        let (vals, vecs) = linalg::eig_hermitian(&delta)?;
        let mut e0 = ComplexMatrix::zeros(d, d);
        for (k, &l) in vals.iter().enumerate() {
            if l > 0.0 {
                let col: Vec<Complex64> = (0..d).map(|i| vecs.get(i, k)).collect();
                e0 = e0.add(&ComplexMatrix::outer(&col));
            }
        }
        let e1 = ComplexMatrix::identity(d).sub(&e0);
        return Ok(vec![e0, e1]);
    }
    // max sum_a <E_a, M_a> s.t. E_a >= 0, sum_a E_a = I.
    let mut b = SdpBuilder::new();
    let emb = crate::solver::embed_hermitian(d);
    let vars: Vec<Vec<usize>> = ms.iter().map(|_| hermitian_var(&mut b, d)).collect();
    for (v, m) in vars.iter().zip(ms) {
        let coords = emb.coordinates(m);
        let params = emb.params();
        for ((&vi, coord), p) in v.iter().zip(&coords).zip(&params) {
            let w = match p {
                crate::solver::HermParam::Diag(_) => 1.0,
                _ => 2.0,
            };
            b.add_objective(vi, -w * coord);
        }
    }
    for v in &vars {
        let mut lmi = HermLmi::new(d);
        lmi.add_hermitian_var(v, 1.0);
        lmi.finish(&mut b);
    }
    let id_coords = emb.coordinates(&ComplexMatrix::identity(d));
    for (pidx, &target) in id_coords.iter().enumerate() {
        let coeffs: Vec<(usize, f64)> = vars.iter().map(|v| (v[pidx], 1.0)).collect();
        b.add_equality(coeffs, target);
    }
    let sol = b.build().solve(&SolverOptions::default())?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("POVM update failed: {:?}", sol.status)));
    }
    Ok(vars
        .iter()
        .map(|v| {
            let coords: Vec<f64> = v.iter().map(|&i| sol.primal_point[i]).collect();
            emb.from_coordinates(&coords)
        })
        .collect())
}

fn seesaw_once(
    f: &BellFunctional,
    rho: &ComplexMatrix,
    dims: (usize, usize),
    mut alice: MeasurementAssemblage,
    mut bob: MeasurementAssemblage,
    optimize_alice: bool,
) -> Result<(MeasurementAssemblage, MeasurementAssemblage, f64, bool)> {
    let (d_a, d_b) = dims;
    let (n_x, n_y) = (f.scenario.settings[0], f.scenario.settings[1]);
    let (n_a, n_b) = (f.scenario.outcomes[0], f.scenario.outcomes[1]);
    let mut value = bell_value(f, &born_correlation(rho, &[&alice, &bob])?)?;
    let mut converged = false;
    for _sweep in 0..300 {
        // Bob update: per y, maximize sum_b tr(E_{b|y} N_{b|y}) where
        // N_{b|y} = sum_{a,x} beta tr_A((E_{a|x} (x) I) rho).
        let mut new_bob = Vec::with_capacity(n_y);
        for y in 0..n_y {
            let mut ms = Vec::with_capacity(n_b);
            for b in 0..n_b {
                let mut n_op = ComplexMatrix::zeros(d_b, d_b);
                for x in 0..n_x {
                    for a in 0..n_a {
                        let w = f.coefficient(a, b, x, y);
                        if w == 0.0 {
                            continue;
                        }
                        let k = partial_trace(
                            &kron(alice.element(a, x), &ComplexMatrix::identity(d_b)).matmul(rho),
                            (d_a, d_b),
                            Subsystem::A,
                        )?;
                        n_op = n_op.add(&k.scale_re(w));
                    }
                }
                ms.push(n_op.add(&n_op.adjoint()).scale_re(0.5));
            }
            new_bob.push(optimal_povm(&ms, d_b)?);
        }
        bob = MeasurementAssemblage::new(d_b, new_bob)?;

        if optimize_alice {
            let mut new_alice = Vec::with_capacity(n_x);
            for x in 0..n_x {
                let mut ms = Vec::with_capacity(n_a);
                for a in 0..n_a {
                    let mut m_op = ComplexMatrix::zeros(d_a, d_a);
                    for y in 0..n_y {
                        for b in 0..n_b {
                            let w = f.coefficient(a, b, x, y);
                            if w == 0.0 {
                                continue;
                            }
                            let k = partial_trace(
                                &kron(&ComplexMatrix::identity(d_a), bob.element(b, y))
                                    .matmul(rho),
                                (d_a, d_b),
                                Subsystem::B,
                            )?;
                            m_op = m_op.add(&k.scale_re(w));
                        }
                    }
                    ms.push(m_op.add(&m_op.adjoint()).scale_re(0.5));
                }
                new_alice.push(optimal_povm(&ms, d_a)?);
            }
            alice = MeasurementAssemblage::new(d_a, new_alice)?;
        }

        let new_value = bell_value(f, &born_correlation(rho, &[&alice, &bob])?)?;
        if (new_value - value).abs() < 1e-10 {
            value = new_value;
            converged = true;
            break;
        }
        value = new_value;
    }
    Ok((alice, bob, value, converged))
}

/// See-saw over both parties' measurements, maximizing the Bell value of
/// `rho`. Restarts run from seeded random projective settings in parallel
/// and reduce deterministically (best value, ties to the lowest restart
/// index).
pub fn seesaw_optimize(
    f: &BellFunctional,
    rho: &ComplexMatrix,
    dims: (usize, usize),
    restarts: usize,
    seed: u64,
) -> Result<SeesawOutcome> {
    seesaw_impl(f, rho, dims, restarts, seed, None)
}

/// See-saw with Alice's measurements held fixed; only Bob's are optimized.
pub fn seesaw_optimize_fixed_alice(
    f: &BellFunctional,
    rho: &ComplexMatrix,
    dims: (usize, usize),
    alice: &MeasurementAssemblage,
    restarts: usize,
    seed: u64,
) -> Result<SeesawOutcome> {
    seesaw_impl(f, rho, dims, restarts, seed, Some(alice.clone()))
}

type SeesawRun = (usize, MeasurementAssemblage, MeasurementAssemblage, f64, bool);

fn seesaw_impl(
    f: &BellFunctional,
    rho: &ComplexMatrix,
    dims: (usize, usize),
    restarts: usize,
    seed: u64,
    fixed_alice: Option<MeasurementAssemblage>,
) -> Result<SeesawOutcome> {
    let (d_a, d_b) = dims;
    if rho.rows() != d_a * d_b {
        return Err(Error::Dimension("state dimension does not match dims".into()));
    }
    let (n_x, n_y) = (f.scenario.settings[0], f.scenario.settings[1]);
    let (n_a, n_b) = (f.scenario.outcomes[0], f.scenario.outcomes[1]);
    let runs: Vec<Result<SeesawRun>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let alice0 = match &fixed_alice {
                Some(a) => a.clone(),
                None => random_projective(d_a, n_x, n_a, &mut rng),
            };
            let bob0 = random_projective(d_b, n_y, n_b, &mut rng);
            let (alice, bob, value, converged) =
                seesaw_once(f, rho, dims, alice0, bob0, fixed_alice.is_none())?;
            Ok((r, alice, bob, value, converged))
        })
        .collect();
    let mut best: Option<SeesawRun> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            None => true,
            Some(b) => run.3 > b.3 + 1e-12 || (run.3 > b.3 - 1e-12 && run.0 < b.0),
        };
        if better {
            best = Some(run);
        }
    }
    let (_, alice, bob, value, converged) = best.expect("at least one restart");
    Ok(SeesawOutcome { parties: vec![alice, bob], value, converged })
}

/// Post-quantum tripartite assemblage whose A-B marginal is a
/// Popescu-Rohrlich box: rho_{ab|xy} = [1 - (-1)^(a+b+xy)]/4 * rho_hat
/// (settings 0-based).
pub fn pr_box_assemblage(rho_hat: &ComplexMatrix) -> Result<TripartiteAssemblage> {
    if !rho_hat.is_square() {
        return Err(Error::Dimension("rho_hat must be square".into()));
    }
    if rho_hat.hermitian_defect() > 1e-9 {
        return Err(Error::NonHermitian(rho_hat.hermitian_defect()));
    }
    if (rho_hat.real_trace() - 1.0).abs() > tol::NORMALIZATION {
        return Err(Error::InvalidArgument("rho_hat must have unit trace".into()));
    }
    let min = rho_hat.min_eigenvalue()?;
    if min < tol::PSD_MIN_EIG {
        return Err(Error::NotPsd(min));
    }
    let mut states = Vec::with_capacity(16);
    for x in 0..2usize {
        for y in 0..2usize {
            for a in 0..2usize {
                for b in 0..2usize {
                    let sign = f64::powi(-1.0, (a + b + x * y) as i32);
                    states.push(rho_hat.scale_re(0.25 * (1.0 - sign)));
                }
            }
        }
    }
    let asm =
        TripartiteAssemblage { dim: rho_hat.rows(), n_x: 2, n_y: 2, n_a: 2, n_b: 2, states };
    asm.validate()?;
    Ok(asm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_edge_cases() {
        let m = isotropic_state(2, 0.0).unwrap();
        assert!(m.sub(&ComplexMatrix::identity(4).scale_re(0.25)).max_abs() < 1e-15);
        let p = isotropic_state(2, 1.0).unwrap();
        assert!(p.sub(&phi_plus(2)).max_abs() < 1e-15);
        assert!(isotropic_state(2, 1.1).is_err());
        assert!(isotropic_state(2, -0.5).is_err());
        for &v in &[-1.0 / 3.0, 0.2, 1.0] {
            let m = isotropic_state(2, v).unwrap();
            assert!((m.real_trace() - 1.0).abs() < 1e-12);
            assert!(m.is_hermitian(1e-12));
            assert!(m.min_eigenvalue().unwrap() >= -1e-12);
        }
    }

    #[test]
    fn pure_state_schmidt_structure() {
        let theta = std::f64::consts::PI / 8.0;
        let rho = pure_partially_entangled(theta);
        assert!((rho.real_trace() - 1.0).abs() < 1e-12);
        let (vals, _) = linalg::eig_hermitian(&rho).unwrap();
        assert!(vals[2].abs() < 1e-12 && (vals[3] - 1.0).abs() < 1e-12);
        let red = partial_trace(&rho, (2, 2), Subsystem::A).unwrap();
        let (rv, _) = linalg::eig_hermitian(&red).unwrap();
        assert!((rv[0] - theta.sin().powi(2)).abs() < 1e-12);
        assert!((rv[1] - theta.cos().powi(2)).abs() < 1e-12);
        let me = pure_partially_entangled(std::f64::consts::FRAC_PI_4);
        assert!(me.sub(&phi_plus(2)).max_abs() < 1e-12);
    }

    #[test]
    fn qubit_projectors() {
        let [e0, e1] = qubit_projective([0.0, 0.0, 1.0]).unwrap();
        assert!(e0.sub(&ComplexMatrix::diag(&[1.0, 0.0])).max_abs() < 1e-14);
        assert!(e1.sub(&ComplexMatrix::diag(&[0.0, 1.0])).max_abs() < 1e-14);
        let [p, m] = qubit_projective([1.0, 0.0, 0.0]).unwrap();
        assert!((p.get(0, 1).re - 0.5).abs() < 1e-14);
        assert!((m.get(0, 1).re + 0.5).abs() < 1e-14);
        let n = [0.36, 0.48, 0.8];
        let [a, b] = qubit_projective(n).unwrap();
        assert!(a.add(&b).sub(&ComplexMatrix::identity(2)).max_abs() < 1e-12);
        assert!(a.matmul(&a).sub(&a).max_abs() < 1e-9);
        assert!(qubit_projective([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn born_product_state_factorizes() {
        let rho_a = ComplexMatrix::diag(&[0.7, 0.3]);
        let rho_b = ComplexMatrix::diag(&[0.2, 0.8]);
        let rho = kron(&rho_a, &rho_b);
        let z = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let p = born_correlation(&rho, &[&z, &z]).unwrap();
        assert!((p.get2(0, 0, 0, 0) - 0.7 * 0.2).abs() < 1e-12);
        assert!((p.get2(1, 1, 0, 0) - 0.3 * 0.8).abs() < 1e-12);
    }

    #[test]
    fn chsh_value_tsirelson_and_linearity() {
        let (alice, bob) = chsh_optimal_settings();
        let f = BellFunctional::chsh();
        let p1 = born_correlation(&isotropic_state(2, 1.0).unwrap(), &[&alice, &bob]).unwrap();
        let v1 = bell_value(&f, &p1).unwrap();
        assert!((v1 - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9, "{v1}");
        for &v in &[0.3, 0.75] {
            let p = born_correlation(&isotropic_state(2, v).unwrap(), &[&alice, &bob]).unwrap();
            let val = bell_value(&f, &p).unwrap();
            assert!((val - v * 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        }
    }

    #[test]
    fn assemblage_from_phi_plus_sigma_z() {
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let asm = assemblage_from_state(&phi_plus(2), &alice).unwrap();
        assert!(asm.state(0, 0).sub(&ComplexMatrix::diag(&[0.5, 0.0])).max_abs() < 1e-12);
        assert!(asm.state(1, 0).sub(&ComplexMatrix::diag(&[0.0, 0.5])).max_abs() < 1e-12);
    }

    #[test]
    fn assemblage_separable_factorizes() {
        let rho_b = ComplexMatrix::diag(&[0.25, 0.75]);
        let rho = kron(&ComplexMatrix::diag(&[0.6, 0.4]), &rho_b);
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let p = asm.outcome_probability(a, x);
                let expect = rho_b.scale_re(p);
                assert!(asm.state(a, x).sub(&expect).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assemblage_traces_match_born_marginals() {
        let (alice, bob) = chsh_optimal_settings();
        let rho = isotropic_state(2, 0.8).unwrap();
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let p = born_correlation(&rho, &[&alice, &bob]).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                assert!((asm.outcome_probability(a, x) - p.marginal_a(a, x)).abs() < 1e-10);
                for y in 0..2 {
                    for b in 0..2 {
                        let lhs = asm.state(a, x).matmul(bob.element(b, y)).real_trace();
                        assert!((lhs - p.get2(a, b, x, y)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn strategies_counting() {
        assert_eq!(deterministic_strategies(1, 2).unwrap().len(), 2);
        assert_eq!(deterministic_strategies(2, 2).unwrap().len(), 4);
        let s = deterministic_strategies(3, 2).unwrap();
        assert_eq!(s.len(), 8);
        let set: std::collections::BTreeSet<_> = s.iter().cloned().collect();
        assert_eq!(set.len(), 8);
        assert!(deterministic_strategies(30, 4).is_err());
    }

    #[test]
    fn chsh_local_bound_on_deterministic_points() {
        let f = BellFunctional::chsh();
        let scenario = Scenario::bipartite(2, 2, 2, 2);
        let mut max_val = f64::NEG_INFINITY;
        for sa in deterministic_strategies(2, 2).unwrap() {
            for sb in deterministic_strategies(2, 2).unwrap() {
                let p = deterministic_correlation(&scenario, &sa, &sb).unwrap();
                let v = bell_value(&f, &p).unwrap();
                max_val = max_val.max(v);
                assert!(v <= 2.0 + 1e-12);
            }
        }
        assert!((max_val - 2.0).abs() < 1e-12);
    }

    #[test]
    fn elegant_local_bound_is_six() {
        let f = BellFunctional::elegant();
        let scenario = Scenario::bipartite(4, 3, 2, 2);
        let mut max_val = f64::NEG_INFINITY;
        for sa in deterministic_strategies(4, 2).unwrap() {
            for sb in deterministic_strategies(3, 2).unwrap() {
                let p = deterministic_correlation(&scenario, &sa, &sb).unwrap();
                max_val = max_val.max(bell_value(&f, &p).unwrap());
            }
        }
        assert!((max_val - 6.0).abs() < 1e-12, "local bound {max_val}");
    }

    #[test]
    fn i3322_local_bound_is_zero() {
        let f = BellFunctional::i3322();
        let scenario = Scenario::bipartite(3, 3, 2, 2);
        let mut max_val = f64::NEG_INFINITY;
        for sa in deterministic_strategies(3, 2).unwrap() {
            for sb in deterministic_strategies(3, 2).unwrap() {
                let p = deterministic_correlation(&scenario, &sa, &sb).unwrap();
                max_val = max_val.max(bell_value(&f, &p).unwrap());
            }
        }
        assert!(max_val.abs() < 1e-12, "local bound {max_val}");
    }

    #[test]
    fn i2233_local_bound_is_two() {
        let f = BellFunctional::i2233();
        let scenario = Scenario::bipartite(2, 2, 3, 3);
        let mut max_val = f64::NEG_INFINITY;
        for sa in deterministic_strategies(2, 3).unwrap() {
            for sb in deterministic_strategies(2, 3).unwrap() {
                let p = deterministic_correlation(&scenario, &sa, &sb).unwrap();
                max_val = max_val.max(bell_value(&f, &p).unwrap());
            }
        }
        assert!((max_val - 2.0).abs() < 1e-12, "local bound {max_val}");
    }

    #[test]
    fn pr_box_assemblage_properties() {
        let rho_hat = ComplexMatrix::identity(2).scale_re(0.5);
        let asm = pr_box_assemblage(&rho_hat).unwrap();
        let charlie = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        let p3 = asm.correlation_with(&charlie).unwrap();
        let pab = p3.marginal_ab().unwrap();
        let f = BellFunctional::chsh();
        let v = bell_value(&f, &pab).unwrap().abs();
        assert!((v - 4.0).abs() < 1e-12, "CHSH magnitude {v}");
    }

    #[test]
    fn seesaw_reaches_tsirelson_on_phi_plus() {
        let f = BellFunctional::chsh();
        let out = seesaw_optimize(&f, &phi_plus(2), (2, 2), 4, 7).unwrap();
        assert!(out.converged);
        assert!(
            (out.value - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-5,
            "seesaw value {}",
            out.value
        );
    }

    #[test]
    fn seesaw_linear_in_visibility() {
        let f = BellFunctional::chsh();
        let v = 1.0 / std::f64::consts::SQRT_2;
        let rho = isotropic_state(2, v).unwrap();
        let out = seesaw_optimize(&f, &rho, (2, 2), 4, 11).unwrap();
        assert!((out.value - 2.0).abs() < 1e-5, "value {}", out.value);
    }

    #[test]
    fn correlation_rejects_signaling() {
        let scenario = Scenario::bipartite(2, 1, 2, 2);
        let values = vec![
            1.0, 0.0, 0.0, 0.0, // x=0: B sees outcome 0
            0.0, 1.0, 0.0, 0.0, // x=1: B sees outcome 1
        ];
        assert!(Correlation::new(scenario, values).is_err());
    }
}
