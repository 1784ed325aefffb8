//! Bipartite moment matrices over pairs of local operator words:
//! quantum-set membership, nonlocal robustness, and the moment-matrix
//! route to device-independent entanglement bounds.
//!
//! "Local level l" means each party's words have length at most l; the
//! moment matrix is indexed by pairs (A-word, B-word).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amm::{di_opts, DiBound, DiStatus};
use crate::error::{Error, Result};
use crate::quantum::{deterministic_strategies, BellFunctional, Correlation, Scenario};
use crate::solver::{AffineMat, SdpBuilder, SolveStatus, SymMat};
use crate::steering::Diagnostics;
use crate::tol;
use crate::words::{enumerate_words, OperatorWord};

use crate::amm::SlotVal;

/// Cap on the bipartite moment-matrix dimension.
pub const PAIR_CAP: usize = 256;

/// Classification of one bipartite moment-matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSymbol {
    Zero,
    Norm,
    MarginalA { setting: u8, outcome: u8 },
    MarginalB { setting: u8, outcome: u8 },
    Joint { a: u8, b: u8, x: u8, y: u8 },
    /// Index into [`BipartiteTemplate::unknown_symbols`].
    Unknown(usize),
}

/// Symbolic bipartite moment-matrix template at a given local level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BipartiteTemplate {
    pub level: usize,
    pub scenario: Scenario,
    pub a_words: Vec<OperatorWord>,
    pub b_words: Vec<OperatorWord>,
    entries: Vec<PairSymbol>,
    /// Canonical (A-word, B-word) pairs of the unknown entries.
    pub unknown_symbols: Vec<(OperatorWord, OperatorWord)>,
}

impl BipartiteTemplate {
    pub fn dim(&self) -> usize {
        self.a_words.len() * self.b_words.len()
    }

    #[inline]
    pub fn row(&self, ia: usize, ib: usize) -> usize {
        ia * self.b_words.len() + ib
    }

    pub fn entry(&self, r: usize, c: usize) -> PairSymbol {
        self.entries[r * self.dim() + c]
    }

    fn slot_counts(&self) -> (usize, usize, usize) {
        let s = &self.scenario;
        let ma = s.settings[0] * (s.outcomes[0] - 1);
        let mb = s.settings[1] * (s.outcomes[1] - 1);
        let joint = ma * mb;
        (ma, mb, joint)
    }

    pub fn marg_a_slot(&self, a: usize, x: usize) -> usize {
        x * (self.scenario.outcomes[0] - 1) + a
    }

    pub fn marg_b_slot(&self, b: usize, y: usize) -> usize {
        y * (self.scenario.outcomes[1] - 1) + b
    }

    pub fn joint_slot(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let (_, mb, _) = self.slot_counts();
        self.marg_a_slot(a, x) * mb + self.marg_b_slot(b, y)
    }
}

/// Builds the bipartite template of the given local level.
pub fn build_bipartite_template(scenario: &Scenario, level: usize) -> Result<BipartiteTemplate> {
    build_bipartite_template_mixed(scenario, level, level)
}

/// Bipartite template with independent word-length caps per party (useful
/// when one side needs longer words but the full symmetric level is too
/// large).
pub fn build_bipartite_template_mixed(
    scenario: &Scenario,
    level_a: usize,
    level_b: usize,
) -> Result<BipartiteTemplate> {
    scenario.validate()?;
    let level = level_a.max(level_b);
    if scenario.parties != 2 {
        return Err(Error::Schema("bipartite template needs a 2-party scenario".into()));
    }
    if level_a.min(level_b) == 0 || level > crate::amm::MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "local levels must lie in 1..={}, got ({level_a}, {level_b})",
            crate::amm::MAX_LEVEL
        )));
    }
    let a_words = enumerate_words(scenario.settings[0], scenario.outcomes[0], level_a, PAIR_CAP)?;
    let b_words = enumerate_words(scenario.settings[1], scenario.outcomes[1], level_b, PAIR_CAP)?;
    let n = a_words.len() * b_words.len();
    if n > PAIR_CAP {
        return Err(Error::Overflow(format!(
            "moment matrix dimension {n} exceeds the cap of {PAIR_CAP}"
        )));
    }
    let nb = b_words.len();
    let mut unknown_index: BTreeMap<(OperatorWord, OperatorWord), usize> = BTreeMap::new();
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..n {
        let (ia, ib) = (r / nb, r % nb);
        for c in 0..n {
            let (ka, kb) = (c / nb, c % nb);
            let wa = a_words[ka].reversed().concat(&a_words[ia]);
            let wb = b_words[kb].reversed().concat(&b_words[ib]);
            entries.push(combine(&mut unknown_index, wa, wb));
        }
    }
    let mut unknown_symbols = vec![(OperatorWord::identity(), OperatorWord::identity()); unknown_index.len()];
    for (pair, idx) in unknown_index {
        unknown_symbols[idx] = pair;
    }
    Ok(BipartiteTemplate {
        level,
        scenario: scenario.clone(),
        a_words,
        b_words,
        entries,
        unknown_symbols,
    })
}

fn combine(
    unknown_index: &mut BTreeMap<(OperatorWord, OperatorWord), usize>,
    wa: crate::words::Reduced,
    wb: crate::words::Reduced,
) -> PairSymbol {
    use crate::words::Reduced;
    let (a, b) = match (wa, wb) {
        (Reduced::Zero, _) | (_, Reduced::Zero) => return PairSymbol::Zero,
        (Reduced::Word(a), Reduced::Word(b)) => (a, b),
    };
    match (a.len(), b.len()) {
        (0, 0) => PairSymbol::Norm,
        (1, 0) => {
            let l = a.letters()[0];
            PairSymbol::MarginalA { setting: l.setting, outcome: l.outcome }
        }
        (0, 1) => {
            let l = b.letters()[0];
            PairSymbol::MarginalB { setting: l.setting, outcome: l.outcome }
        }
        (1, 1) => {
            let (la, lb) = (a.letters()[0], b.letters()[0]);
            PairSymbol::Joint { a: la.outcome, b: lb.outcome, x: la.setting, y: lb.setting }
        }
        _ => {
            // Real unknowns identify a moment with its adjoint, which
            // reverses both words together; reversing only one is a
            // different moment.
            let fwd = (a.clone(), b.clone());
            let rev = (a.reversed(), b.reversed());
            let key = if fwd <= rev { fwd } else { rev };
            let next = unknown_index.len();
            PairSymbol::Unknown(*unknown_index.entry(key).or_insert(next))
        }
    }
}

/// One bound bipartite moment matrix.
#[derive(Debug, Clone)]
pub(crate) struct BipInstance {
    pub norm: SlotVal,
    pub marg_a: Vec<SlotVal>,
    pub marg_b: Vec<SlotVal>,
    pub joint: Vec<SlotVal>,
    pub unknowns: Vec<SlotVal>,
}

impl BipInstance {
    pub(crate) fn fresh(b: &mut SdpBuilder, t: &BipartiteTemplate) -> Self {
        let (ma, mb, joint) = t.slot_counts();
        Self {
            norm: SlotVal::Var(b.free_var()),
            marg_a: (0..ma).map(|_| SlotVal::Var(b.free_var())).collect(),
            marg_b: (0..mb).map(|_| SlotVal::Var(b.free_var())).collect(),
            joint: (0..joint).map(|_| SlotVal::Var(b.free_var())).collect(),
            unknowns: t.unknown_symbols.iter().map(|_| SlotVal::Var(b.free_var())).collect(),
        }
    }

    /// All observable slots pinned from a correlation.
    pub(crate) fn pinned(b: &mut SdpBuilder, t: &BipartiteTemplate, p: &Correlation) -> Self {
        let s = &t.scenario;
        let (n_a, n_b) = (s.outcomes[0], s.outcomes[1]);
        let marg_a = (0..s.settings[0])
            .flat_map(|x| (0..n_a - 1).map(move |a| (a, x)))
            .map(|(a, x)| SlotVal::Const(p.marginal_a(a, x)))
            .collect();
        let marg_b = (0..s.settings[1])
            .flat_map(|y| (0..n_b - 1).map(move |bb| (bb, y)))
            .map(|(bb, y)| SlotVal::Const(p.marginal_b(bb, y)))
            .collect();
        let mut joint = Vec::new();
        for x in 0..s.settings[0] {
            for a in 0..n_a - 1 {
                for y in 0..s.settings[1] {
                    for bb in 0..n_b - 1 {
                        joint.push(SlotVal::Const(p.get2(a, bb, x, y)));
                    }
                }
            }
        }
        Self {
            norm: SlotVal::Const(1.0),
            marg_a,
            marg_b,
            joint,
            unknowns: t.unknown_symbols.iter().map(|_| SlotVal::Var(b.free_var())).collect(),
        }
    }

    fn slot<'a>(&'a self, t: &BipartiteTemplate, sym: PairSymbol) -> Option<&'a SlotVal> {
        match sym {
            PairSymbol::Zero => None,
            PairSymbol::Norm => Some(&self.norm),
            PairSymbol::MarginalA { setting, outcome } => {
                Some(&self.marg_a[t.marg_a_slot(outcome as usize, setting as usize)])
            }
            PairSymbol::MarginalB { setting, outcome } => {
                Some(&self.marg_b[t.marg_b_slot(outcome as usize, setting as usize)])
            }
            PairSymbol::Joint { a, b, x, y } => {
                Some(&self.joint[t.joint_slot(a as usize, b as usize, x as usize, y as usize)])
            }
            PairSymbol::Unknown(ix) => Some(&self.unknowns[ix]),
        }
    }

    pub(crate) fn add_to(&self, am: &mut AffineMat, t: &BipartiteTemplate, sign: f64) {
        let n = t.dim();
        for i in 0..n {
            for j in i..n {
                if let Some(slot) = self.slot(t, t.entry(i, j)) {
                    slot.add_to(am, i, j, sign);
                }
            }
        }
    }

    /// Adds the partial transpose on the A output index:
    /// entry ((ia,ib),(ka,kb)) of the transposed matrix is the symbol at
    /// ((ka,ib),(ia,kb)).
    pub(crate) fn add_pt_to(&self, am: &mut AffineMat, t: &BipartiteTemplate, sign: f64) {
        let n = t.dim();
        let nb = t.b_words.len();
        for i in 0..n {
            for j in i..n {
                let (ia, ib) = (i / nb, i % nb);
                let (ka, kb) = (j / nb, j % nb);
                let sym = t.entry(t.row(ka, ib), t.row(ia, kb));
                if let Some(slot) = self.slot(t, sym) {
                    slot.add_to(am, i, j, sign);
                }
            }
        }
    }

    pub(crate) fn value_at(&self, t: &BipartiteTemplate, point: &[f64]) -> SymMat {
        let n = t.dim();
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                if let Some(slot) = self.slot(t, t.entry(i, j)) {
                    m.set_sym(i, j, slot.value_at(point));
                }
            }
        }
        m
    }

    /// Accumulates `weight * P(a,b|x,y)` over this instance's slots into an
    /// affine expression, eliminating last outcomes through the marginals
    /// and the normalization.
    pub(crate) fn accumulate_probability(
        &self,
        t: &BipartiteTemplate,
        a: usize,
        b: usize,
        x: usize,
        y: usize,
        weight: f64,
        terms: &mut BTreeMap<usize, f64>,
        constant: &mut f64,
    ) {
        let s = &t.scenario;
        let (n_a, n_b) = (s.outcomes[0], s.outcomes[1]);
        let mut add_slot = |sv: &SlotVal, w: f64| match sv {
            SlotVal::Const(c) => *constant += w * c,
            SlotVal::Var(v) => *terms.entry(*v).or_insert(0.0) += w,
            SlotVal::Affine { constant: c0, terms: ts } => {
                *constant += w * c0;
                for &(v, wt) in ts {
                    *terms.entry(v).or_insert(0.0) += w * wt;
                }
            }
        };
        let last_a = a + 1 == n_a;
        let last_b = b + 1 == n_b;
        match (last_a, last_b) {
            (false, false) => add_slot(&self.joint[t.joint_slot(a, b, x, y)], weight),
            (true, false) => {
                add_slot(&self.marg_b[t.marg_b_slot(b, y)], weight);
                for a2 in 0..n_a - 1 {
                    add_slot(&self.joint[t.joint_slot(a2, b, x, y)], -weight);
                }
            }
            (false, true) => {
                add_slot(&self.marg_a[t.marg_a_slot(a, x)], weight);
                for b2 in 0..n_b - 1 {
                    add_slot(&self.joint[t.joint_slot(a, b2, x, y)], -weight);
                }
            }
            (true, true) => {
                add_slot(&self.norm, weight);
                for a2 in 0..n_a - 1 {
                    add_slot(&self.marg_a[t.marg_a_slot(a2, x)], -weight);
                }
                for b2 in 0..n_b - 1 {
                    add_slot(&self.marg_b[t.marg_b_slot(b2, y)], -weight);
                }
                for a2 in 0..n_a - 1 {
                    for b2 in 0..n_b - 1 {
                        add_slot(&self.joint[t.joint_slot(a2, b2, x, y)], weight);
                    }
                }
            }
        }
    }
}

/// Membership verdict for the level-l outer approximation of the quantum
/// set.
#[derive(Debug, Clone)]
pub struct NpaMembership {
    pub level: usize,
    pub feasible: bool,
    /// Optimal uniform slack (nonpositive when feasible).
    pub slack: f64,
    /// Moment matrix at the optimum.
    pub certificate: SymMat,
    pub diagnostics: Diagnostics,
}

/// Tests whether a correlation admits a PSD bipartite moment matrix at the
/// given local level (membership in the outer approximation of the quantum
/// set).
pub fn q_membership(p: &Correlation, level: usize) -> Result<NpaMembership> {
    p.validate()?;
    let t = build_bipartite_template(&p.scenario, level)?;
    let mut b = SdpBuilder::new();
    let slack = b.free_var();
    b.add_objective(slack, 1.0);
    let inst = BipInstance::pinned(&mut b, &t, p);
    let mut am = AffineMat::new(t.dim());
    inst.add_to(&mut am, &t, 1.0);
    for i in 0..t.dim() {
        am.add_term(i, i, slack, 1.0);
    }
    b.add_lmi(am);
    let sol = b.build().solve(&di_opts())?;
    crate::steering::check_optimal(&sol, "quantum-set membership probe")?;
    Ok(NpaMembership {
        level,
        feasible: sol.optimum <= tol::FEASIBILITY,
        slack: sol.optimum,
        certificate: inst.value_at(&t, &sol.primal_point),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Maximum of a Bell functional over the level-l outer approximation of the
/// quantum set.
pub fn bell_qtilde_max(f: &BellFunctional, level: usize) -> Result<f64> {
    let t = build_bipartite_template(&f.scenario, level)?;
    let mut b = SdpBuilder::new();
    let mut inst = BipInstance::fresh(&mut b, &t);
    inst.norm = SlotVal::Const(1.0);
    let mut am = AffineMat::new(t.dim());
    inst.add_to(&mut am, &t, 1.0);
    b.add_lmi(am);
    let s = &f.scenario;
    let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
    let mut constant = 0.0;
    for x in 0..s.settings[0] {
        for y in 0..s.settings[1] {
            for a in 0..s.outcomes[0] {
                for bb in 0..s.outcomes[1] {
                    let w = f.coefficient(a, bb, x, y);
                    if w != 0.0 {
                        inst.accumulate_probability(&t, a, bb, x, y, w, &mut terms, &mut constant);
                    }
                }
            }
        }
    }
    for (v, w) in terms {
        b.add_objective(v, -w);
    }
    let sol = b.build().solve(&di_opts())?;
    crate::steering::check_optimal(&sol, "Bell maximization over the moment set")?;
    Ok(-sol.optimum + constant)
}

/// Moment-matrix route to a DI lower bound on the generalized robustness of
/// entanglement:
/// `min chi[omega]_tr - 1` with `chi[omega]^{T_A} >= 0`,
/// `chi[omega] >= chi[rho]`, both moment matrices PSD, `chi[rho]_tr = 1`,
/// and the observable entries of `chi[rho]` pinned to the data.
pub fn er_di_mblhg(p: &Correlation, level: usize) -> Result<DiBound> {
    p.validate()?;
    let t = build_bipartite_template(&p.scenario, level)?;
    let mut b = SdpBuilder::new();
    let omega = BipInstance::fresh(&mut b, &t);
    let rho = BipInstance::pinned(&mut b, &t, p);
    er_di_core(b, t, omega, rho, level)
}

/// Bell-value-constrained variant of [`er_di_mblhg`]: only the functional
/// value is observed, so the data matrix keeps free observable slots tied
/// together by the Bell equality and its trace pinned to one.
pub fn er_di_bell(f: &BellFunctional, observed_value: f64, level: usize) -> Result<DiBound> {
    er_di_bell_mixed(f, observed_value, level, level)
}

/// [`er_di_bell`] with independent per-party word lengths.
pub fn er_di_bell_mixed(
    f: &BellFunctional,
    observed_value: f64,
    level_a: usize,
    level_b: usize,
) -> Result<DiBound> {
    let t = build_bipartite_template_mixed(&f.scenario, level_a, level_b)?;
    let mut b = SdpBuilder::new();
    let omega = BipInstance::fresh(&mut b, &t);
    let mut rho = BipInstance::fresh(&mut b, &t);
    rho.norm = SlotVal::Const(1.0);
    add_bell_row(&mut b, &t, &rho, f, observed_value);
    let level = level_a.max(level_b);
    match er_di_core(b, t, omega, rho, level) {
        Ok(bound) => Ok(bound),
        Err(e) => {
            // An observed value above the level-l quantum maximum leaves the
            // program without feasible points; certify that by the slack
            // probe before reporting a failure.
            let slack = bell_membership_slack(f, observed_value, level_a, level_b)?;
            if slack > tol::FEASIBILITY {
                Ok(DiBound {
                    value: f64::NAN,
                    level,
                    status: DiStatus::Infeasible,
                    certificate: Vec::new(),
                    diagnostics: Diagnostics {
                        status: SolveStatus::PrimalInfeasible,
                        gap: slack,
                        residuals: (0.0, 0.0),
                        iterations: 0,
                    },
                })
            } else {
                Err(e)
            }
        }
    }
}

fn add_bell_row(
    b: &mut SdpBuilder,
    t: &BipartiteTemplate,
    rho: &BipInstance,
    f: &BellFunctional,
    observed_value: f64,
) {
    let s = &f.scenario;
    let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
    let mut constant = 0.0;
    for x in 0..s.settings[0] {
        for y in 0..s.settings[1] {
            for a in 0..s.outcomes[0] {
                for bb in 0..s.outcomes[1] {
                    let w = f.coefficient(a, bb, x, y);
                    if w != 0.0 {
                        rho.accumulate_probability(t, a, bb, x, y, w, &mut terms, &mut constant);
                    }
                }
            }
        }
    }
    b.add_equality(terms.into_iter().collect(), observed_value - constant);
}

/// Minimal uniform slack making a Bell-value-pinned moment matrix PSD;
/// positive slack certifies the value is unattainable at this level.
pub fn bell_membership_slack(
    f: &BellFunctional,
    observed_value: f64,
    level_a: usize,
    level_b: usize,
) -> Result<f64> {
    let t = build_bipartite_template_mixed(&f.scenario, level_a, level_b)?;
    let mut b = SdpBuilder::new();
    let slack = b.free_var();
    b.add_objective(slack, 1.0);
    let mut rho = BipInstance::fresh(&mut b, &t);
    rho.norm = SlotVal::Const(1.0);
    add_bell_row(&mut b, &t, &rho, f, observed_value);
    let mut am = AffineMat::new(t.dim());
    rho.add_to(&mut am, &t, 1.0);
    for i in 0..t.dim() {
        am.add_term(i, i, slack, 1.0);
    }
    b.add_lmi(am);
    let sol = b.build().solve(&di_opts())?;
    crate::steering::check_optimal(&sol, "Bell-value membership probe")?;
    Ok(sol.optimum)
}

fn er_di_core(
    mut b: SdpBuilder,
    t: BipartiteTemplate,
    omega: BipInstance,
    rho: BipInstance,
    level: usize,
) -> Result<DiBound> {
    let dim = t.dim();
    let (norm_var, norm_w) = crate::amm::AmmInstance::slot_var(&omega.norm);
    b.add_objective(norm_var, norm_w);
    b.set_objective_offset(-1.0);

    let mut dominate = AffineMat::new(dim);
    omega.add_to(&mut dominate, &t, 1.0);
    rho.add_to(&mut dominate, &t, -1.0);
    b.add_lmi(dominate);

    let mut pt = AffineMat::new(dim);
    omega.add_pt_to(&mut pt, &t, 1.0);
    b.add_lmi(pt);

    let mut omega_psd = AffineMat::new(dim);
    omega.add_to(&mut omega_psd, &t, 1.0);
    b.add_lmi(omega_psd);

    let mut rho_psd = AffineMat::new(dim);
    rho.add_to(&mut rho_psd, &t, 1.0);
    b.add_lmi(rho_psd);

    let sol = b.build().solve(&di_opts())?;
    let diag = Diagnostics::from_solution(&sol);
    match sol.status {
        SolveStatus::Optimal => Ok(DiBound {
            value: sol.optimum,
            level,
            status: DiStatus::Optimal,
            certificate: vec![rho.value_at(&t, &sol.primal_point), omega.value_at(&t, &sol.primal_point)],
            diagnostics: diag,
        }),
        SolveStatus::PrimalInfeasible => Ok(DiBound {
            value: f64::NAN,
            level,
            status: DiStatus::Infeasible,
            certificate: Vec::new(),
            diagnostics: diag,
        }),
        SolveStatus::MaxIterations
            if sol.gap.max(sol.residuals.0).max(sol.residuals.1) <= 1e-4 =>
        {
            Ok(DiBound {
                value: sol.optimum,
                level,
                status: DiStatus::NearOptimal,
                certificate: vec![
                    rho.value_at(&t, &sol.primal_point),
                    omega.value_at(&t, &sol.primal_point),
                ],
                diagnostics: diag,
            })
        }
        other => Err(Error::Solver(format!(
            "DI entanglement bound: {other:?} (gap {:.2e}, residuals {:.2e}/{:.2e})",
            sol.gap, sol.residuals.0, sol.residuals.1
        ))),
    }
}

/// Decides Bell locality by the slack probe over the local polytope in
/// Collins-Gisin coordinates.
pub fn is_local(p: &Correlation) -> Result<bool> {
    p.validate()?;
    let s = &p.scenario;
    let (n_x, n_y, n_a, n_b) =
        (s.settings[0], s.settings[1], s.outcomes[0], s.outcomes[1]);
    let strat_a = deterministic_strategies(n_x, n_a)?;
    let strat_b = deterministic_strategies(n_y, n_b)?;
    if strat_a.len() * strat_b.len() > 100_000 {
        return Err(Error::Overflow("local polytope too large".into()));
    }
    let mut b = SdpBuilder::new();
    let weights = b.free_var_vec(strat_a.len() * strat_b.len());
    let slack = b.free_var();
    b.add_objective(slack, 1.0);
    for &w in &weights {
        let mut am = AffineMat::new(1);
        am.add_term(0, 0, w, 1.0);
        am.add_term(0, 0, slack, 1.0);
        b.add_lmi(am);
    }
    // Collins-Gisin coordinates determine a no-signaling table uniquely.
    b.add_equality(weights.iter().map(|&w| (w, 1.0)).collect(), 1.0);
    let idx = |la: usize, lb: usize| la * strat_b.len() + lb;
    for x in 0..n_x {
        for a in 0..n_a - 1 {
            let mut coeffs = Vec::new();
            for (la, sa) in strat_a.iter().enumerate() {
                if sa[x] == a {
                    for lb in 0..strat_b.len() {
                        coeffs.push((weights[idx(la, lb)], 1.0));
                    }
                }
            }
            b.add_equality(coeffs, p.marginal_a(a, x));
        }
    }
    for y in 0..n_y {
        for bb in 0..n_b - 1 {
            let mut coeffs = Vec::new();
            for (lb, sb) in strat_b.iter().enumerate() {
                if sb[y] == bb {
                    for la in 0..strat_a.len() {
                        coeffs.push((weights[idx(la, lb)], 1.0));
                    }
                }
            }
            b.add_equality(coeffs, p.marginal_b(bb, y));
        }
    }
    for x in 0..n_x {
        for a in 0..n_a - 1 {
            for y in 0..n_y {
                for bb in 0..n_b - 1 {
                    let mut coeffs = Vec::new();
                    for (la, sa) in strat_a.iter().enumerate() {
                        if sa[x] != a {
                            continue;
                        }
                        for (lb, sb) in strat_b.iter().enumerate() {
                            if sb[y] == bb {
                                coeffs.push((weights[idx(la, lb)], 1.0));
                            }
                        }
                    }
                    b.add_equality(coeffs, p.get2(a, bb, x, y));
                }
            }
        }
    }
    let sol = b.build().solve(&di_opts())?;
    crate::steering::check_optimal(&sol, "locality probe")?;
    Ok(sol.optimum <= tol::FEASIBILITY)
}

/// Nonlocal robustness with the quantum set approximated from outside by
/// the level-l moment relaxation. With `consistent`, the noise is required
/// to reproduce B's marginals. Returns 0 for local correlations; otherwise
/// the value is 1/s* from the maximize-s reformulation (a lower bound on
/// the true robustness).
pub fn nonlocal_robustness(p: &Correlation, level: usize, consistent: bool) -> Result<DiBound> {
    p.validate()?;
    if is_local(p)? {
        return Ok(DiBound {
            value: 0.0,
            level,
            status: DiStatus::Optimal,
            certificate: Vec::new(),
            diagnostics: Diagnostics {
                status: SolveStatus::Optimal,
                gap: 0.0,
                residuals: (0.0, 0.0),
                iterations: 0,
            },
        });
    }
    let s = &p.scenario;
    let (n_x, n_y, n_a, n_b) =
        (s.settings[0], s.settings[1], s.outcomes[0], s.outcomes[1]);
    let strat_a = deterministic_strategies(n_x, n_a)?;
    let strat_b = deterministic_strategies(n_y, n_b)?;
    let t = build_bipartite_template(s, level)?;
    let mut b = SdpBuilder::new();
    let q: Vec<usize> = b.free_var_vec(strat_a.len() * strat_b.len());
    let idx = |la: usize, lb: usize| la * strat_b.len() + lb;

    // q(lambda) >= 0 and s = sum q - 1 >= 0.
    for &v in &q {
        let mut am = AffineMat::new(1);
        am.add_term(0, 0, v, 1.0);
        b.add_lmi(am);
    }
    let mut s_lmi = AffineMat::new(1);
    for &v in &q {
        s_lmi.add_term(0, 0, v, 1.0);
    }
    s_lmi.add_const(0, 0, -1.0);
    b.add_lmi(s_lmi);

    // The shifted correlation Q'(a,b|x,y) = sum_l D D q(l) - (sum q - 1) P
    // must admit a PSD moment matrix. Q' is normalized by construction, so
    // the norm slot is the constant one.
    let mut inst = BipInstance::fresh(&mut b, &t);
    inst.norm = SlotVal::Const(1.0);
    let affine_q = |target: &mut SlotVal, pv: f64, members: Vec<usize>| {
        // sum_members q - pv * (sum q - 1) = pv + sum q_l (1[member] - pv)
        let members: std::collections::BTreeSet<usize> = members.into_iter().collect();
        let terms: Vec<(usize, f64)> = q
            .iter()
            .enumerate()
            .map(|(l, &v)| (v, if members.contains(&l) { 1.0 - pv } else { -pv }))
            .collect();
        *target = SlotVal::Affine { constant: pv, terms };
    };
    for x in 0..n_x {
        for a in 0..n_a - 1 {
            let members: Vec<usize> = strat_a
                .iter()
                .enumerate()
                .filter(|(_, sa)| sa[x] == a)
                .flat_map(|(la, _)| (0..strat_b.len()).map(move |lb| idx(la, lb)))
                .collect();
            let slot = t.marg_a_slot(a, x);
            let mut sv = SlotVal::Const(0.0);
            affine_q(&mut sv, p.marginal_a(a, x), members);
            inst.marg_a[slot] = sv;
        }
    }
    for y in 0..n_y {
        for bb in 0..n_b - 1 {
            let members: Vec<usize> = strat_b
                .iter()
                .enumerate()
                .filter(|(_, sb)| sb[y] == bb)
                .flat_map(|(lb, _)| (0..strat_a.len()).map(move |la| idx(la, lb)))
                .collect();
            let slot = t.marg_b_slot(bb, y);
            let mut sv = SlotVal::Const(0.0);
            affine_q(&mut sv, p.marginal_b(bb, y), members);
            inst.marg_b[slot] = sv;
        }
    }
    for x in 0..n_x {
        for a in 0..n_a - 1 {
            for y in 0..n_y {
                for bb in 0..n_b - 1 {
                    let members: Vec<usize> = strat_a
                        .iter()
                        .enumerate()
                        .filter(|(_, sa)| sa[x] == a)
                        .flat_map(|(la, _)| {
                            strat_b
                                .iter()
                                .enumerate()
                                .filter(|(_, sb)| sb[y] == bb)
                                .map(move |(lb, _)| idx(la, lb))
                        })
                        .collect();
                    let slot = t.joint_slot(a, bb, x, y);
                    let mut sv = SlotVal::Const(0.0);
                    affine_q(&mut sv, p.get2(a, bb, x, y), members);
                    inst.joint[slot] = sv;
                }
            }
        }
    }
    let mut am = AffineMat::new(t.dim());
    inst.add_to(&mut am, &t, 1.0);
    b.add_lmi(am);

    // Consistency on B's marginals: sum_l D(b|y,l) q(l) = P(b|y) sum_l q(l)
    // (the last outcome follows from the others).
    if consistent {
        for y in 0..n_y {
            for bb in 0..n_b - 1 {
                let pv = p.marginal_b(bb, y);
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                for (lb, sb) in strat_b.iter().enumerate() {
                    let member = sb[y] == bb;
                    for la in 0..strat_a.len() {
                        let w = if member { 1.0 - pv } else { -pv };
                        coeffs.push((q[idx(la, lb)], w));
                    }
                }
                b.add_equality(coeffs, 0.0);
            }
        }
    }

    // Maximize s = sum q - 1.
    for &v in &q {
        b.add_objective(v, -1.0);
    }
    b.set_objective_offset(1.0);

    let sol = b.build().solve(&di_opts())?;
    let diag = Diagnostics::from_solution(&sol);
    let near = sol.status == SolveStatus::MaxIterations
        && sol.gap.max(sol.residuals.0).max(sol.residuals.1) <= 1e-4;
    if sol.status != SolveStatus::Optimal && !near {
        return Err(Error::Solver(format!(
            "nonlocal robustness: {:?} (gap {:.2e}, residuals {:.2e}/{:.2e})",
            sol.status, sol.gap, sol.residuals.0, sol.residuals.1
        )));
    }
    let s_star = -sol.optimum; // optimum = 1 - sum q = -s
    let value = if s_star > 0.0 { 1.0 / s_star } else { f64::INFINITY };
    Ok(DiBound {
        value,
        level,
        status: if near { DiStatus::NearOptimal } else { DiStatus::Optimal },
        certificate: vec![inst.value_at(&t, &sol.primal_point)],
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        born_correlation, chsh_optimal_settings, deterministic_correlation, isotropic_state,
        pr_box_assemblage, qubit_measurements, bell_value,
    };

    fn pr_box_marginal() -> Correlation {
        let rho_hat = crate::linalg::ComplexMatrix::identity(2).scale_re(0.5);
        let asm = pr_box_assemblage(&rho_hat).unwrap();
        let charlie = qubit_measurements(&[[0.0, 0.0, 1.0]]).unwrap();
        asm.correlation_with(&charlie).unwrap().marginal_ab().unwrap()
    }

    #[test]
    fn template_structure_level1() {
        let t = build_bipartite_template(&Scenario::bipartite(2, 2, 2, 2), 1).unwrap();
        assert_eq!(t.a_words.len(), 3);
        assert_eq!(t.dim(), 9);
        assert_eq!(t.entry(0, 0), PairSymbol::Norm);
        // Row (A-word E_{0|0}, identity) against column (identity, identity)
        // gives Alice's marginal.
        let r = t.row(1, 0);
        assert!(matches!(t.entry(r, 0), PairSymbol::MarginalA { setting: 0, outcome: 0 }));
        let c = t.row(0, 1);
        assert!(matches!(t.entry(c, 0), PairSymbol::MarginalB { setting: 0, outcome: 0 }));
        assert!(matches!(t.entry(r, c), PairSymbol::Joint { a: 0, b: 0, x: 0, y: 0 }));
        // Symmetric classification.
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                assert_eq!(t.entry(i, j), t.entry(j, i));
            }
        }
    }

    #[test]
    fn local_points_are_members_all_levels() {
        let scenario = Scenario::bipartite(2, 2, 2, 2);
        let p = deterministic_correlation(&scenario, &[0, 1], &[1, 1]).unwrap();
        for level in 1..=2 {
            let m = q_membership(&p, level).unwrap();
            assert!(m.feasible, "level {level}: slack {}", m.slack);
        }
    }

    #[test]
    fn pr_box_rejected_at_level_one() {
        let p = pr_box_marginal();
        let m = q_membership(&p, 1).unwrap();
        assert!(!m.feasible, "slack {}", m.slack);
        assert!(m.slack > 1e-3);
    }

    #[test]
    fn tsirelson_boundary_is_member() {
        let (alice, bob) = chsh_optimal_settings();
        let p = born_correlation(&isotropic_state(2, 1.0).unwrap(), &[&alice, &bob]).unwrap();
        let m = q_membership(&p, 1).unwrap();
        assert!(m.feasible, "slack {}", m.slack);
    }

    #[test]
    fn chsh_qtilde_max_is_tsirelson() {
        let f = crate::quantum::BellFunctional::chsh();
        let max = bell_qtilde_max(&f, 1).unwrap();
        assert!((max - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-6, "{max}");
    }

    #[test]
    fn nonlocal_robustness_zero_for_local() {
        let scenario = Scenario::bipartite(2, 2, 2, 2);
        let p = deterministic_correlation(&scenario, &[0, 0], &[1, 0]).unwrap();
        let nr = nonlocal_robustness(&p, 1, false).unwrap();
        assert_eq!(nr.value, 0.0);
    }

    #[test]
    fn nonlocal_robustness_chsh_family() {
        let (alice, bob) = chsh_optimal_settings();
        let sq = std::f64::consts::SQRT_2;
        for &v in &[0.8, 0.9] {
            let p = born_correlation(&isotropic_state(2, v).unwrap(), &[&alice, &bob]).unwrap();
            let nr = nonlocal_robustness(&p, 2, false).unwrap();
            let fit = (sq * v - 1.0) * (sq - 1.0);
            assert!(
                (nr.value - fit).abs() < 5e-3,
                "v={v}: NR {} vs fit {fit}",
                nr.value
            );
            // Consistent variant only adds constraints.
            let nrc = nonlocal_robustness(&p, 2, true).unwrap();
            assert!(nrc.value >= nr.value - 1e-6, "NRc {} < NR {}", nrc.value, nr.value);
        }
    }

    #[test]
    fn er_di_chsh_endpoint() {
        // Tight at the Tsirelson point from local level 2 on.
        let (alice, bob) = chsh_optimal_settings();
        let p = born_correlation(&isotropic_state(2, 1.0).unwrap(), &[&alice, &bob]).unwrap();
        let er = er_di_mblhg(&p, 2).unwrap();
        assert!(er.status.is_bound());
        assert!((er.value - 1.0).abs() < 1e-3, "ER_DI {}", er.value);
        // Level 1 is strictly weaker but still a valid lower bound.
        let weak = er_di_mblhg(&p, 1).unwrap();
        assert!(weak.value <= er.value + 1e-7);
    }

    #[test]
    fn er_di_bell_chsh_closed_form() {
        // The closed form is met at local level 3.
        let f = crate::quantum::BellFunctional::chsh();
        let sq = std::f64::consts::SQRT_2;
        for &tval in &[2.4, 2.0 * sq] {
            let er = er_di_bell(&f, tval, 3).unwrap();
            let expect = (tval - 2.0) / (2.0 * sq - 2.0);
            assert!(er.status.is_bound());
            assert!(
                (er.value - expect).abs() < 1e-4,
                "t={tval}: {} vs {expect}",
                er.value
            );
        }
        // At the local bound the certified robustness vanishes already at
        // level 1.
        let zero = er_di_bell(&f, 2.0, 1).unwrap();
        assert!(zero.value.abs() < 1e-6, "{}", zero.value);
    }

    #[test]
    fn er_di_bell_above_quantum_max_infeasible() {
        let f = crate::quantum::BellFunctional::chsh();
        let er = er_di_bell(&f, 3.2, 1).unwrap();
        assert_eq!(er.status, DiStatus::Infeasible);
    }

    #[test]
    fn pr_box_value_check() {
        let p = pr_box_marginal();
        let f = crate::quantum::BellFunctional::chsh();
        assert!((bell_value(&f, &p).unwrap().abs() - 4.0).abs() < 1e-12);
    }
}
