//! Assemblage moment matrices: symbolic templates over one party's operator
//! words, numeric instantiation, and the device-independent steering SDPs
//! built on them, including the tripartite construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::quantum::{
    deterministic_strategies, Assemblage, BellFunctional, Correlation, MeasurementAssemblage,
    Scenario, TripartiteAssemblage,
};
use crate::solver::{AffineMat, SdpBuilder, SolveStatus, SolverOptions, SymMat};
use crate::steering::Diagnostics;
use crate::tol;
use crate::words::{classify, enumerate_words, EntrySymbol, OperatorWord};

/// Highest supported moment-matrix level.
pub const MAX_LEVEL: usize = 5;

/// Cap on the number of words per template.
pub const WORD_CAP: usize = 256;

/// Symbolic moment-matrix template for one party: ordered words and the
/// classification of every entry (i,j) as the canonical symbol of
/// reduce(reverse(words[j]) * words[i]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmmTemplate {
    pub level: usize,
    pub n_settings: usize,
    pub n_outcomes: usize,
    pub words: Vec<OperatorWord>,
    entries: Vec<EntrySymbol>,
    /// Distinct canonical unknown words, in deterministic order.
    pub unknown_symbols: Vec<OperatorWord>,
}

impl AmmTemplate {
    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &EntrySymbol {
        &self.entries[i * self.words.len() + j]
    }

    /// Number of distinct observable-probability slots (setting, outcome)
    /// with the last outcome eliminated.
    pub fn prob_slot_count(&self) -> usize {
        self.n_settings * (self.n_outcomes - 1)
    }

    pub fn prob_slot(&self, setting: usize, outcome: usize) -> usize {
        debug_assert!(outcome + 1 < self.n_outcomes.max(1) || self.n_outcomes == 1);
        setting * (self.n_outcomes - 1) + outcome
    }

    pub fn unknown_index(&self, w: &OperatorWord) -> Option<usize> {
        self.unknown_symbols.binary_search(w).ok()
    }
}

/// Builds the level-`level` template for a party with `n_settings` settings
/// and `n_outcomes` outcomes.
pub fn build_template(n_settings: usize, n_outcomes: usize, level: usize) -> Result<AmmTemplate> {
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "moment-matrix level must lie in 1..={MAX_LEVEL}, got {level}"
        )));
    }
    if n_settings == 0 || n_outcomes < 2 {
        return Err(Error::InvalidArgument(
            "template needs >= 1 setting and >= 2 outcomes".into(),
        ));
    }
    let words = enumerate_words(n_settings, n_outcomes, level, WORD_CAP)?;
    let n = words.len();
    let mut entries = Vec::with_capacity(n * n);
    let mut unknown_set = std::collections::BTreeSet::new();
    for wi in &words {
        for wj in &words {
            let sym = classify(wj.reversed().concat(wi));
            if let EntrySymbol::Unknown(w) = &sym {
                unknown_set.insert(w.clone());
            }
            entries.push(sym);
        }
    }
    Ok(AmmTemplate {
        level,
        n_settings,
        n_outcomes,
        words,
        entries,
        unknown_symbols: unknown_set.into_iter().collect(),
    })
}

/// Numeric moment matrices of an assemblage under given projective
/// measurements: one PSD matrix per (a,x), ordered x-outer a-inner like
/// [`Assemblage::state`].
pub fn instantiate_numeric(
    template: &AmmTemplate,
    assemblage: &Assemblage,
    measurements: &MeasurementAssemblage,
) -> Result<Vec<ComplexMatrix>> {
    if measurements.n_settings != template.n_settings
        || measurements.n_outcomes != template.n_outcomes
    {
        return Err(Error::Dimension("measurements do not match the template scenario".into()));
    }
    if measurements.dim != assemblage.dim {
        return Err(Error::Dimension("assemblage and measurement dimensions differ".into()));
    }
    let defect = measurements.projectivity_defect();
    if defect > tol::PROJECTIVE {
        return Err(Error::NonProjective(defect));
    }
    let d = measurements.dim;
    let word_ops: Vec<ComplexMatrix> = template
        .words
        .iter()
        .map(|w| {
            let mut op = ComplexMatrix::identity(d);
            for l in w.letters() {
                op = op.matmul(measurements.element(l.outcome as usize, l.setting as usize));
            }
            op
        })
        .collect();
    let n = template.dim();
    let mut out = Vec::with_capacity(assemblage.n_settings * assemblage.n_outcomes);
    for x in 0..assemblage.n_settings {
        for a in 0..assemblage.n_outcomes {
            let rho = assemblage.state(a, x);
            let chi = ComplexMatrix::from_fn(n, n, |i, j| {
                word_ops[j].adjoint().matmul(&word_ops[i]).matmul(rho).trace()
            });
            out.push(chi);
        }
    }
    Ok(out)
}

/// Value bound to a moment-matrix slot during SDP assembly.
#[derive(Debug, Clone)]
pub(crate) enum SlotVal {
    Const(f64),
    Var(usize),
    Affine { constant: f64, terms: Vec<(usize, f64)> },
}

impl SlotVal {
    pub(crate) fn add_to(&self, am: &mut AffineMat, i: usize, j: usize, sign: f64) {
        match self {
            SlotVal::Const(c) => am.add_const(i, j, sign * c),
            SlotVal::Var(v) => am.add_term(i, j, *v, sign),
            SlotVal::Affine { constant, terms } => {
                am.add_const(i, j, sign * constant);
                for &(v, w) in terms {
                    am.add_term(i, j, v, sign * w);
                }
            }
        }
    }

    pub(crate) fn value_at(&self, point: &[f64]) -> f64 {
        match self {
            SlotVal::Const(c) => *c,
            SlotVal::Var(v) => point[*v],
            SlotVal::Affine { constant, terms } => {
                constant + terms.iter().map(|&(v, w)| w * point[v]).sum::<f64>()
            }
        }
    }
}

/// One bound moment matrix: slot values for the normalization, each
/// probability slot, and each unknown symbol of the template.
#[derive(Debug, Clone)]
pub(crate) struct AmmInstance {
    pub norm: SlotVal,
    pub probs: Vec<SlotVal>,
    pub unknowns: Vec<SlotVal>,
}

impl AmmInstance {
    /// All slots bound to fresh free variables.
    pub(crate) fn fresh(b: &mut SdpBuilder, t: &AmmTemplate) -> Self {
        Self::fresh_scaled(b, t, 1.0)
    }

    /// Fresh variables entering every slot with a fixed scale; used to keep
    /// the hidden family O(1) when its optimal weight is tiny.
    pub(crate) fn fresh_scaled(b: &mut SdpBuilder, t: &AmmTemplate, scale: f64) -> Self {
        let slot = |b: &mut SdpBuilder| {
            let v = b.free_var();
            if scale == 1.0 {
                SlotVal::Var(v)
            } else {
                SlotVal::Affine { constant: 0.0, terms: vec![(v, scale)] }
            }
        };
        Self {
            norm: slot(b),
            probs: (0..t.prob_slot_count()).map(|_| slot(b)).collect(),
            unknowns: t.unknown_symbols.iter().map(|_| slot(b)).collect(),
        }
    }

    /// Variable index and coefficient of a single-variable slot.
    pub(crate) fn slot_var(sv: &SlotVal) -> (usize, f64) {
        match sv {
            SlotVal::Var(v) => (*v, 1.0),
            SlotVal::Affine { constant, terms } if *constant == 0.0 && terms.len() == 1 => {
                terms[0]
            }
            other => unreachable!("expected a single-variable slot, got {other:?}"),
        }
    }

    pub(crate) fn slot<'a>(&'a self, t: &AmmTemplate, sym: &EntrySymbol) -> Option<&'a SlotVal> {
        match sym {
            EntrySymbol::Zero => None,
            EntrySymbol::Normalization => Some(&self.norm),
            EntrySymbol::Probability { setting, outcome } => {
                Some(&self.probs[t.prob_slot(*setting as usize, *outcome as usize)])
            }
            EntrySymbol::Unknown(w) => {
                Some(&self.unknowns[t.unknown_index(w).expect("symbol from same template")])
            }
        }
    }

    /// Adds `sign * chi(instance)` to an affine matrix expression.
    pub(crate) fn add_to(&self, am: &mut AffineMat, t: &AmmTemplate, sign: f64) {
        let n = t.dim();
        for i in 0..n {
            for j in i..n {
                if let Some(slot) = self.slot(t, t.entry(i, j)) {
                    slot.add_to(am, i, j, sign);
                }
            }
        }
    }

    /// Numeric moment matrix at a solution point.
    pub(crate) fn value_at(&self, t: &AmmTemplate, point: &[f64]) -> SymMat {
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
}

/// Status of a device-independent bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiStatus {
    Optimal,
    /// The solve stalled short of full tolerance on a degenerate instance;
    /// the value is the best iterate's, good to the gap recorded in the
    /// diagnostics (at worst ~1e-4 relative).
    NearOptimal,
    /// The data lie outside the level-l outer approximation; this is a
    /// certificate, not an error.
    Infeasible,
}

impl DiStatus {
    pub fn is_bound(self) -> bool {
        matches!(self, DiStatus::Optimal | DiStatus::NearOptimal)
    }
}

/// A device-independent lower bound with its certificate.
#[derive(Debug, Clone)]
pub struct DiBound {
    /// Bound value; NaN when `status` is `Infeasible`.
    pub value: f64,
    pub level: usize,
    pub status: DiStatus,
    /// Optimal observed-side moment matrices (one per (a,x), x outer).
    pub certificate: Vec<SymMat>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn di_opts() -> SolverOptions {
    let mut opts = SolverOptions::default();
    // Moment-matrix programs on near-boundary data (pure states, maximal
    // violations) run into much worse KKT conditioning than the small
    // device-dependent SDPs; the primal residual plateaus around 1e-7
    // there. The bound tolerances checked downstream are 1e-4 and coarser,
    // so the feasibility tolerance concedes one digit.
    opts.feas_tol = 1e-7;
    // Diagnostic hook for stubborn instances.
    if std::env::var_os("STEERKIT_SOLVER_VERBOSE").is_some() {
        opts.verbose = true;
    }
    opts
}

fn di_solve(
    problem: crate::solver::SdpProblem,
    level: usize,
    observed: &[(AmmTemplate, AmmInstance)],
) -> Result<DiBound> {
    let sol = problem.solve(&di_opts())?;
    match sol.status {
        SolveStatus::Optimal => Ok(DiBound {
            value: sol.optimum,
            level,
            status: DiStatus::Optimal,
            certificate: observed
                .iter()
                .map(|(t, inst)| inst.value_at(t, &sol.primal_point))
                .collect(),
            diagnostics: Diagnostics::from_solution(&sol),
        }),
        SolveStatus::PrimalInfeasible => Ok(DiBound {
            value: f64::NAN,
            level,
            status: DiStatus::Infeasible,
            certificate: Vec::new(),
            diagnostics: Diagnostics::from_solution(&sol),
        }),
        SolveStatus::MaxIterations
            if sol.gap.max(sol.residuals.0).max(sol.residuals.1) <= 1e-4 =>
        {
            // Solver contract: MaxIterations returns the best iterate with
            // diagnostics. Degenerate boundary data (pure states, extremal
            // violations) routinely cap out between 1e-8 and 1e-5; the
            // downstream bound tolerances are coarser, so pass the iterate
            // through with its quality on record.
            Ok(DiBound {
                value: sol.optimum,
                level,
                status: DiStatus::NearOptimal,
                certificate: observed
                    .iter()
                    .map(|(t, inst)| inst.value_at(t, &sol.primal_point))
                    .collect(),
                diagnostics: Diagnostics::from_solution(&sol),
            })
        }
        other => Err(Error::Solver(format!(
            "device-independent SDP: {other:?} (gap {:.2e}, residuals {:.2e}/{:.2e})",
            sol.gap, sol.residuals.0, sol.residuals.1
        ))),
    }
}

struct SrDiProgram {
    builder: SdpBuilder,
    template: AmmTemplate,
    observed: Vec<AmmInstance>,
    hidden: Vec<AmmInstance>,
}

/// Shared scaffolding of the A-to-B DI steering programs: observed-side
/// instances chi[rho_{a|x}] (pinned from P when given), hidden instances
/// chi[rho_l] per deterministic strategy, the dominance LMIs with the given
/// sign, positivity LMIs, and the no-signaling equalities.
fn build_sr_di_scaffold(
    scenario: &Scenario,
    pins: Option<&Correlation>,
    level: usize,
    dominance_sign: f64,
    hidden_scale: f64,
) -> Result<SrDiProgram> {
    let (n_x, n_a) = (scenario.settings[0], scenario.outcomes[0]);
    let (n_y, n_b) = (scenario.settings[1], scenario.outcomes[1]);
    let template = build_template(n_y, n_b, level)?;
    let strategies = deterministic_strategies(n_x, n_a)?;
    let mut b = SdpBuilder::new();

    let observed: Vec<AmmInstance> = (0..n_x)
        .flat_map(|x| (0..n_a).map(move |a| (x, a)))
        .map(|(x, a)| match pins {
            Some(p) => AmmInstance {
                norm: SlotVal::Const(p.marginal_a(a, x)),
                probs: (0..n_y)
                    .flat_map(|y| (0..n_b - 1).map(move |bb| (y, bb)))
                    .map(|(y, bb)| SlotVal::Const(p.get2(a, bb, x, y)))
                    .collect(),
                unknowns: template
                    .unknown_symbols
                    .iter()
                    .map(|_| SlotVal::Var(b.free_var()))
                    .collect(),
            },
            None => AmmInstance::fresh(&mut b, &template),
        })
        .collect();
    let hidden: Vec<AmmInstance> = strategies
        .iter()
        .map(|_| AmmInstance::fresh_scaled(&mut b, &template, hidden_scale))
        .collect();

    let dim = template.dim();
    // Dominance LMIs: sign * (sum_l D(a|x,l) chi_l - chi_{a|x}) >= 0.
    for x in 0..n_x {
        for a in 0..n_a {
            let mut am = AffineMat::new(dim);
            for (l, strat) in strategies.iter().enumerate() {
                if strat[x] == a {
                    hidden[l].add_to(&mut am, &template, dominance_sign);
                }
            }
            observed[x * n_a + a].add_to(&mut am, &template, -dominance_sign);
            b.add_lmi(am);
        }
    }
    for inst in &hidden {
        let mut am = AffineMat::new(dim);
        inst.add_to(&mut am, &template, 1.0);
        b.add_lmi(am);
    }
    // With the reversed dominance (steerable-weight direction) the
    // positivity of the observed matrices is implied: chi_{a|x} is the sum
    // of the dominance slack and sum_l D chi_l, both PSD. Keeping the
    // redundant block degrades the dual geometry badly near the weight-1
    // extreme, so it is stated only in the forward direction.
    if dominance_sign > 0.0 {
        for inst in &observed {
            let mut am = AffineMat::new(dim);
            inst.add_to(&mut am, &template, 1.0);
            b.add_lmi(am);
        }
    }
    // No-signaling at the moment level: sum_a chi_{a|x} = sum_a chi_{a|0}
    // entry by entry. For pinned instances only the unknown slots remain
    // (the pinned constants agree by data validation); without pins the
    // normalization and probability slots participate too.
    for x in 1..n_x {
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut push_family = |pick: &dyn Fn(&AmmInstance) -> &SlotVal| {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            let mut rhs = 0.0;
            for a in 0..n_a {
                match pick(&observed[x * n_a + a]) {
                    SlotVal::Const(c) => rhs -= c,
                    SlotVal::Var(v) => coeffs.push((*v, 1.0)),
                    SlotVal::Affine { .. } => unreachable!("observed slots are const or var"),
                }
                match pick(&observed[a]) {
                    SlotVal::Const(c) => rhs += c,
                    SlotVal::Var(v) => coeffs.push((*v, -1.0)),
                    SlotVal::Affine { .. } => unreachable!("observed slots are const or var"),
                }
            }
            if !coeffs.is_empty() {
                rows.push((coeffs, -rhs));
            }
        };
        for s in 0..template.unknown_symbols.len() {
            push_family(&move |inst: &AmmInstance| &inst.unknowns[s]);
        }
        if pins.is_none() {
            push_family(&|inst: &AmmInstance| &inst.norm);
            for p in 0..template.prob_slot_count() {
                push_family(&move |inst: &AmmInstance| &inst.probs[p]);
            }
        }
        for (coeffs, rhs) in rows {
            b.add_equality(coeffs, rhs);
        }
    }
    Ok(SrDiProgram { builder: b, template, observed, hidden })
}

fn hidden_trace_objective(prog: &mut SrDiProgram, weight: f64, offset: f64) {
    let norms: Vec<(usize, f64)> =
        prog.hidden.iter().map(|inst| AmmInstance::slot_var(&inst.norm)).collect();
    for (v, w) in norms {
        prog.builder.add_objective(v, weight * w);
    }
    prog.builder.set_objective_offset(offset);
}

/// Linearized consistency rows retained from the quadratic constraint: for
/// every observable slot, `sum_l [chi_l]_slot = (sum_l chi_l_tr) * value`,
/// which is linear because the right-hand value is data.
fn add_consistency_rows(prog: &mut SrDiProgram, p: &Correlation) {
    let (n_y, n_b) = (p.scenario.settings[1], p.scenario.outcomes[1]);
    let hidden_norms: Vec<(usize, f64)> =
        prog.hidden.iter().map(|inst| AmmInstance::slot_var(&inst.norm)).collect();
    for y in 0..n_y {
        for bb in 0..n_b - 1 {
            let slot = prog.template.prob_slot(y, bb);
            let target = p.marginal_b(bb, y);
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for inst in &prog.hidden {
                let (v, w) = AmmInstance::slot_var(&inst.probs[slot]);
                coeffs.push((v, w));
            }
            for &(v, w) in &hidden_norms {
                coeffs.push((v, -target * w));
            }
            prog.builder.add_equality(coeffs, 0.0);
        }
    }
}

/// DI lower bound on the steering robustness from the full correlation.
pub fn sr_di(p: &Correlation, level: usize) -> Result<DiBound> {
    p.validate()?;
    if p.scenario.parties != 2 {
        return Err(Error::Schema("sr_di needs a bipartite correlation".into()));
    }
    let mut prog = build_sr_di_scaffold(&p.scenario, Some(p), level, 1.0, 1.0)?;
    hidden_trace_objective(&mut prog, 1.0, -1.0);
    let observed: Vec<(AmmTemplate, AmmInstance)> =
        prog.observed.iter().map(|i| (prog.template.clone(), i.clone())).collect();
    di_solve(prog.builder.build(), level, &observed)
}

/// DI lower bound on the consistent steering robustness: [`sr_di`] plus the
/// retained subset of the consistency constraints.
pub fn sr_di_consistent(p: &Correlation, level: usize) -> Result<DiBound> {
    p.validate()?;
    if p.scenario.parties != 2 {
        return Err(Error::Schema("sr_di_consistent needs a bipartite correlation".into()));
    }
    let mut prog = build_sr_di_scaffold(&p.scenario, Some(p), level, 1.0, 1.0)?;
    hidden_trace_objective(&mut prog, 1.0, -1.0);
    add_consistency_rows(&mut prog, p);
    let observed: Vec<(AmmTemplate, AmmInstance)> =
        prog.observed.iter().map(|i| (prog.template.clone(), i.clone())).collect();
    di_solve(prog.builder.build(), level, &observed)
}

/// DI lower bound on the steerable weight; with `consistent`, the retained
/// consistency subset is added.
pub fn sw_di(p: &Correlation, level: usize, consistent: bool) -> Result<DiBound> {
    p.validate()?;
    if p.scenario.parties != 2 {
        return Err(Error::Schema("sw_di needs a bipartite correlation".into()));
    }
    // The optimal hidden weight collapses toward zero on strongly steerable
    // data, which starves an O(1)-scaled interior method; retry with the
    // hidden family rescaled to keep its near-optimal face O(1).
    let mut fallback: Option<DiBound> = None;
    let mut last_err = None;
    for &scale in &[1.0, 1e-3, 1e-6] {
        let mut prog = build_sr_di_scaffold(&p.scenario, Some(p), level, -1.0, scale)?;
        hidden_trace_objective(&mut prog, -1.0, 1.0);
        if consistent {
            add_consistency_rows(&mut prog, p);
        }
        let observed: Vec<(AmmTemplate, AmmInstance)> =
            prog.observed.iter().map(|i| (prog.template.clone(), i.clone())).collect();
        match di_solve(prog.builder.build(), level, &observed) {
            Ok(bound) if bound.status != DiStatus::NearOptimal => return Ok(bound),
            Ok(bound) => {
                let better = fallback
                    .as_ref()
                    .map(|f| bound.diagnostics.gap < f.diagnostics.gap)
                    .unwrap_or(true);
                if better {
                    fallback = Some(bound);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match fallback {
        Some(bound) => Ok(bound),
        None => Err(last_err.expect("at least one attempt")),
    }
}

/// DI lower bound on the steering robustness from an observed Bell value
/// only (weaker than [`sr_di`]). The per-setting trace normalization
/// `sum_a chi_tr = 1` is imposed explicitly, since it no longer follows
/// from probability pins.
pub fn sr_di_bell(
    f: &BellFunctional,
    observed_value: f64,
    level: usize,
) -> Result<DiBound> {
    let scenario = &f.scenario;
    let (n_x, n_a) = (scenario.settings[0], scenario.outcomes[0]);
    let (n_y, n_b) = (scenario.settings[1], scenario.outcomes[1]);
    let mut prog = build_sr_di_scaffold(scenario, None, level, 1.0, 1.0)?;
    hidden_trace_objective(&mut prog, 1.0, -1.0);

    // sum_a chi_{a|x}_tr = 1 for every x.
    for x in 0..n_x {
        let coeffs: Vec<(usize, f64)> = (0..n_a)
            .map(|a| match &prog.observed[x * n_a + a].norm {
                SlotVal::Var(v) => (*v, 1.0),
                _ => unreachable!(),
            })
            .collect();
        prog.builder.add_equality(coeffs, 1.0);
    }

    // Bell equality: last outcomes of B are eliminated through the
    // normalization slot.
    let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
    let mut add = |slot: &SlotVal, w: f64| match slot {
        SlotVal::Var(v) => *coeffs.entry(*v).or_insert(0.0) += w,
        _ => unreachable!(),
    };
    for x in 0..n_x {
        for a in 0..n_a {
            let inst = &prog.observed[x * n_a + a];
            for y in 0..n_y {
                for bb in 0..n_b {
                    let w = f.coefficient(a, bb, x, y);
                    if w == 0.0 {
                        continue;
                    }
                    if bb + 1 < n_b {
                        add(&inst.probs[prog.template.prob_slot(y, bb)], w);
                    } else {
                        add(&inst.norm, w);
                        for b2 in 0..n_b - 1 {
                            add(&inst.probs[prog.template.prob_slot(y, b2)], -w);
                        }
                    }
                }
            }
        }
    }
    prog.builder.add_equality(coeffs.into_iter().collect(), observed_value);

    let observed: Vec<(AmmTemplate, AmmInstance)> =
        prog.observed.iter().map(|i| (prog.template.clone(), i.clone())).collect();
    match di_solve(prog.builder.build(), level, &observed) {
        Ok(bound) => Ok(bound),
        Err(e) => {
            // Values above the level-l quantum maximum leave no feasible
            // moment completion; certify with the membership probe from the
            // bipartite relaxation of the same level before failing.
            let slack = crate::npa::bell_membership_slack(f, observed_value, level, level)?;
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

/// Outcome of the tripartite AMM feasibility test.
#[derive(Debug, Clone)]
pub struct TripartiteFeasibility {
    pub feasible: bool,
    /// Optimal uniform slack (nonpositive when feasible).
    pub slack: f64,
    /// Moment matrices at the optimum, one per (a,b,x,y).
    pub certificate: Vec<SymMat>,
    pub diagnostics: Diagnostics,
}

/// Tests whether a tripartite correlation admits level-`level` assemblage
/// moment matrices: PSD completions with the observable entries pinned and
/// the marginal-consistency equalities enforced.
pub fn tripartite_amm_feasible(p3: &Correlation, level: usize) -> Result<TripartiteFeasibility> {
    p3.validate()?;
    if p3.scenario.parties != 3 {
        return Err(Error::Schema("tripartite_amm_feasible needs a tripartite correlation".into()));
    }
    let s = &p3.scenario;
    let (n_x, n_y, n_z) = (s.settings[0], s.settings[1], s.settings[2]);
    let (n_a, n_b, n_c) = (s.outcomes[0], s.outcomes[1], s.outcomes[2]);
    let template = build_template(n_z, n_c, level)?;
    let mut b = SdpBuilder::new();
    let slack = b.free_var();
    b.add_objective(slack, 1.0);

    let idx = |a: usize, bb: usize, x: usize, y: usize| ((x * n_y + y) * n_a + a) * n_b + bb;
    let mut instances: Vec<AmmInstance> = Vec::with_capacity(n_x * n_y * n_a * n_b);
    for x in 0..n_x {
        for y in 0..n_y {
            for a in 0..n_a {
                for bb in 0..n_b {
                    let norm: f64 = (0..n_c).map(|cc| p3.get3(a, bb, cc, x, y, 0)).sum();
                    let probs = (0..n_z)
                        .flat_map(|z| (0..n_c - 1).map(move |cc| (z, cc)))
                        .map(|(z, cc)| SlotVal::Const(p3.get3(a, bb, cc, x, y, z)))
                        .collect();
                    let unknowns = template
                        .unknown_symbols
                        .iter()
                        .map(|_| SlotVal::Var(b.free_var()))
                        .collect();
                    instances.push(AmmInstance { norm: SlotVal::Const(norm), probs, unknowns });
                }
            }
        }
    }
    // Reorder: instances were pushed in (x,y,a,b) order matching idx.
    let dim = template.dim();
    for inst in &instances {
        let mut am = AffineMat::new(dim);
        inst.add_to(&mut am, &template, 1.0);
        for i in 0..dim {
            am.add_term(i, i, slack, 1.0);
        }
        b.add_lmi(am);
    }
    // Consistency of the unknown slots across settings (pinned slots agree
    // by the correlation's validated no-signaling).
    for s_idx in 0..template.unknown_symbols.len() {
        let var_of = |a: usize, bb: usize, x: usize, y: usize| match &instances
            [idx(a, bb, x, y)]
        .unknowns[s_idx]
        {
            SlotVal::Var(v) => *v,
            _ => unreachable!(),
        };
        for y in 0..n_y {
            for bb in 0..n_b {
                for x in 1..n_x {
                    let mut coeffs = Vec::new();
                    for a in 0..n_a {
                        coeffs.push((var_of(a, bb, x, y), 1.0));
                        coeffs.push((var_of(a, bb, 0, y), -1.0));
                    }
                    b.add_equality(coeffs, 0.0);
                }
            }
        }
        for x in 0..n_x {
            for a in 0..n_a {
                for y in 1..n_y {
                    let mut coeffs = Vec::new();
                    for bb in 0..n_b {
                        coeffs.push((var_of(a, bb, x, y), 1.0));
                        coeffs.push((var_of(a, bb, x, 0), -1.0));
                    }
                    b.add_equality(coeffs, 0.0);
                }
            }
        }
    }
    let sol = b.build().solve(&di_opts())?;
    crate::steering::check_optimal(&sol, "tripartite moment feasibility")?;
    Ok(TripartiteFeasibility {
        feasible: sol.optimum <= tol::FEASIBILITY,
        slack: sol.optimum,
        certificate: instances.iter().map(|i| i.value_at(&template, &sol.primal_point)).collect(),
        diagnostics: Diagnostics::from_solution(&sol),
    })
}

/// Assemblage-level entry point: validates the tripartite assemblage,
/// induces the correlation under the trusted party's measurements, and runs
/// the moment feasibility test.
pub fn tripartite_amm_feasible_assemblage(
    t: &TripartiteAssemblage,
    charlie: &MeasurementAssemblage,
    level: usize,
) -> Result<TripartiteFeasibility> {
    t.validate()?;
    let p3 = t.correlation_with(charlie)?;
    tripartite_amm_feasible(&p3, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        assemblage_from_state, born_correlation, chsh_optimal_settings, deterministic_correlation,
        phi_plus, qubit_measurements,
    };
    use crate::words::EntrySymbol;

    #[test]
    fn level1_template_matches_explicit_structure() {
        // n_y = n_b = 2: words {1, E_{0|0}, E_{0|1}}, one unknown symbol.
        let t = build_template(2, 2, 1).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.unknown_symbols.len(), 1);
        assert_eq!(*t.entry(0, 0), EntrySymbol::Normalization);
        assert_eq!(*t.entry(1, 0), EntrySymbol::Probability { setting: 0, outcome: 0 });
        assert_eq!(*t.entry(2, 0), EntrySymbol::Probability { setting: 1, outcome: 0 });
        assert_eq!(*t.entry(1, 1), EntrySymbol::Probability { setting: 0, outcome: 0 });
        assert_eq!(*t.entry(2, 2), EntrySymbol::Probability { setting: 1, outcome: 0 });
        assert!(matches!(t.entry(2, 1), EntrySymbol::Unknown(_)));
        assert_eq!(t.entry(2, 1), t.entry(1, 2));
    }

    #[test]
    fn level1_three_settings_has_three_unknowns() {
        let t = build_template(3, 2, 1).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.unknown_symbols.len(), 3);
    }

    #[test]
    fn diagonal_entries_never_vanish() {
        // rev(w) * w always collapses at the junction by idempotence, so a
        // diagonal entry is the normalization, a probability, or a
        // palindromic unknown; orthogonality can never fire there.
        for (ny, nb, l) in [(2, 2, 3), (3, 2, 2), (2, 3, 2)] {
            let t = build_template(ny, nb, l).unwrap();
            for i in 0..t.dim() {
                match t.entry(i, i) {
                    EntrySymbol::Zero => panic!("diagonal entry {i} vanished"),
                    EntrySymbol::Unknown(w) => {
                        assert_eq!(w, &w.reversed(), "diagonal unknown must be palindromic")
                    }
                    _ => {}
                }
            }
        }
        // At level 1 diagonals are exactly normalization or probabilities.
        let t = build_template(3, 2, 1).unwrap();
        for i in 0..t.dim() {
            assert!(matches!(
                t.entry(i, i),
                EntrySymbol::Normalization | EntrySymbol::Probability { .. }
            ));
        }
    }

    #[test]
    fn template_symmetry_under_transposition() {
        let t = build_template(2, 2, 3).unwrap();
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                assert_eq!(t.entry(i, j), t.entry(j, i));
            }
        }
    }

    #[test]
    fn level_cap_enforced() {
        assert!(build_template(2, 2, 6).is_err());
        assert!(build_template(2, 2, 0).is_err());
    }

    #[test]
    fn instantiate_matches_hand_traces_and_symbols() {
        let (alice, bob) = chsh_optimal_settings();
        let rho = phi_plus(2);
        let asm = assemblage_from_state(&rho, &alice).unwrap();
        let p = born_correlation(&rho, &[&alice, &bob]).unwrap();
        let t = build_template(2, 2, 2).unwrap();
        let chis = instantiate_numeric(&t, &asm, &bob).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let chi = &chis[x * 2 + a];
                // PSD within tolerance.
                assert!(chi.min_eigenvalue().unwrap() >= -1e-8);
                // Classified entries match Born values.
                for i in 0..t.dim() {
                    for j in 0..t.dim() {
                        match t.entry(i, j) {
                            EntrySymbol::Zero => assert!(chi.get(i, j).norm() < 1e-10),
                            EntrySymbol::Normalization => {
                                assert!((chi.get(i, j).re - p.marginal_a(a, x)).abs() < 1e-9)
                            }
                            EntrySymbol::Probability { setting, outcome } => {
                                let expect =
                                    p.get2(a, *outcome as usize, x, *setting as usize);
                                assert!(
                                    (chi.get(i, j).re - expect).abs() < 1e-9,
                                    "({i},{j}): {} vs {expect}",
                                    chi.get(i, j).re
                                );
                            }
                            EntrySymbol::Unknown(_) => {}
                        }
                    }
                }
            }
        }
        // No-signaling: sum_a chi_{a|x} independent of x.
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                let s0 = chis[0].get(i, j) + chis[1].get(i, j);
                let s1 = chis[2].get(i, j) + chis[3].get(i, j);
                assert!((s0 - s1).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn instantiate_rejects_non_projective() {
        let id = ComplexMatrix::identity(2);
        let fuzzy = MeasurementAssemblage::new(
            2,
            vec![vec![id.scale_re(0.6), id.scale_re(0.4)], vec![
                id.scale_re(0.5),
                id.scale_re(0.5),
            ]],
        )
        .unwrap();
        let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let asm = assemblage_from_state(&phi_plus(2), &alice).unwrap();
        let t = build_template(2, 2, 1).unwrap();
        assert!(matches!(
            instantiate_numeric(&t, &asm, &fuzzy),
            Err(Error::NonProjective(_))
        ));
    }

    #[test]
    fn local_correlations_have_zero_sr_di() {
        let scenario = Scenario::bipartite(2, 2, 2, 2);
        let p = deterministic_correlation(&scenario, &[0, 1], &[1, 0]).unwrap();
        let bound = sr_di(&p, 1).unwrap();
        assert_eq!(bound.status, DiStatus::Optimal);
        assert!(bound.value.abs() < 1e-6, "{}", bound.value);

        // A strict mixture of local points for the remaining programs and
        // levels: deterministic tables pin boundary entries and leave those
        // programs without a strictly feasible point.
        let q = deterministic_correlation(&scenario, &[1, 0], &[0, 0]).unwrap();
        let mix = Correlation::new(
            scenario.clone(),
            p.values
                .iter()
                .zip(&q.values)
                .map(|(a, b)| 0.5 * a + 0.45 * b + 0.05 * 0.25)
                .collect(),
        )
        .unwrap();
        for level in 1..=2 {
            let bound = sr_di(&mix, level).unwrap();
            assert!(bound.value.abs() < 1e-6, "level {level}: {}", bound.value);
            let src = sr_di_consistent(&mix, level).unwrap();
            assert!(src.value.abs() < 1e-6, "SRc level {level}: {}", src.value);
            let sw = sw_di(&mix, level, true).unwrap();
            assert!(sw.value.abs() < 1e-6, "SW level {level}: {}", sw.value);
        }
    }

    #[test]
    fn tripartite_pr_box_is_feasible_but_marginal_nonquantum() {
        let rho_hat = ComplexMatrix::identity(2).scale_re(0.5);
        let asm = crate::quantum::pr_box_assemblage(&rho_hat).unwrap();
        let charlie = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        for level in [1, 2] {
            let f = tripartite_amm_feasible_assemblage(&asm, &charlie, level).unwrap();
            assert!(f.feasible, "level {level}: slack {}", f.slack);
        }
    }

    #[test]
    fn tripartite_quantum_state_is_feasible() {
        // GHZ-type construction: |000> + |111> measured by A and B.
        let mut v = vec![num_complex::Complex64::new(0.0, 0.0); 8];
        v[0] = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[7] = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let ghz = ComplexMatrix::outer(&v);
        let mm = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        let asm = crate::quantum::tripartite_assemblage_from_state(&ghz, &mm, &mm).unwrap();
        let p3 = asm.correlation_with(&mm).unwrap();
        let f = tripartite_amm_feasible(&p3, 1).unwrap();
        assert!(f.feasible, "slack {}", f.slack);
    }
}
