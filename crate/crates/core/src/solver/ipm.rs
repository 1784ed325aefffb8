//! Primal-dual path-following loop: HKM direction, Mehrotra
//! predictor-corrector, dense LDL^T on the reduced KKT system.
//!
//! Internal form: all scalarized variables are treated as free; PSD variable
//! blocks become identity-map LMIs appended after the user LMIs. For
//!
//! ```text
//!   min c'x   s.t.  A x = b,   G_k(x) = C_k + sum_i x_i F_ki  >= 0
//! ```
//!
//! the iterates are (x, y, S, Z) with S_k tracking G_k(x) and Z_k the PSD
//! multipliers. The Newton system reduces to the quasi-definite saddle
//! system [[H, A'],[A, 0]] with H_ij = sum_k tr(F_ki S_k^-1 F_kj Z_k).

use super::dense::{gemm, psd_step_limit, Ldl, SymMat};
use super::{LmiConstraint, SdpProblem, SdpSolution, SolveStatus, SolverOptions, SparseSym};

struct Lmi {
    dim: usize,
    constant: SymMat,
    terms: Vec<(usize, SparseSym)>,
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<SymMat>,
    z: Vec<SymMat>,
}

struct Metrics {
    pobj: f64,
    gap_rel: f64,
    pres: f64,
    dres: f64,
    pres_rel: f64,
    dres_rel: f64,
}

fn merit(m: &Metrics) -> f64 {
    m.gap_rel.max(m.pres_rel).max(m.dres_rel)
}

pub(super) fn solve(prob: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let n = prob.num_vars();
    let user_lmis = prob.lmi_constraints.len();

    // Internal LMI list: user LMIs, then one identity-map LMI per PSD
    // block. Each LMI is equilibrated by its data norm (dual variables are
    // scaled back on exit); pinned moment data can span many orders of
    // magnitude otherwise.
    let mut lmi_scales: Vec<f64> = Vec::new();
    let mut lmis: Vec<Lmi> = prob
        .lmi_constraints
        .iter()
        .map(|l: &LmiConstraint| {
            let norm = l
                .constant
                .max_abs()
                .max(l.terms.iter().map(|(_, f)| f.max_abs()).fold(0.0, f64::max));
            let scale = if norm > 1e-12 { norm } else { 1.0 };
            lmi_scales.push(scale);
            let mut constant = l.constant.clone();
            constant.scale(1.0 / scale);
            let terms = l
                .terms
                .iter()
                .map(|(v, f)| {
                    let mut g = f.clone();
                    for e in &mut g.entries {
                        e.2 /= scale;
                    }
                    (*v, g)
                })
                .collect();
            Lmi { dim: l.dim, constant, terms }
        })
        .collect();
    let mut offset = 0;
    for &d in &prob.psd_blocks {
        let mut terms = Vec::with_capacity(d * (d + 1) / 2);
        let mut slot = offset;
        for i in 0..d {
            for j in i..d {
                let mut f = SparseSym::new(d);
                f.add(i, j, 1.0);
                terms.push((slot, f));
                slot += 1;
            }
        }
        lmis.push(Lmi { dim: d, constant: SymMat::zeros(d), terms });
        lmi_scales.push(1.0);
        offset += d * (d + 1) / 2;
    }

    let m = prob.equalities.len();
    let c = &prob.objective;
    let mut eq_scales: Vec<f64> = Vec::with_capacity(m);
    let equalities: Vec<crate::solver::Equality> = prob
        .equalities
        .iter()
        .map(|e| {
            let norm = e.coeffs.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            let scale = if norm > 1e-12 { norm } else { 1.0 };
            eq_scales.push(scale);
            crate::solver::Equality {
                coeffs: e.coeffs.iter().map(|&(i, v)| (i, v / scale)).collect(),
                rhs: e.rhs / scale,
            }
        })
        .collect();
    let prob_scaled = SdpProblem {
        psd_blocks: prob.psd_blocks.clone(),
        free_vars: prob.free_vars,
        objective: prob.objective.clone(),
        objective_offset: prob.objective_offset,
        equalities,
        lmi_constraints: Vec::new(),
    };
    let prob = &prob_scaled;
    let b: Vec<f64> = prob.equalities.iter().map(|e| e.rhs).collect();
    let c_norm = c.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let b_norm = b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let total_dim: usize = lmis.iter().map(|l| l.dim).sum();

    // Initial point: x = 0, y = 0, mu-centered identity blocks scaled to the
    // data of each LMI.
    let mut it = Iterate {
        x: vec![0.0; n],
        y: vec![0.0; m],
        s: lmis
            .iter()
            .map(|l| {
                let data = l.constant.max_abs().max(
                    l.terms.iter().map(|(_, f)| f.max_abs()).fold(0.0, f64::max),
                );
                SymMat::scaled_identity(l.dim, (2.0 * data).max(10.0))
            })
            .collect(),
        z: lmis
            .iter()
            .map(|l| SymMat::scaled_identity(l.dim, c_norm.max(10.0)))
            .collect(),
    };

    let mut best: Option<(f64, Iterate, Metrics)> = None;
    let mut stalled = 0usize;
    let mut last_merit = f64::INFINITY;
    let mut iterations = 0usize;
    let mut recoveries = 0usize;

    let finish = |status: SolveStatus,
                  it: Iterate,
                  met: Metrics,
                  iterations: usize,
                  certificate: Option<Vec<f64>>| {
        build_solution(
            user_lmis,
            &lmi_scales,
            &eq_scales,
            status,
            it,
            met,
            iterations,
            certificate,
        )
    };

    for iter in 0..opts.max_iter {
        iterations = iter;
        // Residuals.
        let g: Vec<SymMat> = lmis.iter().map(|l| eval_lmi(l, &it.x)).collect();
        let r_mat: Vec<SymMat> = g
            .iter()
            .zip(&it.s)
            .map(|(gk, sk)| {
                let mut r = gk.clone();
                r.add_scaled(sk, -1.0);
                r
            })
            .collect();
        let mut r_p = b.clone();
        for (row, eq) in prob.equalities.iter().enumerate() {
            for &(i, v) in &eq.coeffs {
                r_p[row] -= v * it.x[i];
            }
        }
        let mut r_d: Vec<f64> = c.clone();
        for (row, eq) in prob.equalities.iter().enumerate() {
            for &(i, v) in &eq.coeffs {
                r_d[i] -= v * it.y[row];
            }
        }
        for (l, zk) in lmis.iter().zip(&it.z) {
            for (var, f) in &l.terms {
                r_d[*var] -= f.dot_general(zk.raw());
            }
        }

        let mu =
            it.s.iter().zip(&it.z).map(|(s, z)| s.dot(z)).sum::<f64>() / total_dim.max(1) as f64;
        let pobj = dotv(c, &it.x) + prob.objective_offset;
        let dobj = dotv(&b, &it.y)
            - lmis.iter().zip(&it.z).map(|(l, z)| l.constant.dot(z)).sum::<f64>()
            + prob.objective_offset;
        let pres_abs = r_p
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(r_mat.iter().map(|r| r.max_abs()).fold(0.0, f64::max));
        let dres_abs = r_d.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let data_scale = lmis
            .iter()
            .map(|l| l.constant.max_abs())
            .fold(1.0f64, f64::max)
            .max(b_norm);
        let met = Metrics {
            pobj,
            gap_rel: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            pres: pres_abs,
            dres: dres_abs,
            pres_rel: pres_abs / (1.0 + data_scale),
            dres_rel: dres_abs / (1.0 + c_norm),
        };
        if opts.verbose {
            eprintln!(
                "iter {iter:3}  mu {:9.2e}  gap {:9.2e}  pres {:9.2e}  dres {:9.2e}  pobj {:+.9e}",
                mu, met.gap_rel, met.pres_rel, met.dres_rel, pobj
            );
        }

        if met.gap_rel <= opts.gap_tol
            && met.pres_rel <= opts.feas_tol
            && met.dres_rel <= opts.feas_tol
        {
            return finish(SolveStatus::Optimal, it, met, iter, None);
        }

        // Track the best iterate for a graceful MaxIterations exit.
        let cur_merit = merit(&met);
        if best.as_ref().map(|(bm, _, _)| cur_merit < *bm).unwrap_or(true) {
            best = Some((
                cur_merit,
                Iterate { x: it.x.clone(), y: it.y.clone(), s: it.s.clone(), z: it.z.clone() },
                Metrics { ..met },
            ));
        }

        // Infeasibility screening once the iterates have settled.
        if iter >= 10 {
            if let Some(cert) = primal_infeasibility_certificate(prob, &lmis, &it, 1e-4) {
                return finish(SolveStatus::PrimalInfeasible, it, met, iter, Some(cert));
            }
            if pobj < -1e12 && met.pres_rel < 1e-6 {
                let cert = it.x.clone();
                return finish(SolveStatus::DualInfeasible, it, met, iter, Some(cert));
            }
        }
        // Residuals stalling above 1e-5 with vanishing mu mark a hopeless
        // run; after `stall_iters` of those, classify and stop.
        let res = met.pres_rel.max(met.dres_rel).max(met.gap_rel);
        if res > 1e-5 && (mu < 1e-10 || cur_merit > 0.95 * last_merit) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        last_merit = cur_merit;
        if stalled >= opts.stall_iters {
            if let Some(cert) = primal_infeasibility_certificate(prob, &lmis, &it, 1e-4) {
                return finish(SolveStatus::PrimalInfeasible, it, met, iter, Some(cert));
            }
            if pobj < -1e8 && met.pres_rel < 1e-5 {
                let cert = it.x.clone();
                return finish(SolveStatus::DualInfeasible, it, met, iter, Some(cert));
            }
            let (_, bit, bmet) = best.take().expect("tracked iterate");
            return finish(SolveStatus::MaxIterations, bit, bmet, iter, None);
        }

        // Factorizations of S blocks (with a defensive bump; steps are
        // verified PD so this should not trigger).
        let mut s_inv: Vec<SymMat> = Vec::with_capacity(lmis.len());
        for sk in it.s.iter_mut() {
            let inv = match sk.inverse_spd() {
                Some(v) => v,
                None => {
                    sk.add_scaled(&SymMat::scaled_identity(sk.dim(), 1e-10 + sk.max_abs() * 1e-12), 1.0);
                    match sk.inverse_spd() {
                        Some(v) => v,
                        None => {
                            let (_, bit, bmet) = best.take().expect("tracked iterate");
                            return finish(SolveStatus::MaxIterations, bit, bmet, iter, None);
                        }
                    }
                }
            };
            s_inv.push(inv);
        }

        // Schur-type matrix H over the scalar variables. Two assembly
        // strategies per block: direct entry-pair expansion (cheap for
        // sparse coefficient matrices) and a streamed W_i = S^-1 F_i Z per
        // variable (cheaper when many variables share a large block).
        let mut h = SymMat::zeros(n);
        for ((l, si), zk) in lmis.iter().zip(&s_inv).zip(&it.z) {
            let d = l.dim;
            let nnz_total: usize = l.terms.iter().map(|(_, f)| f.entries.len()).sum();
            let avg_nnz = nnz_total.max(1) as f64 / l.terms.len().max(1) as f64;
            let cost_pairs = (l.terms.len() as f64 * avg_nnz).powi(2) * 2.0;
            let cost_stream = l.terms.len() as f64 * 2.0 * (d as f64).powi(3)
                + (l.terms.len() as f64).powi(2) * avg_nnz;
            if cost_pairs <= cost_stream {
                for a in 0..l.terms.len() {
                    let (va, fa) = &l.terms[a];
                    for bix in 0..=a {
                        let (vb, fb) = &l.terms[bix];
                        let mut acc = 0.0;
                        for &(p, q, vpq) in &fa.entries {
                            let (p, q) = (p as usize, q as usize);
                            for &(r, s, vrs) in &fb.entries {
                                let (r, s) = (r as usize, s as usize);
                                // tr(E_pq S^-1 E_rs Z) = S^-1[q,r] Z[s,p],
                                // over the symmetric expansions of both.
                                let w = vpq * vrs;
                                let mut t = si.get(q, r) * zk.get(s, p);
                                if r != s {
                                    t += si.get(q, s) * zk.get(r, p);
                                }
                                if p != q {
                                    t += si.get(p, r) * zk.get(s, q);
                                    if r != s {
                                        t += si.get(p, s) * zk.get(r, q);
                                    }
                                }
                                acc += w * t;
                            }
                        }
                        h.add_sym((*va).min(*vb), (*va).max(*vb), acc);
                    }
                }
            } else {
                // W_i = S^-1 F_i Z row by row; H_ij = <F_j, W_i>.
                let mut w_i = vec![0.0; d * d];
                let mut sf = vec![0.0; d * d];
                for a in 0..l.terms.len() {
                    let (va, fa) = &l.terms[a];
                    sf.iter_mut().for_each(|v| *v = 0.0);
                    // sf = S^-1 F_a (exploiting F's sparsity).
                    for &(p, q, vpq) in &fa.entries {
                        let (p, q) = (p as usize, q as usize);
                        for r in 0..d {
                            sf[r * d + q] += si.get(r, p) * vpq;
                            if p != q {
                                sf[r * d + p] += si.get(r, q) * vpq;
                            }
                        }
                    }
                    // w_i = sf * Z.
                    w_i.iter_mut().for_each(|v| *v = 0.0);
                    for r in 0..d {
                        for k in 0..d {
                            let x = sf[r * d + k];
                            if x == 0.0 {
                                continue;
                            }
                            let zrow = &zk.raw()[k * d..(k + 1) * d];
                            let dst = &mut w_i[r * d..(r + 1) * d];
                            for (dv, &zv) in dst.iter_mut().zip(zrow) {
                                *dv += x * zv;
                            }
                        }
                    }
                    for bix in 0..=a {
                        let (vb, fb) = &l.terms[bix];
                        let acc = fb.dot_general(&w_i);
                        h.add_sym((*va).min(*vb), (*va).max(*vb), acc);
                    }
                }
            }
        }

        // Assemble and factor the regularized KKT matrix. The static
        // regularization must stay small and scale-free: H blows up like
        // 1/mu near the boundary and a proportional shift would corrupt the
        // equality rows.
        let nm = n + m;
        let mut kkt = SymMat::zeros(nm);
        let delta = 1e-10;
        for i in 0..n {
            for j in i..n {
                let v = h.get(i, j) + if i == j { delta } else { 0.0 };
                if v != 0.0 {
                    kkt.set_sym(i, j, v);
                }
            }
        }
        for (row, eq) in prob.equalities.iter().enumerate() {
            for &(i, v) in &eq.coeffs {
                kkt.add_sym(n + row, i, v);
            }
            kkt.add_sym(n + row, n + row, -delta);
        }
        let ldl = Ldl::factor(&kkt, n);

        let solve_kkt = |w_list: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>) {
            // w_list[k] is W_k - parametrizes the complementarity target.
            // g_i = -r_d_i + sum_k <F_ki, S^-1 (W_k - R_k Z_k)>
            let mut rhs = vec![0.0; nm];
            for i in 0..n {
                rhs[i] = -r_d[i];
            }
            for (k, l) in lmis.iter().enumerate() {
                let d = l.dim;
                let rz = gemm(d, r_mat[k].raw(), it.z[k].raw());
                let mut inner = w_list[k].clone();
                for (t, &r) in inner.iter_mut().zip(&rz) {
                    *t -= r;
                }
                let t = gemm_sym_general(&s_inv[k], &inner);
                for (var, f) in &l.terms {
                    rhs[*var] += f.dot_general(&t);
                }
            }
            for (row, rp) in r_p.iter().enumerate() {
                rhs[n + row] = *rp;
            }
            // Iterative refinement against the unregularized KKT, continued
            // while it keeps paying off (the Schur matrix gets extremely
            // ill-conditioned near degenerate optima).
            let mut sol = rhs.clone();
            ldl.solve_in_place(&mut sol);
            let mut prev_err = f64::INFINITY;
            for _ in 0..8 {
                let mut resid = rhs.clone();
                apply_kkt(&h, prob, n, &sol, &mut resid);
                let err = resid.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                if !err.is_finite() || err >= 0.5 * prev_err {
                    break;
                }
                prev_err = err;
                ldl.solve_in_place(&mut resid);
                for (s, r) in sol.iter_mut().zip(&resid) {
                    *s += r;
                }
            }
            let dx = sol[..n].to_vec();
            let dy: Vec<f64> = sol[n..].iter().map(|v| -v).collect();
            (dx, dy)
        };

        let recover_dirs = |dx: &[f64], w_list: &[Vec<f64>]| -> (Vec<SymMat>, Vec<SymMat>) {
            let mut ds_list = Vec::with_capacity(lmis.len());
            let mut dz_list = Vec::with_capacity(lmis.len());
            for (k, l) in lmis.iter().enumerate() {
                let d = l.dim;
                let mut ds = r_mat[k].clone();
                for (var, f) in &l.terms {
                    let v = dx[*var];
                    if v != 0.0 {
                        for &(p, q, fv) in &f.entries {
                            ds.add_sym(p as usize, q as usize, fv * v);
                        }
                    }
                }
                let dsz = gemm(d, ds.raw(), it.z[k].raw());
                let mut inner = w_list[k].clone();
                for (t, &r) in inner.iter_mut().zip(&dsz) {
                    *t -= r;
                }
                let dz_gen = gemm_sym_general(&s_inv[k], &inner);
                dz_list.push(SymMat::from_general_symmetrized(d, &dz_gen));
                ds_list.push(ds);
            }
            (ds_list, dz_list)
        };

        // Predictor (affine scaling).
        let w_aff: Vec<Vec<f64>> = lmis
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let mut w = gemm(l.dim, it.s[k].raw(), it.z[k].raw());
                for v in &mut w {
                    *v = -*v;
                }
                w
            })
            .collect();
        let (dx_a, _dy_a) = solve_kkt(&w_aff);
        let (ds_a, dz_a) = recover_dirs(&dx_a, &w_aff);
        let alpha_pa = step_over_blocks(&it.s, &ds_a);
        let alpha_da = step_over_blocks(&it.z, &dz_a);
        let mut mu_aff = 0.0;
        for k in 0..lmis.len() {
            let mut s_trial = it.s[k].clone();
            s_trial.add_scaled(&ds_a[k], alpha_pa);
            let mut z_trial = it.z[k].clone();
            z_trial.add_scaled(&dz_a[k], alpha_da);
            mu_aff += s_trial.dot(&z_trial);
        }
        mu_aff = (mu_aff / total_dim.max(1) as f64).max(0.0);
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-10, 0.999);

        // Corrector (combined direction).
        let w_corr: Vec<Vec<f64>> = lmis
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let d = l.dim;
                let mut w = gemm(d, it.s[k].raw(), it.z[k].raw());
                let soc = gemm(d, ds_a[k].raw(), dz_gen_raw(&dz_a[k]));
                for i in 0..d {
                    for j in 0..d {
                        let idx = i * d + j;
                        w[idx] = -w[idx] - soc[idx];
                    }
                    w[i * d + i] += sigma * mu;
                }
                w
            })
            .collect();
        let (dx, dy) = solve_kkt(&w_corr);
        let (ds, dz) = recover_dirs(&dx, &w_corr);
        let degenerate = dx.iter().chain(&dy).any(|v| !v.is_finite());

        let tau = if mu < 1e-5 { 0.99 } else { 0.97 };
        let mut alpha_p = 0.0;
        let mut alpha_d = 0.0;
        if !degenerate {
            alpha_p = (tau * step_over_blocks(&it.s, &ds)).min(1.0);
            alpha_d = (tau * step_over_blocks(&it.z, &dz)).min(1.0);
            // Certified feasible update with geometric backoff.
            for _ in 0..60 {
                if try_step(&it.s, &ds, alpha_p) {
                    break;
                }
                alpha_p *= 0.8;
            }
            for _ in 0..60 {
                if try_step(&it.z, &dz, alpha_d) {
                    break;
                }
                alpha_d *= 0.8;
            }
        }
        if degenerate || (alpha_p < 1e-10 && alpha_d < 1e-10) {
            // Degenerate tail (typically an empty-interior or boundary
            // optimum): push the conic iterates slightly inside and retry a
            // few times before giving up on the best iterate seen. The bump
            // is keyed to the remaining gap because mu has usually collapsed
            // well below it by the time steps degenerate.
            recoveries += 1;
            if recoveries > 12 {
                let (_, bit, bmet) = best.take().expect("tracked iterate");
                return finish(SolveStatus::MaxIterations, bit, bmet, iter, None);
            }
            let bump = (met.gap_rel * 1e-2).max(mu * 1e-2).clamp(1e-13, 1e-7);
            for sk in it.s.iter_mut() {
                sk.add_scaled(&SymMat::scaled_identity(sk.dim(), bump * (1.0 + sk.max_abs())), 1.0);
            }
            for zk in it.z.iter_mut() {
                zk.add_scaled(&SymMat::scaled_identity(zk.dim(), bump * (1.0 + zk.max_abs())), 1.0);
            }
            continue;
        }

        for (xi, di) in it.x.iter_mut().zip(&dx) {
            *xi += alpha_p * di;
        }
        for (k, sk) in it.s.iter_mut().enumerate() {
            sk.add_scaled(&ds[k], alpha_p);
        }
        for (yi, di) in it.y.iter_mut().zip(&dy) {
            *yi += alpha_d * di;
        }
        for (k, zk) in it.z.iter_mut().enumerate() {
            zk.add_scaled(&dz[k], alpha_d);
        }
    }

    let (_, bit, bmet) = best.expect("at least one iterate");
    build_solution(
        user_lmis,
        &lmi_scales,
        &eq_scales,
        SolveStatus::MaxIterations,
        bit,
        bmet,
        iterations,
        None,
    )
}

fn dz_gen_raw(m: &SymMat) -> &[f64] {
    m.raw()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn eval_lmi(l: &Lmi, x: &[f64]) -> SymMat {
    let mut g = l.constant.clone();
    for (var, f) in &l.terms {
        let v = x[*var];
        if v != 0.0 {
            for &(p, q, fv) in &f.entries {
                g.add_sym(p as usize, q as usize, fv * v);
            }
        }
    }
    g
}

/// S^-1 * M for symmetric S^-1 (given dense) and general M.
fn gemm_sym_general(s_inv: &SymMat, m: &[f64]) -> Vec<f64> {
    gemm(s_inv.dim(), s_inv.raw(), m)
}

fn step_over_blocks(xs: &[SymMat], dxs: &[SymMat]) -> f64 {
    let mut a = 1.0f64;
    for (x, dx) in xs.iter().zip(dxs) {
        a = a.min(psd_step_limit(x, dx));
    }
    a
}

fn try_step(xs: &[SymMat], dxs: &[SymMat], alpha: f64) -> bool {
    xs.iter().zip(dxs).all(|(x, dx)| {
        let mut t = x.clone();
        t.add_scaled(dx, alpha);
        t.cholesky().is_some()
    })
}

/// Applies the *unregularized* KKT matrix [[H, A'],[A, 0]] to `sol`,
/// subtracting from `resid` (which enters holding the right-hand side).
fn apply_kkt(h: &SymMat, prob: &SdpProblem, n: usize, sol: &[f64], resid: &mut [f64]) {
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += h.get(i, j) * sol[j];
        }
        resid[i] -= acc;
    }
    for (row, eq) in prob.equalities.iter().enumerate() {
        let mut acc_row = 0.0;
        for &(i, v) in &eq.coeffs {
            acc_row += v * sol[i];
            resid[i] -= v * sol[n + row];
        }
        resid[n + row] -= acc_row;
    }
}

/// Farkas-type certificate test for primal infeasibility: a dual direction
/// (y, Z >= 0) with A'y + F'(Z) ~ 0 and b'y - <C, Z> > 0. For any feasible
/// x, 0 <= sum<Z, G(x)> = sum<Z,C> + x.(eps - A'y) with eps the adjoint
/// violation, so the certificate is conclusive only when the gain dominates
/// the violation by a wide margin (here 10^6, an implicit bound on feasible
/// norms).
fn primal_infeasibility_certificate(
    prob: &SdpProblem,
    lmis: &[Lmi],
    it: &Iterate,
    gain_tol: f64,
) -> Option<Vec<f64>> {
    let n = prob.num_vars();
    let theta = it
        .y
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(it.z.iter().map(|z| z.max_abs()).fold(0.0, f64::max));
    if theta < 1.0 {
        return None;
    }
    let mut adj = vec![0.0; n];
    for (row, eq) in prob.equalities.iter().enumerate() {
        for &(i, v) in &eq.coeffs {
            adj[i] += v * it.y[row];
        }
    }
    for (l, zk) in lmis.iter().zip(&it.z) {
        for (var, f) in &l.terms {
            adj[*var] += f.dot_general(zk.raw());
        }
    }
    let viol = adj.iter().fold(0.0f64, |a, &v| a.max(v.abs())) / theta;
    let gain = (prob
        .equalities
        .iter()
        .enumerate()
        .map(|(r, e)| e.rhs * it.y[r])
        .sum::<f64>()
        - lmis.iter().zip(&it.z).map(|(l, z)| l.constant.dot(z)).sum::<f64>())
        / theta;
    if gain >= gain_tol && viol <= 1e-6 * gain {
        Some(it.y.iter().map(|v| v / theta).collect())
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn build_solution(
    user_lmis: usize,
    lmi_scales: &[f64],
    eq_scales: &[f64],
    status: SolveStatus,
    it: Iterate,
    met: Metrics,
    iterations: usize,
    certificate: Option<Vec<f64>>,
) -> SdpSolution {
    // Undo the constraint equilibration on the multipliers.
    let y: Vec<f64> = it.y.iter().zip(eq_scales).map(|(v, s)| v / s).collect();
    let z: Vec<SymMat> = it
        .z
        .into_iter()
        .zip(lmi_scales)
        .map(|(mut zk, s)| {
            zk.scale(1.0 / s);
            zk
        })
        .collect();
    SdpSolution {
        status,
        optimum: met.pobj,
        primal_point: it.x,
        dual_point: y,
        gap: met.gap_rel,
        residuals: (met.pres, met.dres),
        iterations,
        lmi_duals: z[..user_lmis].to_vec(),
        block_duals: z[user_lmis..].to_vec(),
        certificate,
    }
}
