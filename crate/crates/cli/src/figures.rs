//! Bound-curve CSV generation. Grid points are evaluated in parallel and
//! written in parameter order with fixed formatting, so outputs are
//! bitwise reproducible for a given seed.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use steerkit::amm;
use steerkit::entanglement::er_isotropic_analytic;
use steerkit::incompat::incompatibility_robustness;
use steerkit::linalg::ComplexMatrix;
use steerkit::npa;
use steerkit::quantum::{
    assemblage_from_state, born_correlation, chsh_optimal_settings, isotropic_state,
    pure_partially_entangled, qubit_measurements, seesaw_optimize, seesaw_optimize_fixed_alice,
    BellFunctional, MeasurementAssemblage,
};
use steerkit::steering::{consistent_steering_robustness, steering_robustness};
use steerkit::Error;

fn write_csv(path: &Path, header: &str, rows: Vec<String>) -> Result<(), Error> {
    let mut out = std::fs::File::create(path)
        .map_err(|e| Error::Schema(format!("cannot create {}: {e}", path.display())))?;
    writeln!(out, "{header}").and_then(|_| {
        for row in &rows {
            writeln!(out, "{row}")?;
        }
        Ok(())
    })
    .map_err(|e| Error::Schema(format!("cannot write {}: {e}", path.display())))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.10e}")
    }
}

fn di_value(bound: amm::DiBound) -> f64 {
    bound.value
}

/// Figures keep going when a single grid point fails to converge; the cell
/// is written as nan and a warning goes to stderr.
fn di_or_nan(r: Result<amm::DiBound, Error>, what: &str) -> f64 {
    match r {
        Ok(b) => b.value,
        Err(e) => {
            eprintln!("warning: {what}: {e}");
            f64::NAN
        }
    }
}

/// Certifiable DI lower bounds on the entanglement robustness of two-qubit
/// isotropic states from their maximal-CHSH correlations, by the three
/// routes (moment-matrix, steering-based, nonlocality-based), against the
/// closed form.
pub fn fig1(path: &Path, grid: usize, er_level: usize) -> Result<(), Error> {
    let (alice, bob) = chsh_optimal_settings();
    let rows: Vec<Result<String, Error>> = (0..grid)
        .into_par_iter()
        .map(|k| {
            let v = 0.70 + (1.0 - 0.70) * k as f64 / (grid - 1) as f64;
            let p = born_correlation(&isotropic_state(2, v)?, &[&alice, &bob])?;
            let er = di_value(npa::er_di_mblhg(&p, er_level)?);
            let sr = di_value(amm::sr_di(&p, 2)?);
            let nr = di_value(npa::nonlocal_robustness(&p, 2, false)?);
            let analytic = er_isotropic_analytic(2, v)?;
            Ok(format!("{},{},{},{},{}", fmt(v), fmt(er), fmt(sr), fmt(nr), fmt(analytic)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_csv(path, "v,er_di,sr_di,nr,er_analytic", rows)
}

/// The qutrit analog of fig1 on maximal I2233-violating correlations, with
/// see-saw measurement settings (qualitative reproduction).
pub fn fig2(path: &Path, grid: usize, level: usize, seed: u64) -> Result<(), Error> {
    let f = BellFunctional::i2233();
    let out = seesaw_optimize(&f, &isotropic_state(3, 1.0)?, (3, 3), 8, seed)?;
    let (alice, bob) = (&out.parties[0], &out.parties[1]);
    let rows: Vec<Result<String, Error>> = (0..grid)
        .into_par_iter()
        .map(|k| {
            let v = 0.60 + (1.0 - 0.60) * k as f64 / (grid - 1) as f64;
            let p = born_correlation(&isotropic_state(3, v)?, &[alice, bob])?;
            let er = di_or_nan(npa::er_di_mblhg(&p, level), "er_di");
            let sr = di_or_nan(amm::sr_di(&p, level), "sr_di");
            let nr = di_or_nan(npa::nonlocal_robustness(&p, level, false), "nr");
            let analytic = er_isotropic_analytic(3, v)?;
            Ok(format!("{},{},{},{},{}", fmt(v), fmt(er), fmt(sr), fmt(nr), fmt(analytic)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_csv(path, "v,er_di,sr_di,nr,er_analytic", rows)
}

fn swap_state(rho: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(da * db, da * db);
    for i in 0..da {
        for j in 0..db {
            for k in 0..da {
                for l in 0..db {
                    out.set(j * da + i, l * da + k, rho.get(i * db + j, k * db + l));
                }
            }
        }
    }
    out
}

/// DI lower bounds on the incompatibility robustness of the measurements
/// attaining the maximal Bell-CH violation of partially entangled pure
/// states; `bob_side` switches to Bob's measurement assemblage.
pub fn fig3(path: &Path, grid: usize, level: usize, seed: u64, bob_side: bool) -> Result<(), Error> {
    let ch = BellFunctional::ch();
    let alice = qubit_measurements(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])?;
    let rows: Vec<Result<String, Error>> = (1..=grid)
        .into_par_iter()
        .map(|k| {
            let theta = std::f64::consts::FRAC_PI_4 * k as f64 / grid as f64;
            let rho = pure_partially_entangled(theta);
            let found = seesaw_optimize_fixed_alice(&ch, &rho, (2, 2), &alice, 8, seed)?;
            let bob: &MeasurementAssemblage = &found.parties[1];
            let p = born_correlation(&rho, &[&alice, bob])?;
            let (p_dir, asm, meas) = if bob_side {
                (p.swap_parties()?, assemblage_from_state(&swap_state(&rho, 2, 2), bob)?, bob.clone())
            } else {
                (p, assemblage_from_state(&rho, &alice)?, alice.clone())
            };
            let ir = incompatibility_robustness(&meas)?.value;
            let sr = steering_robustness(&asm)?.value;
            let src = consistent_steering_robustness(&asm)?.value;
            let sr_di = di_value(amm::sr_di(&p_dir, level)?);
            let src_di = di_value(amm::sr_di_consistent(&p_dir, level)?);
            let nrc = di_value(npa::nonlocal_robustness(&p_dir, 2, true)?);
            Ok(format!(
                "{},{},{},{},{},{},{}",
                fmt(theta),
                fmt(ir),
                fmt(sr),
                fmt(src),
                fmt(src_di),
                fmt(sr_di),
                fmt(nrc)
            ))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_csv(path, "theta,ir,sr,src,src_di,sr_di,nrc", rows)
}

/// Per-Bell-scenario DI entanglement bounds for qubit isotropic states
/// (maximal CHSH, I3322, and elegant-inequality correlations).
pub fn fig4(path: &Path, grid: usize, level: usize, seed: u64) -> Result<(), Error> {
    let (alice_c, bob_c) = chsh_optimal_settings();
    let phi = isotropic_state(2, 1.0)?;
    let i3322 = seesaw_optimize(&BellFunctional::i3322(), &phi, (2, 2), 8, seed)?;
    let elegant = seesaw_optimize(&BellFunctional::elegant(), &phi, (2, 2), 8, seed)?;
    let rows: Vec<Result<String, Error>> = (0..grid)
        .into_par_iter()
        .map(|k| {
            let v = 0.70 + (1.0 - 0.70) * k as f64 / (grid - 1) as f64;
            let rho = isotropic_state(2, v)?;
            let p_chsh = born_correlation(&rho, &[&alice_c, &bob_c])?;
            let p_3322 = born_correlation(&rho, &[&i3322.parties[0], &i3322.parties[1]])?;
            let p_eleg = born_correlation(&rho, &[&elegant.parties[0], &elegant.parties[1]])?;
            let er_chsh = di_value(npa::er_di_mblhg(&p_chsh, 3.min(amm::MAX_LEVEL))?);
            let er_3322 = di_value(npa::er_di_mblhg(&p_3322, level)?);
            let er_eleg = di_value(npa::er_di_mblhg(&p_eleg, level)?);
            let analytic = er_isotropic_analytic(2, v)?;
            Ok(format!(
                "{},{},{},{},{}",
                fmt(v),
                fmt(er_chsh),
                fmt(er_3322),
                fmt(er_eleg),
                fmt(analytic)
            ))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_csv(path, "v,er_di_chsh,er_di_i3322,er_di_elegant,er_analytic", rows)
}

/// DI entanglement bound certified from the amount of I3322 violation
/// alone.
pub fn fig5(path: &Path, grid: usize, level: usize) -> Result<(), Error> {
    let f = BellFunctional::i3322();
    let rows: Vec<Result<String, Error>> = (0..grid)
        .into_par_iter()
        .map(|k| {
            let violation = 0.25 * k as f64 / (grid - 1) as f64;
            let bound = npa::er_di_bell(&f, violation, level)?;
            Ok(format!("{},{}", fmt(violation), fmt(bound.value)))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_csv(path, "violation,er_bound", rows)
}
