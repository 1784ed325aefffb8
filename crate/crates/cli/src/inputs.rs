//! JSON input readers. Matrices are nested rows of `[re, im]` pairs; the
//! concrete schemas are documented in the repository README.

use std::path::Path;

use serde::Deserialize;

use steerkit::linalg::ComplexMatrix;
use steerkit::quantum::{isotropic_state, Assemblage, Correlation, MeasurementAssemblage};
use steerkit::Error;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("cannot parse {}: {e}", path.display())))
}

pub fn read_correlation(path: &Path) -> Result<Correlation, Error> {
    let p: Correlation = read_json(path)?;
    p.validate()?;
    Ok(p)
}

pub fn read_assemblage(path: &Path) -> Result<Assemblage, Error> {
    let a: Assemblage = read_json(path)?;
    a.validate()?;
    Ok(a)
}

pub fn read_measurements(path: &Path) -> Result<MeasurementAssemblage, Error> {
    let m: MeasurementAssemblage = read_json(path)?;
    m.validate()?;
    Ok(m)
}

/// A bipartite state: either an explicit density matrix with subsystem
/// dimensions, or an isotropic-state shorthand.
#[derive(Deserialize)]
#[serde(untagged)]
enum StateInput {
    Isotropic { isotropic: IsotropicSpec },
    Explicit { dims: [usize; 2], matrix: ComplexMatrix },
}

#[derive(Deserialize)]
struct IsotropicSpec {
    d: usize,
    v: f64,
}

pub fn read_state(path: &Path) -> Result<(ComplexMatrix, (usize, usize)), Error> {
    let s: StateInput = read_json(path)?;
    match s {
        StateInput::Isotropic { isotropic } => {
            let rho = isotropic_state(isotropic.d, isotropic.v)?;
            Ok((rho, (isotropic.d, isotropic.d)))
        }
        StateInput::Explicit { dims, matrix } => Ok((matrix, (dims[0], dims[1]))),
    }
}
