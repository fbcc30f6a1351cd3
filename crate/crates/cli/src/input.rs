//! Point and tangent input.
//!
//! Both use a small TOML grammar with complex numbers written as `[re, im]`:
//!
//! ```text
//! Z = [[0.5, 0.0], [0.1, 0.0], [0.1, 0.0], [0.0, 0.0]]   # p×p, row-major
//! w = [[0.2, -0.1]]
//! ```
//!
//! and, for tangents, `dz` (the `p(p+1)/2` matrix coordinates) and `dw`.
//! On the command line `;` may stand in for a newline.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use chg_core::{DomainParams, Point, SymMatrix, Tangent, C64};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    #[serde(rename = "Z")]
    z: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TangentDoc {
    dz: Vec<[f64; 2]>,
    dw: Vec<[f64; 2]>,
}

/// Reads `arg` as a file when one exists at that path, otherwise as inline text.
fn source_text(arg: &str) -> Result<String, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {arg}: {e}")))
    } else {
        Ok(arg.replace(';', "\n"))
    }
}

fn complexes(values: &[[f64; 2]]) -> Vec<C64> {
    values.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

pub fn parse_point(arg: &str, params: &DomainParams) -> Result<Point, CliError> {
    let text = source_text(arg)?;
    let doc: PointDoc = toml::from_str(&text).map_err(|e| CliError::Usage(format!("point: {}", e.message())))?;
    let p = params.p();
    if doc.z.len() != p * p {
        return Err(CliError::Usage(format!("point: Z needs {} entries for p = {p}, got {}", p * p, doc.z.len())));
    }
    if doc.w.len() != params.r() {
        return Err(CliError::Usage(format!("point: w needs {} entries, got {}", params.r(), doc.w.len())));
    }
    let z = SymMatrix::from_matrix(DMatrix::from_row_slice(p, p, &complexes(&doc.z)))
        .map_err(|e| CliError::Usage(format!("point: {e}")))?;
    Ok(Point::new(z, DVector::from_vec(complexes(&doc.w))))
}

pub fn parse_tangent(arg: &str, params: &DomainParams) -> Result<Tangent, CliError> {
    let text = source_text(arg)?;
    let doc: TangentDoc = toml::from_str(&text).map_err(|e| CliError::Usage(format!("tangent: {}", e.message())))?;
    if doc.dz.len() != params.m() || doc.dw.len() != params.r() {
        return Err(CliError::Usage(format!(
            "tangent: expected {} dz and {} dw entries, got {} and {}",
            params.m(),
            params.r(),
            doc.dz.len(),
            doc.dw.len()
        )));
    }
    Ok(Tangent::new(DVector::from_vec(complexes(&doc.dz)), DVector::from_vec(complexes(&doc.dw))))
}
