//! `scan-curvature` and `scan-equivalence`.

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;

use chg_core::bergman::{equivalence_ratios, fit_coeffs_p1, scan_nodes};
use chg_core::curvature::{curvature_bounds, hsc, hsc_origin, sharp_directions};
use chg_core::domain::{aux_xy, Sampler};
use chg_core::{BergmanCoeffs, DomainParams, Point, Tangent};

use crate::report::{fmt_f64, Table};
use crate::verify::Options;
use crate::CliError;

/// Slack allowed past the curvature bounds.
const RANGE_SLACK: f64 = 1e-6;
/// Allowed relative distance of the ratios from N+1 on the last X node.
const LIMIT_TOL: f64 = 1e-3;

pub fn curvature(params: &DomainParams, opts: &Options) -> Result<(Table, bool), CliError> {
    let mut sampler = Sampler::with_caps(*params, opts.seed, opts.caps());
    let mut pairs: Vec<(Point, Tangent)> = Vec::with_capacity(opts.count);
    for _ in 0..opts.count {
        let pt = sampler.point();
        let t = Tangent::from_row(params, &sampler.tangent_row())?;
        pairs.push((pt, t));
    }
    let rows = pairs
        .par_iter()
        .map(|(pt, t)| -> Result<[f64; 3], CliError> {
            Ok([aux_xy(params, pt)?.x, t.dz.norm_squared(), t.dw.norm_squared()])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let omegas: Vec<f64> = pairs.par_iter().map(|(pt, t)| hsc(params, pt, t).unwrap_or(f64::NAN)).collect();

    let (lo, hi) = curvature_bounds(params);
    let mut table = Table::new(&["X", "dz_norm2", "dw_norm2", "omega", "lower_bound", "upper_bound"]);
    for (row, w) in rows.iter().zip(&omegas) {
        table.rows.push(vec![row[0], row[1], row[2], *w, lo, hi]);
    }
    let (rank_one, scalar) = sharp_directions(params);
    let w0 = DVector::zeros(params.r());
    let mut sharp = Vec::new();
    for t in [&rank_one, &scalar] {
        let w = hsc_origin(params, &w0, t)?;
        table.rows.push(vec![0.0, t.dz.norm_squared(), t.dw.norm_squared(), w, lo, hi]);
        sharp.push(w);
    }

    let all = omegas.iter().chain(&sharp);
    let (min, max) = all.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(*w), b.max(*w)));
    let violations = all.filter(|w| !(**w >= lo - RANGE_SLACK && **w <= hi + RANGE_SLACK)).count();
    let pass = violations == 0 && (sharp[0] - lo).abs() <= 1e-10 && (sharp[1] - hi).abs() <= 1e-10;
    table.summary("samples", opts.count.to_string());
    table.summary("seed", opts.seed.to_string());
    table.summary("min_omega", fmt_f64(min));
    table.summary("max_omega", fmt_f64(max));
    table.summary("lower_bound", fmt_f64(lo));
    table.summary("upper_bound", fmt_f64(hi));
    table.summary("sharp_rank_one", fmt_f64(sharp[0]));
    table.summary("sharp_scalar", fmt_f64(sharp[1]));
    table.summary("violations", violations.to_string());
    table.summary("status", if pass { "pass" } else { "fail" });
    Ok((table, pass))
}

/// Coefficients from `path`, or fitted when the domain is a ball (p = 1, K = 1).
pub fn load_coeffs(params: &DomainParams, path: Option<&Path>) -> Result<BergmanCoeffs, CliError> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read coefficients {}: {e}", path.display())))?;
            let coeffs = BergmanCoeffs::from_toml_str(&text)
                .map_err(|e| CliError::Usage(format!("coefficients {}: {e}", path.display())))?;
            coeffs.check_params(params).map_err(|e| CliError::Usage(format!("coefficients {}: {e}", path.display())))?;
            Ok(coeffs)
        }
        None if params.p() == 1 && params.k() == 1.0 => Ok(fit_coeffs_p1(params.r())?),
        None => Err(CliError::Usage(format!(
            "--coeffs is required for p = {}, K = {} (coefficients are only fitted automatically for p = 1, K = 1)",
            params.p(),
            params.k()
        ))),
    }
}

pub fn equivalence(params: &DomainParams, coeffs: &BergmanCoeffs, grid: usize) -> Result<(Table, bool), CliError> {
    let nodes = scan_nodes(grid).map_err(|e| CliError::Usage(e.to_string()))?;
    let triples = nodes
        .par_iter()
        .map(|(x, l)| equivalence_ratios(params, coeffs, *x, *l))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(&["X", "lambda", "Phi", "Psi", "Upsilon"]);
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((x, _), t) in nodes.iter().zip(&triples) {
        table.rows.push(vec![*x, t.lambda, t.phi, t.psi, t.upsilon]);
        a = a.max(t.max());
        b = b.min(t.min());
    }
    let target = (params.n() + 1) as f64;
    let x_last = nodes.last().map_or(f64::NAN, |n| n.0);
    let deviation = nodes
        .iter()
        .zip(&triples)
        .filter(|((x, _), _)| *x == x_last)
        .flat_map(|(_, t)| [t.phi, t.psi, t.upsilon])
        .map(|v| (v / target - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = b > 0.0 && deviation <= LIMIT_TOL;

    table.summary("grid", grid.to_string());
    table.summary("a", fmt_f64(a));
    table.summary("b", fmt_f64(b));
    table.summary("N_plus_1", fmt_f64(target));
    table.summary("limit_X", fmt_f64(x_last));
    table.summary("limit_deviation", fmt_f64(deviation));
    table.summary("coefficients", format!("{:?}", coeffs.b));
    table.summary("status", if pass { "pass" } else { "fail" });
    Ok((table, pass))
}
