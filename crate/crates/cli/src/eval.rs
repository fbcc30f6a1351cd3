//! `eval`: one quantity at one point.

use std::path::Path;

use chg_core::bergman::bergman_kernel;
use chg_core::curvature::{curvature_bounds, hsc};
use chg_core::domain::{aux_xy, contains_point};
use chg_core::kemetric::{generating_function, metric_blocks_closed};
use chg_core::DomainParams;

use crate::input::{parse_point, parse_tangent};
use crate::report::{Report, Value};
use crate::{scan, CliError, What};

pub struct Request<'a> {
    pub point: &'a str,
    pub what: What,
    pub tangent: Option<&'a str>,
    pub coeffs: Option<&'a Path>,
}

fn what_name(what: What) -> &'static str {
    match what {
        What::G => "g",
        What::Metric => "metric",
        What::Kernel => "kernel",
        What::Curvature => "curvature",
    }
}

pub fn run(params: &DomainParams, req: &Request<'_>, timestamp: bool) -> Result<Report, CliError> {
    let point = parse_point(req.point, params)?;
    // argument problems are reported before the point is looked at
    let tangent = match (req.what, req.tangent) {
        (What::Curvature, Some(t)) => Some(parse_tangent(t, params)?),
        (What::Curvature, None) => return Err(CliError::Usage("--what curvature needs --tangent".into())),
        _ => None,
    };
    let coeffs = match req.what {
        What::Kernel => Some(scan::load_coeffs(params, req.coeffs)?),
        _ => None,
    };

    let mut report = Report::new("eval", timestamp);
    report.domain(params);
    report.config("what", Value::Str(what_name(req.what).into()));
    if !contains_point(params, &point)? {
        report.failure = Some("point lies outside the domain".into());
        return Ok(report);
    }
    let aux = aux_xy(params, &point)?;
    report.result("X", Value::Float(aux.x));
    report.result("Y", Value::Float(aux.y));
    match req.what {
        What::G => report.result("value", Value::Float(generating_function(params, &point)?)),
        What::Metric => {
            let m = metric_blocks_closed(params, &point)?.assemble();
            let rows = |f: fn(&chg_core::C64) -> f64| {
                m.matrix().row_iter().map(|row| row.iter().map(f).collect()).collect()
            };
            report.result("real", Value::Matrix(rows(|c| c.re)));
            report.result("imag", Value::Matrix(rows(|c| c.im)));
            report.result("ln_det", Value::Float(m.ln_det()?));
        }
        What::Kernel => {
            let coeffs = coeffs.expect("loaded above");
            report.result("value", Value::Float(bergman_kernel(params, &coeffs, &point)?));
        }
        What::Curvature => {
            let tangent = tangent.expect("parsed above");
            if tangent.is_zero() {
                return Err(CliError::Usage("tangent must be non-zero".into()));
            }
            let (lo, hi) = curvature_bounds(params);
            report.result("value", Value::Float(hsc(params, &point, &tangent)?));
            report.result("lower_bound", Value::Float(lo));
            report.result("upper_bound", Value::Float(hi));
        }
    }
    Ok(report)
}
