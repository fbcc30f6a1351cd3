//! The `verify` suite.

use nalgebra::DVector;
use rayon::prelude::*;

use chg_core::autgroup::{jacobian_at_base, ln_jacobian_det_sq, normalizing_map};
use chg_core::curvature::{curvature_bounds, hsc, hsc_origin, trace_chain_terms, sharp_directions};
use chg_core::domain::{aux_xy, random_symmetric, random_unit, sample_interior_with, Sampler, SamplerCaps};
use chg_core::kemetric::{boundary_blowup_probe, ma_residual, metric_blocks_closed, metric_pullback, DetRoute, ProbeConfig};
use chg_core::linalg::{self, SymMatrix};
use chg_core::oracle::{fd_metric, holomorphic_jacobian};
use chg_core::{DomainParams, FdConfig, Point, Tangent, C64};

use crate::report::{Check, Report, Value};
use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub seed: u64,
    pub count: usize,
    pub near_boundary: bool,
}

impl Options {
    pub fn caps(&self) -> SamplerCaps {
        if self.near_boundary { SamplerCaps::NEAR_BOUNDARY } else { SamplerCaps::STANDARD }
    }
}

/// Finite-difference checks are costlier, so they see at most this many points.
const FD_POINTS: usize = 50;
const JACOBIAN_POINTS: usize = 200;
const PROBE_RAYS: usize = 20;
const PROBE_STEPS: usize = 400;

#[derive(Debug, Clone)]
pub struct Tolerances(Vec<(&'static str, f64)>);

impl Default for Tolerances {
    fn default() -> Self {
        Self(vec![
            ("ma_residual_closed", 1e-8),
            ("ma_residual_numeric", 1e-6),
            ("metric_routes", 1e-8),
            ("oracle_hessian", 1e-5),
            ("x_invariance", 1e-12),
            ("jacobian_determinant", 1e-8),
            ("jacobian_fd", 1e-5),
            ("curvature_range", 1e-6),
            ("curvature_sharpness", 1e-10),
            ("trace_chain", 1e-12),
            ("boundary_probe", 0.0),
        ])
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0.iter().find(|(n, _)| *n == name).map(|(_, v)| *v).expect("known tolerance")
    }

    /// Applies `name=value` overrides; unknown names and bad values are usage errors.
    pub fn apply(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for item in overrides {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("tolerance override `{item}` is not name=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("tolerance `{name}` has a non-numeric value `{value}`")))?;
            if !(value >= 0.0) {
                return Err(CliError::Usage(format!("tolerance `{name}` must be non-negative")));
            }
            let slot = self
                .0
                .iter_mut()
                .find(|(n, _)| *n == name.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown tolerance `{name}`")))?;
            slot.1 = value;
        }
        Ok(())
    }
}

/// Largest residual; an error or NaN counts as infinite.
fn worst<T: Sync>(items: &[T], f: impl Fn(&T) -> Option<f64> + Sync) -> f64 {
    items
        .par_iter()
        .map(|item| match f(item) {
            Some(v) if !v.is_nan() => v,
            _ => f64::INFINITY,
        })
        .reduce(|| 0.0, f64::max)
}

struct Inputs {
    points: Vec<Point>,
    bases: Vec<SymMatrix>,
    tangents: Vec<Tangent>,
    matrices: Vec<SymMatrix>,
    rays: Vec<(Point, DVector<C64>)>,
}

fn sample_inputs(params: &DomainParams, opts: &Options) -> Inputs {
    let points = sample_interior_with(params, opts.seed, opts.count, opts.caps());
    let mut s = Sampler::with_caps(*params, opts.seed.wrapping_add(1), opts.caps());
    let bases = (0..opts.count).map(|_| s.symmetric(0.9)).collect();
    let tangents = (0..opts.count)
        .map(|_| Tangent::from_row(params, &s.tangent_row()).expect("sampled tangent has the right length"))
        .collect();
    let matrices = (0..opts.count).map(|_| random_symmetric(s.rng(), params.p())).collect();

    let (m, n, r) = (params.m(), params.n(), params.r());
    let mut rays = Vec::new();
    for start in points.iter().take(PROBE_RAYS) {
        let mut dir = DVector::zeros(n);
        dir.rows_mut(m, r).copy_from(&random_unit(s.rng(), r));
        rays.push((start.clone(), dir));
        // Z-ward rays start on the w = 0 slice well inside the matrix ball
        let start = Point::new(s.symmetric(0.5), DVector::zeros(r));
        let mut dir = DVector::zeros(n);
        dir.rows_mut(0, m).copy_from(&random_unit(s.rng(), m));
        rays.push((start, dir));
    }
    Inputs { points, bases, tangents, matrices, rays }
}

pub fn run(params: &DomainParams, opts: &Options, tol: &Tolerances, timestamp: bool) -> Report {
    let mut report = Report::new("verify", timestamp);
    report.domain(params);
    report.config("seed", Value::Int(opts.seed as i64));
    report.config("count", Value::Int(opts.count as i64));
    report.config("near_boundary", Value::Bool(opts.near_boundary));
    report.tolerances = tol.0.iter().map(|(n, v)| (n.to_string(), *v)).collect();

    let inputs = sample_inputs(params, opts);
    let pts = &inputs.points;
    let mut add = |name: &str, points: usize, residual: f64| {
        report.checks.push(Check::new(name, points, residual, tol.get(name)));
    };

    add("ma_residual_closed", pts.len(), worst(pts, |pt| ma_residual(params, pt, DetRoute::ClosedForm).ok()));
    add("ma_residual_numeric", pts.len(), worst(pts, |pt| ma_residual(params, pt, DetRoute::Numeric).ok()));
    add(
        "metric_routes",
        pts.len(),
        worst(pts, |pt| {
            let closed = metric_blocks_closed(params, pt).ok()?.assemble();
            Some(linalg::rel_diff(metric_pullback(params, pt).ok()?.matrix(), closed.matrix()))
        }),
    );

    let fd_pts = &pts[..pts.len().min(FD_POINTS)];
    let cfg = FdConfig { step: 1e-4, richardson: false };
    add(
        "oracle_hessian",
        fd_pts.len(),
        worst(fd_pts, |pt| {
            let closed = metric_blocks_closed(params, pt).ok()?.assemble();
            Some(linalg::rel_diff(&fd_metric(params, pt, &cfg).ok()?, closed.matrix()))
        }),
    );

    let pairs: Vec<(&Point, &SymMatrix)> = pts.iter().zip(&inputs.bases).collect();
    add(
        "x_invariance",
        pairs.len(),
        worst(&pairs, |(pt, base)| {
            let image = normalizing_map(params, base).ok()?.apply(pt).ok()?;
            Some((aux_xy(params, &image).ok()?.x - aux_xy(params, pt).ok()?.x).abs())
        }),
    );
    add(
        "jacobian_determinant",
        pts.len(),
        worst(pts, |pt| {
            let jac = jacobian_at_base(params, pt).ok()?;
            Some((jac.ln_det_abs_sq() - ln_jacobian_det_sq(params, &pt.z).ok()?).exp_m1().abs())
        }),
    );
    let jac_pairs = &pairs[..pairs.len().min(JACOBIAN_POINTS)];
    let jcfg = FdConfig { step: 1e-4, richardson: true };
    add(
        "jacobian_fd",
        jac_pairs.len(),
        worst(jac_pairs, |(pt, base)| {
            let map = normalizing_map(params, base).ok()?;
            let f = |coords: &[C64]| {
                let q = Point::from_coords(params, coords).ok()?;
                Some(map.apply(&q).ok()?.to_coords().as_slice().to_vec())
            };
            let fd = holomorphic_jacobian(f, pt.to_coords().as_slice(), &jcfg).ok()?;
            Some(linalg::rel_diff(&fd, &map.jacobian(pt).ok()?.assembled))
        }),
    );

    let (lo, hi) = curvature_bounds(params);
    let curv: Vec<(&Point, &Tangent)> = pts.iter().zip(&inputs.tangents).collect();
    add(
        "curvature_range",
        curv.len(),
        worst(&curv, |(pt, t)| {
            let w = hsc(params, pt, t).ok()?;
            Some((lo - w).max(w - hi).max(0.0))
        }),
    );
    let (rank_one, scalar) = sharp_directions(params);
    let w0 = DVector::zeros(params.r());
    let sharp = [(rank_one, lo), (scalar, hi)];
    add(
        "curvature_sharpness",
        sharp.len(),
        worst(&sharp, |(t, bound)| Some((hsc_origin(params, &w0, t).ok()? - bound).abs())),
    );

    let p = params.p();
    let mut diag = vec![0.0; p];
    diag[0] = 1.0;
    let rank_one = SymMatrix::from_real_diagonal(&diag);
    let identity = SymMatrix::identity(p);
    let chain = worst(&inputs.matrices, |z| {
        let (t1, t2, t3) = trace_chain_terms(z);
        Some((t1 - t2).max(t2 - t3).max(0.0) / t3.max(1.0))
    });
    let (a1, a2, _) = trace_chain_terms(&rank_one);
    let (_, b2, b3) = trace_chain_terms(&identity);
    let witnesses = (a1 - a2).abs().max((b2 - b3).abs());
    add("trace_chain", inputs.matrices.len() + 2, chain.max(witnesses));

    let probe = ProbeConfig::default();
    add(
        "boundary_probe",
        inputs.rays.len(),
        worst(&inputs.rays, |(start, dir)| {
            let trace = boundary_blowup_probe(params, start, dir, PROBE_STEPS, &probe).ok()?;
            if !trace.reached {
                return None;
            }
            Some((probe.min_growth - trace.growth()).max(0.0))
        }),
    );
    report
}
