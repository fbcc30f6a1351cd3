//! Finite-difference Wirtinger calculus.
//!
//! Functions are taken on flat complex coordinates and may return `None`
//! outside their domain, in which case the step is divided by 10 (at most
//! three times). Mixed derivatives come from real partials:
//!
//! ```text
//! ∂²f/∂z_α∂z̄_β = ¼ [f_{xαxβ} + f_{yαyβ} + i (f_{xαyβ} − f_{yαxβ})]
//! ```
//!
//! This module only uses the potential and domain membership, never the
//! closed-form metric or curvature.

use nalgebra::{DMatrix, DVector};

use crate::curvature::Tangent;
use crate::domain::{self, DomainParams, Point};
use crate::kemetric::generating_function;
use crate::linalg;
use crate::{Error, Result, C64};

const MAX_SHRINKS: usize = 3;

/// Step and extrapolation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step: f64,
    /// One level of Richardson extrapolation (`(4 F(h/2) − F(h)) / 3`).
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { step: 1e-4, richardson: false }
    }
}

impl FdConfig {
    pub fn new(step: f64, richardson: bool) -> Result<Self> {
        let cfg = Self { step, richardson };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Preset for [`fd_hsc`], which nests two second differences.
    pub fn curvature() -> Self {
        Self { step: 2e-2, richardson: true }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParams(format!("finite-difference step must be positive, got {}", self.step)));
        }
        Ok(())
    }
}

fn shifted(x: &[C64], moves: &[(usize, C64)]) -> Vec<C64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Real Hessian in `(x_0, y_0, x_1, y_1, …)` order at a fixed step.
fn real_hessian<F>(f: &F, x: &[C64], h: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[C64]) -> Option<f64>,
{
    let n = 2 * x.len();
    let dir = |i: usize, s: f64| (i / 2, if i % 2 == 0 { C64::new(s, 0.0) } else { C64::new(0.0, s) });
    let f0 = f(x)?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = f(&shifted(x, &[dir(i, h)]))?;
        let fm = f(&shifted(x, &[dir(i, -h)]))?;
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = f(&shifted(x, &[dir(i, h), dir(j, h)]))?;
            let fpm = f(&shifted(x, &[dir(i, h), dir(j, -h)]))?;
            let fmp = f(&shifted(x, &[dir(i, -h), dir(j, h)]))?;
            let fmm = f(&shifted(x, &[dir(i, -h), dir(j, -h)]))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Some(out)
}

fn mixed_from_real(real: &DMatrix<f64>) -> DMatrix<C64> {
    let n = real.nrows() / 2;
    DMatrix::from_fn(n, n, |a, b| {
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        C64::new(real[(xa, xb)] + real[(ya, yb)], real[(xa, yb)] - real[(ya, xb)]) * 0.25
    })
}

fn mixed_at_step<F>(f: &F, x: &[C64], h: f64, richardson: bool) -> Option<DMatrix<C64>>
where
    F: Fn(&[C64]) -> Option<f64>,
{
    let coarse = mixed_from_real(&real_hessian(f, x, h)?);
    if !richardson {
        return Some(coarse);
    }
    let fine = mixed_from_real(&real_hessian(f, x, 0.5 * h)?);
    Some((fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0))
}

/// Runs `attempt` at `step`, `step/10`, … until it succeeds.
fn with_shrink<T>(step: f64, mut attempt: impl FnMut(f64) -> Option<T>) -> Result<(T, f64)> {
    let mut h = step;
    for _ in 0..=MAX_SHRINKS {
        if let Some(v) = attempt(h) {
            return Ok((v, h));
        }
        h /= 10.0;
    }
    Err(Error::Stencil(MAX_SHRINKS))
}

fn check_hermitian(h: &DMatrix<C64>, step: f64) -> Result<()> {
    let scale = linalg::max_abs(h).max(1.0);
    let defect = linalg::max_abs(&(h - h.adjoint()));
    if defect > 10.0 * step * step * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Mixed Hessian `H[α][β] ≈ ∂²f/∂z_α∂z̄_β`.
pub fn wirtinger_hessian_mixed<F>(f: F, x: &[C64], cfg: &FdConfig) -> Result<DMatrix<C64>>
where
    F: Fn(&[C64]) -> Option<f64>,
{
    cfg.validate()?;
    let (h, step) = with_shrink(cfg.step, |h| mixed_at_step(&f, x, h, cfg.richardson))?;
    check_hermitian(&h, step)?;
    Ok(h)
}

/// Gradient `∂f/∂z_α = (∂f/∂x_α − i ∂f/∂y_α) / 2` by central differences.
pub fn wirtinger_gradient<F>(f: F, x: &[C64], cfg: &FdConfig) -> Result<DVector<C64>>
where
    F: Fn(&[C64]) -> Option<f64>,
{
    cfg.validate()?;
    let at = |h: f64| -> Option<DVector<C64>> {
        let mut out = DVector::zeros(x.len());
        for a in 0..x.len() {
            let dx = f(&shifted(x, &[(a, C64::new(h, 0.0))]))? - f(&shifted(x, &[(a, C64::new(-h, 0.0))]))?;
            let dy = f(&shifted(x, &[(a, C64::new(0.0, h))]))? - f(&shifted(x, &[(a, C64::new(0.0, -h))]))?;
            out[a] = C64::new(dx, -dy) / (4.0 * h);
        }
        Some(out)
    };
    let richardson = cfg.richardson;
    let (g, _) = with_shrink(cfg.step, |h| {
        let coarse = at(h)?;
        if !richardson {
            return Some(coarse);
        }
        Some((at(0.5 * h)? * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0))
    })?;
    Ok(g)
}

/// Jacobian `J[α][γ] ≈ ∂F_γ/∂z_α` of a holomorphic map, by central
/// differences along the real axis of each coordinate.
pub fn holomorphic_jacobian<F>(f: F, x: &[C64], cfg: &FdConfig) -> Result<DMatrix<C64>>
where
    F: Fn(&[C64]) -> Option<Vec<C64>>,
{
    cfg.validate()?;
    let at = |h: f64| -> Option<DMatrix<C64>> {
        let n = x.len();
        let mut rows = Vec::with_capacity(n);
        for a in 0..n {
            let fp = f(&shifted(x, &[(a, C64::new(h, 0.0))]))?;
            let fm = f(&shifted(x, &[(a, C64::new(-h, 0.0))]))?;
            rows.push(fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * h)).collect::<Vec<_>>());
        }
        let cols = rows.first().map_or(0, Vec::len);
        Some(DMatrix::from_fn(n, cols, |a, g| rows[a][g]))
    };
    let richardson = cfg.richardson;
    let (j, _) = with_shrink(cfg.step, |h| {
        let coarse = at(h)?;
        if !richardson {
            return Some(coarse);
        }
        Some((at(0.5 * h)? * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0))
    })?;
    Ok(j)
}

/// The potential as a function of flat coordinates, `None` outside the domain.
pub fn potential_fn(params: &DomainParams) -> impl Fn(&[C64]) -> Option<f64> + '_ {
    move |coords: &[C64]| {
        let pt = Point::from_coords(params, coords).ok()?;
        if !domain::contains_point(params, &pt).ok()? {
            return None;
        }
        generating_function(params, &pt).ok()
    }
}

/// Finite-difference metric `∂²g/∂z_α∂z̄_β`.
pub fn fd_metric(params: &DomainParams, point: &Point, cfg: &FdConfig) -> Result<DMatrix<C64>> {
    if !domain::contains_point(params, point)? {
        return Err(Error::OutsideDomain);
    }
    wirtinger_hessian_mixed(potential_fn(params), point.to_coords().as_slice(), cfg)
}

fn fd_hsc_at_step(params: &DomainParams, x: &DVector<C64>, v: &DVector<C64>, h: f64) -> Option<Result<f64>> {
    let g = potential_fn(params);
    let metric = |t: C64| -> Option<DMatrix<C64>> {
        let y = x + v.map(|c| c * t);
        mixed_at_step(&g, y.as_slice(), h, false)
    };
    let t0 = metric(C64::new(0.0, 0.0))?;
    let tp = metric(C64::new(h, 0.0))?;
    let tm = metric(C64::new(-h, 0.0))?;
    let ip = metric(C64::new(0.0, h))?;
    let im = metric(C64::new(0.0, -h))?;

    // ∂_t = (∂_s − i ∂_u)/2 and ∂_t∂_t̄ = Δ/4 with t = s + iu
    let dt = ((&tp - &tm) - (&ip - &im) * C64::new(0.0, 1.0)) / C64::new(4.0 * h, 0.0);
    let lap = (&tp + &tm + &ip + &im - &t0 * C64::new(4.0, 0.0)) / C64::new(4.0 * h * h, 0.0);

    Some((|| {
        let t0 = linalg::hermitian_part(&t0);
        if linalg::ln_det_hpd(&t0).is_none() {
            return Err(Error::Conditioning("finite-difference metric is not positive definite".into()));
        }
        let a = dt.transpose() * v; // row v ∂T, stored as a column
        let sol = t0
            .clone()
            .lu()
            .solve(&a.conjugate()) // T^{-1} (v ∂T)ᴴ
            .ok_or_else(|| Error::Conditioning("finite-difference metric is singular".into()))?;
        let quad = |m: &DMatrix<C64>| -> C64 { v.dot(&(m * v.conjugate())) };
        let second = a.transpose() * &sol;
        let num = -quad(&lap) + second[(0, 0)];
        let den = quad(&t0).re;
        if !(den > 0.0) {
            return Err(Error::Conditioning("metric is degenerate in the tangent direction".into()));
        }
        Ok(num.re / (den * den))
    })())
}

/// Length scale `min(1, 1 − σ_max(Z), 1 − √X)` of the neighbourhood of a
/// point; derivatives of order `k` of the potential grow like its `−k`-th
/// power near the boundary.
pub fn local_scale(params: &DomainParams, point: &Point) -> Result<f64> {
    let x = domain::aux_xy(params, point)?.x;
    let sigma = domain::spectral_norm(&point.z);
    Ok((1.0 - sigma).min(1.0 - x.sqrt()).min(1.0))
}

/// Holomorphic sectional curvature from finite differences of the potential.
///
/// `T` is the finite-difference metric; its restriction to the complex line
/// `t ↦ point + t·v` (with `v` the normalized tangent row) is differentiated
/// once in `t` and once by the Laplacian, using the same step for the inner
/// and outer stencils. The step is `cfg.step` times [`local_scale`].
pub fn fd_hsc(params: &DomainParams, point: &Point, tangent: &Tangent, cfg: &FdConfig) -> Result<f64> {
    cfg.validate()?;
    if !domain::contains_point(params, point)? {
        return Err(Error::OutsideDomain);
    }
    let row = tangent.row();
    if row.len() != params.n() {
        return Err(Error::InvalidShape(format!("tangent has length {}, expected {}", row.len(), params.n())));
    }
    let norm = row.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateDirection);
    }
    let v = row.unscale(norm);
    let x = point.to_coords();
    let (value, _) = with_shrink(cfg.step * local_scale(params, point)?, |h| {
        let coarse = fd_hsc_at_step(params, &x, &v, h)?;
        if !cfg.richardson {
            return Some(coarse);
        }
        let fine = fd_hsc_at_step(params, &x, &v, 0.5 * h)?;
        Some(match (coarse, fine) {
            (Ok(c), Ok(f)) => Ok((4.0 * f - c) / 3.0),
            (Err(e), _) | (_, Err(e)) => Err(e),
        })
    })?;
    value
}
