//! The Kähler–Einstein potential and its metric tensor.
//!
//! The potential is
//!
//! ```text
//! g = log Y − (1/K) log det(I − Z Z̄) + ((r − N)/(1 + N)) log K
//! ```
//!
//! and its mixed Hessian `T = (∂²g/∂z_α∂z̄_β)` is evaluated two ways: by
//! pulling back the diagonal origin-slice metric through the Jacobian of the
//! normalizing automorphism, and from the closed-form blocks `T11, T12, T21,
//! T22`. At `K = p/2 + 1/(p+1)` the potential solves
//! `det T = e^{(N+1) g}` and blows up at the boundary.

use nalgebra::{DMatrix, DVector};

use crate::autgroup::{self, jacobian_at_base, ln_jacobian_det_sq, normalizing_map};
use crate::domain::{self, aux_xy, e_vector, DomainParams, Point};
use crate::linalg::{self, sym_kron};
use crate::{Error, Result, C64};

/// Hermitian `N×N` metric matrix, rows and columns in coordinate order
/// `(z11, …, zpp, w1, …, wr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(pub DMatrix<C64>);

impl MetricMatrix {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `max|T − Tᴴ|` relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        linalg::rel_diff(&self.0, &self.0.adjoint())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&linalg::hermitian_part(&self.0))?[0])
    }

    /// `v T vᴴ` for a tangent row `v`.
    pub fn quadratic_form(&self, v: &DVector<C64>) -> f64 {
        let tv = &self.0 * v.conjugate();
        v.iter().zip(tv.iter()).map(|(a, b)| a * b).sum::<C64>().re
    }

    /// `ln det T` by Cholesky; fails when `T` is not positive definite.
    pub fn ln_det(&self) -> Result<f64> {
        linalg::ln_det_hpd(&self.0).ok_or(Error::NotPositiveDefinite)
    }
}

/// The four blocks of the metric at a general point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlocks {
    pub t11: DMatrix<C64>,
    pub t12: DMatrix<C64>,
    pub t21: DMatrix<C64>,
    pub t22: DMatrix<C64>,
}

impl MetricBlocks {
    pub fn assemble(&self) -> MetricMatrix {
        let m = self.t11.nrows();
        let r = self.t22.nrows();
        let mut t = DMatrix::zeros(m + r, m + r);
        t.view_mut((0, 0), (m, m)).copy_from(&self.t11);
        t.view_mut((0, m), (m, r)).copy_from(&self.t12);
        t.view_mut((m, 0), (r, m)).copy_from(&self.t21);
        t.view_mut((m, m), (r, r)).copy_from(&self.t22);
        MetricMatrix(t)
    }
}

fn ln_k_offset(params: &DomainParams) -> f64 {
    let n = params.n() as f64;
    (params.r() as f64 - n) / (1.0 + n) * params.k().ln()
}

/// The potential `g`; finite on the interior.
pub fn generating_function(params: &DomainParams, point: &Point) -> Result<f64> {
    let aux = aux_xy(params, point)?;
    let ln_d = domain::ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    Ok(-(-aux.x).ln_1p() - ln_d / params.k() + ln_k_offset(params))
}

/// Metric on the slice `Z = 0`:
/// `diag((Y/K) I_m, Y I_r + Y² w̄*ᵗ w*)` with `X = |w*|²`.
pub fn metric_origin(params: &DomainParams, wstar: &DVector<C64>) -> Result<MetricMatrix> {
    if wstar.len() != params.r() {
        return Err(Error::InvalidShape(format!("w* has length {}, expected {}", wstar.len(), params.r())));
    }
    let x = wstar.norm_squared();
    if !(x < 1.0) {
        return Err(Error::OutsideDomain);
    }
    let y = 1.0 / (1.0 - x);
    let (m, r) = (params.m(), params.r());
    let mut t = DMatrix::zeros(m + r, m + r);
    for i in 0..m {
        t[(i, i)] = C64::new(y / params.k(), 0.0);
    }
    for i in 0..r {
        for j in 0..r {
            let mut v = wstar[i].conj() * wstar[j] * (y * y);
            if i == j {
                v += y;
            }
            t[(m + i, m + j)] = v;
        }
    }
    Ok(MetricMatrix(t))
}

/// `T = J_{F0} T(0, w*) J_{F0}ᴴ` with `F0` the normalizing map based at `Z`.
pub fn metric_pullback(params: &DomainParams, point: &Point) -> Result<MetricMatrix> {
    let jac = jacobian_at_base(params, point)?;
    let wstar = autgroup::wstar_at_base(params, point)?;
    let t0 = metric_origin(params, &wstar)?;
    let t = &jac.assembled * t0.matrix() * jac.assembled.adjoint();
    Ok(MetricMatrix(linalg::hermitian_part(&t)))
}

/// Closed-form blocks:
///
/// ```text
/// T11 = (Y/K) [Aᵗ Ā ·× Aᵗ Ā]_s + (X Y²/K²) E(Z)ᵗ Ē(Z)
/// T12 = (Y²/K) det(I − Z Z̄)^{−1/K} E(Z)ᵗ w,   T21 = T12ᴴ
/// T22 = Y² det(I − Z Z̄)^{−2/K} w̄ᵗ w + Y det(I − Z Z̄)^{−1/K} I
/// ```
pub fn metric_blocks_closed(params: &DomainParams, point: &Point) -> Result<MetricBlocks> {
    let aux = aux_xy(params, point)?;
    let (x, y, k) = (aux.x, aux.y, params.k());
    let ln_d = domain::ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    let d_inv_k = (-ln_d / k).exp();

    let a = normalizing_map(params, &point.z)?.a().clone();
    let at_abar = a.transpose() * a.conjugate();
    let e = e_vector(&point.z)?.0;

    let t11 = sym_kron(&at_abar)?.map(|c| c * (y / k))
        + (&e * e.adjoint()).map(|c| c * (x * y * y / (k * k)));
    let t12 = (&e * point.w.transpose()).map(|c| c * (y * y / k * d_inv_k));
    let t21 = t12.adjoint();
    let r = params.r();
    let t22 = (point.w.conjugate() * point.w.transpose()).map(|c| c * (y * y * d_inv_k * d_inv_k))
        + DMatrix::<C64>::identity(r, r).map(|c| c * (y * d_inv_k));
    Ok(MetricBlocks { t11, t12, t21, t22 })
}

/// How `det T` is obtained in [`ma_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetRoute {
    /// `K^{r−N} (1−X)^{−(N+1)} det(I − Z Z̄)^{−(p+1+r/K)}`.
    ClosedForm,
    /// Cholesky determinant of [`metric_pullback`].
    Numeric,
}

/// `ln det T` by the chosen route.
pub fn ln_det_metric(params: &DomainParams, point: &Point, route: DetRoute) -> Result<f64> {
    match route {
        DetRoute::ClosedForm => {
            let aux = aux_xy(params, point)?;
            let n = params.n() as f64;
            Ok((params.r() as f64 - n) * params.k().ln() - (n + 1.0) * (-aux.x).ln_1p()
                + ln_jacobian_det_sq(params, &point.z)?)
        }
        DetRoute::Numeric => metric_pullback(params, point)?.ln_det(),
    }
}

/// Relative Monge–Ampère residual `|det T − e^{(N+1)g}| / e^{(N+1)g}`,
/// computed in log space.
pub fn ma_residual(params: &DomainParams, point: &Point, route: DetRoute) -> Result<f64> {
    let lhs = ln_det_metric(params, point, route)?;
    let rhs = (params.n() as f64 + 1.0) * generating_function(params, point)?;
    Ok((lhs - rhs).exp_m1().abs())
}

/// Termination thresholds of the boundary probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    /// Stop once `X` reaches this value.
    pub x_threshold: f64,
    /// Stop once `det(I − Z Z̄)` falls to this value.
    pub det_threshold: f64,
    /// Required growth `g_last − g_first`.
    pub min_growth: f64,
    /// Geometric ratio of the remaining distance to the boundary.
    pub ratio: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { x_threshold: 1.0 - 1e-9, det_threshold: 1e-9, min_growth: 10.0, ratio: 0.5 }
    }
}

/// Values of `g` along the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub values: Vec<f64>,
    pub final_x: f64,
    pub final_det: f64,
    /// A termination threshold was reached.
    pub reached: bool,
}

impl ProbeTrace {
    pub fn growth(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN) - self.values.first().copied().unwrap_or(f64::NAN)
    }

    /// Threshold reached with the required growth.
    pub fn diverged(&self, cfg: &ProbeConfig) -> bool {
        self.reached && self.growth() >= cfg.min_growth
    }
}

/// Evaluates `g` at `interior + s·direction` for `s` approaching the boundary
/// crossing `s*` geometrically, `s_k = s*(1 − ratio^k)`, stopping at the first
/// threshold of `cfg`. A zero direction yields a stationary probe.
pub fn boundary_blowup_probe(
    params: &DomainParams,
    interior: &Point,
    direction: &DVector<C64>,
    steps: usize,
    cfg: &ProbeConfig,
) -> Result<ProbeTrace> {
    if direction.len() != params.n() {
        return Err(Error::InvalidShape(format!("direction has length {}, expected {}", direction.len(), params.n())));
    }
    let g0 = generating_function(params, interior)?;
    let start = interior.to_coords();
    let at = |s: f64| Point::from_coords(params, (&start + direction.map(|c| c * s)).as_slice());
    let inside = |s: f64| -> Result<bool> { domain::contains_point(params, &at(s)?) };

    if direction.norm() == 0.0 {
        let aux = aux_xy(params, interior)?;
        return Ok(ProbeTrace {
            values: vec![g0; steps + 1],
            final_x: aux.x,
            final_det: domain::det_defect(&interior.z)?,
            reached: false,
        });
    }

    // bracket the crossing, then bisect to machine resolution
    let (mut lo, mut hi) = (0.0, 1.0);
    while inside(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Probe("ray does not leave the domain".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = lo;

    let mut values = vec![g0];
    let mut last = (aux_xy(params, interior)?.x, domain::det_defect(&interior.z)?);
    let mut reached = false;
    let mut gap = crossing;
    for _ in 0..steps {
        if last.0 >= cfg.x_threshold || last.1 <= cfg.det_threshold {
            reached = true;
            break;
        }
        gap *= cfg.ratio;
        let pt = at(crossing - gap)?;
        if !domain::contains_point(params, &pt)? {
            return Err(Error::Probe(format!(
                "membership lost at distance {gap:.3e} before reaching the thresholds"
            )));
        }
        values.push(generating_function(params, &pt)?);
        last = (aux_xy(params, &pt)?.x, domain::det_defect(&pt.z)?);
    }
    if last.0 >= cfg.x_threshold || last.1 <= cfg.det_threshold {
        reached = true;
    }
    Ok(ProbeTrace { values, final_x: last.0, final_det: last.1, reached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample_interior, special_k};
    use crate::linalg::SymMatrix;
    use approx::assert_relative_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn potential_at_origin() {
        let ball = DomainParams::new(1, 1, 1.0).unwrap();
        assert_eq!(generating_function(&ball, &Point::origin(&ball)).unwrap(), 0.0);
        let p2 = DomainParams::with_special_k(1, 2).unwrap();
        let g = generating_function(&p2, &Point::origin(&p2)).unwrap();
        assert_relative_eq!(g, -0.6 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
        assert!((g + 0.172609).abs() < 1e-6);
    }

    #[test]
    fn ball_potential_is_minus_log_distance() {
        let ball = DomainParams::new(1, 1, 1.0).unwrap();
        let pt = Point::new(SymMatrix::from_real_diagonal(&[0.5]), DVector::from_vec(vec![c(0.5)]));
        let g = generating_function(&ball, &pt).unwrap();
        assert_relative_eq!(g, -(1.0f64 - 0.25 - 0.25).ln(), epsilon = 1e-15);
    }

    #[test]
    fn origin_metric_examples() {
        let params = DomainParams::new(1, 2, 1.5).unwrap();
        let t = metric_origin(&params, &DVector::zeros(1)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(t.0[(i, i)].re, 1.0 / 1.5, epsilon = 1e-15);
        }
        assert_eq!(t.0[(3, 3)], c(1.0));

        let w = DVector::from_vec(vec![c(0.5f64.sqrt())]);
        let t = metric_origin(&params, &w).unwrap();
        assert_relative_eq!(t.0[(3, 3)].re, 4.0, epsilon = 1e-14);
        assert_eq!(metric_origin(&params, &DVector::from_vec(vec![c(1.0)])), Err(Error::OutsideDomain));
    }

    #[test]
    fn origin_metric_determinant() {
        let params = DomainParams::with_special_k(2, 2).unwrap();
        let w = DVector::from_vec(vec![C64::new(0.3, 0.2), C64::new(-0.1, 0.4)]);
        let x = w.norm_squared();
        let t = metric_origin(&params, &w).unwrap();
        let n = params.n() as f64;
        let expect = (params.r() as f64 - n) * params.k().ln() - (n + 1.0) * (1.0 - x).ln();
        assert_relative_eq!(t.ln_det().unwrap(), expect, epsilon = 1e-13);
    }

    #[test]
    fn pullback_at_zero_is_origin_metric() {
        let params = DomainParams::with_special_k(2, 3).unwrap();
        let w = DVector::from_vec(vec![C64::new(0.2, 0.1), c(-0.3)]);
        let pt = Point::on_origin_slice(&params, w.clone());
        let a = metric_pullback(&params, &pt).unwrap();
        let b = metric_origin(&params, &w).unwrap();
        assert!(linalg::rel_diff(a.matrix(), b.matrix()) < 1e-15);
    }

    #[test]
    fn closed_blocks_examples() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        let w = DVector::from_vec(vec![c(0.4)]);
        let blocks = metric_blocks_closed(&params, &Point::on_origin_slice(&params, w.clone())).unwrap();
        let y = 1.0 / (1.0 - 0.16);
        let expect = DMatrix::<C64>::identity(3, 3).map(|v| v * (y / params.k()));
        assert!(linalg::max_abs(&(blocks.t11 - expect)) < 1e-14);
        assert!(linalg::max_abs(&blocks.t12) == 0.0);

        let ball = DomainParams::new(1, 1, 1.0).unwrap();
        let pt = Point::new(SymMatrix::from_real_diagonal(&[0.5]), DVector::from_vec(vec![c(0.5)]));
        let blocks = metric_blocks_closed(&ball, &pt).unwrap();
        assert_relative_eq!(blocks.t22[(0, 0)].re, 3.0, epsilon = 1e-14);
        assert!(linalg::max_abs(&(&blocks.t21 - blocks.t12.adjoint())) < 1e-15);
    }

    #[test]
    fn routes_agree() {
        for (r, p) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
            let params = DomainParams::with_special_k(r, p).unwrap();
            for pt in sample_interior(&params, 21, 40) {
                let a = metric_pullback(&params, &pt).unwrap();
                let b = metric_blocks_closed(&params, &pt).unwrap().assemble();
                assert!(linalg::rel_diff(b.matrix(), a.matrix()) < 1e-8);
                assert!(a.min_eigenvalue().unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn residual_vanishes_at_special_k() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        for pt in sample_interior(&params, 2, 100) {
            assert!(ma_residual(&params, &pt, DetRoute::ClosedForm).unwrap() <= 1e-8);
            assert!(ma_residual(&params, &pt, DetRoute::Numeric).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn residual_vanishes_on_origin_slice_for_any_k() {
        for k in [0.5, 1.0, 2.5] {
            let params = DomainParams::new(2, 2, k).unwrap();
            let pt = Point::on_origin_slice(&params, DVector::from_vec(vec![c(0.3), C64::new(0.1, 0.5)]));
            assert!(ma_residual(&params, &pt, DetRoute::ClosedForm).unwrap() < 1e-14);
        }
    }

    #[test]
    fn negative_control_off_special_k() {
        let params = DomainParams::new(1, 2, 1.0).unwrap();
        assert!(!params.is_special());
        let pt = Point::new(SymMatrix::from_real_diagonal(&[0.5, 0.0]), DVector::zeros(1));
        let res = ma_residual(&params, &pt, DetRoute::ClosedForm).unwrap();
        // det T / e^{(N+1)g} = det(I − Z Z̄) = 0.75 here
        assert_relative_eq!(res, 0.25, epsilon = 1e-14);
        assert!(res > 1e-3);
        assert!(special_k(2) != 1.0);
    }

    #[test]
    fn probe_w_direction_diverges() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        let pt = Point::new(SymMatrix::from_real_diagonal(&[0.3, -0.2]), DVector::from_vec(vec![c(0.1)]));
        let mut dir = DVector::zeros(params.n());
        dir[params.m()] = c(1.0);
        let cfg = ProbeConfig::default();
        let trace = boundary_blowup_probe(&params, &pt, &dir, 200, &cfg).unwrap();
        assert!(trace.reached);
        assert!(trace.final_x >= cfg.x_threshold);
        assert!(trace.diverged(&cfg), "growth {}", trace.growth());
    }

    #[test]
    fn probe_z_direction_diverges() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        let pt = Point::origin(&params);
        let mut dir = DVector::zeros(params.n());
        dir[0] = c(1.0);
        let cfg = ProbeConfig::default();
        let trace = boundary_blowup_probe(&params, &pt, &dir, 200, &cfg).unwrap();
        assert!(trace.final_det <= cfg.det_threshold);
        assert!(trace.diverged(&cfg), "growth {}", trace.growth());
    }

    #[test]
    fn stationary_probe() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        let pt = sample_interior(&params, 1, 1).pop().unwrap();
        let trace =
            boundary_blowup_probe(&params, &pt, &DVector::zeros(params.n()), 8, &ProbeConfig::default()).unwrap();
        assert_eq!(trace.values.len(), 9);
        assert!(trace.values.iter().all(|v| v.is_finite() && *v == trace.values[0]));
    }
}
