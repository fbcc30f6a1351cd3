//! Bergman kernel and metric.
//!
//! The kernel has the form
//!
//! ```text
//! K_II = K^{−m} π^{−m−r} G(Y) det(I − Z Z̄)^{−(p+1+r/K)},   G(Y) = Σ_j b_j Γ(r+j) Y^{r+j}
//! ```
//!
//! with `j = 0..=h`, `h = m + 1`. Derivatives of `H = log G` are taken with
//! respect to `X` (so `dY/dX = Y²`). The coefficients `b_j` are an input; for
//! `p = 1, K = 1` they are fitted from the unit-ball kernel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autgroup::{jacobian_at_base, wstar_at_base};
use crate::domain::{self, aux_xy, DomainParams, Point};
use crate::kemetric::MetricMatrix;
use crate::linalg::{self, sym_dim};
use crate::{Error, Result, C64};

/// `n!` as an exact integer product, then rounded once to `f64`.
pub fn factorial(n: usize) -> f64 {
    (1..=n as u128).product::<u128>() as f64
}

/// `Γ(n) = (n − 1)!` for positive integers.
pub fn gamma_int(n: usize) -> f64 {
    assert!(n >= 1, "Γ is evaluated at positive integers only");
    factorial(n - 1)
}

/// Coefficients `b_0 … b_h` of the series `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergmanCoeffs {
    pub r: usize,
    pub p: usize,
    pub b: Vec<f64>,
}

impl BergmanCoeffs {
    pub fn new(r: usize, p: usize, b: Vec<f64>) -> Result<Self> {
        let c = Self { r, p, b };
        c.validate()?;
        Ok(c)
    }

    /// Degree `h = p(p+1)/2 + 1`.
    pub fn h(&self) -> usize {
        sym_dim(self.p) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.p == 0 {
            return Err(Error::InvalidCoefficients(format!("r = {}, p = {} must be positive", self.r, self.p)));
        }
        if self.b.len() != self.h() + 1 {
            return Err(Error::InvalidCoefficients(format!(
                "expected {} coefficients for p = {}, got {}",
                self.h() + 1,
                self.p,
                self.b.len()
            )));
        }
        if let Some(bad) = self.b.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficients(format!("non-finite coefficient {bad}")));
        }
        if self.b[self.h()] == 0.0 {
            return Err(Error::InvalidCoefficients("leading coefficient b_h is zero".into()));
        }
        Ok(())
    }

    /// Parses `r = …`, `p = …`, `b = [ … ]`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::InvalidCoefficients(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("coefficients serialize")
    }

    pub fn check_params(&self, params: &DomainParams) -> Result<()> {
        self.validate()?;
        if self.r != params.r() || self.p != params.p() {
            return Err(Error::InvalidCoefficients(format!(
                "coefficients are for (r, p) = ({}, {}), domain has ({}, {})",
                self.r,
                self.p,
                params.r(),
                params.p()
            )));
        }
        Ok(())
    }
}

/// The leading coefficient `2^{m+1}` under the literal normalization; it does
/// not match the unit-ball kernel (see the tests).
pub fn literal_leading_coefficient(p: usize) -> f64 {
    2f64.powi(sym_dim(p) as i32 + 1)
}

/// `(G, G′, G″)` at `Y`, derivatives with respect to `X`.
pub fn g_series(coeffs: &BergmanCoeffs, y: f64) -> Result<(f64, f64, f64)> {
    coeffs.validate()?;
    if !(y >= 1.0) || !y.is_finite() {
        return Err(Error::InvalidParams(format!("Y must be finite and at least 1, got {y}")));
    }
    let r = coeffs.r;
    let mut out = (0.0, 0.0, 0.0);
    for (j, &b) in coeffs.b.iter().enumerate() {
        let n = r + j;
        let yn = y.powi(n as i32);
        out.0 += b * gamma_int(n) * yn;
        out.1 += b * gamma_int(n + 1) * yn * y;
        out.2 += b * gamma_int(n + 2) * yn * y * y;
    }
    Ok(out)
}

/// `(H′, H″)` with `H = log G`.
pub fn log_derivatives(coeffs: &BergmanCoeffs, y: f64) -> Result<(f64, f64)> {
    let (g, g1, g2) = g_series(coeffs, y)?;
    if g == 0.0 {
        return Err(Error::InvalidCoefficients(format!("G vanishes at Y = {y}")));
    }
    let h1 = g1 / g;
    Ok((h1, g2 / g - h1 * h1))
}

/// The Bergman kernel on the diagonal.
pub fn bergman_kernel(params: &DomainParams, coeffs: &BergmanCoeffs, point: &Point) -> Result<f64> {
    coeffs.check_params(params)?;
    let aux = aux_xy(params, point)?;
    let ln_d = domain::ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    let (g, _, _) = g_series(coeffs, aux.y)?;
    let (m, r, p, k) = (params.m() as f64, params.r() as f64, params.p() as f64, params.k());
    let ln_pref = -m * k.ln() - (m + r) * std::f64::consts::PI.ln() - (p + 1.0 + r / k) * ln_d;
    Ok(g * ln_pref.exp())
}

/// Bergman metric on the slice `Z = 0`:
/// `diag(((1/K) H′X + p + 1 + r/K) I_m, H′ I_r + H″ w̄*ᵗ w*)`.
pub fn bergman_metric_origin(params: &DomainParams, coeffs: &BergmanCoeffs, wstar: &DVector<C64>) -> Result<MetricMatrix> {
    coeffs.check_params(params)?;
    if wstar.len() != params.r() {
        return Err(Error::InvalidShape(format!("w* has length {}, expected {}", wstar.len(), params.r())));
    }
    let x = wstar.norm_squared();
    if !(x < 1.0) {
        return Err(Error::OutsideDomain);
    }
    let (h1, h2) = log_derivatives(coeffs, 1.0 / (1.0 - x))?;
    let (m, r, k) = (params.m(), params.r(), params.k());
    let upper = h1 * x / k + params.p() as f64 + 1.0 + r as f64 / k;
    let mut t = DMatrix::zeros(m + r, m + r);
    for i in 0..m {
        t[(i, i)] = C64::new(upper, 0.0);
    }
    for i in 0..r {
        for j in 0..r {
            let mut v = wstar[i].conj() * wstar[j] * h2;
            if i == j {
                v += h1;
            }
            t[(m + i, m + j)] = v;
        }
    }
    Ok(MetricMatrix(t))
}

/// Bergman metric at a general point, pulled back from the slice `Z = 0`.
/// The kernel picks up `|det J|²` under automorphisms, which leaves
/// `∂∂̄ log K_II` unchanged.
pub fn bergman_metric(params: &DomainParams, coeffs: &BergmanCoeffs, point: &Point) -> Result<MetricMatrix> {
    let jac = jacobian_at_base(params, point)?;
    let t0 = bergman_metric_origin(params, coeffs, &wstar_at_base(params, point)?)?;
    let t = &jac.assembled * t0.matrix() * jac.assembled.adjoint();
    Ok(MetricMatrix(linalg::hermitian_part(&t)))
}

/// The ratios `Φ`, `Ψ`, `Υ` of Bergman to Kähler–Einstein eigenvalues on the
/// slice `Z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioTriple {
    pub phi: f64,
    pub psi: f64,
    pub upsilon: f64,
    pub lambda: f64,
}

impl RatioTriple {
    pub fn min(&self) -> f64 {
        self.phi.min(self.psi).min(self.upsilon)
    }

    pub fn max(&self) -> f64 {
        self.phi.max(self.psi).max(self.upsilon)
    }
}

/// ```text
/// Φ = (H′X/K + p + 1 + r/K) / (Y/K),   Ψ = (H′ + H″λ²) / (Y + Y²λ²),   Υ = H′/Y
/// ```
pub fn equivalence_ratios(params: &DomainParams, coeffs: &BergmanCoeffs, x: f64, lambda: f64) -> Result<RatioTriple> {
    coeffs.check_params(params)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidParams(format!("X must lie in [0, 1), got {x}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParams(format!("λ must be finite and non-negative, got {lambda}")));
    }
    let y = 1.0 / (1.0 - x);
    let (h1, h2) = log_derivatives(coeffs, y)?;
    let (r, k) = (params.r() as f64, params.k());
    let l2 = lambda * lambda;
    Ok(RatioTriple {
        phi: (h1 * x / k + params.p() as f64 + 1.0 + r / k) / (y / k),
        psi: (h1 + h2 * l2) / (y + y * y * l2),
        upsilon: h1 / y,
        lambda,
    })
}

/// Shape of the `(X, λ)` grid used by [`equivalence_bounds_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanGrid {
    pub x_nodes: usize,
    pub lambda_nodes: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl std::fmt::Display for ScanGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} X nodes in [{}, {}], {} λ nodes per X (even over [0, √(XY)] plus √X)",
            self.x_nodes, self.x_min, self.x_max, self.lambda_nodes
        )
    }
}

/// Scanned extremes `a = max`, `b = min` of the three ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceBounds {
    pub a: f64,
    pub b: f64,
    pub grid: ScanGrid,
}

/// Grid nodes. `X` runs over `1 − 10^{−6i/(n−1)}` (clustered toward 1) merged
/// with the uniform nodes `i/n`; for each `X`, `λ` is spread evenly over
/// `[0, √(XY)]` and `λ = √X`, the modulus actually reached on the slice, is
/// added.
pub fn scan_nodes(grid_size: usize) -> Result<Vec<(f64, f64)>> {
    if grid_size < 2 {
        return Err(Error::InvalidParams(format!("grid size must be at least 2, got {grid_size}")));
    }
    let n = grid_size;
    let mut xs: Vec<f64> = (0..n)
        .map(|i| (1.0 - 10f64.powf(-6.0 * i as f64 / (n - 1) as f64)).max(0.0))
        .chain((1..n).map(|i| i as f64 / n as f64))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut nodes = Vec::with_capacity(xs.len() * (n + 1));
    for x in xs {
        let lmax = (x / (1.0 - x)).sqrt();
        for j in 0..n {
            nodes.push((x, lmax * j as f64 / (n - 1) as f64));
        }
        nodes.push((x, x.sqrt()));
    }
    Ok(nodes)
}

pub fn equivalence_bounds_scan(params: &DomainParams, coeffs: &BergmanCoeffs, grid_size: usize) -> Result<EquivalenceBounds> {
    let nodes = scan_nodes(grid_size)?;
    let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
    for (x, lambda) in &nodes {
        let t = equivalence_ratios(params, coeffs, *x, *lambda)?;
        a = a.max(t.max());
        b = b.min(t.min());
    }
    let grid = ScanGrid {
        x_nodes: nodes.len() / (grid_size + 1),
        lambda_nodes: grid_size + 1,
        x_min: nodes[0].0,
        x_max: nodes[nodes.len() - 1].0,
    };
    Ok(EquivalenceBounds { a, b, grid })
}

/// Bergman kernel of the unit ball in `C^n` at a point with `|ζ|² = s`.
pub fn unit_ball_kernel(n: usize, s: f64) -> f64 {
    factorial(n) / std::f64::consts::PI.powi(n as i32) * (1.0 - s).powi(-(n as i32 + 1))
}

const FIT_TOL: f64 = 1e-10;

/// Fits `b_0 … b_h` for `p = 1, K = 1`, where the domain is the unit ball of
/// `C^{r+1}`.
pub fn fit_coeffs_p1(r: usize) -> Result<BergmanCoeffs> {
    if r == 0 {
        return Err(Error::InvalidParams("r must be at least 1".into()));
    }
    let h = sym_dim(1) + 1;
    // candidate X spacings, tried in order
    let spacings: [&[f64]; 3] = [&[0.1, 0.4, 0.7], &[0.05, 0.3, 0.6], &[0.2, 0.5, 0.8]];
    let mut last_err = String::new();
    for xs in spacings {
        match fit_once(r, h, xs) {
            Ok(c) => return Ok(c),
            Err(e) => last_err = e,
        }
    }
    Err(Error::Fit(last_err))
}

fn fit_once(r: usize, h: usize, xs: &[f64]) -> std::result::Result<BergmanCoeffs, String> {
    let n = h + 1;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, &x) in xs.iter().enumerate() {
        // spread the base points over z as well; only Y enters G
        let z2 = 0.15 * i as f64;
        let w2 = x * (1.0 - z2);
        let y = 1.0 / (1.0 - x);
        let kernel = unit_ball_kernel(r + 1, z2 + w2);
        rhs[i] = kernel * std::f64::consts::PI.powi(1 + r as i32) * (1.0 - z2).powi(2 + r as i32);
        for j in 0..n {
            a[(i, j)] = gamma_int(r + j) * y.powi((r + j) as i32);
        }
    }
    // column scaling keeps the solve well balanced
    let scales: Vec<f64> = (0..n).map(|j| a.column(j).amax()).collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let sol = scaled.lu().solve(&rhs).ok_or_else(|| format!("singular sample set {xs:?}"))?;
    let b: Vec<f64> = sol.iter().zip(&scales).map(|(v, s)| v / s).collect();
    let resid = (&a * DVector::from_column_slice(&b) - &rhs).amax() / rhs.amax();
    if !(resid <= FIT_TOL) {
        return Err(format!("fit residual {resid:.3e} at sample set {xs:?}"));
    }
    BergmanCoeffs::new(r, 1, b).map_err(|e| e.to_string())
}

/// Largest relative residual of the last fit; recomputed on `count` fresh
/// points with `X` spread over `[0, 0.95)`.
pub fn fit_holdout_error(coeffs: &BergmanCoeffs, count: usize) -> Result<f64> {
    let params = DomainParams::new(coeffs.r, 1, 1.0)?;
    let mut worst = 0.0f64;
    for i in 0..count {
        let t = (i as f64 + 0.5) / count as f64;
        let z2 = 0.9 * (1.0 - t);
        let x = 0.95 * t;
        let w2 = x * (1.0 - z2);
        let point = Point::new(
            crate::linalg::SymMatrix::from_real_diagonal(&[z2.sqrt()]),
            DVector::from_fn(coeffs.r, |j, _| if j == 0 { C64::new(w2.sqrt(), 0.0) } else { C64::new(0.0, 0.0) }),
        );
        let fitted = bergman_kernel(&params, coeffs, &point)?;
        let exact = unit_ball_kernel(coeffs.r + 1, z2 + w2);
        worst = worst.max((fitted - exact).abs() / exact);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::sample_interior;
    use crate::kemetric::metric_origin;
    use approx::assert_relative_eq;

    fn ball_coeffs(r: usize) -> BergmanCoeffs {
        BergmanCoeffs::new(r, 1, vec![0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn factorials_are_exact() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(gamma_int(4), 6.0);
        assert_eq!(factorial(20), 2_432_902_008_176_640_000.0);
    }

    #[test]
    fn coefficient_validation() {
        assert!(BergmanCoeffs::new(1, 1, vec![0.0, 0.0]).is_err());
        assert!(BergmanCoeffs::new(1, 1, vec![1.0, 0.0, 0.0]).is_err());
        assert!(BergmanCoeffs::new(1, 2, vec![0.0; 4]).is_err());
        assert!(BergmanCoeffs::new(1, 2, vec![0.0, 0.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(BergmanCoeffs::new(1, 1, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = BergmanCoeffs::new(2, 2, vec![0.5, 1.0, 0.0, 2.0, 3.0]).unwrap();
        let back = BergmanCoeffs::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        assert!(BergmanCoeffs::from_toml_str("r = 1\np = 2\nb = [1.0, 2.0]").is_err());
        assert!(BergmanCoeffs::from_toml_str("r = 1\np = ").is_err());
    }

    #[test]
    fn series_ball_values() {
        assert_eq!(g_series(&ball_coeffs(1), 1.0).unwrap(), (2.0, 6.0, 24.0));
        assert!(g_series(&ball_coeffs(1), 0.5).is_err());
    }

    #[test]
    fn series_leading_growth() {
        let c = BergmanCoeffs::new(2, 2, vec![1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let y = 1e7;
        let (g, g1, _) = g_series(&c, y).unwrap();
        assert_relative_eq!(g1 / (g * y), (2 + 4) as f64, max_relative = 1e-5);
    }

    #[test]
    fn series_derivative_matches_differences() {
        let c = BergmanCoeffs::new(1, 2, vec![0.3, 1.0, 0.5, 2.0, 1.5]).unwrap();
        for x in [0.1, 0.5, 0.9] {
            let hx = 1e-6;
            let g = |x: f64| g_series(&c, 1.0 / (1.0 - x)).unwrap().0;
            let fd = (g(x + hx) - g(x - hx)) / (2.0 * hx);
            let (_, g1, g2) = g_series(&c, 1.0 / (1.0 - x)).unwrap();
            assert_relative_eq!(fd, g1, max_relative = 1e-6);
            let g1f = |x: f64| g_series(&c, 1.0 / (1.0 - x)).unwrap().1;
            let fd2 = (g1f(x + hx) - g1f(x - hx)) / (2.0 * hx);
            assert_relative_eq!(fd2, g2, max_relative = 1e-6);
        }
    }

    #[test]
    fn fitted_ball_coefficients() {
        for r in [1, 2] {
            let c = fit_coeffs_p1(r).unwrap();
            let expect = [0.0, 0.0, 1.0];
            for (b, e) in c.b.iter().zip(expect) {
                assert!((b - e).abs() < 1e-10, "{:?}", c.b);
            }
            assert!(fit_holdout_error(&c, 100).unwrap() < 1e-9);
        }
        let (g, _, _) = g_series(&fit_coeffs_p1(2).unwrap(), 2.0).unwrap();
        assert_relative_eq!(g, 6.0 * 16.0, max_relative = 1e-10);
    }

    #[test]
    fn literal_leading_coefficient_disagrees_with_ball() {
        let c = fit_coeffs_p1(1).unwrap();
        let fitted = c.b[c.h()] * gamma_int(c.r + c.h());
        assert_relative_eq!(fitted, 2.0, max_relative = 1e-10);
        assert_eq!(literal_leading_coefficient(1), 4.0);
        assert!((literal_leading_coefficient(1) * gamma_int(3) - fitted).abs() > 1.0);
    }

    #[test]
    fn ball_kernel_matches() {
        let params = DomainParams::new(1, 1, 1.0).unwrap();
        let c = ball_coeffs(1);
        for pt in sample_interior(&params, 4, 200) {
            let z2 = pt.z.matrix()[(0, 0)].norm_sqr();
            let expect = unit_ball_kernel(2, z2 + pt.w.norm_squared());
            let k = bergman_kernel(&params, &c, &pt).unwrap();
            assert_relative_eq!(k, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn ball_metric_is_proportional() {
        let params = DomainParams::new(1, 1, 1.0).unwrap();
        let c = ball_coeffs(1);
        let b0 = bergman_metric_origin(&params, &c, &DVector::zeros(1)).unwrap();
        assert_eq!(b0.0[(0, 0)], C64::new(3.0, 0.0));
        assert_eq!(b0.0[(1, 1)], C64::new(3.0, 0.0));
        for w in [0.0, 0.3, 0.9, 0.99] {
            let ws = DVector::from_vec(vec![C64::new(w, 0.1 * w)]);
            let b = bergman_metric_origin(&params, &c, &ws).unwrap();
            let ke = metric_origin(&params, &ws).unwrap();
            assert!(linalg::rel_diff(b.matrix(), &ke.matrix().map(|v| v * 3.0)) < 1e-8);
        }
    }

    #[test]
    fn ratios() {
        let params = DomainParams::new(1, 1, 1.0).unwrap();
        let c = ball_coeffs(1);
        for x in [0.0, 0.2, 0.7, 0.99] {
            for l in [0.0, 0.5, 3.0] {
                let t = equivalence_ratios(&params, &c, x, l).unwrap();
                for v in [t.phi, t.psi, t.upsilon] {
                    assert_relative_eq!(v, 3.0, max_relative = 1e-12);
                }
            }
        }
        let p2 = DomainParams::with_special_k(1, 2).unwrap();
        let c2 = BergmanCoeffs::new(1, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = equivalence_ratios(&p2, &c2, 0.0, 0.0).unwrap();
        assert_relative_eq!(t.phi, p2.k() * 3.0 + 1.0, max_relative = 1e-14);
        let t = equivalence_ratios(&p2, &c2, 1.0 - 1e-6, 0.7).unwrap();
        for v in [t.phi, t.psi, t.upsilon] {
            assert!((v / 5.0 - 1.0).abs() < 1e-3, "{t:?}");
        }
    }

    #[test]
    fn ball_scan_is_flat() {
        let params = DomainParams::new(1, 1, 1.0).unwrap();
        let b = equivalence_bounds_scan(&params, &ball_coeffs(1), 40).unwrap();
        assert!((b.a - 3.0).abs() < 1e-10 && (b.b - 3.0).abs() < 1e-10);
        assert!(equivalence_bounds_scan(&params, &ball_coeffs(1), 1).is_err());
    }

    #[test]
    fn mismatched_coefficients_rejected() {
        let params = DomainParams::with_special_k(1, 2).unwrap();
        assert!(matches!(
            equivalence_ratios(&params, &ball_coeffs(1), 0.5, 0.0),
            Err(Error::InvalidCoefficients(_))
        ));
    }
}
