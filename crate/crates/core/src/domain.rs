//! The domain `Y_II(r, p; K)`, its invariant `X`, and interior sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, sym_basis, sym_dim, trace_of_product, CoordVector, SymMatrix};
use crate::{Error, Result, C64};

/// The parameter value `p/2 + 1/(p+1)` at which the closed-form potential
/// solves the Monge–Ampère equation.
pub fn special_k(p: usize) -> f64 {
    p as f64 / 2.0 + 1.0 / (p as f64 + 1.0)
}

/// `(r, p, K)` with the derived dimensions `m = p(p+1)/2` and `N = m + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainParams {
    r: usize,
    p: usize,
    k: f64,
}

impl DomainParams {
    pub fn new(r: usize, p: usize, k: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParams("r must be at least 1".into()));
        }
        if p == 0 {
            return Err(Error::InvalidParams("p must be at least 1".into()));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParams(format!("K must be positive and finite, got {k}")));
        }
        Ok(Self { r, p, k })
    }

    /// Parameters with `K = p/2 + 1/(p+1)`.
    pub fn with_special_k(r: usize, p: usize) -> Result<Self> {
        Self::new(r, p, special_k(p))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Number of matrix coordinates, `p(p+1)/2`.
    pub fn m(&self) -> usize {
        sym_dim(self.p)
    }

    /// Complex dimension `p(p+1)/2 + r`.
    pub fn n(&self) -> usize {
        self.m() + self.r
    }

    /// True when `K` equals `p/2 + 1/(p+1)` (exactly, or within 1e-15
    /// relative for values that were not produced by [`special_k`]).
    pub fn is_special(&self) -> bool {
        let s = special_k(self.p);
        self.k == s || (self.k - s).abs() <= 1e-15 * s
    }
}

/// A point `(Z, w)` with `Z` complex symmetric `p×p` and `w ∈ C^r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub z: SymMatrix,
    pub w: DVector<C64>,
}

impl Point {
    pub fn new(z: SymMatrix, w: DVector<C64>) -> Self {
        Self { z, w }
    }

    /// `(Z, w) = (0, 0)`.
    pub fn origin(params: &DomainParams) -> Self {
        Self { z: SymMatrix::zeros(params.p()), w: DVector::zeros(params.r()) }
    }

    /// Point on the slice `Z = 0`.
    pub fn on_origin_slice(params: &DomainParams, w: DVector<C64>) -> Self {
        Self { z: SymMatrix::zeros(params.p()), w }
    }

    /// Flat coordinates `(z11, …, zpp, w1, …, wr)` of length `N`.
    pub fn to_coords(&self) -> DVector<C64> {
        let z = self.z.to_coords();
        let mut out = Vec::with_capacity(z.values().len() + self.w.len());
        out.extend(z.values().iter().copied());
        out.extend(self.w.iter().copied());
        DVector::from_vec(out)
    }

    pub fn from_coords(params: &DomainParams, coords: &[C64]) -> Result<Self> {
        if coords.len() != params.n() {
            return Err(Error::InvalidShape(format!(
                "expected {} coordinates, got {}",
                params.n(),
                coords.len()
            )));
        }
        let m = params.m();
        let z = linalg::vec_to_mat(&CoordVector::from_slice(&coords[..m])?);
        Ok(Self { z, w: DVector::from_column_slice(&coords[m..]) })
    }

    fn check_shape(&self, params: &DomainParams) -> Result<()> {
        if self.z.order() != params.p() || self.w.len() != params.r() {
            return Err(Error::InvalidShape(format!(
                "point has p = {}, r = {}; parameters have p = {}, r = {}",
                self.z.order(),
                self.w.len(),
                params.p(),
                params.r()
            )));
        }
        Ok(())
    }
}

/// The auxiliary scalars `X = |w|² det(I − Z Z̄)^{−1/K}` and `Y = 1/(1 − X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxXY {
    pub x: f64,
    pub y: f64,
}

/// Gradient-style vector `E(Z)` with entries `tr[(I − Z Z̄)^{-1} I*_kl Z̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EVector(pub DVector<C64>);

/// `I − Z Z̄`, Hermitian because `Z` is symmetric.
pub fn defect_matrix(z: &SymMatrix) -> DMatrix<C64> {
    let p = z.order();
    let zz = z.matrix() * z.matrix().conjugate();
    linalg::hermitian_part(&(DMatrix::identity(p, p) - zz))
}

/// `ln det(I − Z Z̄)` when `I − Z Z̄` is positive definite, `None` otherwise.
pub fn ln_det_defect(z: &SymMatrix) -> Option<f64> {
    linalg::ln_det_hpd(&defect_matrix(z))
}

/// `det(I − Z Z̄)`, real and positive on `R_II(p)`.
pub fn det_defect(z: &SymMatrix) -> Result<f64> {
    ln_det_defect(z).map(f64::exp).ok_or(Error::OutsideDomain)
}

/// Membership in `R_II(p)`: `I − Z Z̄` positive definite.
pub fn in_matrix_ball(z: &SymMatrix) -> bool {
    ln_det_defect(z).is_some()
}

/// Membership test for `Y_II(r, p; K)`; the boundary is excluded.
pub fn contains(params: &DomainParams, z: &SymMatrix, w: &DVector<C64>) -> Result<bool> {
    if z.order() != params.p() || w.len() != params.r() {
        return Err(Error::InvalidShape(format!(
            "got p = {}, r = {}; parameters have p = {}, r = {}",
            z.order(),
            w.len(),
            params.p(),
            params.r()
        )));
    }
    let Some(ln_d) = ln_det_defect(z) else {
        return Ok(false);
    };
    let w2 = w.norm_squared();
    Ok(w2 == 0.0 || w2.ln() < ln_d / params.k())
}

pub fn contains_point(params: &DomainParams, point: &Point) -> Result<bool> {
    contains(params, &point.z, &point.w)
}

/// `X` and `Y` at an interior point.
pub fn aux_xy(params: &DomainParams, point: &Point) -> Result<AuxXY> {
    point.check_shape(params)?;
    let ln_d = ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    let w2 = point.w.norm_squared();
    let x = if w2 == 0.0 { 0.0 } else { (w2.ln() - ln_d / params.k()).exp() };
    if !(x < 1.0) {
        return Err(Error::OutsideDomain);
    }
    Ok(AuxXY { x, y: 1.0 / (1.0 - x) })
}

/// `E(Z)` in coordinate order.
pub fn e_vector(z: &SymMatrix) -> Result<EVector> {
    let inv = linalg::inverse(&defect_matrix(z))?;
    let zbar = z.matrix().conjugate();
    let right = &zbar * &inv;
    let values = sym_basis(z.order())
        .iter()
        .map(|e| trace_of_product(e.matrix(), &right))
        .collect::<Vec<_>>();
    Ok(EVector(DVector::from_vec(values)))
}

/// Caps applied by the interior sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerCaps {
    /// Upper bound on the largest singular value of `Z`.
    pub spectral: f64,
    /// Upper bound on `|w|` as a fraction of `det(I − Z Z̄)^{1/(2K)}`.
    pub ball: f64,
}

impl SamplerCaps {
    pub const STANDARD: Self = Self { spectral: 0.95, ball: 0.95 };
    pub const NEAR_BOUNDARY: Self = Self { spectral: 1.0 - 1e-6, ball: 1.0 - 1e-6 };
}

impl Default for SamplerCaps {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Seeded sampler of interior points.
#[derive(Debug, Clone)]
pub struct Sampler {
    params: DomainParams,
    caps: SamplerCaps,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(params: DomainParams, seed: u64) -> Self {
        Self::with_caps(params, seed, SamplerCaps::STANDARD)
    }

    pub fn with_caps(params: DomainParams, seed: u64, caps: SamplerCaps) -> Self {
        Self { params, caps, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Random symmetric matrix whose largest singular value is uniform in
    /// `(0, cap)`.
    pub fn symmetric(&mut self, cap: f64) -> SymMatrix {
        let p = self.params.p();
        let raw = random_symmetric(&mut self.rng, p);
        let sigma = spectral_norm(&raw);
        let target = cap * self.rng.random::<f64>();
        if sigma == 0.0 {
            return SymMatrix::zeros(p);
        }
        raw.scale(C64::new(target / sigma, 0.0))
    }

    pub fn point(&mut self) -> Point {
        let z = self.symmetric(self.caps.spectral);
        let ln_d = ln_det_defect(&z).expect("sampled Z lies inside R_II");
        let radius = (ln_d / (2.0 * self.params.k())).exp();
        let r = self.params.r();
        let dir = random_unit(&mut self.rng, r);
        let in_ball = self.rng.random::<f64>().powf(1.0 / (2.0 * r as f64));
        let scale = radius * in_ball * self.caps.ball * self.rng.random::<f64>();
        Point { z, w: dir.map(|c| c * scale) }
    }

    /// Random complex direction with unit norm in `C^N`.
    pub fn tangent_row(&mut self) -> DVector<C64> {
        random_unit(&mut self.rng, self.params.n())
    }
}

/// `count` seeded interior points with the standard caps.
pub fn sample_interior(params: &DomainParams, seed: u64, count: usize) -> Vec<Point> {
    sample_interior_with(params, seed, count, SamplerCaps::STANDARD)
}

pub fn sample_interior_with(
    params: &DomainParams,
    seed: u64,
    count: usize,
    caps: SamplerCaps,
) -> Vec<Point> {
    let mut s = Sampler::with_caps(*params, seed, caps);
    (0..count).map(|_| s.point()).collect()
}

pub fn random_symmetric<R: Rng>(rng: &mut R, p: usize) -> SymMatrix {
    let mut m = DMatrix::zeros(p, p);
    for k in 0..p {
        for l in k..p {
            let v = complex_normal(rng);
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
    }
    SymMatrix::symmetrize(m)
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(n, |_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v.unscale(norm);
        }
    }
}

pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Largest singular value of a symmetric matrix.
pub fn spectral_norm(z: &SymMatrix) -> f64 {
    let zzh = z.matrix() * z.matrix().adjoint();
    linalg::hermitian_eigenvalues(&linalg::hermitian_part(&zzh))
        .map(|ev| ev.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt())
        .unwrap_or(f64::NAN)
}
