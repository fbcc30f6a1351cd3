//! Holomorphic sectional curvature of the Kähler–Einstein metric.
//!
//! With `T` the metric matrix and `v` a tangent row,
//!
//! ```text
//! ω(v) = v [−∂̄∂T + ∂T T^{-1} ∂̄T] vᴴ / (v T vᴴ)²
//! ```
//!
//! On the slice `Z = 0` this reduces to
//!
//! ```text
//! ω = −2 + (2Y|dz|⁴/K² − 2Y tr(dZ dZ̄ dZ dZ̄)/K) / (Y|dz|²/K + Y²|w̄ dwᵗ|² + Y|dw|²)²
//! ```
//!
//! and general points are handled by transporting the tangent through the
//! Jacobian of the normalizing automorphism, under which `ω` is invariant.

use nalgebra::{DMatrix, DVector};

use crate::autgroup::{jacobian_at_base, wstar_at_base};
use crate::domain::{DomainParams, Point};
use crate::kemetric::metric_origin;
use crate::linalg::{self, sym_basis, trace_of_product, vec_to_mat, CoordVector};
use crate::{Error, Result, C64};

const IMAG_TOL: f64 = 1e-10;

/// A tangent vector split into matrix coordinates `dz` and fibre part `dw`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub dz: DVector<C64>,
    pub dw: DVector<C64>,
}

impl Tangent {
    pub fn new(dz: DVector<C64>, dw: DVector<C64>) -> Self {
        Self { dz, dw }
    }

    /// Splits a row of length `N` as `(dz, dw)`.
    pub fn from_row(params: &DomainParams, row: &DVector<C64>) -> Result<Self> {
        if row.len() != params.n() {
            return Err(Error::InvalidShape(format!("tangent has length {}, expected {}", row.len(), params.n())));
        }
        let m = params.m();
        Ok(Self {
            dz: row.rows(0, m).into_owned(),
            dw: row.rows(m, params.r()).into_owned(),
        })
    }

    /// Concatenated row `(dz, dw)`.
    pub fn row(&self) -> DVector<C64> {
        let mut v = Vec::with_capacity(self.dz.len() + self.dw.len());
        v.extend(self.dz.iter().copied());
        v.extend(self.dw.iter().copied());
        DVector::from_vec(v)
    }

    pub fn is_zero(&self) -> bool {
        self.dz.iter().chain(self.dw.iter()).all(|c| c.norm() == 0.0)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { dz: self.dz.map(|x| x * c), dw: self.dw.map(|x| x * c) }
    }

    fn check(&self, params: &DomainParams) -> Result<()> {
        if self.dz.len() != params.m() || self.dw.len() != params.r() {
            return Err(Error::InvalidShape(format!(
                "tangent has ({}, {}) components, expected ({}, {})",
                self.dz.len(),
                self.dw.len(),
                params.m(),
                params.r()
            )));
        }
        if self.is_zero() {
            return Err(Error::DegenerateDirection);
        }
        Ok(())
    }
}

/// Blocks of `−∂̄∂T + ∂T T^{-1} ∂̄T` on the slice `Z = 0` for one tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBlocks {
    pub r11: DMatrix<C64>,
    pub r12: DMatrix<C64>,
    pub r21: DMatrix<C64>,
    pub r22: DMatrix<C64>,
}

impl CurvatureBlocks {
    pub fn assemble(&self) -> DMatrix<C64> {
        let m = self.r11.nrows();
        let r = self.r22.nrows();
        let mut out = DMatrix::zeros(m + r, m + r);
        out.view_mut((0, 0), (m, m)).copy_from(&self.r11);
        out.view_mut((0, m), (m, r)).copy_from(&self.r12);
        out.view_mut((m, 0), (r, m)).copy_from(&self.r21);
        out.view_mut((m, m), (r, r)).copy_from(&self.r22);
        out
    }

    /// `v R vᴴ` for the tangent row `v`.
    pub fn contract(&self, v: &DVector<C64>) -> C64 {
        let rv = self.assemble() * v.conjugate();
        v.iter().zip(rv.iter()).map(|(a, b)| a * b).sum()
    }
}

fn check_wstar(params: &DomainParams, wstar: &DVector<C64>) -> Result<(f64, f64)> {
    if wstar.len() != params.r() {
        return Err(Error::InvalidShape(format!("w* has length {}, expected {}", wstar.len(), params.r())));
    }
    let x = wstar.norm_squared();
    if !(x < 1.0) {
        return Err(Error::OutsideDomain);
    }
    Ok((x, 1.0 / (1.0 - x)))
}

/// `tr(dZ dZ̄ dZ dZ̄)`; real up to rounding.
fn quartic_trace(dz: &DVector<C64>) -> Result<f64> {
    let dmat = vec_to_mat(&CoordVector::new(dz.clone())?);
    let sq = dmat.matrix() * dmat.matrix().conjugate();
    let t = trace_of_product(&sq, &sq);
    if t.im.abs() > IMAG_TOL * t.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Conditioning(format!("tr(dZ dZ̄ dZ dZ̄) has imaginary part {:.3e}", t.im)));
    }
    Ok(t.re)
}

/// `ω` at `(0, w*)`.
pub fn hsc_origin(params: &DomainParams, wstar: &DVector<C64>, tangent: &Tangent) -> Result<f64> {
    let (_, y) = check_wstar(params, wstar)?;
    tangent.check(params)?;
    let k = params.k();
    let dz2 = tangent.dz.norm_squared();
    let dw2 = tangent.dw.norm_squared();
    let pair = wstar.conjugate().dot(&tangent.dw).norm_sqr();
    let t4 = quartic_trace(&tangent.dz)?;
    let denom = y * dz2 / k + y * y * pair + y * dw2;
    Ok(-2.0 + (2.0 * y * dz2 * dz2 / (k * k) - 2.0 * y * t4 / k) / (denom * denom))
}

/// `ω` at an arbitrary interior point, via the normalizing automorphism.
pub fn hsc(params: &DomainParams, point: &Point, tangent: &Tangent) -> Result<f64> {
    tangent.check(params)?;
    let (wstar, moved) = transport(params, point, tangent)?;
    hsc_origin(params, &wstar, &moved)
}

/// Image `(w*, v J_{F0})` of a point and tangent on the slice `Z = 0`.
pub fn transport(params: &DomainParams, point: &Point, tangent: &Tangent) -> Result<(DVector<C64>, Tangent)> {
    let jac = jacobian_at_base(params, point)?;
    let row = jac.assembled.transpose() * tangent.row();
    Ok((wstar_at_base(params, point)?, Tangent::from_row(params, &row)?))
}

/// Curvature blocks on the slice `Z = 0` in the direction `tangent`.
pub fn curvature_blocks(params: &DomainParams, wstar: &DVector<C64>, tangent: &Tangent) -> Result<CurvatureBlocks> {
    let (x, y) = check_wstar(params, wstar)?;
    tangent.check(params)?;
    let k = params.k();
    let (m, r) = (params.m(), params.r());
    let (dz, dw, w) = (&tangent.dz, &tangent.dw, wstar);
    let dz2 = dz.norm_squared();
    let dw2 = dw.norm_squared();
    // σ = w̄ dwᵗ
    let sigma = w.conjugate().dot(dw);
    let pair = sigma.norm_sqr();
    let id_m = DMatrix::<C64>::identity(m, m);
    let id_r = DMatrix::<C64>::identity(r, r);
    let re = |v: f64| C64::new(v, 0.0);

    let mixed = curvature_mixed_term(dz)?;
    let r11 = (id_m.map(|c| c * (y * y * pair + y * dw2 + x * y * dz2 / k))
        + (dz.conjugate() * dz.transpose()).map(|c| c * (x * y / k))
        + mixed)
        .map(|c| c * re(-y / k));

    let r12 = (dz.conjugate() * w.transpose()).map(|c| c * (sigma * y))
        + dz.conjugate() * dw.transpose();
    let r12 = r12.map(|c| c * re(-y * y / k));
    let r21 = r12.adjoint();

    let wbar_w = w.conjugate() * w.transpose();
    let r22 = wbar_w.map(|c| c * (y * dz2 / k + y * dw2 + 2.0 * y * y * pair))
        + id_r.map(|c| c * (dz2 / k + dw2 + y * pair))
        + dw.conjugate() * dw.transpose()
        + (w.conjugate() * dw.transpose()).map(|c| c * (sigma.conj() * y))
        + (dw.conjugate() * w.transpose()).map(|c| c * (sigma * y));
    let r22 = r22.map(|c| c * re(-y * y));
    Ok(CurvatureBlocks { r11, r12, r21, r22 })
}

/// Mixed second variation of `[Aᵗ Ā ·× Aᵗ Ā]_s` at `Z = 0` in direction `dZ`:
/// the matrix of `S ↦ E S + S Eᵗ` with `E = dZ̄ dZ`. Its contraction with
/// `dz` is `2 tr(dZ dZ̄ dZ dZ̄)`.
fn curvature_mixed_term(dz: &DVector<C64>) -> Result<DMatrix<C64>> {
    let dmat = vec_to_mat(&CoordVector::new(dz.clone())?);
    let p = dmat.order();
    let e = dmat.matrix().conjugate() * dmat.matrix();
    let et = e.transpose();
    let basis = sym_basis(p);
    let m = basis.len();
    let mut out = DMatrix::zeros(m, m);
    for (a, ea) in basis.iter().enumerate() {
        for (b, eb) in basis.iter().enumerate() {
            out[(a, b)] = trace_of_product(ea.matrix(), &(&e * eb.matrix()))
                + trace_of_product(ea.matrix(), &(eb.matrix() * &et));
        }
    }
    Ok(out)
}

/// `ω` on the slice `Z = 0` from the assembled blocks: `Re(v R vᴴ)/(v T vᴴ)²`.
pub fn hsc_origin_from_blocks(params: &DomainParams, wstar: &DVector<C64>, tangent: &Tangent) -> Result<f64> {
    let blocks = curvature_blocks(params, wstar, tangent)?;
    let v = tangent.row();
    let num = blocks.contract(&v);
    if num.im.abs() > IMAG_TOL * num.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Conditioning(format!("curvature numerator has imaginary part {:.3e}", num.im)));
    }
    let den = metric_origin(params, wstar)?.quadratic_form(&v);
    Ok(num.re / (den * den))
}

/// `(−2K, −2K/p)`.
pub fn curvature_bounds(params: &DomainParams) -> (f64, f64) {
    let k = params.k();
    (-2.0 * k, -2.0 * k / params.p() as f64)
}

/// Directions attaining the bounds at `Z = 0`: `dZ = I*_11` (rank one, lower
/// bound) and `dZ = I` (equal singular values, upper bound), both with `dw = 0`.
pub fn sharp_directions(params: &DomainParams) -> (Tangent, Tangent) {
    let p = params.p();
    let m = params.m();
    let mut rank_one = DVector::zeros(m);
    rank_one[0] = C64::new(1.0, 0.0);
    let scalar = linalg::SymMatrix::identity(p).to_coords().into_values();
    let dw = DVector::zeros(params.r());
    (Tangent::new(rank_one, dw.clone()), Tangent::new(scalar, dw))
}

/// `(tr(Z Z̄ Z Z̄), tr(Z Z̄)², p·tr(Z Z̄ Z Z̄))`, which satisfy `t1 ≤ t2 ≤ t3`.
pub fn trace_chain_terms(z: &linalg::SymMatrix) -> (f64, f64, f64) {
    let sq = z.matrix() * z.matrix().conjugate();
    let t1 = trace_of_product(&sq, &sq).re;
    let tr = sq.trace().re;
    (t1, tr * tr, z.order() as f64 * t1)
}
