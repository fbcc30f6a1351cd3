//! Holomorphic automorphisms of `Y_II` that move a point onto the slice
//! `Z = 0`, and their Jacobians.
//!
//! ```text
//! Z* = A (Z − Z0)(I − Z̄0 Z)^{-1} Ā^{-1}
//! w* = w · det(I − Z0 Z̄0)^{1/(2K)} · det(I − Z Z̄0)^{−1/K}
//! ```
//! with `Āᵗ A = (I − Z0 Z̄0)^{-1}`.
//!
//! Jacobians use the row layout `J[α][γ] = ∂F_γ/∂z_α`, so that a metric
//! matrix transforms as `T(z) = J T(F(z)) Jᴴ` and a tangent row `v` maps to
//! `v J`.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::FRAC_PI_4;

use crate::domain::{self, defect_matrix, e_vector, DomainParams, Point};
use crate::linalg::{self, sym_basis, sym_kron, trace_of_product, SymMatrix};
use crate::{Error, Result, C64};

/// The map of the automorphism group sending `(Z0, w)` to `(0, w*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Automorphism {
    z0: SymMatrix,
    a: DMatrix<C64>,
    a_bar_inv: DMatrix<C64>,
    ln_det0: f64,
    params: DomainParams,
}

/// The three nonzero blocks of the Jacobian and their `N×N` assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    /// `m×m`, entry `[α][γ] = ∂z*_γ/∂z_α`.
    pub dzstar_dz: DMatrix<C64>,
    /// `m×r`, entry `[α][j] = ∂w*_j/∂z_α`.
    pub dwstar_dz: DMatrix<C64>,
    /// `r×r`.
    pub dwstar_dw: DMatrix<C64>,
    /// `[[dzstar_dz, dwstar_dz], [0, dwstar_dw]]`.
    pub assembled: DMatrix<C64>,
}

impl JacobianBlocks {
    fn assemble(dzstar_dz: DMatrix<C64>, dwstar_dz: DMatrix<C64>, dwstar_dw: DMatrix<C64>) -> Self {
        let m = dzstar_dz.nrows();
        let r = dwstar_dw.nrows();
        let mut assembled = DMatrix::zeros(m + r, m + r);
        assembled.view_mut((0, 0), (m, m)).copy_from(&dzstar_dz);
        assembled.view_mut((0, m), (m, r)).copy_from(&dwstar_dz);
        assembled.view_mut((m, m), (r, r)).copy_from(&dwstar_dw);
        Self { dzstar_dz, dwstar_dz, dwstar_dw, assembled }
    }

    /// `|det J|²` from the assembled matrix (LU).
    pub fn det_abs_sq(&self) -> f64 {
        linalg::det(&self.assembled).norm_sqr()
    }

    /// `ln |det J|²` from the assembled matrix (LU).
    pub fn ln_det_abs_sq(&self) -> f64 {
        2.0 * linalg::ln_abs_det(&self.assembled)
    }
}

/// The automorphism with base point `Z0`; `A` is the principal Hermitian
/// square root of `(I − Z0 Z̄0)^{-1}`.
pub fn normalizing_map(params: &DomainParams, z0: &SymMatrix) -> Result<Automorphism> {
    if z0.order() != params.p() {
        return Err(Error::InvalidShape(format!(
            "Z0 is {0}x{0}, parameters have p = {1}",
            z0.order(),
            params.p()
        )));
    }
    let defect = defect_matrix(z0);
    let ln_det0 = linalg::ln_det_hpd(&defect).ok_or(Error::OutsideDomain)?;
    let a = linalg::hermitian_sqrt(&linalg::hermitian_part(&linalg::inverse(&defect)?))?;
    let a_bar_inv = linalg::inverse(&a.conjugate())?;
    Ok(Automorphism { z0: z0.clone(), a, a_bar_inv, ln_det0, params: *params })
}

impl Automorphism {
    pub fn base(&self) -> &SymMatrix {
        &self.z0
    }

    pub fn a(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn params(&self) -> &DomainParams {
        &self.params
    }

    fn resolvent(&self, z: &SymMatrix) -> Result<DMatrix<C64>> {
        let p = self.params.p();
        let m = DMatrix::identity(p, p) - self.z0.matrix().conjugate() * z.matrix();
        linalg::inverse(&m)
    }

    /// Image of a point. Membership is preserved.
    pub fn apply(&self, point: &Point) -> Result<Point> {
        if !domain::contains_point(&self.params, point)? {
            return Err(Error::OutsideDomain);
        }
        let res = self.resolvent(&point.z)?;
        let diff = point.z.matrix() - self.z0.matrix();
        let zstar = SymMatrix::symmetrize(&self.a * diff * res * &self.a_bar_inv);
        let factor = self.w_factor(&point.z)?;
        Ok(Point::new(zstar, point.w.map(|c| c * factor)))
    }

    /// `det(I − Z0 Z̄0)^{1/(2K)} det(I − Z Z̄0)^{−1/K}`.
    fn w_factor(&self, z: &SymMatrix) -> Result<C64> {
        let k = self.params.k();
        let ln_cross = ln_det_cross(&self.z0, z)?;
        Ok((C64::new(self.ln_det0 / (2.0 * k), 0.0) - ln_cross / k).exp())
    }

    /// Jacobian of the map at an arbitrary interior point.
    pub fn jacobian(&self, point: &Point) -> Result<JacobianBlocks> {
        let p = self.params.p();
        let k = self.params.k();
        let res = self.resolvent(&point.z)?;
        let z0bar = self.z0.matrix().conjugate();
        let diff = point.z.matrix() - self.z0.matrix();
        // dZ* = L dZ R with L = A(I + (Z − Z0)(I − Z̄0 Z)^{-1} Z̄0), R = (I − Z̄0 Z)^{-1} Ā^{-1}
        let left = &self.a * (DMatrix::identity(p, p) + diff * &res * &z0bar);
        let right = &res * &self.a_bar_inv;
        let dzstar_dz = linalg::sym_sandwich(&left, &right).transpose();

        let factor = self.w_factor(&point.z)?;
        let cross_inv = linalg::inverse(&(DMatrix::identity(p, p) - point.z.matrix() * &z0bar))?;
        let tail = &z0bar * &cross_inv;
        let grad: Vec<C64> = sym_basis(p)
            .iter()
            .map(|e| trace_of_product(e.matrix(), &tail) * factor / k)
            .collect();
        let grad = DVector::from_vec(grad);
        let dwstar_dz = &grad * point.w.transpose();
        let r = self.params.r();
        let dwstar_dw = DMatrix::identity(r, r).map(|c: C64| c * factor);
        Ok(JacobianBlocks::assemble(dzstar_dz, dwstar_dz, dwstar_dw))
    }
}

/// Continuous branch of `ln det(I − Z Z̄0)`, fixed by the real value at
/// `Z = Z0`. The principal logarithm is used while the determinant is in the
/// right half-plane and `p ≤ 3`; otherwise the phase is tracked along the
/// segment from `Z0` to `Z`, which stays inside `R_II(p)`.
pub fn ln_det_cross(z0: &SymMatrix, z: &SymMatrix) -> Result<C64> {
    let p = z0.order();
    let z0bar = z0.matrix().conjugate();
    let det_at = |m: &DMatrix<C64>| linalg::det(&(DMatrix::identity(p, p) - m * &z0bar));
    let d = det_at(z.matrix());
    if d.norm() == 0.0 || !d.is_finite() {
        return Err(Error::Singular);
    }
    if d.re > 0.0 && p <= 3 {
        return Ok(d.ln());
    }
    Ok(C64::new(d.norm().ln(), tracked_phase(z0.matrix(), z.matrix(), &det_at)?))
}

fn tracked_phase(
    z0: &DMatrix<C64>,
    z: &DMatrix<C64>,
    det_at: &dyn Fn(&DMatrix<C64>) -> C64,
) -> Result<f64> {
    let mut steps = 64usize;
    'refine: while steps <= 1 << 16 {
        let mut prev = det_at(z0);
        let mut phase = prev.arg();
        for i in 1..=steps {
            let s = i as f64 / steps as f64;
            let cur = det_at(&(z0 + (z - z0).scale(s)));
            let inc = (cur / prev).arg();
            if inc.abs() > FRAC_PI_4 {
                steps *= 4;
                continue 'refine;
            }
            phase += inc;
            prev = cur;
        }
        return Ok(phase);
    }
    Err(Error::Singular)
}

/// Jacobian of the normalizing map with base `Z0 = Z`, evaluated at `(Z, w)`:
///
/// ```text
/// ∂z*/∂z = sym_kron(Aᵗ),  ∂w*/∂z = (1/K) det(I − Z Z̄)^{−1/(2K)} E(Z)ᵗ w,
/// ∂w*/∂w = det(I − Z Z̄)^{−1/(2K)} I
/// ```
pub fn jacobian_at_base(params: &DomainParams, point: &Point) -> Result<JacobianBlocks> {
    if !domain::contains_point(params, point)? {
        return Err(Error::OutsideDomain);
    }
    let map = normalizing_map(params, &point.z)?;
    let k = params.k();
    let ln_d = domain::ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    let scale = (-ln_d / (2.0 * k)).exp();

    let dzstar_dz = sym_kron(&map.a.transpose())?;
    let e = e_vector(&point.z)?.0;
    let dwstar_dz = (&e * point.w.transpose()).map(|c| c * (scale / k));
    let r = params.r();
    let dwstar_dw = DMatrix::identity(r, r).map(|c: C64| c * scale);
    Ok(JacobianBlocks::assemble(dzstar_dz, dwstar_dz, dwstar_dw))
}

/// `|det J_{F0}|² = det(I − Z Z̄)^{−(p + 1 + r/K)}`.
pub fn jacobian_det_sq(params: &DomainParams, z: &SymMatrix) -> Result<f64> {
    Ok(ln_jacobian_det_sq(params, z)?.exp())
}

pub fn ln_jacobian_det_sq(params: &DomainParams, z: &SymMatrix) -> Result<f64> {
    if z.order() != params.p() {
        return Err(Error::InvalidShape(format!("Z is {0}x{0}, expected p = {1}", z.order(), params.p())));
    }
    let ln_d = domain::ln_det_defect(z).ok_or(Error::OutsideDomain)?;
    Ok(-(params.p() as f64 + 1.0 + params.r() as f64 / params.k()) * ln_d)
}

/// Image `w*` of `(Z, w)` under the normalizing map based at `Z`.
pub fn wstar_at_base(params: &DomainParams, point: &Point) -> Result<DVector<C64>> {
    let ln_d = domain::ln_det_defect(&point.z).ok_or(Error::OutsideDomain)?;
    let scale = (-ln_d / (2.0 * params.k())).exp();
    Ok(point.w.map(|c| c * scale))
}
