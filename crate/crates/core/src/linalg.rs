//! Complex symmetric matrix toolkit.
//!
//! Symmetric `p×p` matrices are identified with vectors of length
//! `m = p(p+1)/2` through the √2-normalised coordinates
//! `(z11, z12, …, z1p, z22, …, zpp)`. The basis `I*_kl` of this identification
//! is trace-orthonormal, which is what makes `|z|² = tr(Z Z̄)` hold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::SQRT_2;

use crate::{Error, Result, C64};

const SYMMETRY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

/// Number of independent entries of a symmetric `p×p` matrix.
pub fn sym_dim(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Inverse of [`sym_dim`]; `None` when `m` is not triangular.
pub fn order_from_sym_dim(m: usize) -> Option<usize> {
    let mut p = 0;
    while sym_dim(p) < m {
        p += 1;
    }
    (p > 0 && sym_dim(p) == m).then_some(p)
}

/// Position of `(k, l)`, `k ≤ l`, in the row-major upper-triangular ordering.
pub fn coord_index(k: usize, l: usize, p: usize) -> usize {
    debug_assert!(k <= l && l < p);
    // rows 0..k contribute p, p-1, …, p-k+1 entries
    k * p - k * k.saturating_sub(1) / 2 + l - k
}

/// Iterator over `(k, l)` pairs in coordinate order.
pub fn coord_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |k| (k..p).map(move |l| (k, l)))
}

/// Complex symmetric matrix. Symmetry is exact: every constructor mirrors the
/// upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<C64>,
}

impl SymMatrix {
    pub fn zeros(p: usize) -> Self {
        Self { entries: DMatrix::zeros(p, p) }
    }

    pub fn identity(p: usize) -> Self {
        Self { entries: DMatrix::identity(p, p) }
    }

    /// Wraps a square matrix after checking `|M − Mᵗ| ≤ 1e-12·max(1, |M|)`.
    /// The stored matrix is the exact symmetric part.
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidShape(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let dev = max_abs(&(&m - m.transpose()));
        let scale = max_abs(&m).max(1.0);
        if dev > SYMMETRY_TOL * scale {
            return Err(Error::Asymmetric(dev));
        }
        Ok(Self::symmetrize(m))
    }

    /// Takes the symmetric part `(M + Mᵗ)/2` without any check.
    pub fn symmetrize(m: DMatrix<C64>) -> Self {
        let entries = (&m + m.transpose()).scale(0.5);
        Self { entries }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let p = diag.len();
        let mut entries = DMatrix::zeros(p, p);
        for (i, d) in diag.iter().enumerate() {
            entries[(i, i)] = C64::new(*d, 0.0);
        }
        Self { entries }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn conj(&self) -> Self {
        Self { entries: self.entries.conjugate() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { entries: self.entries.map(|x| x * c) }
    }

    /// √2-normalised coordinates.
    pub fn to_coords(&self) -> CoordVector {
        let p = self.order();
        let values = coord_pairs(p)
            .map(|(k, l)| {
                if k == l {
                    self.entries[(k, k)]
                } else {
                    self.entries[(k, l)] * SQRT_2
                }
            })
            .collect::<Vec<_>>();
        CoordVector { p, values: DVector::from_vec(values) }
    }
}

/// Coordinates of a symmetric matrix, ordered `(z11, z12, …, z1p, z22, …, zpp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordVector {
    p: usize,
    values: DVector<C64>,
}

impl CoordVector {
    pub fn new(values: DVector<C64>) -> Result<Self> {
        let p = order_from_sym_dim(values.len()).ok_or_else(|| {
            Error::InvalidShape(format!("length {} is not of the form p(p+1)/2", values.len()))
        })?;
        Ok(Self { p, values })
    }

    pub fn from_slice(values: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &DVector<C64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<C64> {
        self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Builds `Z` from its coordinates: diagonal `z_kk`, off-diagonal `z_kl/√2`.
pub fn vec_to_mat(z: &CoordVector) -> SymMatrix {
    let p = z.p;
    let mut entries = DMatrix::zeros(p, p);
    for (idx, (k, l)) in coord_pairs(p).enumerate() {
        let v = z.values[idx];
        if k == l {
            entries[(k, k)] = v;
        } else {
            entries[(k, l)] = v / SQRT_2;
            entries[(l, k)] = v / SQRT_2;
        }
    }
    SymMatrix { entries }
}

/// Inverse of [`vec_to_mat`] for a general square input; rejects matrices
/// that are not symmetric within 1e-12.
pub fn mat_to_vec(z: &DMatrix<C64>) -> Result<CoordVector> {
    Ok(SymMatrix::from_matrix(z.clone())?.to_coords())
}

/// Element `I*_kl` of the trace-orthonormal symmetric basis (0-based, `k ≤ l`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymBasisElement {
    pub k: usize,
    pub l: usize,
    pub matrix: SymMatrix,
}

/// `I*_kk = I_kk`, and `I*_kl = (I_kl + I_lk)/√2` for `k < l`.
pub fn basis_sym(k: usize, l: usize, p: usize) -> Result<SymBasisElement> {
    if k > l || l >= p {
        return Err(Error::Index { k, l, p });
    }
    let mut m = DMatrix::zeros(p, p);
    if k == l {
        m[(k, k)] = C64::new(1.0, 0.0);
    } else {
        let v = C64::new(1.0 / SQRT_2, 0.0);
        m[(k, l)] = v;
        m[(l, k)] = v;
    }
    Ok(SymBasisElement { k, l, matrix: SymMatrix { entries: m } })
}

/// All basis elements in coordinate order.
pub fn sym_basis(p: usize) -> Vec<SymMatrix> {
    coord_pairs(p)
        .map(|(k, l)| basis_sym(k, l, p).expect("pairs are in range").matrix)
        .collect()
}

/// Matrix of `Z ↦ B Z Bᵗ` acting on symmetric matrices, written in
/// coordinates: column `β` holds the coordinates of `B I*_β Bᵗ`.
///
/// This is a representation: `sym_kron(B1 B2) = sym_kron(B1) sym_kron(B2)`,
/// and `sym_kron(Bᵗ) = sym_kron(B)ᵗ` because the basis is real.
pub fn sym_kron(b: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if !b.is_square() {
        return Err(Error::InvalidShape(format!("{}x{} is not square", b.nrows(), b.ncols())));
    }
    let p = b.nrows();
    let m = sym_dim(p);
    let bt = b.transpose();
    let mut out = DMatrix::zeros(m, m);
    for (col, e) in sym_basis(p).iter().enumerate() {
        let image = SymMatrix::symmetrize(b * e.matrix() * &bt).to_coords();
        out.set_column(col, image.values());
    }
    Ok(out)
}

/// Linear map `X ↦ L X R` on symmetric matrices in coordinates. The image is
/// assumed symmetric; its symmetric part is used.
pub fn sym_sandwich(left: &DMatrix<C64>, right: &DMatrix<C64>) -> DMatrix<C64> {
    let p = left.nrows();
    let m = sym_dim(p);
    let mut out = DMatrix::zeros(m, m);
    for (col, e) in sym_basis(p).iter().enumerate() {
        let image = SymMatrix::symmetrize(left * e.matrix() * right).to_coords();
        out.set_column(col, image.values());
    }
    out
}

/// Principal Hermitian positive-definite square root.
pub fn hermitian_sqrt(h: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    check_hermitian(h)?;
    let herm = hermitian_part(h);
    let eig = SymmetricEigen::new(herm);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let u = &eig.eigenvectors;
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(l.sqrt(), 0.0)));
    Ok(hermitian_part(&(u * root * u.adjoint())))
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &DMatrix<C64>) -> Result<DVector<f64>> {
    check_hermitian(h)?;
    let mut ev = SymmetricEigen::new(hermitian_part(h)).eigenvalues;
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    Ok(ev)
}

fn check_hermitian(h: &DMatrix<C64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::InvalidShape(format!("{}x{} is not square", h.nrows(), h.ncols())));
    }
    let dev = max_abs(&(h - h.adjoint()));
    if dev > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// `(H + Hᴴ)/2`.
pub fn hermitian_part(h: &DMatrix<C64>) -> DMatrix<C64> {
    (h + h.adjoint()).scale(0.5)
}

/// Determinant by LU with partial pivoting.
pub fn det(a: &DMatrix<C64>) -> C64 {
    a.clone().lu().determinant()
}

/// Inverse by LU with partial pivoting.
pub fn inverse(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    a.clone().lu().try_inverse().ok_or(Error::Singular)
}

/// `ln det` of a Hermitian positive-definite matrix via Cholesky, or `None`
/// when the factorisation fails.
pub fn ln_det_hpd(a: &DMatrix<C64>) -> Option<f64> {
    // plain Cholesky: nalgebra's complex variant takes complex square roots
    // of the pivots and so does not reject indefinite input
    let h = hermitian_part(a);
    let n = h.nrows();
    let mut l = DMatrix::<C64>::zeros(n, n);
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        acc += d.ln();
        for i in j + 1..n {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    Some(acc)
}

/// `ln |det A|` for a general square matrix via LU.
pub fn ln_abs_det(a: &DMatrix<C64>) -> f64 {
    let lu = a.clone().lu();
    let u = lu.u();
    (0..a.nrows()).map(|i| u[(i, i)].norm().ln()).sum()
}

pub fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max|A − B| / max(|B|, floor)`: the entrywise error measured against the
/// largest entry of the reference.
pub fn rel_diff(a: &DMatrix<C64>, reference: &DMatrix<C64>) -> f64 {
    max_abs(&(a - reference)) / max_abs(reference).max(f64::MIN_POSITIVE)
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}
