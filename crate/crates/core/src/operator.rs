//! Dense complex operator algebra.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Tensor factors are ordered as
//! listed in a `dims` slice (reference before system before environment), and
//! a composite basis index is the row-major flattening of its factor indices.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol;

pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Matrix unit `|i><j|` on a `d`-dimensional space.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(d, d);
    m[(i, j)] = ONE;
    m
}

/// Diagonal matrix from real entries.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let mut m = zeros(values.len(), values.len());
    for (k, v) in values.iter().enumerate() {
        m[(k, k)] = c(*v, 0.0);
    }
    m
}

/// Build a matrix from real row slices.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, k, |i, j| c(rows[i][j], 0.0))
}

pub fn sigma_x() -> ComplexMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn sigma_y() -> ComplexMatrix {
    let mut m = zeros(2, 2);
    m[(0, 1)] = -I;
    m[(1, 0)] = I;
    m
}

pub fn sigma_z() -> ComplexMatrix {
    diag(&[1.0, -1.0])
}

/// The three Pauli matrices in (x, y, z) order.
pub fn paulis() -> [ComplexMatrix; 3] {
    [sigma_x(), sigma_y(), sigma_z()]
}

/// SWAP on two `d`-dimensional factors.
pub fn swap(d: usize) -> ComplexMatrix {
    let mut m = zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = ONE;
        }
    }
    m
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.trace()
}

/// Hilbert-Schmidt inner product `Tr(a^dag b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Frobenius norm.
pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Max |M[i][j] - conj(M[j][i])|; infinite for non-square input.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix) -> bool {
    hermitian_deviation(m) <= tol::HERM
}

/// Max |U^dag U - I| entry; infinite for non-square input.
pub fn unitary_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(u.adjoint() * u - identity(u.nrows())))
}

pub fn ensure_unitary(u: &ComplexMatrix) -> Result<()> {
    let dev = unitary_deviation(u);
    if dev > tol::UNIT {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// `(M + M^dag) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

fn check_dims(m: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || !m.is_square() || total != m.nrows() {
        return Err(Error::MissingDims);
    }
    Ok(())
}

/// Trace out every factor not listed in `keep`.
///
/// `keep` holds factor indices into `dims`; the output factors stay in their
/// original order regardless of the order given in `keep`.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_dims(m, dims)?;
    let n = dims.len();
    if let Some(&bad) = keep.iter().find(|&&k| k >= n) {
        return Err(Error::DimMismatch(format!(
            "factor index {bad} out of range for {n} factors"
        )));
    }
    let kept: Vec<bool> = (0..n).map(|k| keep.contains(&k)).collect();
    let d_keep: usize = (0..n).filter(|&k| kept[k]).map(|k| dims[k]).product();
    let total = m.nrows();

    // flat index -> (kept part, traced part)
    let split: Vec<(usize, usize)> = (0..total)
        .map(|mut idx| {
            let mut digits = vec![0usize; n];
            for k in (0..n).rev() {
                digits[k] = idx % dims[k];
                idx /= dims[k];
            }
            let (mut a, mut b) = (0usize, 0usize);
            for k in 0..n {
                if kept[k] {
                    a = a * dims[k] + digits[k];
                } else {
                    b = b * dims[k] + digits[k];
                }
            }
            (a, b)
        })
        .collect();

    let mut out = zeros(d_keep, d_keep);
    for i in 0..total {
        let (ki, ti) = split[i];
        for j in 0..total {
            let (kj, tj) = split[j];
            if ti == tj {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Dimensions that survive a partial trace.
pub fn kept_dims(dims: &[usize], keep: &[usize]) -> Vec<usize> {
    (0..dims.len())
        .filter(|k| keep.contains(k))
        .map(|k| dims[k])
        .collect()
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `V diag(values) V^dag`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, v) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*v);
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let dev = hermitian_deviation(m);
    if dev > tol::HERM {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eig_hermitian_unchecked(m))
}

/// Eigendecomposition of the Hermitian part of `m`, no tolerance check.
pub(crate) fn eig_hermitian_unchecked(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    eig_hermitian_unchecked(m).min()
}

/// Trace norm of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &ComplexMatrix) -> f64 {
    eig_hermitian_unchecked(m).values.iter().map(|v| v.abs()).sum()
}

/// `f(M)` for Hermitian `M`, through its spectral decomposition.
pub fn hermitian_function(
    m: &ComplexMatrix,
    f: impl Fn(f64) -> Complex64,
) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(m)?;
    let mut scaled = eig.vectors.clone();
    for (k, v) in eig.values.iter().enumerate() {
        let fv = f(*v);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= fv);
    }
    Ok(scaled * eig.vectors.adjoint())
}

/// Shannon entropy (nats) of a spectrum, with 0 ln 0 = 0.
///
/// Negative eigenvalues down to `-tol::PSD` are clipped to zero; anything
/// more negative is a genuine non-positivity and is rejected.
pub fn spectrum_entropy(values: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &v in values {
        if v < -tol::PSD {
            return Err(Error::NotPsd(v));
        }
        if v > 0.0 {
            s -= v * v.ln();
        }
    }
    Ok(s)
}

/// Von Neumann entropy (nats) of a Hermitian PSD matrix.
pub fn entropy_of(m: &ComplexMatrix) -> Result<f64> {
    spectrum_entropy(&eig_hermitian(m)?.values)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    // validated on construction, so clipping never rejects
    spectrum_entropy(&eig_hermitian_unchecked(&rho.mat).values).unwrap_or(f64::NAN)
}

/// A validated density matrix together with its tensor-factor dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, positivity and the factor dims.
    pub fn new(mat: ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(&mat, &dims).map_err(|_| {
            Error::DimMismatch(format!(
                "dims {:?} do not match a {}x{} matrix",
                dims,
                mat.nrows(),
                mat.ncols()
            ))
        })?;
        let herm = hermitian_deviation(&mat);
        if herm > tol::HERM {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = trace(&mat);
        if (tr - ONE).norm() > tol::TRACE {
            return Err(Error::InvalidState(format!(
                "trace {:.12} + {:.3e}i differs from 1",
                tr.re, tr.im
            )));
        }
        let min = min_eigenvalue(&mat);
        if min < -tol::PSD {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(DensityMatrix { mat, dims })
    }

    /// Single-factor state.
    pub fn single(mat: ComplexMatrix) -> Result<Self> {
        let d = mat.nrows();
        Self::new(mat, vec![d])
    }

    /// Maximally mixed state on the given factors.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        DensityMatrix {
            mat: identity(d) / c(d as f64, 0.0),
            dims,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// `self ⊗ other`, with factor dims concatenated.
    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            mat: kron(&self.mat, &other.mat),
            dims,
        }
    }

    pub fn partial_trace(&self, keep: &[usize]) -> DensityMatrix {
        let mat = partial_trace(&self.mat, &self.dims, keep)
            .expect("density matrix dims validated on construction");
        DensityMatrix {
            mat,
            dims: kept_dims(&self.dims, keep),
        }
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(self)
    }
}

/// `U rho U^dag`.
pub fn conjugate_by_unitary(u: &ComplexMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if u.shape() != rho.mat.shape() {
        return Err(Error::DimMismatch(format!(
            "unitary {:?} vs state {:?}",
            u.shape(),
            rho.mat.shape()
        )));
    }
    ensure_unitary(u)?;
    let mat = hermitian_part(&(u * &rho.mat * u.adjoint()));
    Ok(DensityMatrix {
        mat,
        dims: rho.dims.clone(),
    })
}

/// Real Bloch vector of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `(I + alpha . sigma) / 2` as an operator, valid or not.
    pub fn operator(&self) -> ComplexMatrix {
        let [sx, sy, sz] = paulis();
        (identity(2) + sx * c(self.0[0], 0.0) + sy * c(self.0[1], 0.0) + sz * c(self.0[2], 0.0))
            * c(0.5, 0.0)
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::single(self.operator())
    }
}
