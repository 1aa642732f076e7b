//! Linear maps between operator spaces.
//!
//! A [`QMap`] is stored as a transfer matrix acting on column-stacked
//! operators: `vec(X)[i + j*d] = X[i][j]`. Under this convention the map
//! `X -> A X B^dag` has transfer `conj(B) ⊗ A`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{
    self, c, eig_hermitian_unchecked, hermitian_deviation, identity, kron, matrix_unit, max_abs,
    zeros, ComplexMatrix, ONE,
};
use crate::tol;

/// Column-stacking vectorization.
pub fn vec_op(x: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_op`].
pub fn unvec(v: &DVector<Complex64>, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(rows, cols, v.as_slice())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QMap {
    d_in: usize,
    d_out_dims: Vec<usize>,
    transfer: ComplexMatrix,
}

/// How [`qmap_from_action`] treats inputs that do not span the full domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Inputs must span all of L(H_in).
    Full,
    /// Act as given on the span of the inputs and as zero on its
    /// Hilbert-Schmidt orthocomplement.
    Span,
}

impl QMap {
    pub fn from_transfer(d_in: usize, d_out_dims: Vec<usize>, transfer: ComplexMatrix) -> Result<Self> {
        let d_out: usize = d_out_dims.iter().product();
        if d_out_dims.is_empty() || transfer.shape() != (d_out * d_out, d_in * d_in) {
            return Err(Error::ShapeMismatch(format!(
                "transfer {:?} for d_in {} and output dims {:?}",
                transfer.shape(),
                d_in,
                d_out_dims
            )));
        }
        Ok(QMap {
            d_in,
            d_out_dims,
            transfer,
        })
    }

    /// Build from the action on matrix units.
    pub fn from_fn(d_in: usize, d_out_dims: Vec<usize>, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let d_out: usize = d_out_dims.iter().product();
        let mut transfer = zeros(d_out * d_out, d_in * d_in);
        for j in 0..d_in {
            for i in 0..d_in {
                let out = f(&matrix_unit(d_in, i, j));
                assert_eq!(out.shape(), (d_out, d_out), "map output has wrong shape");
                transfer.set_column(i + j * d_in, &vec_op(&out));
            }
        }
        QMap {
            d_in,
            d_out_dims,
            transfer,
        }
    }

    pub fn identity(d: usize) -> Self {
        QMap {
            d_in: d,
            d_out_dims: vec![d],
            transfer: identity(d * d),
        }
    }

    pub fn transpose(d: usize) -> Self {
        Self::from_fn(d, vec![d], |x| x.transpose())
    }

    /// `X -> A X B^dag`.
    pub fn sandwich(a: &ComplexMatrix, b: &ComplexMatrix, d_out_dims: Vec<usize>) -> Result<Self> {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        Self::from_transfer(a.ncols(), d_out_dims, kron(&b.conjugate(), a))
    }

    /// `X -> U X U^dag`, with `dims` the factor structure of U's space.
    pub fn unitary_conjugation(u: &ComplexMatrix, dims: Vec<usize>) -> Result<Self> {
        operator::ensure_unitary(u)?;
        Self::sandwich(u, u, dims)
    }

    /// Partial trace keeping the listed factors, as a map.
    pub fn partial_trace(dims: &[usize], keep: &[usize]) -> Result<Self> {
        let d_in: usize = dims.iter().product();
        // validate once up front so the closure can unwrap
        operator::partial_trace(&identity(d_in), dims, keep)?;
        Ok(Self::from_fn(d_in, operator::kept_dims(dims, keep), |x| {
            operator::partial_trace(x, dims, keep).expect("dims validated")
        }))
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out_dims(&self) -> &[usize] {
        &self.d_out_dims
    }

    pub fn d_out(&self) -> usize {
        self.d_out_dims.iter().product()
    }

    pub fn transfer(&self) -> &ComplexMatrix {
        &self.transfer
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.d_in, self.d_in) {
            return Err(Error::DimMismatch(format!(
                "map expects {}x{} input, got {:?}",
                self.d_in,
                self.d_in,
                x.shape()
            )));
        }
        let d = self.d_out();
        Ok(unvec(&(&self.transfer * vec_op(x)), d, d))
    }

    /// `self + (X -> Tr(X) y)`.
    pub fn plus_trace_offset(&self, y: &ComplexMatrix) -> Result<Self> {
        let d = self.d_out();
        if y.shape() != (d, d) {
            return Err(Error::DimMismatch(format!("offset {:?} vs output {d}", y.shape())));
        }
        let vec_id = vec_op(&identity(self.d_in));
        let offset = vec_op(y) * vec_id.adjoint();
        Ok(QMap {
            d_in: self.d_in,
            d_out_dims: self.d_out_dims.clone(),
            transfer: &self.transfer + offset,
        })
    }
}

/// Fit the transfer matrix of a map from `(input, output)` pairs.
///
/// With [`Domain::Full`] the inputs must span L(H_in). With [`Domain::Span`]
/// the map acts as zero on the orthocomplement of the inputs' span. Either
/// way the pairs must be mutually consistent within `tol::RECON`.
pub fn qmap_from_action(
    pairs: &[(ComplexMatrix, ComplexMatrix)],
    d_in: usize,
    d_out_dims: Vec<usize>,
    domain: Domain,
) -> Result<QMap> {
    let d_out: usize = d_out_dims.iter().product();
    let n = pairs.len();
    if n == 0 {
        return Err(Error::RankDeficient("no input/output pairs".into()));
    }
    let mut xs = zeros(d_in * d_in, n);
    let mut ys = zeros(d_out * d_out, n);
    for (k, (x, y)) in pairs.iter().enumerate() {
        if x.shape() != (d_in, d_in) || y.shape() != (d_out, d_out) {
            return Err(Error::DimMismatch(format!(
                "pair {k}: input {:?}, output {:?}",
                x.shape(),
                y.shape()
            )));
        }
        xs.set_column(k, &vec_op(x));
        ys.set_column(k, &vec_op(y));
    }
    let rank = numerical_rank(&xs);
    if domain == Domain::Full && rank < d_in * d_in {
        return Err(Error::RankDeficient(format!(
            "inputs span dimension {rank}, need {}",
            d_in * d_in
        )));
    }
    let pinv = pseudo_inverse(&xs);
    let transfer = &ys * pinv;
    let residual = max_abs(&(&transfer * &xs - &ys));
    if residual > tol::RECON {
        return Err(Error::InconsistentAction(residual));
    }
    QMap::from_transfer(d_in, d_out_dims, transfer)
}

/// Number of Gram eigenvalues of the columns above `tol::RANK`.
pub(crate) fn numerical_rank(columns: &ComplexMatrix) -> usize {
    let gram = columns.adjoint() * columns;
    eig_hermitian_unchecked(&gram)
        .values
        .iter()
        .filter(|&&v| v > tol::RANK)
        .count()
}

/// Moore-Penrose pseudoinverse, discarding directions whose Gram eigenvalue
/// is at or below `tol::RANK`.
pub(crate) fn pseudo_inverse(m: &ComplexMatrix) -> ComplexMatrix {
    let gram = m.adjoint() * m;
    let eig = eig_hermitian_unchecked(&gram);
    let mut inv = zeros(gram.nrows(), gram.ncols());
    for (k, &v) in eig.values.iter().enumerate() {
        if v > tol::RANK {
            let col = eig.vectors.column(k);
            inv += (col * col.adjoint()) * c(1.0 / v, 0.0);
        }
    }
    inv * m.adjoint()
}

/// Choi matrix `Σ_ij E_ij ⊗ map(E_ij)`, input factor first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    pub mat: ComplexMatrix,
    pub d_in: usize,
    pub d_out_dims: Vec<usize>,
}

impl ChoiMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        operator::min_eigenvalue(&self.mat)
    }

    /// Recover the map this Choi matrix represents.
    pub fn to_qmap(&self) -> QMap {
        let d_in = self.d_in;
        let d_out: usize = self.d_out_dims.iter().product();
        let mut transfer = zeros(d_out * d_out, d_in * d_in);
        for i in 0..d_in {
            for j in 0..d_in {
                for a in 0..d_out {
                    for b in 0..d_out {
                        transfer[(a + b * d_out, i + j * d_in)] = self.mat[(i * d_out + a, j * d_out + b)];
                    }
                }
            }
        }
        QMap {
            d_in,
            d_out_dims: self.d_out_dims.clone(),
            transfer,
        }
    }
}

pub fn choi_of(map: &QMap) -> ChoiMatrix {
    let d_in = map.d_in;
    let d_out = map.d_out();
    let mut mat = zeros(d_in * d_out, d_in * d_out);
    for i in 0..d_in {
        for j in 0..d_in {
            for a in 0..d_out {
                for b in 0..d_out {
                    mat[(i * d_out + a, j * d_out + b)] = map.transfer[(a + b * d_out, i + j * d_in)];
                }
            }
        }
    }
    ChoiMatrix {
        mat,
        d_in,
        d_out_dims: map.d_out_dims.clone(),
    }
}

pub fn is_hermitian_preserving(map: &QMap) -> bool {
    hermitian_deviation(&choi_of(map).mat) <= tol::HERM
}

fn hermitian_choi(map: &QMap) -> Result<ChoiMatrix> {
    let choi = choi_of(map);
    let dev = hermitian_deviation(&choi.mat);
    if dev > tol::HERM {
        return Err(Error::NotHermitianPreserving(dev));
    }
    Ok(choi)
}

/// CP verdict and the smallest Choi eigenvalue as witness.
pub fn is_cp(map: &QMap) -> Result<(bool, f64)> {
    is_cp_with(map, tol::PSD)
}

pub fn is_cp_with(map: &QMap, psd_tol: f64) -> Result<(bool, f64)> {
    let min = hermitian_choi(map)?.min_eigenvalue();
    Ok((min >= -psd_tol, min))
}

/// `Tr(map(E_ij)) == δ_ij` for every matrix unit.
pub fn is_trace_preserving(map: &QMap) -> bool {
    trace_preservation_error(map) <= tol::TP
}

pub fn trace_preservation_error(map: &QMap) -> f64 {
    let d_in = map.d_in;
    let d_out = map.d_out();
    let mut worst = 0.0_f64;
    for i in 0..d_in {
        for j in 0..d_in {
            let col = i + j * d_in;
            let tr: Complex64 = (0..d_out).map(|a| map.transfer[(a + a * d_out, col)]).sum();
            let want = if i == j { ONE } else { c(0.0, 0.0) };
            worst = worst.max((tr - want).norm());
        }
    }
    worst
}

/// Signed operator-sum form `X -> Σ_k e_k K_k X K_k^dag` with `e_k = ±1`.
#[derive(Debug, Clone)]
pub struct OperatorSum {
    pub coeffs: Vec<f64>,
    pub kraus: Vec<ComplexMatrix>,
}

impl OperatorSum {
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let (rows, cols) = self
            .kraus
            .first()
            .map(|k| (k.nrows(), k.nrows()))
            .unwrap_or((0, 0));
        self.coeffs
            .iter()
            .zip(&self.kraus)
            .fold(zeros(rows, cols), |acc, (e, k)| acc + (k * x * k.adjoint()) * c(*e, 0.0))
    }

    /// `Σ_k e_k K_k^dag K_k`.
    pub fn completeness(&self) -> ComplexMatrix {
        let d = self.kraus.first().map_or(0, |k| k.ncols());
        self.coeffs
            .iter()
            .zip(&self.kraus)
            .fold(zeros(d, d), |acc, (e, k)| acc + (k.adjoint() * k) * c(*e, 0.0))
    }

    /// Max entry deviation from the source map over all matrix units.
    pub fn reconstruction_residual(&self, map: &QMap) -> f64 {
        let d = map.d_in();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let e = matrix_unit(d, i, j);
                let want = map.apply(&e).expect("matrix unit has map's input shape");
                worst = worst.max(max_abs(&(self.apply(&e) - want)));
            }
        }
        worst
    }

    pub fn is_cp_form(&self) -> bool {
        self.coeffs.iter().all(|&e| e > 0.0)
    }
}

/// Operator-sum representation from the Choi eigendecomposition.
///
/// Each Choi eigenpair `(λ, v)` with `|λ| > tol::RANK` contributes
/// `e = sign(λ)` and `K = sqrt(|λ|) unvec(v)`, where `K[a][i] = v[i*d_out + a]`.
/// Terms come out in descending eigenvalue order.
pub fn operator_sum(map: &QMap) -> Result<OperatorSum> {
    let choi = hermitian_choi(map)?;
    let d_in = map.d_in;
    let d_out = map.d_out();
    let eig = eig_hermitian_unchecked(&choi.mat);
    let mut coeffs = Vec::new();
    let mut kraus = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda.abs() <= tol::RANK {
            continue;
        }
        let v = eig.vectors.column(k);
        let scale = lambda.abs().sqrt();
        let op = ComplexMatrix::from_fn(d_out, d_in, |a, i| v[i * d_out + a] * scale);
        coeffs.push(lambda.signum());
        kraus.push(op);
    }
    Ok(OperatorSum { coeffs, kraus })
}

/// `f ∘ g`.
pub fn compose(f: &QMap, g: &QMap) -> Result<QMap> {
    if g.d_out() != f.d_in {
        return Err(Error::DimMismatch(format!(
            "inner map outputs dims {:?}, outer map takes dimension {}",
            g.d_out_dims, f.d_in
        )));
    }
    Ok(QMap {
        d_in: g.d_in,
        d_out_dims: f.d_out_dims.clone(),
        transfer: &f.transfer * &g.transfer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{sigma_x, sigma_y, sigma_z, swap, BlochVector, I};
    use crate::random;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= eps
    }

    fn units(d: usize) -> Vec<ComplexMatrix> {
        (0..d)
            .flat_map(|i| (0..d).map(move |j| matrix_unit(d, i, j)))
            .collect()
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let mut rng = random::seeded(11);
        let a = random::ginibre(&mut rng, 3, 3);
        let b = random::ginibre(&mut rng, 3, 3);
        let x = random::ginibre(&mut rng, 3, 3);
        let map = QMap::sandwich(&a, &b, vec![3]).unwrap();
        assert!(close(&map.apply(&x).unwrap(), &(&a * &x * b.adjoint()), 1e-12));
    }

    #[test]
    fn from_action_identity_and_transpose() {
        let pairs: Vec<_> = units(2).into_iter().map(|e| (e.clone(), e)).collect();
        let id = qmap_from_action(&pairs, 2, vec![2], Domain::Full).unwrap();
        assert!(close(id.transfer(), &identity(4), 1e-14));

        let pairs: Vec<_> = units(2).into_iter().map(|e| (e.clone(), e.transpose())).collect();
        let t = qmap_from_action(&pairs, 2, vec![2], Domain::Full).unwrap();
        assert!(close(t.transfer(), QMap::transpose(2).transfer(), 1e-14));
    }

    #[test]
    fn from_action_rejects_non_spanning_inputs_on_full_domain() {
        let pairs = vec![(identity(2), identity(2))];
        assert!(matches!(
            qmap_from_action(&pairs, 2, vec![2], Domain::Full),
            Err(Error::RankDeficient(_))
        ));
        let span = qmap_from_action(&pairs, 2, vec![2], Domain::Span).unwrap();
        assert!(close(&span.apply(&identity(2)).unwrap(), &identity(2), 1e-14));
        // zero on the orthocomplement of span{I}
        assert!(max_abs(&span.apply(&sigma_z()).unwrap()) < 1e-14);
    }

    #[test]
    fn from_action_rejects_contradictory_pairs() {
        let pairs = vec![(identity(2), identity(2)), (identity(2), sigma_z())];
        assert!(matches!(
            qmap_from_action(&pairs, 2, vec![2], Domain::Span),
            Err(Error::InconsistentAction(_))
        ));
    }

    #[test]
    fn choi_examples() {
        // identity -> 2|Φ+><Φ+| = Σ E_ij ⊗ E_ij
        let choi = choi_of(&QMap::identity(2));
        let mut want = zeros(4, 4);
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            want[(i, j)] = ONE;
        }
        assert!(close(&choi.mat, &want, 1e-15));
        let eig = operator::eig_hermitian(&choi.mat).unwrap();
        assert!((eig.values[0] - 2.0).abs() < 1e-12 && eig.values[1].abs() < 1e-12);

        let choi = choi_of(&QMap::transpose(2));
        assert!(close(&choi.mat, &swap(2), 1e-15));

        let pechukas = QMap::from_fn(2, vec![2, 2], |x| kron(x, &(identity(2) * c(0.5, 0.0))));
        assert!(choi_of(&pechukas).min_eigenvalue() >= -tol::PSD);
    }

    #[test]
    fn choi_round_trip() {
        let mut rng = random::seeded(5);
        let t = random::ginibre(&mut rng, 9, 4);
        let map = QMap::from_transfer(2, vec![3], t).unwrap();
        assert_eq!(choi_of(&map).to_qmap(), map);
    }

    #[test]
    fn hermitian_preservation() {
        assert!(is_hermitian_preserving(&QMap::identity(2)));
        let times_i = QMap::from_fn(2, vec![2], |x| x * I);
        assert!(!is_hermitian_preserving(&times_i));
        assert!(matches!(is_cp(&times_i), Err(Error::NotHermitianPreserving(_))));
        assert!(matches!(operator_sum(&times_i), Err(Error::NotHermitianPreserving(_))));
    }

    #[test]
    fn cp_examples() {
        let (cp, min) = is_cp(&QMap::transpose(2)).unwrap();
        assert!(!cp);
        assert!((min + 1.0).abs() < 1e-12);
        let (cp, min) = is_cp(&QMap::identity(3)).unwrap();
        assert!(cp && min.abs() < 1e-12);
    }

    #[test]
    fn trace_preservation() {
        assert!(is_trace_preserving(&QMap::identity(2)));
        assert!(!is_trace_preserving(&QMap::from_fn(2, vec![2], |x| x * c(2.0, 0.0))));
        assert!(is_trace_preserving(&QMap::transpose(3)));
        assert!(is_trace_preserving(&QMap::partial_trace(&[2, 3], &[0]).unwrap()));
    }

    #[test]
    fn operator_sum_examples() {
        let os = operator_sum(&QMap::identity(2)).unwrap();
        assert_eq!(os.coeffs, vec![1.0]);
        let k = &os.kraus[0];
        // K = phase * I
        let phase = k[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(close(k, &(identity(2) * phase), 1e-12));

        let os = operator_sum(&QMap::transpose(2)).unwrap();
        assert_eq!(os.coeffs, vec![1.0, 1.0, 1.0, -1.0]);
        assert!(os.reconstruction_residual(&QMap::transpose(2)) < 1e-12);
        assert!(close(&os.completeness(), &identity(2), 1e-12));
    }

    #[test]
    fn compose_examples() {
        let mut rng = random::seeded(2);
        let g = QMap::from_transfer(2, vec![3], random::ginibre(&mut rng, 9, 4)).unwrap();
        assert_eq!(compose(&QMap::identity(3), &g).unwrap(), g);
        assert!(matches!(compose(&QMap::identity(2), &g), Err(Error::DimMismatch(_))));

        // Tr_E ∘ Ad_SWAP ∘ (x -> x ⊗ I/2) = x -> Tr(x) I/2
        let pechukas = QMap::from_fn(2, vec![2, 2], |x| kron(x, &(identity(2) * c(0.5, 0.0))));
        let ad = QMap::unitary_conjugation(&swap(2), vec![2, 2]).unwrap();
        let tr_e = QMap::partial_trace(&[2, 2], &[0]).unwrap();
        let es = compose(&tr_e, &compose(&ad, &pechukas).unwrap()).unwrap();
        let x = BlochVector([0.3, -0.2, 0.5]).operator() * c(1.7, 0.0);
        let want = identity(2) * (x.trace() * c(0.5, 0.0));
        assert!(close(&es.apply(&x).unwrap(), &want, 1e-14));
    }

    #[test]
    fn composition_choi_matches_sequential_action() {
        let mut rng = random::seeded(9);
        let f = QMap::from_transfer(3, vec![2], random::ginibre(&mut rng, 4, 9)).unwrap();
        let g = QMap::from_transfer(2, vec![3], random::ginibre(&mut rng, 9, 4)).unwrap();
        let fg = compose(&f, &g).unwrap();
        let seq = QMap::from_fn(2, vec![2], |x| f.apply(&g.apply(x).unwrap()).unwrap());
        assert!(close(&choi_of(&fg).mat, &choi_of(&seq).mat, 1e-9));
    }

    #[test]
    fn unitary_conjugations_are_cptp() {
        let mut rng = random::seeded(17);
        for n in 0..50 {
            let d = 1 + n % 4;
            let u = random::haar_unitary(&mut rng, d);
            let map = QMap::unitary_conjugation(&u, vec![d]).unwrap();
            let (cp, _) = is_cp(&map).unwrap();
            assert!(cp && is_trace_preserving(&map));
        }
    }

    #[test]
    fn pauli_sandwich_signed_sum() {
        // X -> σx X σx - σy X σy is Hermitian-preserving but not CP
        let sx = QMap::sandwich(&sigma_x(), &sigma_x(), vec![2]).unwrap();
        let sy = QMap::sandwich(&sigma_y(), &sigma_y(), vec![2]).unwrap();
        let map = QMap::from_transfer(2, vec![2], sx.transfer() - sy.transfer()).unwrap();
        let os = operator_sum(&map).unwrap();
        assert_eq!(os.coeffs, vec![1.0, -1.0]);
        assert!(os.reconstruction_residual(&map) < 1e-12);
    }
}
