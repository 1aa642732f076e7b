//! Assignment maps and the subspaces they act between.
//!
//! An assignment map sends each system state `ρ_S^(j)` of a paired basis to
//! its partner `ρ_SE^(j)` and extends linearly. Off the span of the
//! `ρ_S^(j)` the map acts as zero (see [`ExtensionPolicy`]), so a failing CP
//! check on that extension does not rule out some other CP assignment map:
//! use [`crate::reference::markov_test`] for that question.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::operator::{
    self, frobenius, hermitian_deviation, partial_trace, zeros, ComplexMatrix, DensityMatrix,
};
use crate::qmap::{self, numerical_rank, vec_op, Domain, QMap};
use crate::tol;

/// Linearly independent operators spanning a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSubspace {
    basis: Vec<ComplexMatrix>,
    dims: Vec<usize>,
}

impl OperatorSubspace {
    /// Fails with `RankDeficient` if the Hilbert-Schmidt Gram matrix has an
    /// eigenvalue at or below `tol::RANK`.
    pub fn new(basis: Vec<ComplexMatrix>, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if let Some(k) = basis.iter().position(|b| b.shape() != (d, d)) {
            return Err(Error::DimMismatch(format!(
                "basis element {k} has shape {:?}, dims {:?} need {d}x{d}",
                basis[k].shape(),
                dims
            )));
        }
        if !basis.is_empty() {
            let rank = numerical_rank(&stack(&basis));
            if rank < basis.len() {
                return Err(Error::RankDeficient(format!(
                    "{} operators span only dimension {rank}",
                    basis.len()
                )));
            }
        }
        Ok(OperatorSubspace { basis, dims })
    }

    /// Greedy selection of an independent subset, in declaration order.
    pub fn spanned_by(ops: &[ComplexMatrix], dims: Vec<usize>) -> Result<Self> {
        let mut chosen: Vec<ComplexMatrix> = Vec::new();
        for op in ops {
            let mut trial = chosen.clone();
            trial.push(op.clone());
            if numerical_rank(&stack(&trial)) == trial.len() {
                chosen = trial;
            }
        }
        Self::new(chosen, dims)
    }

    pub fn empty(dims: Vec<usize>) -> Self {
        OperatorSubspace {
            basis: Vec::new(),
            dims,
        }
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Hilbert-Schmidt Gram matrix `G[i][j] = Tr(B_i^dag B_j)`.
    pub fn gram(&self) -> ComplexMatrix {
        let s = stack(&self.basis);
        s.adjoint() * s
    }

    /// Whether `x` lies in the span, judged by the least-squares residual.
    pub fn contains(&self, x: &ComplexMatrix) -> bool {
        if self.basis.is_empty() {
            return frobenius(x) <= tol::RECON;
        }
        let s = stack(&self.basis);
        let v = vec_op(x);
        let coeffs = qmap::pseudo_inverse(&s) * &v;
        (s * coeffs - v).norm() <= tol::RECON * (1.0 + frobenius(x))
    }
}

/// Column matrix of vectorized operators.
fn stack(ops: &[ComplexMatrix]) -> ComplexMatrix {
    let rows = ops.first().map_or(0, |o| o.len());
    let mut m = zeros(rows, ops.len());
    for (k, op) in ops.iter().enumerate() {
        m.set_column(k, &vec_op(op));
    }
    m
}

/// System states paired with system-environment states of matching marginal.
#[derive(Debug, Clone)]
pub struct PairedBasis {
    sys: Vec<DensityMatrix>,
    joint: Vec<DensityMatrix>,
    d_s: usize,
    d_e: usize,
    label: String,
}

impl PairedBasis {
    /// Validates that every `Tr_E(joint[j])` equals `sys[j]` within
    /// `tol::MARGINAL` and that the system states are linearly independent.
    pub fn new(sys: Vec<DensityMatrix>, joint: Vec<DensityMatrix>) -> Result<Self> {
        let (d_s, d_e) = Self::check_shapes(&sys, &joint)?;
        for (index, (s, j)) in sys.iter().zip(&joint).enumerate() {
            let marginal = partial_trace(j.matrix(), j.dims(), &[0])?;
            let deviation = operator::max_abs(&(marginal - s.matrix()));
            if deviation > tol::MARGINAL {
                return Err(Error::InconsistentMarginals { index, deviation });
            }
        }
        let mats: Vec<_> = sys.iter().map(|s| s.matrix().clone()).collect();
        OperatorSubspace::new(mats, vec![d_s])?;
        let label = format!("paired-basis(m={}, d_S={d_s}, d_E={d_e})", sys.len());
        Ok(PairedBasis {
            sys,
            joint,
            d_s,
            d_e,
            label,
        })
    }

    /// Keep the first linearly independent system states (and their
    /// partners), in declaration order.
    pub fn select_independent(sys: Vec<DensityMatrix>, joint: Vec<DensityMatrix>) -> Result<Self> {
        Self::check_shapes(&sys, &joint)?;
        let mut kept_sys: Vec<DensityMatrix> = Vec::new();
        let mut kept_joint = Vec::new();
        for (s, j) in sys.into_iter().zip(joint) {
            let mut trial: Vec<_> = kept_sys.iter().map(|k| k.matrix().clone()).collect();
            trial.push(s.matrix().clone());
            if numerical_rank(&stack(&trial)) == trial.len() {
                kept_sys.push(s);
                kept_joint.push(j);
            }
        }
        Self::new(kept_sys, kept_joint)
    }

    fn check_shapes(sys: &[DensityMatrix], joint: &[DensityMatrix]) -> Result<(usize, usize)> {
        if sys.is_empty() {
            return Err(Error::RankDeficient("paired basis is empty".into()));
        }
        if sys.len() != joint.len() {
            return Err(Error::DimMismatch(format!(
                "{} system states but {} joint states",
                sys.len(),
                joint.len()
            )));
        }
        let d_s = sys[0].dim();
        let jd = joint[0].dims();
        if jd.len() != 2 || jd[0] != d_s {
            return Err(Error::DimMismatch(format!(
                "joint states need dims [d_S, d_E] with d_S = {d_s}, got {jd:?}"
            )));
        }
        let d_e = jd[1];
        for (k, (s, j)) in sys.iter().zip(joint).enumerate() {
            if s.dims() != [d_s] || j.dims() != [d_s, d_e] {
                return Err(Error::DimMismatch(format!(
                    "pair {k}: system dims {:?}, joint dims {:?}",
                    s.dims(),
                    j.dims()
                )));
            }
        }
        Ok((d_s, d_e))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn m(&self) -> usize {
        self.sys.len()
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn system_states(&self) -> &[DensityMatrix] {
        &self.sys
    }

    pub fn joint_states(&self) -> &[DensityMatrix] {
        &self.joint
    }

    /// Span of the joint states, V' (all of V when the basis is full).
    pub fn joint_subspace(&self) -> Result<OperatorSubspace> {
        let mats = self.joint.iter().map(|j| j.matrix().clone()).collect();
        OperatorSubspace::new(mats, vec![self.d_s, self.d_e])
    }
}

/// Action of an assignment map off its domain V_S.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionPolicy {
    /// Zero on the Hilbert-Schmidt orthocomplement of V_S.
    PseudoInverseZero,
}

#[derive(Debug, Clone)]
pub struct AssignmentMap {
    core: QMap,
    domain: OperatorSubspace,
    policy: ExtensionPolicy,
}

impl AssignmentMap {
    pub fn core(&self) -> &QMap {
        &self.core
    }

    pub fn domain(&self) -> &OperatorSubspace {
        &self.domain
    }

    pub fn extension_policy(&self) -> ExtensionPolicy {
        self.policy
    }

    pub fn d_s(&self) -> usize {
        self.core.d_in()
    }

    pub fn d_e(&self) -> usize {
        self.core.d_out_dims()[1]
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.core.apply(x)
    }

    /// Max residual of `Tr_E ∘ Λ_S - id` over the domain basis.
    pub fn marginal_residual(&self) -> f64 {
        self.domain
            .basis()
            .iter()
            .map(|x| {
                let out = self.core.apply(x).expect("domain element has input shape");
                let back = partial_trace(&out, self.core.d_out_dims(), &[0]).expect("dims fixed");
                operator::max_abs(&(back - x))
            })
            .fold(0.0, f64::max)
    }
}

/// Λ_S with `Λ_S(ρ_S^(j)) = ρ_SE^(j)`, extended linearly on V_S and by zero
/// outside it.
pub fn build_assignment(pb: &PairedBasis) -> Result<AssignmentMap> {
    let pairs: Vec<_> = pb
        .sys
        .iter()
        .zip(&pb.joint)
        .map(|(s, j)| (s.matrix().clone(), j.matrix().clone()))
        .collect();
    let core = qmap::qmap_from_action(&pairs, pb.d_s, vec![pb.d_s, pb.d_e], Domain::Span)?;
    let domain = OperatorSubspace::new(
        pb.sys.iter().map(|s| s.matrix().clone()).collect(),
        vec![pb.d_s],
    )?;
    Ok(AssignmentMap {
        core,
        domain,
        policy: ExtensionPolicy::PseudoInverseZero,
    })
}

/// `Λ̃_S = Λ_S + (X -> Tr(X) y)` for an offset `y` with `Tr_E(y) = 0`.
///
/// `y` is expected to lie in V₀ of the subspace under study; only the
/// partial-trace condition is checked here.
pub fn general_assignment(base: &AssignmentMap, y: &ComplexMatrix) -> Result<AssignmentMap> {
    let dims = base.core.d_out_dims().to_vec();
    let d: usize = dims.iter().product();
    if y.shape() != (d, d) {
        return Err(Error::DimMismatch(format!("offset {:?} vs {d}x{d}", y.shape())));
    }
    let marginal = partial_trace(y, &dims, &[0])?;
    let norm = frobenius(&marginal);
    if norm > tol::MARGINAL {
        return Err(Error::NotTraceless(norm));
    }
    Ok(AssignmentMap {
        core: base.core.plus_trace_offset(y)?,
        domain: base.domain.clone(),
        policy: base.policy,
    })
}

/// `V = V' ⊕ V₀` with `V₀ = {X ∈ V : Tr_E X = 0}`.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    pub v_prime: OperatorSubspace,
    pub v_zero: OperatorSubspace,
}

/// Split a subspace of L(H_S ⊗ H_E) into a part mapped one-to-one by `Tr_E`
/// and the kernel of `Tr_E` within it.
///
/// Uses the SVD of the matrix whose columns are `vec(Tr_E B_k)`: right
/// singular vectors with singular value above `sqrt(tol::RANK)` give V',
/// the rest give V₀. Requires two-factor dims `[d_S, d_E]`.
pub fn decompose_subspace(v: &OperatorSubspace) -> Result<SubspaceSplit> {
    let dims = v.dims().to_vec();
    if dims.len() != 2 {
        return Err(Error::DimMismatch(format!(
            "subspace needs dims [d_S, d_E], got {dims:?}"
        )));
    }
    let n = v.rank();
    if n == 0 {
        return Ok(SubspaceSplit {
            v_prime: OperatorSubspace::empty(dims.clone()),
            v_zero: OperatorSubspace::empty(dims),
        });
    }
    let marginals: Vec<ComplexMatrix> = v
        .basis()
        .iter()
        .map(|b| partial_trace(b, &dims, &[0]))
        .collect::<Result<_>>()?;
    let m = stack(&marginals);
    // pad so the SVD yields a full set of right singular vectors
    let rows = m.nrows().max(n);
    let mut padded = zeros(rows, n);
    padded.view_mut((0, 0), m.shape()).copy_from(&m);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");

    let cutoff = tol::RANK.sqrt();
    let mut prime = Vec::new();
    let mut zero = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        let coeffs = v_t.row(k).adjoint();
        let op = v
            .basis()
            .iter()
            .zip(coeffs.iter())
            .fold(zeros(v.basis()[0].nrows(), v.basis()[0].ncols()), |acc, (b, w)| acc + b * *w);
        if *s > cutoff {
            prime.push(op);
        } else {
            zero.push(op);
        }
    }
    Ok(SubspaceSplit {
        v_prime: OperatorSubspace {
            basis: prime,
            dims: dims.clone(),
        },
        v_zero: OperatorSubspace { basis: zero, dims },
    })
}

/// U-consistency for every unitary: `Tr_E` is one-to-one on V.
pub fn is_u_consistent_all(v: &OperatorSubspace) -> Result<bool> {
    Ok(decompose_subspace(v)?.v_zero.rank() == 0)
}

/// U-consistency for one unitary: `U V₀ U^dag` stays in the kernel of `Tr_E`.
pub fn check_u_consistency_for(v: &OperatorSubspace, u: &ComplexMatrix) -> Result<bool> {
    let d: usize = v.dims().iter().product();
    if u.shape() != (d, d) {
        return Err(Error::DimMismatch(format!(
            "unitary {:?} on a space of dimension {d}",
            u.shape()
        )));
    }
    operator::ensure_unitary(u)?;
    let split = decompose_subspace(v)?;
    for y in split.v_zero.basis() {
        let evolved = u * y * u.adjoint();
        let marginal = partial_trace(&evolved, v.dims(), &[0])?;
        if frobenius(&marginal) > 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether the assignment map is Hermitian-preserving (its full extension).
pub fn is_hermitian_assignment(map: &AssignmentMap) -> bool {
    hermitian_deviation(&qmap::choi_of(&map.core).mat) <= tol::HERM
}

/// Pechukas-type product assignment `x -> x ⊗ ρ_E` on the full domain.
pub fn product_assignment(d_s: usize, env: &DensityMatrix) -> AssignmentMap {
    let d_e = env.dim();
    let core = QMap::from_fn(d_s, vec![d_s, d_e], |x| operator::kron(x, env.matrix()));
    let mut basis = Vec::new();
    for i in 0..d_s {
        for j in 0..d_s {
            basis.push(operator::matrix_unit(d_s, i, j));
        }
    }
    AssignmentMap {
        core,
        domain: OperatorSubspace {
            basis,
            dims: vec![d_s],
        },
        policy: ExtensionPolicy::PseudoInverseZero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{
        c, identity, kron, matrix_unit, max_abs, sigma_x, sigma_y, sigma_z, swap, BlochVector,
    };
    use crate::qmap::{is_cp, is_trace_preserving};
    use crate::random;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, eps: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= eps
    }

    fn pauli_sum() -> ComplexMatrix {
        [sigma_x(), sigma_y(), sigma_z()]
            .iter()
            .fold(zeros(4, 4), |acc, p| acc + kron(p, p))
    }

    fn half_id() -> ComplexMatrix {
        identity(2) * c(0.5, 0.0)
    }

    fn qubit_basis_states() -> Vec<DensityMatrix> {
        [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]]
            .iter()
            .map(|a| BlochVector(*a).to_state().unwrap())
            .collect()
    }

    #[test]
    fn product_pairs_give_cp_pechukas_map() {
        let env = DensityMatrix::maximally_mixed(vec![2]);
        let sys = qubit_basis_states();
        let joint: Vec<_> = sys.iter().map(|s| s.kron(&env)).collect();
        let pb = PairedBasis::new(sys, joint).unwrap();
        let lambda = build_assignment(&pb).unwrap();
        let x = BlochVector([0.1, 0.7, -0.2]).operator();
        assert!(close(&lambda.apply(&x).unwrap(), &kron(&x, &half_id()), 1e-12));
        assert!(is_cp(lambda.core()).unwrap().0);
        assert!(lambda.marginal_residual() < 1e-12);
    }

    #[test]
    fn single_pair_interpolates_on_rank_one_domain() {
        let sys = vec![DensityMatrix::maximally_mixed(vec![2])];
        let joint = vec![DensityMatrix::maximally_mixed(vec![2, 2])];
        let lambda = build_assignment(&PairedBasis::new(sys, joint).unwrap()).unwrap();
        assert_eq!(lambda.domain().rank(), 1);
        let out = lambda.apply(&half_id()).unwrap();
        assert!(close(&out, &(identity(4) * c(0.25, 0.0)), 1e-14));
        // off-domain directions map to zero
        assert!(max_abs(&lambda.apply(&sigma_x()).unwrap()) < 1e-14);
        // X -> Tr(X) I/4 everywhere, which happens to preserve trace
        assert!(is_trace_preserving(lambda.core()));
    }

    #[test]
    fn paired_basis_reports_offending_marginal() {
        let sys = qubit_basis_states();
        let env = DensityMatrix::maximally_mixed(vec![2]);
        let mut joint: Vec<_> = sys.iter().map(|s| s.kron(&env)).collect();
        joint[2] = DensityMatrix::maximally_mixed(vec![2, 2]);
        match PairedBasis::new(sys, joint) {
            Err(Error::InconsistentMarginals { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected marginal error, got {other:?}"),
        }
    }

    #[test]
    fn paired_basis_rejects_dependent_states() {
        let s = DensityMatrix::maximally_mixed(vec![2]);
        let j = DensityMatrix::maximally_mixed(vec![2, 2]);
        let err = PairedBasis::new(vec![s.clone(), s.clone()], vec![j.clone(), j.clone()]);
        assert!(matches!(err, Err(Error::RankDeficient(_))));
        let pb = PairedBasis::select_independent(vec![s.clone(), s], vec![j.clone(), j]).unwrap();
        assert_eq!(pb.m(), 1);
    }

    #[test]
    fn general_assignment_offsets() {
        let env = DensityMatrix::maximally_mixed(vec![2]);
        let base = product_assignment(2, &env);
        let same = general_assignment(&base, &zeros(4, 4)).unwrap();
        assert_eq!(same.core(), base.core());

        let y = kron(&sigma_z(), &sigma_z()) * c(0.25, 0.0);
        let shifted = general_assignment(&base, &y).unwrap();
        let rho = BlochVector([0.2, 0.3, 0.4]).operator();
        let out = shifted.apply(&rho).unwrap();
        assert!(close(&partial_trace(&out, &[2, 2], &[0]).unwrap(), &rho, 1e-14));
        assert!(close(&out, &(kron(&rho, &half_id()) + &y), 1e-14));

        let bad = kron(&sigma_z(), &identity(2));
        assert!(matches!(general_assignment(&base, &bad), Err(Error::NotTraceless(_))));
    }

    #[test]
    fn general_assignment_recovers_pauli_correlated_map() {
        let a = 0.15;
        let env = DensityMatrix::maximally_mixed(vec![2]);
        let base = product_assignment(2, &env);
        let lambda = general_assignment(&base, &(pauli_sum() * c(a / 4.0, 0.0))).unwrap();
        for (k, p) in [sigma_x(), sigma_y(), sigma_z()].iter().enumerate() {
            let want = kron(p, &identity(2)) * c(0.5, 0.0);
            assert!(close(&lambda.apply(p).unwrap(), &want, 1e-14), "sigma {k}");
        }
        let want = (identity(4) + pauli_sum() * c(a, 0.0)) * c(0.5, 0.0);
        assert!(close(&lambda.apply(&identity(2)).unwrap(), &want, 1e-14));
    }

    #[test]
    fn decompose_examples() {
        let rho = BlochVector([0.1, 0.2, 0.3]).to_state().unwrap();
        let e1 = BlochVector([0.5, 0.0, 0.0]).to_state().unwrap();
        let e2 = BlochVector([0.0, 0.0, -0.4]).to_state().unwrap();
        let v = OperatorSubspace::new(
            vec![rho.kron(&e1).into_matrix(), rho.kron(&e2).into_matrix()],
            vec![2, 2],
        )
        .unwrap();
        let split = decompose_subspace(&v).unwrap();
        assert_eq!((split.v_prime.rank(), split.v_zero.rank()), (1, 1));
        assert!(!is_u_consistent_all(&v).unwrap());

        let units: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| matrix_unit(4, i, j)))
            .collect();
        let full = OperatorSubspace::new(units, vec![2, 2]).unwrap();
        let split = decompose_subspace(&full).unwrap();
        assert_eq!((split.v_prime.rank(), split.v_zero.rank()), (4, 12));
        for y in split.v_zero.basis() {
            assert!(frobenius(&partial_trace(y, &[2, 2], &[0]).unwrap()) <= 1e-10);
        }
    }

    #[test]
    fn product_states_with_independent_system_parts_are_consistent() {
        let mut rng = random::seeded(21);
        let mats: Vec<_> = (0..4)
            .map(|_| {
                let s = random::mixed_state(&mut rng, 2);
                let e = random::mixed_state(&mut rng, 3);
                kron(&s, &e)
            })
            .collect();
        let v = OperatorSubspace::new(mats, vec![2, 3]).unwrap();
        assert!(is_u_consistent_all(&v).unwrap());
    }

    #[test]
    fn consistency_for_specific_unitaries() {
        // I ⊗ σz is Tr_E-traceless; SWAP moves it to σz ⊗ I whose marginal is 2σz
        let v = OperatorSubspace::new(
            vec![
                kron(&half_id(), &half_id()),
                kron(&half_id(), &half_id()) + kron(&identity(2), &sigma_z()) * c(0.25, 0.0),
            ],
            vec![2, 2],
        )
        .unwrap();
        assert_eq!(decompose_subspace(&v).unwrap().v_zero.rank(), 1);
        assert!(!check_u_consistency_for(&v, &swap(2)).unwrap());
        assert!(check_u_consistency_for(&v, &identity(4)).unwrap());

        // σz ⊗ σz is SWAP-invariant, so it stays in the kernel
        let w = OperatorSubspace::new(
            vec![
                kron(&half_id(), &half_id()),
                kron(&half_id(), &half_id()) + kron(&sigma_z(), &sigma_z()) * c(0.25, 0.0),
            ],
            vec![2, 2],
        )
        .unwrap();
        assert!(check_u_consistency_for(&w, &swap(2)).unwrap());

        let one_to_one = OperatorSubspace::new(vec![kron(&half_id(), &half_id())], vec![2, 2]).unwrap();
        let mut rng = random::seeded(4);
        assert!(check_u_consistency_for(&one_to_one, &random::haar_unitary(&mut rng, 4)).unwrap());
        assert!(matches!(
            check_u_consistency_for(&v, &(identity(4) * c(2.0, 0.0))),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn subspace_membership() {
        let v = OperatorSubspace::new(vec![sigma_x(), sigma_z()], vec![2]).unwrap();
        assert!(v.contains(&(sigma_x() * c(2.0, -1.0) + sigma_z())));
        assert!(!v.contains(&sigma_y()));
    }
}
