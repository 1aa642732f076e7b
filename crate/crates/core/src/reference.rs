//! Reference states, steering, evolution and the Markov test.
//!
//! A reference state carries a flag register R of dimension `m` in front of
//! the system (and, for the tripartite form, the environment). Freshly built
//! states are block diagonal in the computational basis of R with the l-th
//! block equal to `ρ^(l) / m`.

use serde::{Deserialize, Serialize};

use crate::assignment::{AssignmentMap, PairedBasis};
use crate::error::{Error, Result};
use crate::operator::{
    self, c, commutator, eig_hermitian, entropy_of, frobenius, identity, kron, max_abs,
    partial_trace, trace_norm_hermitian, zeros, ComplexMatrix, DensityMatrix,
};
use crate::qmap::{self, compose, Domain, QMap};
use crate::tol::{self, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    state: DensityMatrix,
    provenance: String,
}

impl ReferenceState {
    /// Wrap an existing state with dims `[m, d_S]` or `[m, d_S, d_E]`.
    pub fn from_state(state: DensityMatrix, provenance: impl Into<String>) -> Result<Self> {
        match state.dims().len() {
            2 | 3 => Ok(ReferenceState {
                state,
                provenance: provenance.into(),
            }),
            n => Err(Error::DimMismatch(format!(
                "reference state needs 2 or 3 factors, got {n}"
            ))),
        }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.state.matrix()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn dims(&self) -> &[usize] {
        self.state.dims()
    }

    /// Number of flag states (dimension of R).
    pub fn m(&self) -> usize {
        self.dims()[0]
    }

    pub fn d_s(&self) -> usize {
        self.dims()[1]
    }

    pub fn d_e(&self) -> Option<usize> {
        self.dims().get(2).copied()
    }

    pub fn is_tripartite(&self) -> bool {
        self.dims().len() == 3
    }

    /// Dimension of everything after R.
    fn rest(&self) -> usize {
        self.dims()[1..].iter().product()
    }

    /// Block `<r|ω|r'>` as an operator on the non-R factors.
    pub fn block(&self, r: usize, r2: usize) -> ComplexMatrix {
        let d = self.rest();
        self.matrix().view((r * d, r2 * d), (d, d)).into_owned()
    }

    /// `m <l|ω|l>`: the l-th member of the encoded basis.
    pub fn member(&self, l: usize) -> ComplexMatrix {
        self.block(l, l) * c(self.m() as f64, 0.0)
    }

    /// `Tr_E ω` for tripartite states; bipartite states are returned as is.
    pub fn system_reference(&self) -> ReferenceState {
        if !self.is_tripartite() {
            return self.clone();
        }
        ReferenceState {
            state: self.state.partial_trace(&[0, 1]),
            provenance: self.provenance.clone(),
        }
    }
}

fn block_diagonal(blocks: &[&ComplexMatrix], m: usize) -> ComplexMatrix {
    let d = blocks[0].nrows();
    let mut out = zeros(m * d, m * d);
    for (l, b) in blocks.iter().enumerate() {
        out.view_mut((l * d, l * d), (d, d))
            .copy_from(&(*b * c(1.0 / m as f64, 0.0)));
    }
    out
}

/// `ω_RS = Σ_l (1/m) |l><l| ⊗ ρ_S^(l)`.
pub fn build_reference_bipartite(pb: &PairedBasis) -> ReferenceState {
    let m = pb.m();
    let blocks: Vec<_> = pb.system_states().iter().map(|s| s.matrix()).collect();
    let state = DensityMatrix::new(block_diagonal(&blocks, m), vec![m, pb.d_s()])
        .expect("mixture of valid states is valid");
    ReferenceState {
        state,
        provenance: pb.label().to_string(),
    }
}

/// `ω_RSE = Σ_l (1/m) |l><l| ⊗ ρ_SE^(l)`, i.e. `id_R ⊗ Λ_S` applied to `ω_RS`.
pub fn build_reference_tripartite(pb: &PairedBasis) -> ReferenceState {
    let m = pb.m();
    let blocks: Vec<_> = pb.joint_states().iter().map(|s| s.matrix()).collect();
    let state = DensityMatrix::new(block_diagonal(&blocks, m), vec![m, pb.d_s(), pb.d_e()])
        .expect("mixture of valid states is valid");
    ReferenceState {
        state,
        provenance: pb.label().to_string(),
    }
}

/// `Tr_R[(A_R ⊗ I) ω]` without normalization.
pub fn generalized_steer(reference: &ReferenceState, a_r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let m = reference.m();
    if a_r.shape() != (m, m) {
        return Err(Error::DimMismatch(format!(
            "steering operator {:?} on a flag register of dimension {m}",
            a_r.shape()
        )));
    }
    let d = reference.rest();
    let mut out = zeros(d, d);
    for r in 0..m {
        for r2 in 0..m {
            let w = a_r[(r, r2)];
            if w.norm() != 0.0 {
                out += reference.block(r2, r) * w;
            }
        }
    }
    Ok(out)
}

/// Conditional state `Tr_R[(P_R ⊗ I) ω] / Tr[(P_R ⊗ I) ω]` for PSD `P_R`.
pub fn steer(reference: &ReferenceState, p_r: &ComplexMatrix) -> Result<DensityMatrix> {
    let eig = eig_hermitian(p_r).map_err(|_| Error::NotPsd(f64::NAN))?;
    if eig.min() < -tol::PSD {
        return Err(Error::NotPsd(eig.min()));
    }
    let unnormalized = generalized_steer(reference, p_r)?;
    let prob = unnormalized.trace().re;
    if prob <= tol::PROB {
        return Err(Error::ZeroProbability(prob));
    }
    let mat = operator::hermitian_part(&(unnormalized / c(prob, 0.0)));
    DensityMatrix::new(mat, reference.dims()[1..].to_vec())
}

/// Steered members collected from one reference state.
#[derive(Debug, Clone)]
pub struct SteeredSet {
    pub reference: ReferenceState,
    pub members: Vec<DensityMatrix>,
}

impl SteeredSet {
    pub fn new(reference: ReferenceState) -> Self {
        SteeredSet {
            reference,
            members: Vec::new(),
        }
    }

    pub fn steer(&mut self, p_r: &ComplexMatrix) -> Result<&DensityMatrix> {
        let member = steer(&self.reference, p_r)?;
        self.members.push(member);
        Ok(self.members.last().expect("just pushed"))
    }
}

/// `(I_R ⊗ U) ω (I_R ⊗ U)^dag` for a unitary on S⊗E.
pub fn evolve_reference(reference: &ReferenceState, u: &ComplexMatrix) -> Result<ReferenceState> {
    if !reference.is_tripartite() {
        return Err(Error::DimMismatch("evolution by a joint unitary needs a tripartite reference".into()));
    }
    let full = kron(&identity(reference.m()), u);
    if full.shape() != reference.matrix().shape() {
        return Err(Error::DimMismatch(format!(
            "unitary {:?} does not act on S⊗E of dimension {}",
            u.shape(),
            reference.rest()
        )));
    }
    operator::ensure_unitary(u)?;
    Ok(ReferenceState {
        state: operator::conjugate_by_unitary(&full, &reference.state)?,
        provenance: reference.provenance.clone(),
    })
}

/// `(id_R ⊗ E_S)(ω_RS)`, applied block by block.
pub fn evolve_reference_bipartite(reference: &ReferenceState, e_s: &QMap) -> Result<ReferenceState> {
    if reference.is_tripartite() {
        return Err(Error::DimMismatch("expected a bipartite reference state".into()));
    }
    if e_s.d_in() != reference.d_s() {
        return Err(Error::DimMismatch(format!(
            "map acts on dimension {}, reference system has {}",
            e_s.d_in(),
            reference.d_s()
        )));
    }
    let m = reference.m();
    let d = e_s.d_out();
    let mut out = zeros(m * d, m * d);
    for r in 0..m {
        for r2 in 0..m {
            let b = e_s.apply(&reference.block(r, r2))?;
            out.view_mut((r * d, r2 * d), (d, d)).copy_from(&b);
        }
    }
    let mut dims = vec![m];
    dims.extend_from_slice(e_s.d_out_dims());
    Ok(ReferenceState {
        state: DensityMatrix::new(out, dims)?,
        provenance: reference.provenance.clone(),
    })
}

/// `E_S = Tr_E ∘ Ad_U ∘ Λ_S` on L(H_S).
pub fn reduced_dynamics(lambda: &AssignmentMap, u: &ComplexMatrix) -> Result<QMap> {
    let dims = lambda.core().d_out_dims().to_vec();
    let d: usize = dims.iter().product();
    if u.shape() != (d, d) {
        return Err(Error::DimMismatch(format!(
            "unitary {:?} on S⊗E of dimension {d}",
            u.shape()
        )));
    }
    let ad = QMap::unitary_conjugation(u, dims.clone())?;
    let tr_e = QMap::partial_trace(&dims, &[0])?;
    compose(&tr_e, &compose(&ad, lambda.core())?)
}

/// Which explicit Markov decomposition, if any, a state was matched to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralForm {
    /// `ω_RSE = ω_RS ⊗ ω_E`
    #[serde(rename = "ProductRS_E")]
    ProductRsE,
    /// `ω_RSE = ω_R ⊗ ω_SE`
    #[serde(rename = "ProductR_SE")]
    ProductRSe,
    /// `Σ_k λ_k ρ_R^(k) ⊗ |k><k| ⊗ ρ_E^(k)` for a qubit system
    DirectSumQubit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovVerdict {
    pub is_markov: bool,
    /// I(R;E|S) in nats.
    pub cmi: f64,
    pub structural_form: StructuralForm,
    pub witness: Option<String>,
}

/// `S(ρ_RS) + S(ρ_SE) - S(ρ_S) - S(ρ_RSE)` in nats.
pub fn conditional_mutual_information(state: &DensityMatrix) -> Result<f64> {
    if state.dims().len() != 3 {
        return Err(Error::InvalidState(format!(
            "conditional mutual information needs dims [d_R, d_S, d_E], got {:?}",
            state.dims()
        )));
    }
    let m = state.matrix();
    let dims = state.dims();
    let s_rs = entropy_of(&partial_trace(m, dims, &[0, 1])?)?;
    let s_se = entropy_of(&partial_trace(m, dims, &[1, 2])?)?;
    let s_s = entropy_of(&partial_trace(m, dims, &[1])?)?;
    Ok(s_rs + s_se - s_s - state.entropy())
}

pub fn markov_test(reference: &ReferenceState) -> Result<MarkovVerdict> {
    markov_test_with(reference, &Tolerances::default())
}

/// Markov test by conditional mutual information, with an explanatory
/// structural match.
///
/// The two product forms are checked for any system dimension; the direct
/// sum over a basis of H_S is only attempted for a qubit system.
pub fn markov_test_with(reference: &ReferenceState, tols: &Tolerances) -> Result<MarkovVerdict> {
    if !reference.is_tripartite() {
        return Err(Error::InvalidState("Markov test needs a tripartite reference state".into()));
    }
    let cmi = conditional_mutual_information(reference.state())?;
    let is_markov = cmi <= tols.cmi;
    let state = reference.state();

    let structural_form = if matches_product(state, &[0, 1], &[2]) {
        StructuralForm::ProductRsE
    } else if matches_product(state, &[0], &[1, 2]) {
        StructuralForm::ProductRSe
    } else if reference.d_s() == 2 && matches_qubit_direct_sum(state) {
        StructuralForm::DirectSumQubit
    } else {
        StructuralForm::None
    };

    let witness = if is_markov {
        None
    } else {
        let mut text = format!("I(R;E|S) = {cmi:.6e} nats exceeds {:.1e}", tols.cmi);
        if reference.d_s() == 2 {
            if let Some((l, l2, norm)) = noncommuting_members(reference) {
                text.push_str(&format!(
                    "; all ρ_S^(l) must commute with each other, but members {l} and {l2} do not \
                     (‖[ρ_S^({l}), ρ_S^({l2})]‖ = {norm:.3e})"
                ));
            }
        }
        Some(text)
    };

    Ok(MarkovVerdict {
        is_markov,
        cmi,
        structural_form,
        witness,
    })
}

/// Does `ω` equal the product of its marginals on `left` and `right`
/// (which must partition the factors, left before right)?
fn matches_product(state: &DensityMatrix, left: &[usize], right: &[usize]) -> bool {
    let a = state.partial_trace(left);
    let b = state.partial_trace(right);
    let diff = state.matrix() - kron(a.matrix(), b.matrix());
    trace_norm_hermitian(&diff) <= tol::PRODUCT
}

/// Sum of irrational-weighted Hermitian combinations of the S-slices of the
/// R-S and S-E marginals. Under the direct-sum form every slice is diagonal
/// in the same S basis, so this operator's eigenbasis is that basis.
fn generic_slice_combination(state: &DensityMatrix) -> ComplexMatrix {
    let dims = state.dims();
    let (d_r, d_s, d_e) = (dims[0], dims[1], dims[2]);
    let rs = partial_trace(state.matrix(), dims, &[0, 1]).expect("tripartite");
    let se = partial_trace(state.matrix(), dims, &[1, 2]).expect("tripartite");
    let mut slices = Vec::new();
    for r in 0..d_r {
        for r2 in 0..d_r {
            slices.push(rs.view((r * d_s, r2 * d_s), (d_s, d_s)).into_owned());
        }
    }
    for e in 0..d_e {
        for e2 in 0..d_e {
            slices.push(ComplexMatrix::from_fn(d_s, d_s, |s, s2| se[(s * d_e + e, s2 * d_e + e2)]));
        }
    }
    let mut h = zeros(d_s, d_s);
    for (k, a) in slices.iter().enumerate() {
        let w1 = ((2 * k + 2) as f64).sqrt().fract() + 0.1;
        let w2 = ((2 * k + 3) as f64).sqrt().fract() + 0.1;
        h += (a + a.adjoint()) * c(w1, 0.0) + (a - a.adjoint()) * c(0.0, w2);
    }
    h
}

fn matches_qubit_direct_sum(state: &DensityMatrix) -> bool {
    let dims = state.dims();
    let (d_r, d_s, d_e) = (dims[0], dims[1], dims[2]);
    let h = generic_slice_combination(state);
    let basis = eig_hermitian(&operator::hermitian_part(&h))
        .map(|e| e.vectors)
        .unwrap_or_else(|_| identity(d_s));
    let rot = kron(&kron(&identity(d_r), &basis.adjoint()), &identity(d_e));
    let rotated = &rot * state.matrix() * rot.adjoint();

    let n = d_r * d_s * d_e;
    let mut candidate = zeros(n, n);
    for k in 0..d_s {
        // <k|ω|k> on R⊗E
        let block = ComplexMatrix::from_fn(d_r * d_e, d_r * d_e, |i, j| {
            let (r, e) = (i / d_e, i % d_e);
            let (r2, e2) = (j / d_e, j % d_e);
            rotated[((r * d_s + k) * d_e + e, (r2 * d_s + k) * d_e + e2)]
        });
        let weight = block.trace().re;
        if weight <= tol::PROB {
            continue;
        }
        let br = partial_trace(&block, &[d_r, d_e], &[0]).expect("dims");
        let be = partial_trace(&block, &[d_r, d_e], &[1]).expect("dims");
        for r in 0..d_r {
            for r2 in 0..d_r {
                for e in 0..d_e {
                    for e2 in 0..d_e {
                        candidate[((r * d_s + k) * d_e + e, (r2 * d_s + k) * d_e + e2)] =
                            br[(r, r2)] * be[(e, e2)] / c(weight, 0.0);
                    }
                }
            }
        }
    }
    trace_norm_hermitian(&(rotated - candidate)) <= tol::PRODUCT
}

/// First pair of encoded members that fail to commute, with the commutator
/// norm.
fn noncommuting_members(reference: &ReferenceState) -> Option<(usize, usize, f64)> {
    let sys = reference.system_reference();
    let members: Vec<_> = (0..sys.m()).map(|l| sys.member(l)).collect();
    for l in 0..members.len() {
        for l2 in l + 1..members.len() {
            let norm = frobenius(&commutator(&members[l], &members[l2]));
            if norm > 1e-8 {
                return Some((l + 1, l2 + 1, norm));
            }
        }
    }
    None
}

/// Decide whether `ω_RS(0) -> ω_RS(t)` is induced blockwise by a CP map.
///
/// The blocks of `ref0` must span L(H_S) (so `m = d_S²`); the map sending
/// each `ρ_S^(l)(0)` to `ρ_S^(l)(t)` is then unique and its Choi spectrum
/// decides the question. Returns the verdict and the smallest Choi eigenvalue.
pub fn cp_certificate(ref0: &ReferenceState, ref_t: &ReferenceState) -> Result<(bool, f64)> {
    cp_certificate_with(ref0, ref_t, tol::PSD)
}

pub fn cp_certificate_with(ref0: &ReferenceState, ref_t: &ReferenceState, psd_tol: f64) -> Result<(bool, f64)> {
    let map = certificate_map(ref0, ref_t)?;
    qmap::is_cp_with(&map, psd_tol)
}

/// The unique map with `M(ρ_S^(l)(0)) = ρ_S^(l)(t)` for every flag `l`.
pub fn certificate_map(ref0: &ReferenceState, ref_t: &ReferenceState) -> Result<QMap> {
    if ref0.is_tripartite() || ref_t.is_tripartite() {
        return Err(Error::DimMismatch("CP certificate compares bipartite reference states".into()));
    }
    if ref0.m() != ref_t.m() {
        return Err(Error::DimMismatch(format!(
            "flag dimensions differ: {} vs {}",
            ref0.m(),
            ref_t.m()
        )));
    }
    let d_s = ref0.d_s();
    if ref0.m() != d_s * d_s {
        return Err(Error::RankDeficient(format!(
            "{} blocks cannot span L(H_S) of dimension {}",
            ref0.m(),
            d_s * d_s
        )));
    }
    let pairs: Vec<_> = (0..ref0.m())
        .map(|l| (ref0.member(l), ref_t.member(l)))
        .collect();
    qmap::qmap_from_action(&pairs, d_s, vec![ref_t.d_s()], Domain::Full)
}

/// Largest deviation of any block of `reference` from being zero off the
/// R-diagonal, and of the R-marginal from `I/m`.
pub fn flag_structure_error(reference: &ReferenceState) -> f64 {
    let m = reference.m();
    let mut worst = 0.0_f64;
    for r in 0..m {
        for r2 in 0..m {
            if r != r2 {
                worst = worst.max(max_abs(&reference.block(r, r2)));
            }
        }
    }
    let r_marginal = reference.state().partial_trace(&[0]);
    worst.max(max_abs(&(r_marginal.matrix() - identity(m) / c(m as f64, 0.0))))
}
