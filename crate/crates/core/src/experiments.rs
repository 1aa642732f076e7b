//! Two-qubit scenario with Pauli-correlated assignment, unitary sweeps, and
//! randomized campaigns relating Markov reference states to CP dynamics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{build_assignment, general_assignment, product_assignment, AssignmentMap, PairedBasis};
use crate::error::{Error, Result};
use crate::operator::{
    self, c, commutator, frobenius, identity, kron, sigma_x, sigma_y, sigma_z, zeros, BlochVector,
    ComplexMatrix, DensityMatrix,
};
use crate::qmap;
use crate::random::{self, SeededRng};
use crate::reference::{build_reference_bipartite, build_reference_tripartite, markov_test_with, reduced_dynamics, ReferenceState};
use crate::tol::{self, Tolerances};

/// `Σ_i σ_i ⊗ σ_i` on two qubits.
pub fn pauli_correlator() -> ComplexMatrix {
    [sigma_x(), sigma_y(), sigma_z()]
        .iter()
        .fold(zeros(4, 4), |acc, p| acc + kron(p, p))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > -1.0 && a < 1.0 / 3.0) {
        return Err(Error::OutOfDomain(format!("a = {a} outside (-1, 1/3)")));
    }
    Ok(())
}

/// Largest Bloch-vector length for which `τ_SE` stays positive.
pub fn positivity_bound(a: f64) -> Result<f64> {
    check_a(a)?;
    Ok(if a >= 0.0 {
        ((1.0 + a) * (1.0 - 3.0 * a)).sqrt()
    } else {
        1.0 + a
    })
}

/// `τ_SE = (I + Σ α_i σ_i ⊗ I + a Σ σ_i ⊗ σ_i) / 4`, not validated.
pub fn tau_se(a: f64, alpha: BlochVector) -> ComplexMatrix {
    let [sx, sy, sz] = [sigma_x(), sigma_y(), sigma_z()];
    let local = sx * c(alpha.0[0], 0.0) + sy * c(alpha.0[1], 0.0) + sz * c(alpha.0[2], 0.0);
    (identity(4) + kron(&local, &identity(2)) + pauli_correlator() * c(a, 0.0)) * c(0.25, 0.0)
}

/// The Hermitian assignment `σ_i -> σ_i ⊗ I/2`, `I -> (I + a Σ σ_i⊗σ_i)/2`,
/// assembled from the product map plus a traceless offset.
pub fn pauli_correlated_assignment(a: f64) -> AssignmentMap {
    let env = DensityMatrix::maximally_mixed(vec![2]);
    let base = product_assignment(2, &env);
    general_assignment(&base, &(pauli_correlator() * c(a / 4.0, 0.0)))
        .expect("Σσ_i⊗σ_i has vanishing partial trace")
}

/// Partial-swap rotation in the `{|01>, |10>}` block.
pub fn build_u_theta(theta: f64) -> ComplexMatrix {
    let (s, co) = theta.sin_cos();
    operator::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, co, s, 0.0],
        &[0.0, -s, co, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
    ])
}

/// The same rotation embedded in S⊗E, acting on `|0,1>` and `|1,0>`.
pub fn embedded_u_theta(theta: f64, d_s: usize, d_e: usize) -> ComplexMatrix {
    let mut u = identity(d_s * d_e);
    let (i, j) = (1, d_e);
    let (s, co) = theta.sin_cos();
    u[(i, i)] = c(co, 0.0);
    u[(i, j)] = c(s, 0.0);
    u[(j, i)] = c(-s, 0.0);
    u[(j, j)] = c(co, 0.0);
    u
}

/// `exp(-i t Σ σ_i⊗σ_i)` via the spectral decomposition of the generator.
pub fn commuting_unitary(t: f64) -> ComplexMatrix {
    operator::hermitian_function(&pauli_correlator(), |lambda| c(0.0, -t * lambda).exp())
        .expect("generator is Hermitian")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl ThetaGrid {
    /// `count` uniform points including both ends (just `start` if count is 1).
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n)
                .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid {
            start: 0.0,
            stop: std::f64::consts::PI,
            count: 181,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitScenario {
    pub a: f64,
    /// Bloch lengths of the first three basis states, along x, y and z.
    pub alphas: [f64; 3],
    pub theta_grid: ThetaGrid,
    pub seed: u64,
}

impl TwoQubitScenario {
    /// Default scenario: every alpha at 0.9 of the positivity bound.
    pub fn new(a: f64) -> Result<Self> {
        let alpha = 0.9 * positivity_bound(a)?;
        Ok(TwoQubitScenario {
            a,
            alphas: [alpha; 3],
            theta_grid: ThetaGrid::default(),
            seed: 0,
        })
    }

    pub fn with_alphas(mut self, alphas: [f64; 3]) -> Self {
        self.alphas = alphas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bound = positivity_bound(self.a)?;
        for (l, alpha) in self.alphas.iter().enumerate() {
            if !(alpha.abs() > 0.0 && alpha.abs() <= bound + 1e-12) {
                return Err(Error::OutOfDomain(format!(
                    "alpha[{l}] = {alpha} not in 0 < |alpha| <= {bound}"
                )));
            }
        }
        Ok(())
    }

    /// Bloch vectors of the four basis states: `α_l e_l` for l = 1..3, then 0.
    fn bloch_vectors(&self) -> [BlochVector; 4] {
        let [a1, a2, a3] = self.alphas;
        [
            BlochVector([a1, 0.0, 0.0]),
            BlochVector([0.0, a2, 0.0]),
            BlochVector([0.0, 0.0, a3]),
            BlochVector([0.0, 0.0, 0.0]),
        ]
    }

    /// System states and their correlated partners `τ_SE(a, α^(l))`.
    pub fn paired_basis(&self) -> Result<PairedBasis> {
        self.validate()?;
        let mut sys = Vec::new();
        let mut joint = Vec::new();
        for b in self.bloch_vectors() {
            sys.push(b.to_state()?);
            joint.push(DensityMatrix::new(tau_se(self.a, b), vec![2, 2])?);
        }
        Ok(PairedBasis::new(sys, joint)?.with_label(format!(
            "two-qubit(a={}, alphas={:?})",
            self.a, self.alphas
        )))
    }

    pub fn assignment(&self) -> Result<AssignmentMap> {
        build_assignment(&self.paired_basis()?)
    }

    pub fn reference_bipartite(&self) -> Result<ReferenceState> {
        Ok(build_reference_bipartite(&self.paired_basis()?))
    }

    pub fn reference_tripartite(&self) -> Result<ReferenceState> {
        Ok(build_reference_tripartite(&self.paired_basis()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub min_eig: f64,
    pub is_cp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub any_non_cp: bool,
    pub worst_theta: f64,
    pub worst_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

impl SweepReport {
    fn from_rows(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        let worst = rows
            .iter()
            .min_by(|a, b| a.min_eig.total_cmp(&b.min_eig))
            .copied();
        let summary = SweepSummary {
            any_non_cp: rows.iter().any(|r| !r.is_cp),
            worst_theta: worst.map_or(f64::NAN, |r| r.theta),
            worst_eigenvalue: worst.map_or(f64::NAN, |r| r.min_eig),
        };
        SweepReport { rows, summary }
    }
}

fn sweep_with(
    lambda: &AssignmentMap,
    params: &[f64],
    psd_tol: f64,
    unitary: impl Fn(f64) -> ComplexMatrix + Sync,
) -> Result<SweepReport> {
    let rows = params
        .par_iter()
        .map(|&theta| {
            let es = reduced_dynamics(lambda, &unitary(theta))?;
            let (is_cp, min_eig) = qmap::is_cp_with(&es, psd_tol)?;
            Ok(SweepRow { theta, min_eig, is_cp })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::from_rows(rows))
}

/// Reduced dynamics under `U(θ)` for every grid angle.
pub fn run_theta_sweep(sc: &TwoQubitScenario) -> Result<SweepReport> {
    run_theta_sweep_with(sc, tol::PSD)
}

pub fn run_theta_sweep_with(sc: &TwoQubitScenario, psd_tol: f64) -> Result<SweepReport> {
    let lambda = sc.assignment()?;
    sweep_with(&lambda, &sc.theta_grid.points(), psd_tol, build_u_theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutingReport {
    pub sweep: SweepReport,
    /// Largest `‖[U(t), Σσ_i⊗σ_i]‖_F` over the grid.
    pub max_commutator_norm: f64,
}

/// Reduced dynamics under `exp(-i t Σσ_i⊗σ_i)`; rows are keyed by `t`.
pub fn run_commuting_family(sc: &TwoQubitScenario, t_grid: &[f64]) -> Result<CommutingReport> {
    run_commuting_family_with(sc, t_grid, tol::PSD)
}

pub fn run_commuting_family_with(sc: &TwoQubitScenario, t_grid: &[f64], psd_tol: f64) -> Result<CommutingReport> {
    let lambda = sc.assignment()?;
    let sweep = sweep_with(&lambda, t_grid, psd_tol, commuting_unitary)?;
    let generator = pauli_correlator();
    let max_commutator_norm = t_grid
        .iter()
        .map(|&t| frobenius(&commutator(&commuting_unitary(t), &generator)))
        .fold(0.0, f64::max);
    Ok(CommutingReport {
        sweep,
        max_commutator_norm,
    })
}

/// Where a non-CP witness unitary came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessSource {
    Theta { theta: f64 },
    Haar { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub source: WitnessSource,
    pub min_eig: f64,
}

/// Search for a unitary whose reduced dynamics has a Choi eigenvalue below
/// `-tol::WITNESS`: first the embedded θ family on the default grid (most
/// negative angle wins), then up to `n_random` Haar unitaries (first hit wins).
pub fn witness_search(lambda: &AssignmentMap, rng: &mut SeededRng, n_random: usize) -> Result<Option<Witness>> {
    let (d_s, d_e) = (lambda.d_s(), lambda.d_e());
    let report = sweep_with(lambda, &ThetaGrid::default().points(), tol::PSD, |t| {
        embedded_u_theta(t, d_s, d_e)
    })?;
    if report.summary.worst_eigenvalue < -tol::WITNESS {
        return Ok(Some(Witness {
            source: WitnessSource::Theta {
                theta: report.summary.worst_theta,
            },
            min_eig: report.summary.worst_eigenvalue,
        }));
    }
    for index in 0..n_random {
        let u = random::haar_unitary(rng, d_s * d_e);
        let (_, min_eig) = qmap::is_cp(&reduced_dynamics(lambda, &u)?)?;
        if min_eig < -tol::WITNESS {
            return Ok(Some(Witness {
                source: WitnessSource::Haar { index },
                min_eig,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub n_instances: usize,
    /// Haar unitaries checked per Markov instance.
    pub n_unitaries: usize,
    /// Haar unitaries tried per non-Markov instance after the θ family.
    pub n_search: usize,
}

impl CampaignConfig {
    pub fn new(seed: u64, n_instances: usize) -> Self {
        CampaignConfig {
            seed,
            n_instances,
            n_unitaries: 10,
            n_search: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovInstance {
    pub d_s: usize,
    pub d_e: usize,
    pub cmi: f64,
    pub is_markov: bool,
    pub checks: usize,
    pub violations: usize,
    pub worst_min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonMarkovInstance {
    pub d_s: usize,
    pub d_e: usize,
    pub cmi: f64,
    pub is_markov: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub markov: Vec<MarkovInstance>,
    pub non_markov: Vec<NonMarkovInstance>,
    /// Reduced dynamics of Markov references found non-CP (expected zero).
    pub counterexamples: usize,
    /// Fraction of genuinely non-Markov references with a witness found.
    pub witness_rate: f64,
}

/// Largest accepted condition number of the system states' Gram matrix.
/// Near-degenerate bases amplify rounding in the fitted assignment.
const MAX_GRAM_CONDITION: f64 = 1e4;

/// System states `(1 - p) I/d + p |ψ><ψ|` with `p = 1/2`, so every eigenvalue
/// is at least `1/(2d)`. Resampled until they form a well-conditioned basis.
fn random_system_states(rng: &mut SeededRng, d_s: usize) -> Vec<DensityMatrix> {
    loop {
        let states: Vec<_> = (0..d_s * d_s)
            .map(|_| DensityMatrix::single(random::noisy_pure_state(rng, d_s, 0.5)).expect("valid"))
            .collect();
        let mats: Vec<_> = states.iter().map(|s| s.matrix().clone()).collect();
        let Ok(v) = crate::assignment::OperatorSubspace::new(mats, vec![d_s]) else {
            continue;
        };
        let eig = operator::eig_hermitian_unchecked(&v.gram());
        if eig.max() <= MAX_GRAM_CONDITION * eig.min() {
            return states;
        }
    }
}

/// Product pairs `ρ_S^(l) ⊗ ρ_E` with a spanning set of system states.
pub fn random_product_basis(rng: &mut SeededRng, d_s: usize, d_e: usize) -> Result<PairedBasis> {
    let sys = random_system_states(rng, d_s);
    let env = random::density_matrix(rng, vec![d_e]);
    let joint = sys.iter().map(|s| s.kron(&env)).collect();
    PairedBasis::new(sys, joint)
}

/// Pairs `ρ_S^(l) ⊗ I/d_E + κ Y` with one random Hermitian `Y` of vanishing
/// partial trace, `κ` at 90% of the largest value keeping every pair positive.
pub fn random_correlated_basis(rng: &mut SeededRng, d_s: usize, d_e: usize) -> Result<PairedBasis> {
    let sys = random_system_states(rng, d_s);
    let h = random::hermitian(rng, d_s * d_e);
    let h_s = operator::partial_trace(&h, &[d_s, d_e], &[0])?;
    let y = &h - kron(&h_s, &identity(d_e)) * c(1.0 / d_e as f64, 0.0);
    let y_norm = operator::eig_hermitian(&y)?
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let floor = sys
        .iter()
        .map(|s| operator::min_eigenvalue(s.matrix()) / d_e as f64)
        .fold(f64::INFINITY, f64::min);
    let kappa = 0.9 * floor / y_norm;
    let env = DensityMatrix::maximally_mixed(vec![d_e]);
    let joint = sys
        .iter()
        .map(|s| DensityMatrix::new(s.kron(&env).into_matrix() + &y * c(kappa, 0.0), vec![d_s, d_e]))
        .collect::<Result<Vec<_>>>()?;
    PairedBasis::new(sys, joint)
}

/// Randomized check of both directions of the Markov / CP correspondence.
///
/// Instance `k` uses `dims[k % dims.len()]`. Part (i) builds Markov
/// references from product pairs and checks the reduced dynamics is CP for
/// `n_unitaries` Haar unitaries each. Part (ii) builds correlated pairs,
/// confirms non-Markovianity, and searches for a non-CP witness unitary.
pub fn markov_campaign(config: CampaignConfig, dims: &[(usize, usize)]) -> Result<CampaignReport> {
    markov_campaign_with(config, dims, &Tolerances::default())
}

pub fn markov_campaign_with(
    config: CampaignConfig,
    dims: &[(usize, usize)],
    tols: &Tolerances,
) -> Result<CampaignReport> {
    let mut rng = random::seeded(config.seed);
    let mut markov = Vec::new();
    let mut non_markov = Vec::new();
    if dims.is_empty() && config.n_instances > 0 {
        return Err(Error::DimMismatch("campaign needs at least one (d_S, d_E) pair".into()));
    }
    for k in 0..config.n_instances {
        let (d_s, d_e) = dims[k % dims.len()];

        let pb = random_product_basis(&mut rng, d_s, d_e)?;
        let verdict = markov_test_with(&build_reference_tripartite(&pb), tols)?;
        let lambda = build_assignment(&pb)?;
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for _ in 0..config.n_unitaries {
            let u = random::haar_unitary(&mut rng, d_s * d_e);
            let (cp, min) = qmap::is_cp_with(&reduced_dynamics(&lambda, &u)?, tols.psd)?;
            if !cp {
                violations += 1;
            }
            worst = worst.min(min);
        }
        markov.push(MarkovInstance {
            d_s,
            d_e,
            cmi: verdict.cmi,
            is_markov: verdict.is_markov,
            checks: config.n_unitaries,
            violations,
            worst_min_eig: worst,
        });

        let pb = random_correlated_basis(&mut rng, d_s, d_e)?;
        let verdict = markov_test_with(&build_reference_tripartite(&pb), tols)?;
        let witness = if verdict.is_markov {
            None
        } else {
            witness_search(&build_assignment(&pb)?, &mut rng, config.n_search)?
        };
        non_markov.push(NonMarkovInstance {
            d_s,
            d_e,
            cmi: verdict.cmi,
            is_markov: verdict.is_markov,
            witness,
        });
    }
    let counterexamples = markov.iter().map(|m| m.violations).sum();
    let genuine: Vec<_> = non_markov.iter().filter(|n| !n.is_markov).collect();
    let witness_rate = if genuine.is_empty() {
        0.0
    } else {
        genuine.iter().filter(|n| n.witness.is_some()).count() as f64 / genuine.len() as f64
    };
    Ok(CampaignReport {
        config,
        markov,
        non_markov,
        counterexamples,
        witness_rate,
    })
}
