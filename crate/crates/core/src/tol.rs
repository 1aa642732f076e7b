//! Numerical tolerance ladder shared by every module.
//!
//! Values are absolute and sized for double precision with operator orders
//! up to 64.

use serde::{Deserialize, Serialize};

/// Max |M[i][j] - conj(M[j][i])| for a matrix to count as Hermitian.
pub const HERM: f64 = 1e-10;
/// Max |U^dag U - I| entry for a matrix to count as unitary.
pub const UNIT: f64 = 1e-10;
/// Eigenvector orthonormality.
pub const ORTH: f64 = 1e-10;
/// Eigenvalues down to -PSD are roundoff; below that, genuine negativity.
pub const PSD: f64 = 1e-9;
/// Unit-trace tolerance for density matrices.
pub const TRACE: f64 = 1e-10;
/// Gram / Choi eigenvalues at or below this are numerical zeros.
pub const RANK: f64 = 1e-10;
/// Residual allowed when reconstructing a map from pairs or Kraus terms.
pub const RECON: f64 = 1e-9;
/// Trace-preservation tolerance.
pub const TP: f64 = 1e-10;
/// Marginal consistency between paired system and joint states.
pub const MARGINAL: f64 = 1e-10;
/// Conditional mutual information (nats) below which a state is Markov.
pub const CMI: f64 = 1e-8;
/// Steering outcomes with probability at or below this are rejected.
pub const PROB: f64 = 1e-12;
/// Trace-norm tolerance for structural product tests.
pub const PRODUCT: f64 = 1e-8;
/// Choi eigenvalue below -WITNESS certifies a non-CP map in sweeps.
pub const WITNESS: f64 = 1e-6;

/// Overridable subset of the ladder, as exposed to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub psd: f64,
    pub cmi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { psd: PSD, cmi: CMI }
    }
}
