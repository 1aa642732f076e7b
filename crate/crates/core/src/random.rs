//! Seeded random operators: Haar unitaries, mixed states, Hermitian matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{c, identity, ComplexMatrix, DensityMatrix};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of R's
/// diagonal moved into Q.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..d {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 { rkk / rkk.norm() } else { c(1.0, 0.0) };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// Random Hermitian matrix (GUE-like scaling).
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

/// Hilbert-Schmidt random mixed state (full rank with probability one).
pub fn mixed_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    let m = &g * g.adjoint();
    let tr = m.trace();
    m / tr
}

/// `(1 - p) I/d + p |psi><psi|` with a Haar-random pure state `psi`.
pub fn noisy_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize, p: f64) -> ComplexMatrix {
    let psi = haar_unitary(rng, d).column(0).into_owned();
    let pure = &psi * psi.adjoint();
    identity(d) * c((1.0 - p) / d as f64, 0.0) + pure * c(p, 0.0)
}

pub fn density_matrix<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> DensityMatrix {
    let d = dims.iter().product();
    DensityMatrix::new(mixed_state(rng, d), dims).expect("random state is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::unitary_deviation;

    #[test]
    fn haar_unitaries_are_unitary_and_reproducible() {
        let mut a = seeded(7);
        let mut b = seeded(7);
        for d in 1..=6 {
            let u = haar_unitary(&mut a, d);
            assert!(unitary_deviation(&u) < 1e-12);
            assert_eq!(u, haar_unitary(&mut b, d));
        }
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = seeded(3);
        for d in 1..=5 {
            assert!(DensityMatrix::single(mixed_state(&mut rng, d)).is_ok());
            assert!(DensityMatrix::single(noisy_pure_state(&mut rng, d, 0.5)).is_ok());
        }
    }
}
