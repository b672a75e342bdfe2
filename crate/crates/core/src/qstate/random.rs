//! Random Hermitian generators and Haar-random unitaries.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::C64;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `(A + A†)/2` for a complex Gaussian `A`.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    (&a + a.adjoint()).scale(0.5)
}

/// Haar-distributed unitary from the QR decomposition of a Gaussian matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    DMatrix::from_fn(dim, dim, |i, j| {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * phase
    })
}
