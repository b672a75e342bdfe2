//! `ψ(t) = e^{−iHt} ψ` for time-independent Hermitian `H`.
//!
//! The working backend diagonalizes `H` once. An independent
//! scaling-and-squaring exponential is kept for cross-checking.

use nalgebra::{DMatrix, DVector};

use super::{DenseState, StateError, C64, HERMITIAN_TOL};

pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Rejects `H` with `‖H − H†‖_max > 1e-12`.
pub fn check_hermitian(h: &DMatrix<C64>) -> Result<(), StateError> {
    if !h.is_square() {
        return Err(StateError::DimensionMismatch { expected: h.nrows(), got: h.ncols() });
    }
    let n = h.nrows();
    let mut deviation: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            deviation = deviation.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    if deviation > HERMITIAN_TOL || deviation.is_nan() {
        return Err(StateError::NotHermitian { deviation });
    }
    Ok(())
}

fn check_dims(h: &DMatrix<C64>, cap: usize) -> Result<(), StateError> {
    check_hermitian(h)?;
    if h.nrows() > cap {
        return Err(StateError::DimensionCap { dim: h.nrows(), cap });
    }
    Ok(())
}

/// Spectral decomposition `H = V diag(E) V†`.
#[derive(Debug, Clone)]
pub struct Propagator {
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<C64>) -> Result<Self, StateError> {
        Self::with_cap(h, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(h: &DMatrix<C64>, cap: usize) -> Result<Self, StateError> {
        check_dims(h, cap)?;
        // symmetrize away sub-tolerance asymmetry before diagonalizing
        let sym = (h + h.adjoint()).scale(0.5);
        let eig = sym.symmetric_eigen();
        Ok(Self { energies: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    /// Coefficients `V†ψ` of `psi` in the eigenbasis.
    pub fn spectral_coefficients(&self, psi: &[C64]) -> Result<DVector<C64>, StateError> {
        if psi.len() != self.dim() {
            return Err(StateError::DimensionMismatch { expected: self.dim(), got: psi.len() });
        }
        Ok(self.vectors.adjoint() * DVector::from_column_slice(psi))
    }

    /// `⟨row|ψ(t)⟩` from precomputed spectral coefficients.
    pub fn amplitude_at(&self, coeffs: &DVector<C64>, row: usize, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.dim() {
            let phase = C64::from_polar(1.0, -self.energies[k] * t);
            acc += self.vectors[(row, k)] * coeffs[k] * phase;
        }
        acc
    }

    pub fn evolve_vec(&self, psi: &[C64], t: f64) -> Result<Vec<C64>, StateError> {
        let mut c = self.spectral_coefficients(psi)?;
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= C64::from_polar(1.0, -self.energies[k] * t);
        }
        Ok((&self.vectors * c).iter().copied().collect())
    }

    /// Full matrix `e^{−iHt}`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let phases = DVector::from_iterator(
            self.dim(),
            self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)),
        );
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, k| self.vectors[(i, k)] * phases[k]);
        scaled * self.vectors.adjoint()
    }

    pub fn evolve(&self, state: &DenseState, t: f64) -> Result<DenseState, StateError> {
        Ok(state.with_amps(self.evolve_vec(state.amps(), t)?))
    }
}

/// Evolves by diagonalization.
pub fn evolve(state: &DenseState, h: &DMatrix<C64>, t: f64) -> Result<DenseState, StateError> {
    Propagator::new(h)?.evolve(state, t)
}

/// Evolves through [`expm_scaled`], sharing no code with [`evolve`].
pub fn evolve_crosscheck(state: &DenseState, h: &DMatrix<C64>, t: f64) -> Result<DenseState, StateError> {
    check_dims(h, DEFAULT_DIMENSION_CAP)?;
    if h.nrows() != state.dim() {
        return Err(StateError::DimensionMismatch { expected: state.dim(), got: h.nrows() });
    }
    let generator = h.map(|x| x * C64::new(0.0, -t));
    let u = expm_scaled(&generator);
    let psi = u * DVector::from_column_slice(state.amps());
    Ok(state.with_amps(psi.iter().copied().collect()))
}

fn norm1(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^A` by scaling and squaring around a truncated Taylor series.
pub fn expm_scaled(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm = norm1(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a.scale(0.5f64.powi(squarings));
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &b;
        term.scale_mut(1.0 / k as f64);
        result += &term;
        if norm1(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
