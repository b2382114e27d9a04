//! Phase encoding by the field Hamiltonian H(φ) = φ·J and the Hermitian
//! generators of its parameter derivatives.
//!
//! With `U(φ) = e^{−iH(φ)}` one has `∂_μ U(φ) = −i U(φ) A_μ` where
//! `A_μ = ∫₀¹ e^{iuH} J_μ e^{−iuH} du`. In the eigenbasis `H = VΛV†` the
//! integral is elementwise: `(V†A_μV)_{jk} = (V†J_μV)_{jk} · f(λ_j − λ_k)` with
//! `f(x) = (e^{ix} − 1)/(ix)`.

use crate::spinspace::{CollectiveOperator, HermitianSpectrum, SpinOperators, UnitaryOperator};
use crate::{CMatrix, Error, Result, C64};

/// Below this eigenvalue gap the kernel switches to its Taylor series.
pub const KERNEL_SERIES_THRESHOLD: f64 = 1e-9;

/// Default "small field" used wherever φ → 0 is meant.
pub const SMALL_PHASE: f64 = 0.01;

/// The three phases (φ_x, φ_y, φ_z), in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PhaseVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::invalid("phase components must be finite"));
        }
        Ok(Self { x, y, z })
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::new(value, value, value)
    }

    pub fn zero() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// φ = 0.01·(1, 1, 1).
    pub fn small() -> Self {
        Self {
            x: SMALL_PHASE,
            y: SMALL_PHASE,
            z: SMALL_PHASE,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// The Hermitian generators (A_x, A_y, A_z).
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub a_x: CollectiveOperator,
    pub a_y: CollectiveOperator,
    pub a_z: CollectiveOperator,
}

impl GeneratorSet {
    pub fn as_array(&self) -> [&CollectiveOperator; 3] {
        [&self.a_x, &self.a_y, &self.a_z]
    }

    pub fn n_spins(&self) -> usize {
        self.a_x.n_spins()
    }
}

/// H(φ) = φ_x J_x + φ_y J_y + φ_z J_z.
pub fn hamiltonian(phi: &PhaseVector, n_spins: usize) -> Result<CollectiveOperator> {
    let ops = SpinOperators::new(n_spins)?;
    hamiltonian_from(&ops, phi)
}

pub(crate) fn hamiltonian_from(ops: &SpinOperators, phi: &PhaseVector) -> Result<CollectiveOperator> {
    ops.x
        .scaled(phi.x)
        .add_scaled(phi.y, &ops.y)?
        .add_scaled(phi.z, &ops.z)
}

/// U(φ) = e^{−iH(φ)}.
pub fn phase_unitary(phi: &PhaseVector, n_spins: usize) -> Result<UnitaryOperator> {
    crate::spinspace::unitary_from_generator(&hamiltonian(phi, n_spins)?, 1.0)
}

/// `f(x) = (e^{ix} − 1)/(ix)` by its Taylor series `1 + ix/2 − x²/6`.
pub fn kernel_series(x: f64) -> C64 {
    C64::new(1.0 - x * x / 6.0, x / 2.0)
}

/// `f(x) = (e^{ix} − 1)/(ix) = sin(x)/x + i·2sin²(x/2)/x`, free of
/// cancellation for small nonzero `x`.
pub fn kernel_closed(x: f64) -> C64 {
    let half = (x / 2.0).sin();
    C64::new(x.sin() / x, 2.0 * half * half / x)
}

pub fn phase_kernel(x: f64) -> C64 {
    if x.abs() < KERNEL_SERIES_THRESHOLD {
        kernel_series(x)
    } else {
        kernel_closed(x)
    }
}

/// `∫₀¹ e^{iuH} O e^{−iuH} du` for each operator `O`, given the spectrum
/// of `H`. Works for any matrix dimension. The result is Hermitian up to
/// eigensolver rounding when every `O` is.
pub fn averaged_operators<const K: usize>(spectrum: &HermitianSpectrum, ops: [&CMatrix; K]) -> [CMatrix; K] {
    let v = spectrum.eigenvectors();
    let lam = spectrum.eigenvalues();
    let dim = lam.len();
    ops.map(|op| {
        let mut rotated = v.ad_mul(&(op * v));
        for k in 0..dim {
            for j in 0..dim {
                rotated[(j, k)] *= phase_kernel(lam[j] - lam[k]);
            }
        }
        v * rotated * v.adjoint()
    })
}

pub fn generator_operators(phi: &PhaseVector, n_spins: usize) -> Result<GeneratorSet> {
    let ops = SpinOperators::new(n_spins)?;
    generators_from(&ops, phi)
}

pub(crate) fn generators_from(ops: &SpinOperators, phi: &PhaseVector) -> Result<GeneratorSet> {
    let n = ops.n_spins();
    let h = hamiltonian_from(ops, phi)?;
    let [a_x, a_y, a_z] = averaged_operators(
        &h.spectrum(),
        [ops.x.matrix(), ops.y.matrix(), ops.z.matrix()],
    );
    Ok(GeneratorSet {
        a_x: CollectiveOperator::hermitian(n, a_x),
        a_y: CollectiveOperator::hermitian(n, a_y),
        a_z: CollectiveOperator::hermitian(n, a_z),
    })
}
