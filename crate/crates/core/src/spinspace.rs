//! Dicke-basis representation of collective spin operators and states.
//!
//! Basis index `k = 0..=N` corresponds to `m = J − k` with `J = N/2`, so
//! `J_z = diag(J, J−1, …, −J)`.

use nalgebra::{DVector, SymmetricEigen};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Elementwise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-abs tolerance on `U†U − I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on the squared norm of a state.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::invalid(format!("unknown axis {other:?}"))),
        }
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of `M − M†`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

fn check_spins(n_spins: usize) -> Result<()> {
    if n_spins == 0 {
        return Err(Error::invalid("n_spins must be at least 1"));
    }
    Ok(())
}

fn check_dim(n_spins: usize, rows: usize, cols: usize) -> Result<()> {
    if rows != n_spins + 1 || cols != n_spins + 1 {
        return Err(Error::invalid(format!(
            "expected a {d}x{d} matrix for {n_spins} spins, got {rows}x{cols}",
            d = n_spins + 1
        )));
    }
    Ok(())
}

/// Hermitian operator on the symmetric subspace of `n_spins` spins.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveOperator {
    n_spins: usize,
    matrix: CMatrix,
}

impl CollectiveOperator {
    /// Validates dimension and Hermiticity; the stored matrix is the
    /// Hermitian part of the input.
    pub fn new(n_spins: usize, matrix: CMatrix) -> Result<Self> {
        check_spins(n_spins)?;
        check_dim(n_spins, matrix.nrows(), matrix.ncols())?;
        let residual = hermiticity_residual(&matrix);
        if residual > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "operator is not Hermitian (residual {residual:e})"
            )));
        }
        Ok(Self::hermitian(n_spins, matrix))
    }

    /// For matrices that are Hermitian by construction up to rounding.
    pub(crate) fn hermitian(n_spins: usize, matrix: CMatrix) -> Self {
        Self {
            n_spins,
            matrix: hermitian_part(&matrix),
        }
    }

    pub fn zero(n_spins: usize) -> Result<Self> {
        check_spins(n_spins)?;
        Ok(Self {
            n_spins,
            matrix: CMatrix::zeros(n_spins + 1, n_spins + 1),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_spins: self.n_spins,
            matrix: self.matrix.scale(factor),
        }
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, factor: f64, other: &CollectiveOperator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            n_spins: self.n_spins,
            matrix: &self.matrix + other.matrix.scale(factor),
        })
    }

    /// The square of the operator (Hermitian again).
    pub fn squared(&self) -> Self {
        Self::hermitian(self.n_spins, &self.matrix * &self.matrix)
    }

    /// `(AB + BA)/2`.
    pub fn anticommutator_half(&self, other: &CollectiveOperator) -> Result<Self> {
        self.check_same_space(other)?;
        let ab = &self.matrix * &other.matrix;
        Ok(Self::hermitian(self.n_spins, ab))
    }

    pub fn apply(&self, state: &PureState) -> CVector {
        &self.matrix * state.amplitudes()
    }

    /// `⟨ψ|O|ψ⟩`, real because `O` is Hermitian.
    pub fn expectation(&self, state: &PureState) -> f64 {
        state.amplitudes().dotc(&self.apply(state)).re
    }

    pub fn spectrum(&self) -> HermitianSpectrum {
        HermitianSpectrum::new(&self.matrix)
    }

    fn check_same_space(&self, other: &CollectiveOperator) -> Result<()> {
        if self.n_spins != other.n_spins {
            return Err(Error::invalid(format!(
                "operators act on {} and {} spins",
                self.n_spins, other.n_spins
            )));
        }
        Ok(())
    }
}

/// Spin-J matrix element of `J_axis` between Dicke indices.
fn spin_matrix(n_spins: usize, axis: Axis) -> CMatrix {
    let dim = n_spins + 1;
    let j = n_spins as f64 / 2.0;
    let mut out = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        let m = j - k as f64;
        if axis == Axis::Z {
            out[(k, k)] = C64::new(m, 0.0);
            continue;
        }
        if k == 0 {
            continue;
        }
        // ⟨m+1| J_± |m⟩ entries live at (k−1, k)
        let s = (j * (j + 1.0) - m * (m + 1.0)).sqrt() / 2.0;
        match axis {
            Axis::X => {
                out[(k - 1, k)] = C64::new(s, 0.0);
                out[(k, k - 1)] = C64::new(s, 0.0);
            }
            Axis::Y => {
                out[(k - 1, k)] = C64::new(0.0, -s);
                out[(k, k - 1)] = C64::new(0.0, s);
            }
            Axis::Z => unreachable!(),
        }
    }
    out
}

/// `J_axis` for `n_spins` spins in the Dicke basis.
pub fn collective_operator(n_spins: usize, axis: Axis) -> Result<CollectiveOperator> {
    check_spins(n_spins)?;
    Ok(CollectiveOperator {
        n_spins,
        matrix: spin_matrix(n_spins, axis),
    })
}

/// The triple (J_x, J_y, J_z).
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub x: CollectiveOperator,
    pub y: CollectiveOperator,
    pub z: CollectiveOperator,
}

impl SpinOperators {
    pub fn new(n_spins: usize) -> Result<Self> {
        Ok(Self {
            x: collective_operator(n_spins, Axis::X)?,
            y: collective_operator(n_spins, Axis::Y)?,
            z: collective_operator(n_spins, Axis::Z)?,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.x.n_spins()
    }

    pub fn get(&self, axis: Axis) -> &CollectiveOperator {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn as_array(&self) -> [&CollectiveOperator; 3] {
        [&self.x, &self.y, &self.z]
    }

    /// Mean spin vector `(⟨J_x⟩, ⟨J_y⟩, ⟨J_z⟩)`.
    pub fn mean(&self, state: &PureState) -> [f64; 3] {
        self.as_array().map(|op| op.expectation(state))
    }
}

/// Eigendecomposition `M = V diag(λ) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl HermitianSpectrum {
    pub fn new(matrix: &CMatrix) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `V diag(e^{−i·scale·λ}) V†`.
    pub fn exp_minus_i(&self, scale: f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let phase = C64::from_polar(1.0, -scale * self.eigenvalues[j]);
            col *= phase;
        }
        scaled * v.adjoint()
    }

    /// `e^{−i·scale·M} x` without forming the exponential.
    pub fn evolve(&self, x: &CVector, scale: f64) -> CVector {
        let mut coeffs = self.eigenvectors.ad_mul(x);
        for (c, &lam) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= C64::from_polar(1.0, -scale * lam);
        }
        &self.eigenvectors * coeffs
    }
}

/// Unitary on the symmetric subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator {
    n_spins: usize,
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(n_spins: usize, matrix: CMatrix) -> Result<Self> {
        check_spins(n_spins)?;
        check_dim(n_spins, matrix.nrows(), matrix.ncols())?;
        let out = Self { n_spins, matrix };
        let residual = out.unitarity_residual();
        if residual > UNITARY_TOL {
            return Err(Error::invalid(format!(
                "matrix is not unitary (residual {residual:e})"
            )));
        }
        Ok(out)
    }

    pub fn identity(n_spins: usize) -> Result<Self> {
        check_spins(n_spins)?;
        Ok(Self {
            n_spins,
            matrix: CMatrix::identity(n_spins + 1, n_spins + 1),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Max-abs entry of `U†U − I`.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.matrix.nrows();
        max_abs(&(self.matrix.ad_mul(&self.matrix) - CMatrix::identity(d, d)))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_spins: self.n_spins,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &UnitaryOperator) -> Result<Self> {
        if self.n_spins != other.n_spins {
            return Err(Error::invalid("unitaries act on different spin counts"));
        }
        Ok(Self {
            n_spins: self.n_spins,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn apply(&self, state: &PureState) -> PureState {
        PureState {
            n_spins: self.n_spins,
            amplitudes: &self.matrix * state.amplitudes(),
        }
    }
}

/// `e^{−i·scale·G}` through the eigendecomposition of `G`.
pub fn unitary_from_generator(g: &CollectiveOperator, scale: f64) -> Result<UnitaryOperator> {
    let residual = hermiticity_residual(g.matrix());
    if residual > HERMITIAN_TOL {
        return Err(Error::invalid(format!(
            "generator is not Hermitian (residual {residual:e})"
        )));
    }
    if !scale.is_finite() {
        return Err(Error::invalid("non-finite exponent scale"));
    }
    Ok(UnitaryOperator {
        n_spins: g.n_spins(),
        matrix: g.spectrum().exp_minus_i(scale),
    })
}

/// Normalized state vector in the Dicke basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_spins: usize,
    amplitudes: CVector,
}

impl PureState {
    /// Accepts amplitudes whose squared norm is 1 within [`NORM_TOL`].
    pub fn new(n_spins: usize, amplitudes: CVector) -> Result<Self> {
        check_spins(n_spins)?;
        if amplitudes.len() != n_spins + 1 {
            return Err(Error::invalid(format!(
                "expected {} amplitudes, got {}",
                n_spins + 1,
                amplitudes.len()
            )));
        }
        let norm_sq = amplitudes.norm_squared();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!(
                "state is not normalized (|psi|^2 = {norm_sq})"
            )));
        }
        Ok(Self {
            n_spins,
            amplitudes,
        })
    }

    /// Rescales the amplitudes to unit norm.
    pub fn normalized(n_spins: usize, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::new(n_spins, amplitudes.unscale(norm))
    }

    /// The basis state |m = J − index⟩.
    pub fn basis(n_spins: usize, index: usize) -> Result<Self> {
        check_spins(n_spins)?;
        if index > n_spins {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        let mut amps = CVector::zeros(n_spins + 1);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self {
            n_spins,
            amplitudes: amps,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn with_global_phase(&self, angle: f64) -> Self {
        Self {
            n_spins: self.n_spins,
            amplitudes: self.amplitudes.map(|z| z * C64::from_polar(1.0, angle)),
        }
    }

    /// `e^{−i·scale·G}|ψ⟩` for a precomputed spectrum of `G`.
    pub fn evolved(&self, spectrum: &HermitianSpectrum, scale: f64) -> Self {
        Self {
            n_spins: self.n_spins,
            amplitudes: spectrum.evolve(&self.amplitudes, scale),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Spin-coherent state |θ, φ⟩ pointing along (sinθ cosφ, sinθ sinφ, cosθ).
///
/// Amplitude on |m⟩ is `C(2J, J+m)^{1/2} cos(θ/2)^{J+m} sin(θ/2)^{J−m} e^{+i(J−m)φ}`,
/// i.e. `e^{−iφJ_z} e^{−iθJ_y} |J⟩` up to a global phase. θ = 0 is |m = J⟩.
pub fn coherent_state(n_spins: usize, theta: f64, phi: f64) -> Result<PureState> {
    check_spins(n_spins)?;
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::invalid(format!("theta = {theta} outside [0, pi]")));
    }
    if !(0.0..std::f64::consts::TAU).contains(&phi) {
        return Err(Error::invalid(format!("phi = {phi} outside [0, 2pi)")));
    }
    let (s, c) = (theta / 2.0).sin_cos();
    let amps = CVector::from_iterator(
        n_spins + 1,
        (0..=n_spins).map(|downs| {
            let mag = binomial(n_spins, downs).sqrt()
                * c.powi((n_spins - downs) as i32)
                * s.powi(downs as i32);
            C64::from_polar(mag, downs as f64 * phi)
        }),
    );
    PureState::normalized(n_spins, amps)
}
