//! Quantum and classical Fisher information for the three-phase problem.

use nalgebra::{Cholesky, Matrix3, SymmetricEigen};

use crate::encoding::{generators_from, GeneratorSet, PhaseVector};
use crate::spinspace::{
    hermiticity_residual, max_abs, HermitianSpectrum, PureState, SpinOperators,
};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Largest accepted condition number when inverting a QFIM.
pub const QFIM_CONDITION_LIMIT: f64 = 1e12;
/// Eigenvalue pairs with `p_j + p_k` at or below this are outside the support.
pub const SLD_EIGEN_FLOOR: f64 = 1e-12;
/// Outcomes with smaller probability are dropped from the CFIM sum.
pub const CFIM_PROBABILITY_FLOOR: f64 = 1e-12;

/// `Tr[𝓘⁻¹]`, or the reason it could not be formed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TotalVariance {
    Finite(f64),
    Singular { min_eigenvalue: f64 },
}

impl TotalVariance {
    /// The variance, with `+∞` standing in for a singular QFIM.
    pub fn value(&self) -> f64 {
        match *self {
            TotalVariance::Finite(v) => v,
            TotalVariance::Singular { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TotalVariance::Finite(_))
    }

    fn from_qfim(qfim: &Matrix3<f64>) -> Self {
        match total_variance(qfim) {
            Ok(v) => TotalVariance::Finite(v),
            Err(Error::SingularQfim { min_eigenvalue }) => TotalVariance::Singular { min_eigenvalue },
            Err(_) => unreachable!("total_variance only fails with SingularQfim"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QfimResult {
    pub qfim: Matrix3<f64>,
    /// `Im⟨A_μ A_ν⟩`; zero for results computed from mixed states.
    pub d_matrix: Matrix3<f64>,
    pub d_norm: f64,
    pub total_variance: TotalVariance,
}

impl QfimResult {
    /// Derives the Frobenius norm and total variance from the two matrices.
    pub fn from_matrices(qfim: Matrix3<f64>, d_matrix: Matrix3<f64>) -> Self {
        Self {
            total_variance: TotalVariance::from_qfim(&qfim),
            d_norm: frobenius(&d_matrix),
            qfim,
            d_matrix,
        }
    }
}

pub fn frobenius(m: &Matrix3<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Pure-state QFIM of `U(φ)|probe⟩`.
pub fn qfim_pure(probe: &PureState, phi: &PhaseVector) -> Result<QfimResult> {
    let ops = SpinOperators::new(probe.n_spins())?;
    let gens = generators_from(&ops, phi)?;
    qfim_with_generators(probe, &gens)
}

/// QFIM and 𝒟 from precomputed generators; sweeps over probes at a fixed
/// field reuse one [`GeneratorSet`].
pub fn qfim_with_generators(probe: &PureState, gens: &GeneratorSet) -> Result<QfimResult> {
    let (gram, mean) = generator_moments(probe, gens)?;
    let mut qfim = Matrix3::zeros();
    let mut d = Matrix3::zeros();
    for mu in 0..3 {
        for nu in 0..3 {
            qfim[(mu, nu)] = 4.0 * (gram[(mu, nu)].re - mean[mu] * mean[nu]);
            d[(mu, nu)] = gram[(mu, nu)].im;
        }
    }
    Ok(QfimResult::from_matrices(qfim, d))
}

/// `(⟨A_μ A_ν⟩, ⟨A_μ⟩)`.
fn generator_moments(probe: &PureState, gens: &GeneratorSet) -> Result<(Matrix3<C64>, [f64; 3])> {
    if probe.n_spins() != gens.n_spins() {
        return Err(Error::invalid(format!(
            "probe has {} spins but generators act on {}",
            probe.n_spins(),
            gens.n_spins()
        )));
    }
    let psi = probe.amplitudes();
    let applied: Vec<CVector> = gens.as_array().iter().map(|a| a.apply(probe)).collect();
    let mut gram = Matrix3::zeros();
    for mu in 0..3 {
        for nu in 0..3 {
            gram[(mu, nu)] = applied[mu].dotc(&applied[nu]);
        }
    }
    let mean = [0, 1, 2].map(|mu| psi.dotc(&applied[mu]).re);
    Ok((gram, mean))
}

/// 𝒟 = Im⟨Ψ|A_μ A_ν|Ψ⟩ and its Frobenius norm.
pub fn d_matrix(probe: &PureState, phi: &PhaseVector) -> Result<(Matrix3<f64>, f64)> {
    let ops = SpinOperators::new(probe.n_spins())?;
    let gens = generators_from(&ops, phi)?;
    let (gram, _) = generator_moments(probe, &gens)?;
    let d = gram.map(|z| z.im);
    Ok((d, frobenius(&d)))
}

/// Boundary-term expression for 𝒟_yz at φ = 0:
/// `(J/2)·Im[⟨Ψ|−J+1⟩⟨−J|Ψ⟩ − ⟨Ψ|J−1⟩⟨J|Ψ⟩]·√(J(J+1) − J(J−1))`.
pub fn dyz_analytic(probe: &PureState) -> f64 {
    let c = probe.amplitudes();
    let n = probe.n_spins();
    let j = n as f64 / 2.0;
    // Dicke index 0 is m = J, index n is m = −J
    let bracket = c[n - 1].conj() * c[n] - c[1].conj() * c[0];
    (j / 2.0) * bracket.im * (j * (j + 1.0) - j * (j - 1.0)).sqrt()
}

/// `Tr[𝓘⁻¹]` via a Cholesky solve, refusing matrices whose condition
/// number exceeds [`QFIM_CONDITION_LIMIT`].
pub fn total_variance(qfim: &Matrix3<f64>) -> Result<f64> {
    let sym = (qfim + qfim.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if !(min > 0.0) || !(max / min <= QFIM_CONDITION_LIMIT) {
        return Err(Error::SingularQfim { min_eigenvalue: min });
    }
    let chol = Cholesky::new(sym).ok_or(Error::SingularQfim { min_eigenvalue: min })?;
    Ok(chol.inverse().trace())
}

/// Density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    matrix: CMatrix,
}

impl MixedState {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const EIGEN_TOL: f64 = 1e-9;

    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::invalid("density matrix must be square and non-empty"));
        }
        let herm = hermiticity_residual(&matrix);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::invalid(format!("density matrix not Hermitian ({herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::invalid(format!("density matrix trace {tr} != 1")));
        }
        let min = HermitianSpectrum::new(&matrix).eigenvalues().min();
        if min < -Self::EIGEN_TOL {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn from_pure(psi: &CVector) -> Result<Self> {
        if (psi.norm_squared() - 1.0).abs() > crate::spinspace::NORM_TOL {
            return Err(Error::invalid("state vector is not normalized"));
        }
        Ok(Self {
            matrix: psi * psi.adjoint(),
        })
    }

    /// Skips validation; for matrices produced by trace- and
    /// positivity-preserving maps.
    pub(crate) fn trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `U ρ U†`.
    pub fn conjugated(&self, unitary: &CMatrix) -> Self {
        Self {
            matrix: unitary * &self.matrix * unitary.adjoint(),
        }
    }
}

/// Symmetric logarithmic derivatives of a fixed density matrix.
pub struct SldSolver {
    spectrum: HermitianSpectrum,
}

impl SldSolver {
    pub fn new(rho: &MixedState) -> Self {
        Self {
            spectrum: HermitianSpectrum::new(rho.matrix()),
        }
    }

    /// L solving `ρL + Lρ = 2∂ρ` on the support of ρ; entries with
    /// `p_j + p_k ≤` [`SLD_EIGEN_FLOOR`] are zero.
    pub fn solve(&self, derivative: &CMatrix) -> CMatrix {
        let v = self.spectrum.eigenvectors();
        let p = self.spectrum.eigenvalues();
        let mut l = v.ad_mul(&(derivative * v));
        for k in 0..p.len() {
            for j in 0..p.len() {
                let s = p[j] + p[k];
                l[(j, k)] = if s > SLD_EIGEN_FLOOR {
                    l[(j, k)] * (2.0 / s)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        }
        v * l * v.adjoint()
    }
}

/// QFIM `Re Tr[ρ L_μ L_ν]` of a mixed state with the given derivatives.
/// The returned 𝒟 is zero.
pub fn qfim_mixed(rho: &MixedState, derivatives: &[CMatrix; 3]) -> Result<QfimResult> {
    for (mu, d) in derivatives.iter().enumerate() {
        if d.nrows() != rho.dim() || d.ncols() != rho.dim() {
            return Err(Error::invalid(format!("derivative {mu} has the wrong shape")));
        }
        let scale = max_abs(d).max(1.0);
        let herm = hermiticity_residual(d);
        if herm > 1e-10 * scale {
            return Err(Error::invalid(format!(
                "derivative {mu} is not Hermitian (residual {herm:e})"
            )));
        }
    }
    let solver = SldSolver::new(rho);
    let slds: Vec<CMatrix> = derivatives.iter().map(|d| solver.solve(d)).collect();
    let rho_l: Vec<CMatrix> = slds.iter().map(|l| rho.matrix() * l).collect();
    let mut qfim = Matrix3::zeros();
    for mu in 0..3 {
        for nu in mu..3 {
            // Tr[(ρL_μ) L_ν] without forming the product
            let tr: C64 = rho_l[mu]
                .iter()
                .zip(slds[nu].transpose().iter())
                .map(|(a, b)| a * b)
                .sum();
            qfim[(mu, nu)] = tr.re;
            qfim[(nu, mu)] = tr.re;
        }
    }
    Ok(QfimResult::from_matrices(qfim, Matrix3::zeros()))
}

/// POVM effects on a state space of fixed dimension.
#[derive(Clone, Debug)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub const COMPLETENESS_TOL: f64 = 1e-9;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let dim = effects
            .first()
            .ok_or_else(|| Error::invalid("POVM needs at least one effect"))?
            .nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for (k, e) in effects.iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::invalid(format!("effect {k} has the wrong shape")));
            }
            if hermiticity_residual(e) > Self::PSD_TOL {
                return Err(Error::invalid(format!("effect {k} is not Hermitian")));
            }
            let min = HermitianSpectrum::new(e).eigenvalues().min();
            if min < -Self::PSD_TOL {
                return Err(Error::invalid(format!("effect {k} has eigenvalue {min:e}")));
            }
            sum += e;
        }
        let gap = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if gap > Self::COMPLETENESS_TOL {
            return Err(Error::invalid(format!("effects sum to identity only within {gap:e}")));
        }
        Ok(Self { effects })
    }

    /// Rescales positive operators `G_k` into `S^{−1/2} G_k S^{−1/2}` with
    /// `S = Σ G_k`, which sums to the identity whenever `S` is invertible.
    pub fn from_positive_operators(ops: Vec<CMatrix>) -> Result<Self> {
        let dim = ops.first().ok_or_else(|| Error::invalid("no operators"))?.nrows();
        let mut sum = CMatrix::zeros(dim, dim);
        for g in &ops {
            sum += g;
        }
        let spec = HermitianSpectrum::new(&sum);
        if spec.eigenvalues().min() <= 1e-12 {
            return Err(Error::invalid("operators do not span the space"));
        }
        let v = spec.eigenvectors();
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::new(1.0 / spec.eigenvalues()[j].sqrt(), 0.0);
        }
        let inv_sqrt = crate::spinspace::hermitian_part(&(scaled * v.adjoint()));
        let effects = ops
            .iter()
            .map(|g| crate::spinspace::hermitian_part(&(&inv_sqrt * g * &inv_sqrt)))
            .collect();
        Self::new(effects)
    }

    /// `{|ψ⟩⟨ψ|, I − |ψ⟩⟨ψ|}`.
    pub fn projector_and_complement(psi: &CVector) -> Result<Self> {
        let dim = psi.len();
        let proj = psi * psi.adjoint();
        let comp = CMatrix::identity(dim, dim) - &proj;
        Self::new(vec![proj, comp])
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }
}

/// An encoded state together with its analytic parameter derivatives.
#[derive(Clone, Debug)]
pub struct EncodedOutput {
    pub state: MixedState,
    pub derivatives: [CMatrix; 3],
}

/// `ρ_out = U(φ)|ψ⟩⟨ψ|U†(φ)` and `∂_μρ_out` from `∂_μ|ψ(φ)⟩ = −iU(φ)A_μ|ψ⟩`.
pub fn pure_encoded_output(probe: &PureState, phi: &PhaseVector) -> Result<EncodedOutput> {
    let ops = SpinOperators::new(probe.n_spins())?;
    let h = crate::encoding::hamiltonian_from(&ops, phi)?;
    let spectrum = h.spectrum();
    let gens = generators_from(&ops, phi)?;
    let out = spectrum.evolve(probe.amplitudes(), 1.0);
    let minus_i = C64::new(0.0, -1.0);
    let derivatives = gens.as_array().map(|a| {
        let d = spectrum.evolve(&a.apply(probe), 1.0) * minus_i;
        &d * out.adjoint() + &out * d.adjoint()
    });
    Ok(EncodedOutput {
        state: MixedState::trusted(&out * out.adjoint()),
        derivatives,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfimResult {
    pub fisher: Matrix3<f64>,
    /// Some dropped outcome had vanishing probability but a nonvanishing
    /// derivative, so the true CFIM may diverge there.
    pub divergent: bool,
}

/// Classical Fisher information of `povm` on the encoded output.
pub fn cfim(output: &EncodedOutput, povm: &Povm) -> Result<CfimResult> {
    let rho = output.state.matrix();
    if povm.dim() != rho.nrows() {
        return Err(Error::invalid("POVM and state dimensions differ"));
    }
    let trace_with = |effect: &CMatrix, m: &CMatrix| -> f64 {
        effect
            .iter()
            .zip(m.transpose().iter())
            .map(|(a, b)| a * b)
            .sum::<C64>()
            .re
    };
    let mut fisher = Matrix3::zeros();
    let mut divergent = false;
    let mut total = 0.0;
    let mut kept = 0usize;
    for effect in povm.effects() {
        let p = trace_with(effect, rho);
        total += p;
        let grad = [0, 1, 2].map(|mu| trace_with(effect, &output.derivatives[mu]));
        if p < CFIM_PROBABILITY_FLOOR {
            if grad.iter().any(|g| g.abs() > 1e-9) {
                divergent = true;
            }
            continue;
        }
        kept += 1;
        for mu in 0..3 {
            for nu in 0..3 {
                fisher[(mu, nu)] += grad[mu] * grad[nu] / p;
            }
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("outcome probabilities sum to {total}")));
    }
    if kept == 0 {
        return Err(Error::DegenerateMeasurement);
    }
    Ok(CfimResult { fisher, divergent })
}
