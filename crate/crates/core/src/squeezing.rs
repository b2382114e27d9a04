//! One-axis, two-axis and twist-and-turn squeezing, the squeeze–encode–echo
//! protocol, and spin-squeezing parameters.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::encoding::{generators_from, hamiltonian_from, GeneratorSet, PhaseVector};
use crate::fisher::{qfim_with_generators, QfimResult};
use crate::spinspace::{
    unitary_from_generator, CollectiveOperator, HermitianSpectrum, PureState, SpinOperators,
    UnitaryOperator,
};
use crate::{CVector, Error, Result, C64};

/// Default Λ/N for twist-and-turn.
pub const DEFAULT_LAMBDA_RATIO: f64 = 0.02;
/// Below this mean-spin length the mean-spin direction is undefined.
pub const MSD_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SqueezeKind {
    /// `J_x²`
    Oat,
    /// `J_x² − J_y²`
    Tat,
    /// `J_x² − (N/Λ) J_y`
    Tnt,
}

impl SqueezeKind {
    pub const ALL: [SqueezeKind; 3] = [SqueezeKind::Oat, SqueezeKind::Tat, SqueezeKind::Tnt];

    pub fn label(self) -> &'static str {
        match self {
            SqueezeKind::Oat => "oat",
            SqueezeKind::Tat => "tat",
            SqueezeKind::Tnt => "tnt",
        }
    }
}

impl fmt::Display for SqueezeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SqueezeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oat" => Ok(SqueezeKind::Oat),
            "tat" => Ok(SqueezeKind::Tat),
            "tnt" => Ok(SqueezeKind::Tnt),
            other => Err(Error::invalid(format!("unknown squeezing kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeConfig {
    pub kind: SqueezeKind,
    /// Twisting angle χt.
    pub chi_t: f64,
    /// Λ/N, used only by [`SqueezeKind::Tnt`].
    pub lambda_ratio: f64,
    /// Exponent r of the echo `U_k^{−r}`.
    pub echo_exponent: f64,
}

impl SqueezeConfig {
    pub fn new(kind: SqueezeKind, chi_t: f64) -> Self {
        Self {
            kind,
            chi_t,
            lambda_ratio: DEFAULT_LAMBDA_RATIO,
            echo_exponent: 1.0,
        }
    }

    pub fn with_lambda_ratio(self, lambda_ratio: f64) -> Self {
        Self { lambda_ratio, ..self }
    }

    pub fn with_echo_exponent(self, echo_exponent: f64) -> Self {
        Self { echo_exponent, ..self }
    }

    pub fn with_chi_t(self, chi_t: f64) -> Self {
        Self { chi_t, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.chi_t.is_finite() || !self.echo_exponent.is_finite() {
            return Err(Error::invalid("chi_t and echo exponent must be finite"));
        }
        if self.kind == SqueezeKind::Tnt && !(self.lambda_ratio > 0.0 && self.lambda_ratio.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda ratio must be positive for TNT, got {}",
                self.lambda_ratio
            )));
        }
        Ok(())
    }
}

/// The twisting Hamiltonian G with `U_k = e^{−iχt G}`.
pub fn squeeze_generator(kind: SqueezeKind, lambda_ratio: f64, n_spins: usize) -> Result<CollectiveOperator> {
    let ops = SpinOperators::new(n_spins)?;
    generator_from(&ops, kind, lambda_ratio)
}

fn generator_from(ops: &SpinOperators, kind: SqueezeKind, lambda_ratio: f64) -> Result<CollectiveOperator> {
    let x2 = ops.x.squared();
    match kind {
        SqueezeKind::Oat => Ok(x2),
        SqueezeKind::Tat => x2.add_scaled(-1.0, &ops.y.squared()),
        SqueezeKind::Tnt => {
            if !(lambda_ratio > 0.0) {
                return Err(Error::invalid("lambda ratio must be positive for TNT"));
            }
            x2.add_scaled(-1.0 / lambda_ratio, &ops.y)
        }
    }
}

/// `U_k = e^{−iχt G}`.
pub fn squeeze_unitary(cfg: &SqueezeConfig, n_spins: usize) -> Result<UnitaryOperator> {
    cfg.validate()?;
    let g = squeeze_generator(cfg.kind, cfg.lambda_ratio, n_spins)?;
    unitary_from_generator(&g, cfg.chi_t)
}

/// `U_k|ψ⟩`.
pub fn squeezed_probe(probe: &PureState, cfg: &SqueezeConfig) -> Result<PureState> {
    cfg.validate()?;
    let g = squeeze_generator(cfg.kind, cfg.lambda_ratio, probe.n_spins())?;
    Ok(probe.evolved(&g.spectrum(), cfg.chi_t))
}

/// `U_k^{−r} U(φ) U_k |ψ⟩`.
pub fn echo_state(probe: &PureState, cfg: &SqueezeConfig, phi: &PhaseVector) -> Result<PureState> {
    cfg.validate()?;
    let ops = SpinOperators::new(probe.n_spins())?;
    let g = generator_from(&ops, cfg.kind, cfg.lambda_ratio)?.spectrum();
    let h = hamiltonian_from(&ops, phi)?.spectrum();
    Ok(probe
        .evolved(&g, cfg.chi_t)
        .evolved(&h, 1.0)
        .evolved(&g, -cfg.echo_exponent * cfg.chi_t))
}

/// QFIM of the echo protocol, which equals the QFIM of `U_k|ψ⟩` under the
/// phase encoding.
pub fn qfim_squeezed(probe: &PureState, cfg: &SqueezeConfig, phi: &PhaseVector) -> Result<QfimResult> {
    let squeezed = squeezed_probe(probe, cfg)?;
    let ops = SpinOperators::new(probe.n_spins())?;
    qfim_with_generators(&squeezed, &generators_from(&ops, phi)?)
}

/// QFIM computed from the full echo output `W U(φ) U_k|ψ⟩` with
/// `W = U_k^{−r}` carried through every derivative. Unlike
/// [`qfim_squeezed`] this never drops the echo, so it is the quantity to
/// compare across r.
pub fn qfim_echo(probe: &PureState, cfg: &SqueezeConfig, phi: &PhaseVector) -> Result<QfimResult> {
    cfg.validate()?;
    let ops = SpinOperators::new(probe.n_spins())?;
    let g = generator_from(&ops, cfg.kind, cfg.lambda_ratio)?.spectrum();
    let h = hamiltonian_from(&ops, phi)?.spectrum();
    let gens = generators_from(&ops, phi)?;
    let back = -cfg.echo_exponent * cfg.chi_t;
    let squeezed = g.evolve(probe.amplitudes(), cfg.chi_t);
    let out = g.evolve(&h.evolve(&squeezed, 1.0), back);
    let minus_i = C64::new(0.0, -1.0);
    let derivs: Vec<CVector> = gens
        .as_array()
        .iter()
        .map(|a| g.evolve(&h.evolve(&(a.matrix() * &squeezed), 1.0), back) * minus_i)
        .collect();
    let mut qfim = Matrix3::zeros();
    let mut d = Matrix3::zeros();
    for mu in 0..3 {
        for nu in 0..3 {
            let overlap = derivs[mu].dotc(&out) * out.dotc(&derivs[nu]);
            let g_mn = derivs[mu].dotc(&derivs[nu]);
            qfim[(mu, nu)] = 4.0 * (g_mn - overlap).re;
            // ⟨∂_μψ|∂_νψ⟩ = ⟨A_μA_ν⟩ on the squeezed probe
            d[(mu, nu)] = g_mn.im;
        }
    }
    Ok(QfimResult::from_matrices(qfim, d))
}

/// Squeezing trajectory `χt ↦ e^{−iχt G}|ψ⟩` for one probe, kind and field.
/// The twisting spectrum and the phase generators are computed once, so
/// each point costs only matrix-vector work.
#[derive(Clone, Debug)]
pub struct SqueezeTrajectory {
    probe: PureState,
    kind: SqueezeKind,
    lambda_ratio: f64,
    ops: SpinOperators,
    spectrum: HermitianSpectrum,
    generators: GeneratorSet,
}

/// One evaluated point of a [`SqueezeTrajectory`].
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub chi_t: f64,
    pub qfim: QfimResult,
    pub squeezing: Result<SqueezingReport>,
}

impl TrajectoryPoint {
    /// ξ_S², available even when the mean-spin direction is not.
    pub fn xi_s_sq(&self) -> f64 {
        match &self.squeezing {
            Ok(r) => r.xi_s_sq,
            Err(Error::MsdUndefined { xi_s_sq }) => *xi_s_sq,
            Err(_) => f64::NAN,
        }
    }
}

impl SqueezeTrajectory {
    pub fn new(probe: &PureState, kind: SqueezeKind, lambda_ratio: f64, phi: &PhaseVector) -> Result<Self> {
        SqueezeConfig::new(kind, 0.0).with_lambda_ratio(lambda_ratio).validate()?;
        let ops = SpinOperators::new(probe.n_spins())?;
        let spectrum = generator_from(&ops, kind, lambda_ratio)?.spectrum();
        let generators = generators_from(&ops, phi)?;
        Ok(Self {
            probe: probe.clone(),
            kind,
            lambda_ratio,
            ops,
            spectrum,
            generators,
        })
    }

    pub fn kind(&self) -> SqueezeKind {
        self.kind
    }

    pub fn lambda_ratio(&self) -> f64 {
        self.lambda_ratio
    }

    pub fn n_spins(&self) -> usize {
        self.probe.n_spins()
    }

    pub fn state(&self, chi_t: f64) -> PureState {
        self.probe.evolved(&self.spectrum, chi_t)
    }

    pub fn qfim(&self, chi_t: f64) -> QfimResult {
        qfim_with_generators(&self.state(chi_t), &self.generators)
            .expect("trajectory generators match the probe size")
    }

    pub fn evaluate(&self, chi_t: f64) -> TrajectoryPoint {
        let state = self.state(chi_t);
        TrajectoryPoint {
            chi_t,
            qfim: qfim_with_generators(&state, &self.generators)
                .expect("trajectory generators match the probe size"),
            squeezing: squeezing_report(&self.ops, &state, SqueezingBranch::Minus),
        }
    }
}

/// Sign taken in front of the square root in ξ_S².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SqueezingBranch {
    /// Minimal-variance quadrature.
    #[default]
    Minus,
    /// Maximal-variance quadrature.
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingReport {
    pub xi_h_sq: f64,
    pub xi_s_sq: f64,
    pub xi_r_sq: f64,
    pub msd_theta: f64,
    pub msd_phi: f64,
}

/// Mean-spin direction `(θ, φ)` of a mean spin vector, with φ in `[0, 2π)`.
/// Returns `None` when `|⟨J⟩|` is below [`MSD_THRESHOLD`].
pub fn mean_spin_direction(mean: [f64; 3]) -> Option<(f64, f64)> {
    let [x, y, z] = mean;
    let len = (x * x + y * y + z * z).sqrt();
    if len < MSD_THRESHOLD {
        return None;
    }
    // θ = arccos(⟨J_z⟩/|J|); φ = arccos(⟨J_x⟩/|J sinθ|), reflected to
    // 2π − φ when ⟨J_y⟩ ≤ 0. The atan2 forms are the same angles without
    // the loss of precision of arccos near ±1.
    let theta = (x * x + y * y).sqrt().atan2(z);
    let mut phi = y.atan2(x);
    if phi < 0.0 {
        phi += TAU;
    }
    if phi >= TAU {
        phi -= TAU;
    }
    Some((theta, phi))
}

/// ξ_H², ξ_S², ξ_R² and the mean-spin direction of `state`, using the
/// minimal-variance branch.
pub fn squeezing_parameter(state: &PureState) -> Result<SqueezingReport> {
    squeezing_parameter_with(state, SqueezingBranch::Minus)
}

pub fn squeezing_parameter_with(state: &PureState, branch: SqueezingBranch) -> Result<SqueezingReport> {
    let ops = SpinOperators::new(state.n_spins())?;
    squeezing_report(&ops, state, branch)
}

/// First and symmetrized second moments `(⟨J_μ⟩, Re⟨J_μJ_ν⟩)`.
fn spin_moments(ops: &SpinOperators, state: &PureState) -> (Vector3<f64>, Matrix3<f64>) {
    let applied: Vec<CVector> = ops.as_array().iter().map(|o| o.apply(state)).collect();
    let psi = state.amplitudes();
    let mean = Vector3::from_fn(|mu, _| psi.dotc(&applied[mu]).re);
    let second = Matrix3::from_fn(|mu, nu| applied[mu].dotc(&applied[nu]).re);
    (mean, second)
}

/// `(2/N)[⟨J²_a + J²_b⟩ ± √(⟨J²_a − J²_b⟩² + 4cov²)]` for orthonormal `a`, `b`.
fn xi_s_in_plane(
    n: f64,
    mean: &Vector3<f64>,
    second: &Matrix3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    branch: SqueezingBranch,
) -> f64 {
    let saa = a.dot(&(second * a));
    let sbb = b.dot(&(second * b));
    let cov = a.dot(&(second * b)) - a.dot(mean) * b.dot(mean);
    let root = ((saa - sbb).powi(2) + 4.0 * cov * cov).sqrt();
    let sign = match branch {
        SqueezingBranch::Minus => -1.0,
        SqueezingBranch::Plus => 1.0,
    };
    (2.0 / n) * (saa + sbb + sign * root)
}

fn squeezing_report(ops: &SpinOperators, state: &PureState, branch: SqueezingBranch) -> Result<SqueezingReport> {
    let n = state.n_spins() as f64;
    let (mean, second) = spin_moments(ops, state);
    let Some((theta, phi)) = mean_spin_direction([mean.x, mean.y, mean.z]) else {
        let cov = second - mean * mean.transpose();
        let eig = SymmetricEigen::new(cov);
        let dominant = eig.eigenvalues.imax();
        let plane: Vec<Vector3<f64>> = (0..3)
            .filter(|&k| k != dominant)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        let xi_s_sq = xi_s_in_plane(n, &mean, &second, &plane[0], &plane[1], branch);
        return Err(Error::MsdUndefined { xi_s_sq });
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let n2 = Vector3::new(-sp, cp, 0.0);
    let n3 = Vector3::new(ct * cp, ct * sp, -st);
    let xi_s_sq = xi_s_in_plane(n, &mean, &second, &n2, &n3, branch);
    let len_sq = mean.norm_squared();
    // the quadrature variance entering ξ_S² is N·ξ_S²/4
    let variance = n * xi_s_sq / 4.0;
    Ok(SqueezingReport {
        xi_h_sq: n * variance / len_sq,
        xi_s_sq,
        xi_r_sq: n * n / (4.0 * len_sq) * xi_s_sq,
        msd_theta: theta,
        msd_phi: phi,
    })
}
