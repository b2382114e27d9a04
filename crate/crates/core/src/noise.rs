//! Per-particle noise on the full 2^N product space.
//!
//! Qubit 0 is the most significant bit of a basis index and bit value 0 is
//! spin up, so Dicke index k (k down spins) embeds onto the bitstrings with
//! k ones.

use nalgebra::Matrix2;

use crate::encoding::{averaged_operators, PhaseVector};
use crate::fisher::{qfim_mixed, MixedState, QfimResult};
use crate::spinspace::{hermitian_part, HermitianSpectrum, PureState};
use crate::squeezing::{squeeze_generator, SqueezeKind};
use crate::{CMatrix, CVector, Error, Result, C64};

/// Largest N accepted by [`embed_symmetric`].
pub const EMBED_LIMIT: usize = 14;
/// Largest N accepted by anything that builds 2^N × 2^N matrices.
pub const PIPELINE_LIMIT: usize = 10;

/// Tolerance on `ε_x² + ε_y² + ε_z² = 4`.
const WEIGHT_TOL: f64 = 1e-9;

/// Noise probability ε and Pauli weights of `a = Σ ε_μ σ_μ/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub epsilon: f64,
    pub weights: [f64; 3],
}

impl NoiseConfig {
    /// Equal weights `2/√3`, the only equal choice with `a² = I`.
    pub fn new(epsilon: f64) -> Result<Self> {
        let w = 2.0 / 3f64.sqrt();
        Self::with_weights(epsilon, [w, w, w])
    }

    pub fn with_weights(epsilon: f64, weights: [f64; 3]) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon = {epsilon} outside [0, 1]")));
        }
        let sum: f64 = weights.iter().map(|w| w * w).sum();
        if !((sum - 4.0).abs() <= WEIGHT_TOL) {
            return Err(Error::invalid(format!(
                "noise weights must satisfy sum of squares = 4, got {sum}"
            )));
        }
        Ok(Self { epsilon, weights })
    }

    /// The single-qubit operator `a = (ε_x σ_x + ε_y σ_y + ε_z σ_z)/2`.
    pub fn kraus_operator(&self) -> Matrix2<C64> {
        let [x, y, z] = self.weights.map(|w| w / 2.0);
        Matrix2::new(
            C64::new(z, 0.0),
            C64::new(x, -y),
            C64::new(x, y),
            C64::new(-z, 0.0),
        )
    }
}

fn check_capacity(what: &'static str, n_spins: usize, limit: usize) -> Result<()> {
    if n_spins > limit {
        return Err(Error::Capacity {
            what,
            n_spins,
            limit,
        });
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Maps Dicke amplitudes onto the symmetric product-space vector.
pub fn embed_symmetric(state: &PureState) -> Result<CVector> {
    let n = state.n_spins();
    check_capacity("symmetric embedding", n, EMBED_LIMIT)?;
    let weights: Vec<f64> = (0..=n).map(|k| 1.0 / binomial(n, k).sqrt()).collect();
    let amps = state.amplitudes();
    Ok(CVector::from_fn(1 << n, |bits, _| {
        let downs = bits.count_ones() as usize;
        amps[downs] * weights[downs]
    }))
}

/// Bit mask of qubit `q` among `n`.
fn qubit_mask(q: usize, n: usize) -> usize {
    1 << (n - 1 - q)
}

/// `(J_x, J_y, J_z)` on the 2^N product space.
pub fn product_spin_operators(n_spins: usize) -> Result<[CMatrix; 3]> {
    check_capacity("product-space operators", n_spins, PIPELINE_LIMIT)?;
    if n_spins == 0 {
        return Err(Error::invalid("n_spins must be positive"));
    }
    let dim = 1usize << n_spins;
    let mut jx = CMatrix::zeros(dim, dim);
    let mut jy = CMatrix::zeros(dim, dim);
    let mut jz = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        let downs = b.count_ones() as f64;
        jz[(b, b)] = C64::new((n_spins as f64 - 2.0 * downs) / 2.0, 0.0);
        for q in 0..n_spins {
            let mask = qubit_mask(q, n_spins);
            let c = b ^ mask;
            jx[(b, c)] = C64::new(0.5, 0.0);
            // ⟨0|σ_y|1⟩ = −i
            jy[(b, c)] = if b & mask == 0 {
                C64::new(0.0, -0.5)
            } else {
                C64::new(0.0, 0.5)
            };
        }
    }
    Ok([jx, jy, jz])
}

fn n_spins_of(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!("dimension {dim} is not 2^N")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// `A ρ A†` with A acting as `op` on qubit `q`.
fn conjugate_on_qubit(rho: &CMatrix, op: &Matrix2<C64>, q: usize, n: usize) -> CMatrix {
    let dim = rho.nrows();
    let mask = qubit_mask(q, n);
    let mut left = rho.clone();
    for b0 in (0..dim).filter(|b| b & mask == 0) {
        let b1 = b0 | mask;
        for c in 0..dim {
            let (r0, r1) = (rho[(b0, c)], rho[(b1, c)]);
            left[(b0, c)] = op[(0, 0)] * r0 + op[(0, 1)] * r1;
            left[(b1, c)] = op[(1, 0)] * r0 + op[(1, 1)] * r1;
        }
    }
    let mut out = left.clone();
    for c0 in (0..dim).filter(|c| c & mask == 0) {
        let c1 = c0 | mask;
        for r in 0..dim {
            let (l0, l1) = (left[(r, c0)], left[(r, c1)]);
            out[(r, c0)] = l0 * op[(0, 0)].conj() + l1 * op[(0, 1)].conj();
            out[(r, c1)] = l0 * op[(1, 0)].conj() + l1 * op[(1, 1)].conj();
        }
    }
    out
}

/// `ℰ_N ∘ … ∘ ℰ_1` with `ℰ_n(ρ) = (1−ε)ρ + ε a⁽ⁿ⁾ρa⁽ⁿ⁾`.
pub fn dephasing_channel(rho: &MixedState, cfg: &NoiseConfig) -> Result<MixedState> {
    let n = n_spins_of(rho.dim())?;
    let order: Vec<usize> = (0..n).collect();
    dephasing_channel_ordered(rho, cfg, &order)
}

/// The channel with the single-qubit maps applied in `order`.
pub fn dephasing_channel_ordered(rho: &MixedState, cfg: &NoiseConfig, order: &[usize]) -> Result<MixedState> {
    let n = n_spins_of(rho.dim())?;
    check_capacity("dephasing channel", n, EMBED_LIMIT)?;
    if let Some(&q) = order.iter().find(|&&q| q >= n) {
        return Err(Error::invalid(format!("qubit {q} out of range for {n} spins")));
    }
    let a = cfg.kraus_operator();
    let eps = cfg.epsilon;
    let mut m = rho.matrix().clone();
    if eps == 0.0 {
        return Ok(MixedState::trusted(m));
    }
    for &q in order {
        let flipped = conjugate_on_qubit(&m, &a, q, n);
        m = m.scale(1.0 - eps) + flipped.scale(eps);
    }
    Ok(MixedState::trusted(hermitian_part(&m)))
}

/// Squeeze, dephase and encode on the product space for fixed N, kind and
/// field. Everything independent of the probe, χt and ε is built once.
#[derive(Clone, Debug)]
pub struct NoisyPipeline {
    n_spins: usize,
    squeeze: HermitianSpectrum,
    phase_unitary: CMatrix,
    generators: [CMatrix; 3],
}

impl NoisyPipeline {
    pub fn new(n_spins: usize, kind: SqueezeKind, lambda_ratio: f64, phi: &PhaseVector) -> Result<Self> {
        check_capacity("noisy estimation", n_spins, PIPELINE_LIMIT)?;
        let squeeze = squeeze_generator(kind, lambda_ratio, n_spins)?.spectrum();
        let [jx, jy, jz] = product_spin_operators(n_spins)?;
        let h = jx.scale(phi.x) + jy.scale(phi.y) + jz.scale(phi.z);
        let spectrum = HermitianSpectrum::new(&h);
        let phase_unitary = spectrum.exp_minus_i(1.0);
        let generators = averaged_operators(&spectrum, [&jx, &jy, &jz]).map(|a| hermitian_part(&a));
        Ok(Self {
            n_spins,
            squeeze,
            phase_unitary,
            generators,
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// The dephased squeezed probe `ℰ(U_k|ψ⟩⟨ψ|U_k†)` before encoding.
    pub fn noisy_probe(&self, probe: &PureState, chi_t: f64, noise: &NoiseConfig) -> Result<MixedState> {
        if probe.n_spins() != self.n_spins {
            return Err(Error::invalid(format!(
                "probe has {} spins, pipeline expects {}",
                probe.n_spins(),
                self.n_spins
            )));
        }
        let squeezed = probe.evolved(&self.squeeze, chi_t);
        let full = embed_symmetric(&squeezed)?;
        let rho = MixedState::trusted(&full * full.adjoint());
        dephasing_channel(&rho, noise)
    }

    /// `ρ_out = U(φ)ρ′U†(φ)` and `∂_μρ_out = −iU[A_μ, ρ′]U†`.
    pub fn encoded(&self, rho: &MixedState) -> (MixedState, [CMatrix; 3]) {
        let u = &self.phase_unitary;
        let r = rho.matrix();
        let minus_i = C64::new(0.0, -1.0);
        let derivatives = self.generators.clone().map(|a| {
            let comm = &a * r - r * &a;
            hermitian_part(&(u * comm * u.adjoint()).map(|z| z * minus_i))
        });
        (rho.conjugated(u), derivatives)
    }

    pub fn evaluate(&self, probe: &PureState, chi_t: f64, noise: &NoiseConfig) -> Result<QfimResult> {
        let rho = self.noisy_probe(probe, chi_t, noise)?;
        let (out, derivatives) = self.encoded(&rho);
        qfim_mixed(&MixedState::trusted(hermitian_part(out.matrix())), &derivatives)
    }
}

/// QFIM of the dephased squeeze–encode protocol.
pub fn noisy_estimation(
    probe: &PureState,
    cfg: &crate::squeezing::SqueezeConfig,
    phi: &PhaseVector,
    noise: &NoiseConfig,
) -> Result<QfimResult> {
    cfg.validate()?;
    NoisyPipeline::new(probe.n_spins(), cfg.kind, cfg.lambda_ratio, phi)?.evaluate(probe, cfg.chi_t, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::{ghz_state, multi_ghz_state, GhzSpec};
    use crate::spinspace::{coherent_state, max_abs, Axis};
    use crate::squeezing::{qfim_squeezed, SqueezeConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use spinmetro_oracles as oracles;

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> MixedState {
        let b = CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let g = &b * b.adjoint();
        MixedState::new(g.unscale(g.trace().re)).unwrap()
    }

    fn swap_matrix(n: usize, p: usize, q: usize) -> CMatrix {
        let dim = 1 << n;
        let (mp, mq) = (qubit_mask(p, n), qubit_mask(q, n));
        CMatrix::from_fn(dim, dim, |r, c| {
            let bp = (c & mp != 0) as usize;
            let bq = (c & mq != 0) as usize;
            let mut swapped = c & !(mp | mq);
            if bp == 1 {
                swapped |= mq;
            }
            if bq == 1 {
                swapped |= mp;
            }
            if r == swapped {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn embedding_examples() {
        let up = embed_symmetric(&PureState::basis(2, 0).unwrap()).unwrap();
        assert_eq!(up[0], C64::new(1.0, 0.0));
        assert!(up.iter().skip(1).all(|z| *z == C64::new(0.0, 0.0)));
        let mid = embed_symmetric(&PureState::basis(2, 1).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mid[1].re - h).abs() < 1e-15 && (mid[2].re - h).abs() < 1e-15);
        assert!(mid[0].norm() == 0.0 && mid[3].norm() == 0.0);
    }

    #[test]
    fn embedding_is_an_isometry() {
        for n in [3, 7, 11] {
            let a = coherent_state(n, 0.7, 1.9).unwrap();
            let b = multi_ghz_state(n).unwrap();
            let (ea, eb) = (embed_symmetric(&a).unwrap(), embed_symmetric(&b).unwrap());
            assert!((ea.norm() - 1.0).abs() <= 1e-12);
            assert!((ea.dotc(&eb) - a.inner(&b)).norm() <= 1e-12);
        }
        let w = oracles::dicke_isometry(5);
        let s = multi_ghz_state(5).unwrap();
        assert!((embed_symmetric(&s).unwrap() - &w * s.amplitudes()).norm() <= 1e-14);
    }

    #[test]
    fn embedding_guard() {
        let s = ghz_state(GhzSpec::new(15, Axis::Z)).unwrap();
        assert!(matches!(embed_symmetric(&s), Err(Error::Capacity { limit: 14, .. })));
    }

    #[test]
    fn product_operators_match_kronecker_oracle() {
        for n in 1..=4 {
            let ours = product_spin_operators(n).unwrap();
            let reference = oracles::product_collective(n);
            for (a, b) in ours.iter().zip(reference.iter()) {
                assert!(max_abs(&(a - b)) < 1e-15, "n = {n}");
            }
        }
    }

    #[test]
    fn kraus_operator_squares_to_identity() {
        let a = NoiseConfig::new(0.2).unwrap().kraus_operator();
        assert!((a * a - Matrix2::identity()).norm() < 1e-15);
        assert!(NoiseConfig::with_weights(0.1, [1.0, 1.0, 1.0]).is_err());
        assert!(NoiseConfig::with_weights(0.1, [0.0, 0.0, 2.0]).is_ok());
        assert!(NoiseConfig::new(1.5).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 8);
        let out = dephasing_channel(&rho, &NoiseConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
    }

    #[test]
    fn single_qubit_channel_is_one_kraus_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 2);
        let cfg = NoiseConfig::new(0.35).unwrap();
        let a = cfg.kraus_operator();
        let a = CMatrix::from_fn(2, 2, |r, c| a[(r, c)]);
        let expected = rho.matrix().scale(0.65) + (&a * rho.matrix() * &a).scale(0.35);
        let out = dephasing_channel(&rho, &cfg).unwrap();
        assert!(max_abs(&(out.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn channel_matches_kronecker_kraus_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3;
        let rho = random_density(&mut rng, 8);
        let cfg = NoiseConfig::new(0.2).unwrap();
        let a = cfg.kraus_operator();
        let a = CMatrix::from_fn(2, 2, |r, c| a[(r, c)]);
        let mut m = rho.matrix().clone();
        for site in 0..n {
            let big = oracles::site_operator(&a, site, n);
            m = m.scale(0.8) + (&big * &m * &big).scale(0.2);
        }
        let out = dephasing_channel(&rho, &cfg).unwrap();
        assert!(max_abs(&(out.matrix() - m)) < 1e-14);
    }

    #[test]
    fn channel_preserves_trace_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let n = 1 + trial % 4;
            let rho = random_density(&mut rng, 1 << n);
            let cfg = NoiseConfig::new(rng.random_range(0.0..=1.0)).unwrap();
            let out = dephasing_channel(&rho, &cfg).unwrap();
            assert!((out.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10);
            let min = HermitianSpectrum::new(out.matrix()).eigenvalues().min();
            assert!(min >= -1e-9);
        }
    }

    #[test]
    fn channel_order_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(&mut rng, 16);
        let cfg = NoiseConfig::new(0.4).unwrap();
        let forward = dephasing_channel(&rho, &cfg).unwrap();
        for order in [[3, 2, 1, 0], [2, 0, 3, 1], [1, 3, 0, 2]] {
            let other = dephasing_channel_ordered(&rho, &cfg, &order).unwrap();
            assert!(max_abs(&(forward.matrix() - other.matrix())) <= 1e-10);
        }
    }

    #[test]
    fn channel_output_of_symmetric_input_is_permutation_invariant() {
        let n = 3;
        let psi = embed_symmetric(&multi_ghz_state(n).unwrap()).unwrap();
        let rho = MixedState::from_pure(&psi).unwrap();
        let out = dephasing_channel(&rho, &NoiseConfig::new(0.3).unwrap()).unwrap();
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let s = swap_matrix(n, p, q);
            let comm = &s * out.matrix() - out.matrix() * &s;
            assert!(max_abs(&comm) <= 1e-10);
        }
    }

    #[test]
    fn noiseless_pipeline_matches_symmetric_subspace() {
        let n = 6;
        let probe = ghz_state(GhzSpec::new(n, Axis::Z)).unwrap();
        let phi = PhaseVector::small();
        for kind in SqueezeKind::ALL {
            let cfg = SqueezeConfig::new(kind, 0.1);
            let noisy = noisy_estimation(&probe, &cfg, &phi, &NoiseConfig::new(0.0).unwrap()).unwrap();
            let clean = qfim_squeezed(&probe, &cfg, &phi).unwrap();
            let rel = (noisy.qfim - clean.qfim).norm() / clean.qfim.norm();
            assert!(rel <= 1e-8, "{kind}: {rel:e}");
        }
    }

    #[test]
    fn variance_grows_with_noise() {
        let n = 4;
        let probe = ghz_state(GhzSpec::new(n, Axis::Z)).unwrap();
        let phi = PhaseVector::small();
        let pipe = NoisyPipeline::new(n, SqueezeKind::Tat, 0.02, &phi).unwrap();
        let mut last = 0.0;
        for k in 0..=5 {
            let noise = NoiseConfig::new(0.1 * k as f64).unwrap();
            let v = pipe.evaluate(&probe, 0.2, &noise).unwrap().total_variance.value();
            assert!(v >= last, "epsilon = {}: {v} < {last}", 0.1 * k as f64);
            last = v;
        }
    }

    #[test]
    fn full_noise_single_spin_keeps_unit_trace() {
        let probe = coherent_state(1, 0.4, 0.3).unwrap();
        let pipe = NoisyPipeline::new(1, SqueezeKind::Oat, 0.02, &PhaseVector::new(0.3, 0.1, -0.2).unwrap()).unwrap();
        let rho = pipe.noisy_probe(&probe, 0.0, &NoiseConfig::new(1.0).unwrap()).unwrap();
        let (out, _) = pipe.encoded(&rho);
        assert!((out.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10);
    }

    #[test]
    fn pipeline_guard() {
        assert!(matches!(
            NoisyPipeline::new(11, SqueezeKind::Tat, 0.02, &PhaseVector::small()),
            Err(Error::Capacity { limit: 10, .. })
        ));
    }
}
