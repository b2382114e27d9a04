//! GHZ and multi-GHZ probe states.
//!
//! The z-GHZ state is (|J⟩ + |−J⟩)/√2. The x and y versions are exact
//! rotations of it, `|ψ_x⟩ = e^{−i(π/2)J_y}|ψ_z⟩` and
//! `|ψ_y⟩ = e^{+i(π/2)J_x}|ψ_z⟩`, which fixes the relative phases that an
//! eigensolver would otherwise leave arbitrary.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use crate::spinspace::{collective_operator, unitary_from_generator, Axis, PureState};
use crate::{CVector, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GhzSpec {
    pub n_spins: usize,
    pub axis: Axis,
}

impl GhzSpec {
    pub fn new(n_spins: usize, axis: Axis) -> Self {
        Self { n_spins, axis }
    }
}

fn ghz_z(n_spins: usize) -> Result<PureState> {
    let mut amps = CVector::zeros(n_spins + 1);
    amps[0] += C64::new(FRAC_1_SQRT_2, 0.0);
    amps[n_spins] += C64::new(FRAC_1_SQRT_2, 0.0);
    PureState::new(n_spins, amps)
}

pub fn ghz_state(spec: GhzSpec) -> Result<PureState> {
    let z = ghz_z(spec.n_spins)?;
    match spec.axis {
        Axis::Z => Ok(z),
        Axis::X => {
            let jy = collective_operator(spec.n_spins, Axis::Y)?;
            Ok(unitary_from_generator(&jy, FRAC_PI_2)?.apply(&z))
        }
        Axis::Y => {
            let jx = collective_operator(spec.n_spins, Axis::X)?;
            Ok(unitary_from_generator(&jx, -FRAC_PI_2)?.apply(&z))
        }
    }
}

/// Normalized `|ψ_x⟩ + |ψ_y⟩ + |ψ_z⟩`.
pub fn multi_ghz_state(n_spins: usize) -> Result<PureState> {
    let mut sum = CVector::zeros(n_spins + 1);
    for axis in Axis::ALL {
        sum += ghz_state(GhzSpec::new(n_spins, axis))?.amplitudes();
    }
    PureState::normalized(n_spins, sum)
}

/// `P(m) = |⟨m|ψ⟩|²`, indexed like the Dicke basis (m = +J first).
pub fn pm_distribution(state: &PureState) -> Vec<f64> {
    state.amplitudes().iter().map(|z| z.norm_sqr()).collect()
}

/// Largest `|P(m) − P(−m)|`.
pub fn pm_asymmetry(state: &PureState) -> f64 {
    let p = pm_distribution(state);
    let n = p.len();
    (0..n).map(|k| (p[k] - p[n - 1 - k]).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinspace::SpinOperators;
    use crate::CMatrix;
    use nalgebra::SymmetricEigen;

    /// Extremal eigenvectors of J_axis straight from an eigensolver.
    fn extremal_eigvecs(n: usize, axis: Axis) -> (CVector, CVector) {
        let op = collective_operator(n, axis).unwrap();
        let eig = SymmetricEigen::new(op.matrix().clone());
        let (mut lo, mut hi) = (0, 0);
        for k in 0..eig.eigenvalues.len() {
            if eig.eigenvalues[k] < eig.eigenvalues[lo] {
                lo = k;
            }
            if eig.eigenvalues[k] > eig.eigenvalues[hi] {
                hi = k;
            }
        }
        (
            eig.eigenvectors.column(hi).into_owned(),
            eig.eigenvectors.column(lo).into_owned(),
        )
    }

    /// Weight of `state` on the span of the two extremal eigenvectors.
    fn weight_on_extremal_span(state: &PureState, axis: Axis) -> f64 {
        let (hi, lo) = extremal_eigvecs(state.n_spins(), axis);
        hi.dotc(state.amplitudes()).norm_sqr() + lo.dotc(state.amplitudes()).norm_sqr()
    }

    #[test]
    fn ghz_z_two_spins() {
        let s = ghz_state(GhzSpec::new(2, Axis::Z)).unwrap();
        let p = pm_distribution(&s);
        assert_eq!(p.len(), 3);
        assert!((p[0] - 0.5).abs() < 1e-15 && p[1] == 0.0 && (p[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ghz_x_is_rotated_z_and_lives_on_extremal_eigenvectors() {
        let x = ghz_state(GhzSpec::new(4, Axis::X)).unwrap();
        assert!((weight_on_extremal_span(&x, Axis::X) - 1.0).abs() < 1e-10);
        // equal weight on both components
        let (hi, lo) = extremal_eigvecs(4, Axis::X);
        let a = hi.dotc(x.amplitudes()).norm_sqr();
        let b = lo.dotc(x.amplitudes()).norm_sqr();
        assert!((a - 0.5).abs() < 1e-10 && (b - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ghz_y_overlap_with_z_matches_eigensolver() {
        let n = 6;
        let y = ghz_state(GhzSpec::new(n, Axis::Y)).unwrap();
        let z = ghz_state(GhzSpec::new(n, Axis::Z)).unwrap();
        assert!((y.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        // Rebuild (|hi⟩ + e^{iα}|lo⟩)/√2 from eigensolver vectors, with α and
        // the global phase read off the projections of ψ_y.
        let (hi, lo) = extremal_eigvecs(n, Axis::Y);
        let ph = hi.dotc(y.amplitudes());
        let pl = lo.dotc(y.amplitudes());
        assert!((ph.norm() - FRAC_1_SQRT_2).abs() < 1e-10);
        assert!((pl.norm() - FRAC_1_SQRT_2).abs() < 1e-10);
        let rebuilt = (&hi * C64::from_polar(1.0, ph.arg()) + &lo * C64::from_polar(1.0, pl.arg()))
            .unscale(2f64.sqrt());
        assert!((&rebuilt - y.amplitudes()).norm() < 1e-10);
        let oracle = z.amplitudes().dotc(&rebuilt).norm();
        assert!((z.inner(&y).norm() - oracle).abs() < 1e-10);
    }

    #[test]
    fn ghz_components_are_extremal_for_every_n() {
        for n in 1..=25 {
            let ops = SpinOperators::new(n).unwrap();
            let j = n as f64 / 2.0;
            for axis in Axis::ALL {
                let s = ghz_state(GhzSpec::new(n, axis)).unwrap();
                let op = ops.get(axis).matrix();
                // (J_μ² − J²)|ψ⟩ = 0 for a superposition of |±J⟩ eigenvectors
                let sq: CMatrix = op * op;
                let resid = &sq * s.amplitudes() - s.amplitudes().scale(j * j);
                assert!(resid.norm() <= 1e-10, "n = {n}, axis = {axis:?}");
            }
        }
    }

    #[test]
    fn multi_ghz_symmetry_pattern() {
        let s16 = multi_ghz_state(16).unwrap();
        assert!(pm_asymmetry(&s16) <= 1e-12);
        let s15 = multi_ghz_state(15).unwrap();
        assert!(pm_asymmetry(&s15) > 0.0);
        for n in 1..40 {
            let s = multi_ghz_state(n).unwrap();
            assert!((s.amplitudes().norm_squared() - 1.0).abs() <= 1e-10);
            let total: f64 = pm_distribution(&s).iter().sum();
            assert!((total - 1.0).abs() <= 1e-10);
        }
    }

    fn ghz_overlaps(n: usize) -> Vec<f64> {
        let psi = multi_ghz_state(n).unwrap();
        Axis::ALL
            .iter()
            .map(|&a| ghz_state(GhzSpec::new(n, a)).unwrap().inner(&psi).norm())
            .collect()
    }

    #[test]
    fn multi_ghz_overlaps_balance_when_n_is_a_multiple_of_eight() {
        for n in [8, 16, 24, 32] {
            let o = ghz_overlaps(n);
            assert!((o[0] - o[1]).abs() <= 1e-10 && (o[1] - o[2]).abs() <= 1e-10, "n = {n}: {o:?}");
        }
        // in general the rotated components are not mutually symmetric
        let o = ghz_overlaps(3);
        assert!((o[2] - o[0]).abs() > 0.1);
    }

    #[test]
    fn multi_ghz_overlaps_approach_one_over_root_three() {
        for n in 30..40 {
            for o in ghz_overlaps(n) {
                assert!((o - 1.0 / 3f64.sqrt()).abs() < 1e-3, "n = {n}: {o}");
            }
        }
    }

    #[test]
    fn pole_coherent_distribution() {
        let s = crate::spinspace::coherent_state(2, 0.0, 0.0).unwrap();
        let p = pm_distribution(&s);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0 && p[2] == 0.0);
    }

    #[test]
    fn ghz_x_matches_rotation_of_z_state() {
        let z = ghz_state(GhzSpec::new(4, Axis::Z)).unwrap();
        let jy = collective_operator(4, Axis::Y).unwrap();
        let rotated = unitary_from_generator(&jy, FRAC_PI_2).unwrap().apply(&z);
        let x = ghz_state(GhzSpec::new(4, Axis::X)).unwrap();
        assert!((x.inner(&rotated).norm() - 1.0).abs() < 1e-10);
    }
}
