//! Husimi distributions, sweeps over χt and N, and the χt optimizer.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::encoding::PhaseVector;
use crate::fisher::qfim_pure;
use crate::noise::{NoiseConfig, NoisyPipeline};
use crate::probes::{ghz_state, multi_ghz_state, GhzSpec};
use crate::spinspace::{coherent_state, Axis, PureState};
use crate::squeezing::{SqueezeKind, SqueezeTrajectory};
use crate::{Error, Result, C64};

/// Default χt range for a squeezing kind.
pub fn default_chi_t_range(kind: SqueezeKind) -> (f64, f64) {
    match kind {
        SqueezeKind::Oat | SqueezeKind::Tnt => (0.0, 3.0),
        SqueezeKind::Tat => (0.0, 0.3),
    }
}

pub const DEFAULT_CHI_T_POINTS: usize = 301;
/// Golden-section stopping width in χt.
pub const OPTIMIZER_TOLERANCE: f64 = 1e-5;

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("grid bounds must be finite"));
    }
    match points {
        0 => Err(Error::invalid("grid needs at least one point")),
        1 => Ok(vec![lo]),
        _ => {
            if !(hi > lo) {
                return Err(Error::invalid(format!("grid bounds {lo} .. {hi} are not increasing")));
            }
            let step = (hi - lo) / (points - 1) as f64;
            Ok((0..points)
                .map(|k| if k == points - 1 { hi } else { lo + step * k as f64 })
                .collect())
        }
    }
}

/// Husimi function sampled on θ ∈ [0, π] (inclusive) × φ ∈ [0, 2π).
#[derive(Clone, Debug, PartialEq)]
pub struct HusimiGrid {
    pub theta_nodes: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// `values[(i, j)] = Q(θ_i, φ_j)`.
    pub values: DMatrix<f64>,
}

impl HusimiGrid {
    /// Local maxima as `(θ, φ)` pairs. φ is periodic and each pole row
    /// counts as a single node. Among adjacent equal values only the first
    /// in row-major order is reported. Maxima below `min_fraction` of the
    /// global maximum are dropped.
    pub fn local_maxima(&self, min_fraction: f64) -> Vec<(f64, f64)> {
        let (nt, np) = self.values.shape();
        let global = self.values.max();
        // Nodes are (row, col); pole rows collapse onto col 0.
        let node = |i: usize, j: usize| if i == 0 || i == nt - 1 { (i, 0) } else { (i, j) };
        let neighbours = |i: usize, j: usize| -> Vec<(usize, usize)> {
            let mut out = Vec::new();
            if i == 0 || i == nt - 1 {
                let row = if i == 0 { 1 } else { nt - 2 };
                if row != i {
                    out.extend((0..np).map(|c| node(row, c)));
                }
                return out;
            }
            for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let r = (i as i64 + di) as usize;
                    let c = (j as i64 + dj).rem_euclid(np as i64) as usize;
                    let n = node(r, c);
                    if n != (i, j) && !out.contains(&n) {
                        out.push(n);
                    }
                }
            }
            out
        };
        let mut maxima = Vec::new();
        for i in 0..nt {
            let cols = if i == 0 || i == nt - 1 { 1 } else { np };
            for j in 0..cols {
                let v = self.values[(i, j)];
                if v < min_fraction * global {
                    continue;
                }
                let is_max = neighbours(i, j).into_iter().all(|(r, c)| {
                    let w = self.values[(r, c)];
                    if (r, c) < (i, j) {
                        v > w
                    } else {
                        v >= w
                    }
                });
                if is_max {
                    maxima.push((self.theta_nodes[i], self.phi_nodes[j]));
                }
            }
        }
        maxima
    }
}

/// `⟨ψ|θ, φ⟩` for every φ in `phis`, given the φ = 0 coherent amplitudes.
fn overlaps_along_row(state: &PureState, real_amps: &PureState, phis: &[f64]) -> Vec<f64> {
    let weights: Vec<C64> = state
        .amplitudes()
        .iter()
        .zip(real_amps.amplitudes().iter())
        .map(|(s, c)| s.conj() * c)
        .collect();
    phis.iter()
        .map(|&phi| {
            // Dicke index k carries e^{ikφ}
            let step = C64::from_polar(1.0, phi);
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for w in &weights {
                acc += w * phase;
                phase *= step;
            }
            acc.norm_sqr()
        })
        .collect()
}

fn husimi_on(state: &PureState, thetas: &[f64], phis: &[f64]) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|&theta| -> Result<Vec<f64>> {
            let c = coherent_state(state.n_spins(), theta, 0.0)?;
            Ok(overlaps_along_row(state, &c, phis))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(thetas.len(), phis.len(), |i, j| rows[i][j]))
}

/// `Q(θ, φ) = |⟨ψ|θ, φ⟩|²` on `n_theta` nodes spanning [0, π] and `n_phi`
/// nodes spanning [0, 2π).
pub fn husimi_grid(state: &PureState, n_theta: usize, n_phi: usize) -> Result<HusimiGrid> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::invalid("Husimi grid needs at least 2 nodes per axis"));
    }
    let theta_nodes: Vec<f64> = (0..n_theta)
        .map(|i| if i == n_theta - 1 { PI } else { PI * i as f64 / (n_theta - 1) as f64 })
        .collect();
    let phi_nodes: Vec<f64> = (0..n_phi).map(|j| TAU * j as f64 / n_phi as f64).collect();
    let values = husimi_on(state, &theta_nodes, &phi_nodes)?;
    Ok(HusimiGrid {
        theta_nodes,
        phi_nodes,
        values,
    })
}

/// Integration measure for the spin-fluctuation quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FluctuationMeasure {
    /// Flat `dθ dφ`.
    #[default]
    Flat,
    /// `sin θ dθ dφ`.
    Spherical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationResult {
    pub delta_sq: f64,
    pub theta_bar: f64,
    pub phi_bar: f64,
}

/// `Δ² = ∬ Q(θ,φ)(θ − θ̄)²(φ − φ̄)² dθdφ` by the midpoint rule, with Q scaled
/// to unit mass on the grid.
pub fn spin_fluctuation(state: &PureState, n_theta: usize, n_phi: usize) -> Result<FluctuationResult> {
    spin_fluctuation_with(state, n_theta, n_phi, FluctuationMeasure::Flat)
}

pub fn spin_fluctuation_with(
    state: &PureState,
    n_theta: usize,
    n_phi: usize,
    measure: FluctuationMeasure,
) -> Result<FluctuationResult> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::invalid("fluctuation grid needs at least 2 nodes per axis"));
    }
    let thetas: Vec<f64> = (0..n_theta).map(|i| PI * (i as f64 + 0.5) / n_theta as f64).collect();
    let phis: Vec<f64> = (0..n_phi).map(|j| TAU * (j as f64 + 0.5) / n_phi as f64).collect();
    let q = husimi_on(state, &thetas, &phis)?;
    let weight = |i: usize, j: usize| match measure {
        FluctuationMeasure::Flat => q[(i, j)],
        FluctuationMeasure::Spherical => q[(i, j)] * thetas[i].sin(),
    };
    let mut mass = 0.0;
    let (mut tb, mut pb) = (0.0, 0.0);
    for i in 0..n_theta {
        for j in 0..n_phi {
            let w = weight(i, j);
            mass += w;
            tb += w * thetas[i];
            pb += w * phis[j];
        }
    }
    if !(mass > 0.0) {
        return Err(Error::invalid("Husimi function vanishes on the grid"));
    }
    tb /= mass;
    pb /= mass;
    let mut delta = 0.0;
    for i in 0..n_theta {
        for j in 0..n_phi {
            delta += weight(i, j) / mass * (thetas[i] - tb).powi(2) * (phis[j] - pb).powi(2);
        }
    }
    Ok(FluctuationResult {
        delta_sq: delta,
        theta_bar: tb,
        phi_bar: pb,
    })
}

/// Named columns over a strictly increasing axis.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    axis_name: String,
    axis: Vec<f64>,
    columns: Vec<(String, Vec<f64>)>,
}

impl SweepTable {
    pub fn new(axis_name: impl Into<String>, axis: Vec<f64>) -> Result<Self> {
        if axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sweep axis must be strictly increasing"));
        }
        Ok(Self {
            axis_name: axis_name.into(),
            axis,
            columns: Vec::new(),
        })
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.axis.len() {
            return Err(Error::invalid(format!(
                "column {name} has {} rows, axis has {}",
                values.len(),
                self.axis.len()
            )));
        }
        if self.column(&name).is_some() {
            return Err(Error::invalid(format!("duplicate column {name}")));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn axis_name(&self) -> &str {
        &self.axis_name
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn columns(&self) -> &[(String, Vec<f64>)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

/// Index of the smallest non-NaN value (first on ties).
pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k)
}

/// Total variance, 𝒟 norm and ξ_S² of the squeezed probe along `grid`.
pub fn scan_chi_t(
    probe: &PureState,
    kind: SqueezeKind,
    lambda_ratio: f64,
    grid: &[f64],
    phi: &PhaseVector,
) -> Result<SweepTable> {
    let table = SweepTable::new("chi_t", grid.to_vec())?;
    let traj = SqueezeTrajectory::new(probe, kind, lambda_ratio, phi)?;
    let points: Vec<_> = grid.par_iter().map(|&c| traj.evaluate(c)).collect();
    table
        .with_column("total_variance", points.iter().map(|p| p.qfim.total_variance.value()).collect())?
        .with_column("d_norm", points.iter().map(|p| p.qfim.d_norm).collect())?
        .with_column("xi_s_sq", points.iter().map(|p| p.xi_s_sq()).collect())
}

/// Minimizer of a one-dimensional objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

/// Coarse scan of `bracket` with `coarse_points` nodes, then golden-section
/// search between the neighbours of the best node until the interval is
/// narrower than `tol`. Non-finite values never win. The returned point is
/// the best of all evaluated points.
pub fn minimize_bracketed<F>(f: F, bracket: (f64, f64), coarse_points: usize, tol: f64) -> Result<Minimum>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (lo, hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid bracket ({lo}, {hi})")));
    }
    if coarse_points < 8 {
        return Err(Error::invalid("coarse scan needs at least 8 points"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let grid = linspace(lo, hi, coarse_points)?;
    let values: Vec<f64> = grid.par_iter().map(|&x| f(x)).collect();
    let finite: Vec<f64> = values
        .iter()
        .map(|&v| if v.is_finite() { v } else { f64::NAN })
        .collect();
    let k = argmin(&finite).ok_or_else(|| {
        Error::OptimizationFailed(format!("no finite objective value on ({lo}, {hi})"))
    })?;
    let mut best = Minimum {
        x: grid[k],
        value: values[k],
    };
    let consider = |x: f64, v: f64, best: &mut Minimum| {
        if v.is_finite() && v < best.value {
            *best = Minimum { x, value: v };
        }
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(grid.len() - 1)];
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let guard = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut fc = guard(f(c));
    let mut fd = guard(f(d));
    consider(c, fc, &mut best);
    consider(d, fd, &mut best);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = guard(f(c));
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = guard(f(d));
            consider(d, fd, &mut best);
        }
    }
    Ok(best)
}

/// χt minimizing the total variance of `e^{−iχt G}|probe⟩` on `bracket`.
pub fn optimize_chi_t(
    probe: &PureState,
    kind: SqueezeKind,
    lambda_ratio: f64,
    bracket: (f64, f64),
    phi: &PhaseVector,
    coarse_points: usize,
) -> Result<Minimum> {
    let traj = SqueezeTrajectory::new(probe, kind, lambda_ratio, phi)?;
    minimize_bracketed(
        |c| traj.qfim(c).total_variance.value(),
        bracket,
        coarse_points,
        OPTIMIZER_TOLERANCE,
    )
}

/// Result of [`correction_ratio`].
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionTable {
    /// χt optimizing the noiseless protocol.
    pub chi_t_opt: f64,
    /// Axis `epsilon`; columns `variance_wo`, `variance_w`, `chi_t_w`,
    /// `r_percent`.
    pub table: SweepTable,
}

/// `R = (wo − w)/(wo + w)·100`, taking its limits when either side is
/// infinite and zero when both are.
pub fn ratio_percent(without: f64, with: f64) -> f64 {
    match (without.is_infinite(), with.is_infinite()) {
        (true, true) => 0.0,
        (true, false) => 100.0,
        (false, true) => -100.0,
        (false, false) => (without - with) / (without + with) * 100.0,
    }
}

/// Compares, per noise level, the variance at the noiseless optimum χt
/// ("without correction") with the variance after re-optimizing χt
/// ("with correction"). The re-optimization also considers the noiseless
/// optimum itself, so it is never worse.
pub fn correction_ratio(
    probe: &PureState,
    kind: SqueezeKind,
    lambda_ratio: f64,
    phi: &PhaseVector,
    epsilons: &[f64],
    bracket: (f64, f64),
    coarse_points: usize,
) -> Result<CorrectionTable> {
    let pipeline = NoisyPipeline::new(probe.n_spins(), kind, lambda_ratio, phi)?;
    let noises: Vec<NoiseConfig> = epsilons
        .iter()
        .map(|&e| NoiseConfig::new(e))
        .collect::<Result<_>>()?;
    let table = SweepTable::new("epsilon", epsilons.to_vec())?;
    let pipeline = &pipeline;
    let objective = move |noise: NoiseConfig| {
        move |c: f64| {
            pipeline
                .evaluate(probe, c, &noise)
                .map(|q| q.total_variance.value())
                .unwrap_or(f64::INFINITY)
        }
    };
    let clean = NoiseConfig::new(0.0)?;
    let opt = minimize_bracketed(objective(clean), bracket, coarse_points, OPTIMIZER_TOLERANCE)?;

    let rows: Vec<(f64, Minimum)> = noises
        .par_iter()
        .map(|noise| -> Result<(f64, Minimum)> {
            let f = objective(*noise);
            let without = f(opt.x);
            // A noise level can make the QFIM singular for every χt.
            let mut with = match minimize_bracketed(f, bracket, coarse_points, OPTIMIZER_TOLERANCE) {
                Err(Error::OptimizationFailed(_)) => Minimum {
                    x: opt.x,
                    value: f64::INFINITY,
                },
                other => other?,
            };
            if without < with.value {
                with = Minimum {
                    x: opt.x,
                    value: without,
                };
            }
            Ok((without, with))
        })
        .collect::<Result<_>>()?;

    let table = table
        .with_column("variance_wo", rows.iter().map(|r| r.0).collect())?
        .with_column("variance_w", rows.iter().map(|r| r.1.value).collect())?
        .with_column("chi_t_w", rows.iter().map(|r| r.1.x).collect())?
        .with_column("r_percent", rows.iter().map(|r| ratio_percent(r.0, r.1.value)).collect())?;
    Ok(CorrectionTable {
        chi_t_opt: opt.x,
        table,
    })
}

/// How to build the probe at each system size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeRecipe {
    MultiGhz,
    Ghz(Axis),
    /// z-GHZ squeezed at its variance-optimal χt.
    OptimallySqueezed {
        kind: SqueezeKind,
        lambda_ratio: f64,
        bracket: (f64, f64),
        coarse_points: usize,
    },
}

impl ProbeRecipe {
    /// The probe together with the χt it was squeezed by, if any.
    pub fn build(&self, n_spins: usize, phi: &PhaseVector) -> Result<(PureState, Option<f64>)> {
        match *self {
            ProbeRecipe::MultiGhz => Ok((multi_ghz_state(n_spins)?, None)),
            ProbeRecipe::Ghz(axis) => Ok((ghz_state(GhzSpec::new(n_spins, axis))?, None)),
            ProbeRecipe::OptimallySqueezed {
                kind,
                lambda_ratio,
                bracket,
                coarse_points,
            } => {
                let base = ghz_state(GhzSpec::new(n_spins, Axis::Z))?;
                let traj = SqueezeTrajectory::new(&base, kind, lambda_ratio, phi)?;
                let best = minimize_bracketed(
                    |c| traj.qfim(c).total_variance.value(),
                    bracket,
                    coarse_points,
                    OPTIMIZER_TOLERANCE,
                )?;
                Ok((traj.state(best.x), Some(best.x)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeQuantity {
    DNorm,
    TotalVariance,
}

impl SizeQuantity {
    pub fn label(self) -> &'static str {
        match self {
            SizeQuantity::DNorm => "d_norm",
            SizeQuantity::TotalVariance => "total_variance",
        }
    }
}

/// The requested quantity for each N, with `c/N` and `c/N²` reference
/// columns anchored at the first point and, for squeezed recipes, the χt
/// used.
pub fn scan_system_size(
    recipe: &ProbeRecipe,
    n_values: &[usize],
    phi: &PhaseVector,
    quantity: SizeQuantity,
) -> Result<SweepTable> {
    if n_values.is_empty() {
        return Err(Error::invalid("no system sizes given"));
    }
    let axis: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let table = SweepTable::new("n", axis.clone())?;
    let rows: Vec<(f64, Option<f64>)> = n_values
        .par_iter()
        .map(|&n| -> Result<(f64, Option<f64>)> {
            let (probe, chi) = recipe.build(n, phi)?;
            let q = qfim_pure(&probe, phi)?;
            let v = match quantity {
                SizeQuantity::DNorm => q.d_norm,
                SizeQuantity::TotalVariance => q.total_variance.value(),
            };
            Ok((v, chi))
        })
        .collect::<Result<_>>()?;
    let (v0, n0) = (rows[0].0, axis[0]);
    let mut table = table
        .with_column(quantity.label(), rows.iter().map(|r| r.0).collect())?
        .with_column("sql_ref", axis.iter().map(|n| v0 * n0 / n).collect())?
        .with_column("hl_ref", axis.iter().map(|n| v0 * n0 * n0 / (n * n)).collect())?;
    if matches!(recipe, ProbeRecipe::OptimallySqueezed { .. }) {
        table.push_column("chi_t_opt", rows.iter().map(|r| r.1.unwrap_or(f64::NAN)).collect())?;
    }
    Ok(table)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope fit needs two or more paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("slope fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 0.3, 301).unwrap();
        assert_eq!(g.len(), 301);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[300], 0.3);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(linspace(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn pole_coherent_state_husimi() {
        let s = coherent_state(6, 0.0, 0.0).unwrap();
        let g = husimi_grid(&s, 11, 16).unwrap();
        for j in 0..16 {
            assert!((g.values[(0, j)] - 1.0).abs() < 1e-14);
        }
        assert_eq!(g.local_maxima(0.0), vec![(0.0, 0.0)]);
    }

    #[test]
    fn husimi_values_are_probabilities() {
        for s in [multi_ghz_state(9).unwrap(), coherent_state(12, 1.1, 2.0).unwrap()] {
            let g = husimi_grid(&s, 31, 40).unwrap();
            assert!(g.values.iter().all(|&q| (-1e-12..=1.0 + 1e-12).contains(&q)));
            assert!(g.values.sum() > 0.0);
        }
    }

    #[test]
    fn husimi_matches_direct_overlaps() {
        let s = multi_ghz_state(5).unwrap();
        let g = husimi_grid(&s, 7, 9).unwrap();
        for (i, &t) in g.theta_nodes.iter().enumerate() {
            for (j, &p) in g.phi_nodes.iter().enumerate() {
                let c = coherent_state(5, t, p).unwrap();
                assert!((g.values[(i, j)] - s.inner(&c).norm_sqr()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn equatorial_coherent_state_has_one_maximum() {
        let s = coherent_state(20, FRAC_PI_2, PI).unwrap();
        let g = husimi_grid(&s, 61, 120).unwrap();
        // far from the peak Q is ~1e-31 and rounding leaves spurious ripples
        assert!(g.local_maxima(0.0).len() > 1);
        let m = g.local_maxima(1e-6);
        assert_eq!(m.len(), 1);
        assert!((m[0].0 - FRAC_PI_2).abs() < 1e-12 && (m[0].1 - PI).abs() < 1e-12);
    }

    #[test]
    fn fluctuation_shrinks_with_n() {
        let values: Vec<f64> = [10, 20, 40, 80]
            .iter()
            .map(|&n| {
                let s = coherent_state(n, FRAC_PI_2, PI).unwrap();
                spin_fluctuation(&s, 61, 121).unwrap().delta_sq
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        assert!(values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn fluctuation_converges_under_refinement() {
        let s = coherent_state(20, FRAC_PI_2, PI).unwrap();
        let coarse = spin_fluctuation(&s, 61, 121).unwrap();
        let fine = spin_fluctuation(&s, 122, 242).unwrap();
        assert!(((fine.delta_sq - coarse.delta_sq) / fine.delta_sq).abs() < 0.01);
        assert!((coarse.theta_bar - FRAC_PI_2).abs() < 1e-9);
        assert!((coarse.phi_bar - PI).abs() < 1e-9);
    }

    #[test]
    fn spherical_measure_differs_from_flat() {
        let s = coherent_state(10, 0.6, 2.0).unwrap();
        let flat = spin_fluctuation_with(&s, 40, 80, FluctuationMeasure::Flat).unwrap();
        let sph = spin_fluctuation_with(&s, 40, 80, FluctuationMeasure::Spherical).unwrap();
        assert!(sph.delta_sq >= 0.0);
        assert!((flat.theta_bar - sph.theta_bar).abs() > 1e-6);
    }

    #[test]
    fn sweep_table_validation() {
        assert!(SweepTable::new("x", vec![0.0, 0.0]).is_err());
        let mut t = SweepTable::new("x", vec![0.0, 1.0]).unwrap();
        assert!(t.push_column("a", vec![1.0]).is_err());
        t.push_column("a", vec![1.0, 2.0]).unwrap();
        assert!(t.push_column("a", vec![1.0, 2.0]).is_err());
        assert_eq!(t.column("a"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn argmin_skips_nan_and_prefers_first() {
        assert_eq!(argmin(&[3.0, f64::NAN, 1.0, 1.0]), Some(2));
        assert_eq!(argmin(&[f64::NAN]), None);
        assert_eq!(argmin(&[f64::INFINITY, 2.0]), Some(1));
    }

    #[test]
    fn optimizer_finds_quadratic_minimum() {
        let m = minimize_bracketed(|x| (x - 0.3).powi(2), (0.0, 1.0), 16, 1e-5).unwrap();
        assert!((m.x - 0.3).abs() <= 1e-5);
        let edge = minimize_bracketed(|x| x, (0.0, 1.0), 8, 1e-5).unwrap();
        assert_eq!(edge.x, 0.0);
    }

    #[test]
    fn optimizer_rejects_all_infinite() {
        let r = minimize_bracketed(|_| f64::INFINITY, (0.0, 1.0), 8, 1e-5);
        assert!(matches!(r, Err(Error::OptimizationFailed(_))));
        assert!(minimize_bracketed(|x| x, (0.0, 1.0), 4, 1e-5).is_err());
    }

    #[test]
    fn optimizer_ignores_infinite_neighbours() {
        let f = |x: f64| if x < 0.5 { f64::INFINITY } else { (x - 0.52).powi(2) };
        let m = minimize_bracketed(f, (0.0, 1.0), 11, 1e-6).unwrap();
        assert!((m.x - 0.52).abs() < 1e-5);
    }

    #[test]
    fn tat_optimum_no_worse_than_unsqueezed() {
        let probe = ghz_state(GhzSpec::new(40, Axis::Z)).unwrap();
        let phi = PhaseVector::small();
        let best = optimize_chi_t(&probe, SqueezeKind::Tat, 0.02, (0.0, 0.3), &phi, 31).unwrap();
        let traj = SqueezeTrajectory::new(&probe, SqueezeKind::Tat, 0.02, &phi).unwrap();
        assert!(best.value <= traj.qfim(0.0).total_variance.value());
        // two almost degenerate minima near 0.2236 and 0.2252: only the value is stable
        let doubled = optimize_chi_t(&probe, SqueezeKind::Tat, 0.02, (0.0, 0.3), &phi, 62).unwrap();
        assert!((best.value - doubled.value).abs() <= 1e-8 * best.value);
    }

    #[test]
    fn optimum_is_stable_under_coarse_refinement() {
        let probe = ghz_state(GhzSpec::new(20, Axis::Z)).unwrap();
        let phi = PhaseVector::small();
        for kind in [SqueezeKind::Oat, SqueezeKind::Tat] {
            let (lo, hi) = default_chi_t_range(kind);
            let a = optimize_chi_t(&probe, kind, 0.02, (lo, hi), &phi, 31).unwrap();
            let b = optimize_chi_t(&probe, kind, 0.02, (lo, hi), &phi, 62).unwrap();
            assert!((a.x - b.x).abs() <= 1e-5, "{kind}: {} vs {}", a.x, b.x);
        }
    }

    #[test]
    fn correction_ratio_basic_properties() {
        let probe = ghz_state(GhzSpec::new(3, Axis::Z)).unwrap();
        let eps = [0.0, 0.1, 0.3];
        let r = correction_ratio(&probe, SqueezeKind::Tat, 0.02, &PhaseVector::small(), &eps, (0.0, 0.3), 16).unwrap();
        let col = r.table.column("r_percent").unwrap();
        assert_eq!(col[0], 0.0);
        assert!(col.iter().all(|&v| v >= 0.0));
        let wo = r.table.column("variance_wo").unwrap();
        assert!(wo.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn fully_dephased_rows_are_infinite_not_fatal() {
        let probe = ghz_state(GhzSpec::new(3, Axis::Z)).unwrap();
        let r = correction_ratio(&probe, SqueezeKind::Tat, 0.02, &PhaseVector::small(), &[0.0, 0.5], (0.0, 0.3), 10)
            .unwrap();
        assert!(r.table.column("variance_wo").unwrap()[1].is_infinite());
        assert!(r.table.column("variance_w").unwrap()[1].is_infinite());
        assert_eq!(r.table.column("r_percent").unwrap()[1], 0.0);
    }

    #[test]
    fn ratio_sentinels() {
        assert_eq!(ratio_percent(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(ratio_percent(3.0, 1.0), 50.0);
        assert_eq!(ratio_percent(f64::INFINITY, 1.0), 100.0);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0, 2.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn size_scan_reference_columns() {
        let t = scan_system_size(&ProbeRecipe::Ghz(Axis::Z), &[4, 8], &PhaseVector::small(), SizeQuantity::TotalVariance)
            .unwrap();
        let v = t.column("total_variance").unwrap();
        assert_eq!(t.column("sql_ref").unwrap()[0], v[0]);
        assert_eq!(t.column("hl_ref").unwrap()[1], v[0] / 4.0);
        assert!(t.column("chi_t_opt").is_none());
    }

    #[test]
    fn sweeps_are_identical_across_thread_counts() {
        let probe = multi_ghz_state(12).unwrap();
        let grid = linspace(0.0, 0.3, 40).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| scan_chi_t(&probe, SqueezeKind::Tat, 0.02, &grid, &PhaseVector::small()).unwrap())
        };
        let one = run(1);
        let many = run(4);
        for ((_, a), (_, b)) in one.columns().iter().zip(many.columns()) {
            let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }
}
