//! Argument parsing, command execution and CSV/JSON rendering for the
//! `spinmetro` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use spinmetro::analysis::{
    correction_ratio, default_chi_t_range, husimi_grid, linspace, optimize_chi_t, scan_chi_t,
    scan_system_size, spin_fluctuation_with, FluctuationMeasure, ProbeRecipe, SizeQuantity, SweepTable, DEFAULT_CHI_T_POINTS,
};
use spinmetro::encoding::PhaseVector;
use spinmetro::fisher::qfim_pure;
use spinmetro::noise::PIPELINE_LIMIT;
use spinmetro::probes::{ghz_state, multi_ghz_state, pm_distribution, GhzSpec};
use spinmetro::spinspace::{Axis, PureState};
use spinmetro::squeezing::{qfim_echo, squeezed_probe, SqueezeConfig, SqueezeKind, DEFAULT_LAMBDA_RATIO};

pub const TOOL: &str = "spinmetro";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation; exit status 2.
    Usage(String),
    /// The computation or the write failed; exit status 1.
    Runtime(String),
    /// `--help` or `--version` text; exit status 0.
    Help(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::Help(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
            CliError::Help(_) => 0,
        }
    }
}

impl From<spinmetro::Error> for CliError {
    fn from(e: spinmetro::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("error: {}", msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "spinmetro", version, about = "Multiphase estimation sweeps for collective spin probes")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// QFIM, D matrix and total variance of one probe
    Qfim(Flags),
    /// ‖D‖_F over a range of N
    DnormScan(Flags),
    /// Total variance, ‖D‖_F and ξ_S² along a χt grid
    SqueezeScan(Flags),
    /// Variance-optimal χt for one N
    Optimize(Flags),
    /// Correction ratio R over a grid of noise strengths
    NoiseScan(Flags),
    /// Husimi function on a (θ, φ) grid
    Husimi(Flags),
    /// Dicke-basis populations P(m)
    PmDist(Flags),
    /// Total variance over a range of N
    SizeScan(Flags),
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Number of spins
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    n_step: Option<usize>,
    /// Phase components; one value applies to all three
    #[arg(long, value_parser = finite, allow_negative_numbers = true)]
    phi: Vec<f64>,
    #[arg(long, value_enum)]
    probe: Option<ProbeKind>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Single twisting angle for qfim, husimi and pm-dist
    #[arg(long, value_parser = finite, allow_negative_numbers = true)]
    chi_t: Option<f64>,
    #[arg(long, value_parser = finite, allow_negative_numbers = true)]
    chi_t_min: Option<f64>,
    #[arg(long, value_parser = finite, allow_negative_numbers = true)]
    chi_t_max: Option<f64>,
    #[arg(long)]
    chi_t_points: Option<usize>,
    /// Λ/N for twist-and-turn
    #[arg(long, value_parser = finite)]
    lambda_ratio: Option<f64>,
    /// Echo exponent r
    #[arg(long, value_parser = finite, allow_negative_numbers = true)]
    echo_r: Option<f64>,
    #[arg(long, value_parser = finite)]
    epsilon_min: Option<f64>,
    #[arg(long, value_parser = finite)]
    epsilon_max: Option<f64>,
    #[arg(long)]
    epsilon_points: Option<usize>,
    #[arg(long)]
    theta_points: Option<usize>,
    #[arg(long)]
    phi_points: Option<usize>,
    /// Area measure for the husimi spin-fluctuation summary
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Output file; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Qfim,
    DnormScan,
    SqueezeScan,
    Optimize,
    NoiseScan,
    Husimi,
    PmDist,
    SizeScan,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Qfim => "qfim",
            CommandKind::DnormScan => "dnorm-scan",
            CommandKind::SqueezeScan => "squeeze-scan",
            CommandKind::Optimize => "optimize",
            CommandKind::NoiseScan => "noise-scan",
            CommandKind::Husimi => "husimi",
            CommandKind::PmDist => "pm-dist",
            CommandKind::SizeScan => "size-scan",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProbeKind {
    MultiGhz,
    GhzX,
    GhzY,
    GhzZ,
}

impl ProbeKind {
    fn label(self) -> &'static str {
        match self {
            ProbeKind::MultiGhz => "multi-ghz",
            ProbeKind::GhzX => "ghz-x",
            ProbeKind::GhzY => "ghz-y",
            ProbeKind::GhzZ => "ghz-z",
        }
    }

    fn recipe(self) -> ProbeRecipe {
        match self {
            ProbeKind::MultiGhz => ProbeRecipe::MultiGhz,
            ProbeKind::GhzX => ProbeRecipe::Ghz(Axis::X),
            ProbeKind::GhzY => ProbeRecipe::Ghz(Axis::Y),
            ProbeKind::GhzZ => ProbeRecipe::Ghz(Axis::Z),
        }
    }

    fn build(self, n: usize) -> spinmetro::Result<PureState> {
        match self {
            ProbeKind::MultiGhz => multi_ghz_state(n),
            ProbeKind::GhzX => ghz_state(GhzSpec::new(n, Axis::X)),
            ProbeKind::GhzY => ghz_state(GhzSpec::new(n, Axis::Y)),
            ProbeKind::GhzZ => ghz_state(GhzSpec::new(n, Axis::Z)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Oat,
    Tat,
    Tnt,
}

impl From<KindArg> for SqueezeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Oat => SqueezeKind::Oat,
            KindArg::Tat => SqueezeKind::Tat,
            KindArg::Tnt => SqueezeKind::Tnt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Flat,
    Spherical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    fn label(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Inclusive evenly spaced grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> spinmetro::Result<Vec<f64>> {
        linspace(self.min, self.max, self.points)
    }
}

/// A fully resolved invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub phi: PhaseVector,
    pub probe: ProbeKind,
    pub kind: Option<SqueezeKind>,
    pub chi_t: f64,
    pub chi_grid: Grid,
    pub lambda_ratio: f64,
    pub echo_r: f64,
    pub epsilon: Grid,
    pub theta_points: usize,
    pub phi_points: usize,
    pub measure: FluctuationMeasure,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn n_values(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step).collect()
    }

    fn squeeze(&self) -> Option<SqueezeConfig> {
        self.kind.map(|k| {
            SqueezeConfig::new(k, self.chi_t)
                .with_lambda_ratio(self.lambda_ratio)
                .with_echo_exponent(self.echo_r)
        })
    }

    /// The flags that determine this command's output, in canonical order.
    fn effective_flags(&self) -> Vec<(&'static str, String)> {
        use CommandKind::*;
        let mut f: Vec<(&'static str, String)> = Vec::new();
        let phi = [self.phi.x, self.phi.y, self.phi.z];
        let push_phi = |f: &mut Vec<(&'static str, String)>| {
            for v in phi {
                f.push(("phi", v.to_string()));
            }
        };
        match self.command {
            DnormScan | SizeScan => {
                f.push(("n-min", self.n_min.to_string()));
                f.push(("n-max", self.n_max.to_string()));
                f.push(("n-step", self.n_step.to_string()));
            }
            _ => f.push(("n", self.n.to_string())),
        }
        if !matches!(self.command, Husimi | PmDist) {
            push_phi(&mut f);
        }
        f.push(("probe", self.probe.label().to_string()));
        if let Some(kind) = self.kind {
            f.push(("kind", kind.label().to_string()));
            match self.command {
                Qfim | Husimi | PmDist => f.push(("chi-t", self.chi_t.to_string())),
                DnormScan => {}
                _ => {
                    f.push(("chi-t-min", self.chi_grid.min.to_string()));
                    f.push(("chi-t-max", self.chi_grid.max.to_string()));
                    f.push(("chi-t-points", self.chi_grid.points.to_string()));
                }
            }
            if kind == SqueezeKind::Tnt {
                f.push(("lambda-ratio", self.lambda_ratio.to_string()));
            }
            if self.command == Qfim {
                f.push(("echo-r", self.echo_r.to_string()));
            }
        }
        if self.command == NoiseScan {
            f.push(("epsilon-min", self.epsilon.min.to_string()));
            f.push(("epsilon-max", self.epsilon.max.to_string()));
            f.push(("epsilon-points", self.epsilon.points.to_string()));
        }
        if self.command == Husimi {
            f.push(("theta-points", self.theta_points.to_string()));
            f.push(("phi-points", self.phi_points.to_string()));
            let measure = match self.measure {
                FluctuationMeasure::Flat => "flat",
                FluctuationMeasure::Spherical => "spherical",
            };
            f.push(("measure", measure.to_string()));
        }
        f.push(("format", self.format.label().to_string()));
        f
    }

    /// Command line that reproduces this output.
    pub fn canonical_command(&self) -> String {
        let mut s = format!("{TOOL} {}", self.command.name());
        for (k, v) in self.effective_flags() {
            let _ = write!(s, " --{k} {v}");
        }
        s
    }
}

/// Parses a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Help(e.render().to_string())
        }
        _ => CliError::Usage(e.render().to_string()),
    })?;
    let (command, flags) = match cli.command {
        Cmd::Qfim(f) => (CommandKind::Qfim, f),
        Cmd::DnormScan(f) => (CommandKind::DnormScan, f),
        Cmd::SqueezeScan(f) => (CommandKind::SqueezeScan, f),
        Cmd::Optimize(f) => (CommandKind::Optimize, f),
        Cmd::NoiseScan(f) => (CommandKind::NoiseScan, f),
        Cmd::Husimi(f) => (CommandKind::Husimi, f),
        Cmd::PmDist(f) => (CommandKind::PmDist, f),
        Cmd::SizeScan(f) => (CommandKind::SizeScan, f),
    };
    resolve(command, flags)
}

fn resolve(command: CommandKind, f: Flags) -> Result<RunConfig, CliError> {
    use CommandKind::*;
    let kind: Option<SqueezeKind> = f.kind.map(Into::into);
    if matches!(command, SqueezeScan | Optimize | NoiseScan) && kind.is_none() {
        return Err(usage(format!("{} requires --kind {{oat,tat,tnt}}", command.name())));
    }

    let n = f.n.unwrap_or(if command == NoiseScan { 4 } else { 16 });
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if command == NoiseScan && n > PIPELINE_LIMIT {
        return Err(usage(format!(
            "--n {n} exceeds the noise pipeline limit N <= {PIPELINE_LIMIT} (2^N x 2^N density matrices)"
        )));
    }
    let n_min = f.n_min.unwrap_or(2);
    let n_max = f.n_max.unwrap_or(50);
    let n_step = f.n_step.unwrap_or(1);
    if n_min == 0 || n_step == 0 || n_min > n_max {
        return Err(usage(format!(
            "--n-min/--n-max/--n-step must satisfy 1 <= n-min <= n-max and n-step >= 1 (got {n_min}, {n_max}, {n_step})"
        )));
    }

    let phi = match f.phi.as_slice() {
        [] => PhaseVector::small(),
        [v] => PhaseVector::uniform(*v).map_err(|e| usage(e.to_string()))?,
        [x, y, z] => PhaseVector::new(*x, *y, *z).map_err(|e| usage(e.to_string()))?,
        other => {
            return Err(usage(format!(
                "--phi takes one value or three values, got {}",
                other.len()
            )))
        }
    };

    let default_probe = match (command, kind) {
        (SqueezeScan | Optimize | NoiseScan, _) | (SizeScan, Some(_)) => ProbeKind::GhzZ,
        _ => ProbeKind::MultiGhz,
    };
    let probe = f.probe.unwrap_or(default_probe);
    if command == SizeScan && kind.is_some() && probe != ProbeKind::GhzZ {
        return Err(usage("size-scan with --kind squeezes the z-GHZ probe; --probe must be ghz-z"));
    }

    let (lo, hi) = default_chi_t_range(kind.unwrap_or(SqueezeKind::Tat));
    let chi_grid = Grid {
        min: f.chi_t_min.unwrap_or(lo),
        max: f.chi_t_max.unwrap_or(hi),
        points: f.chi_t_points.unwrap_or(DEFAULT_CHI_T_POINTS),
    };
    if !(chi_grid.max > chi_grid.min) || chi_grid.points < 2 {
        return Err(usage("--chi-t-min must be below --chi-t-max with --chi-t-points >= 2"));
    }
    if matches!(command, Optimize | NoiseScan | SizeScan) && chi_grid.points < 8 {
        return Err(usage("the optimizer needs --chi-t-points >= 8"));
    }
    let chi_t = f.chi_t.unwrap_or(0.0);

    let lambda_ratio = f.lambda_ratio.unwrap_or(DEFAULT_LAMBDA_RATIO);
    if !(lambda_ratio > 0.0) {
        return Err(usage("--lambda-ratio must be positive"));
    }
    let echo_r = f.echo_r.unwrap_or(1.0);

    let epsilon = Grid {
        min: f.epsilon_min.unwrap_or(0.0),
        max: f.epsilon_max.unwrap_or(0.5),
        points: f.epsilon_points.unwrap_or(6),
    };
    if !(0.0..=1.0).contains(&epsilon.min) || !(0.0..=1.0).contains(&epsilon.max) {
        return Err(usage("--epsilon-min and --epsilon-max must lie in [0, 1]"));
    }
    if epsilon.points == 0 || (epsilon.points > 1 && !(epsilon.max > epsilon.min)) {
        return Err(usage("--epsilon-points must be >= 1 and the epsilon range increasing"));
    }

    let theta_points = f.theta_points.unwrap_or(61);
    let phi_points = f.phi_points.unwrap_or(121);
    if theta_points < 2 || phi_points < 2 {
        return Err(usage("--theta-points and --phi-points must be >= 2"));
    }
    if f.threads == Some(0) {
        return Err(usage("--threads must be >= 1"));
    }

    Ok(RunConfig {
        command,
        n,
        n_min,
        n_max,
        n_step,
        phi,
        probe,
        kind,
        chi_t,
        chi_grid,
        lambda_ratio,
        echo_r,
        epsilon,
        theta_points,
        phi_points,
        measure: match f.measure {
            Some(MeasureArg::Spherical) => FluctuationMeasure::Spherical,
            _ => FluctuationMeasure::Flat,
        },
        format: f.format.unwrap_or_default(),
        out: f.out,
        threads: f.threads,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Meta {
    Text(String),
    Number(f64),
    Numbers(Vec<f64>),
}

/// A computed artifact before serialization.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub meta: Vec<(String, Meta)>,
    pub table: SweepTable,
    /// Additional top-level JSON fields.
    pub extra: Vec<(String, Value)>,
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(v.to_string())
    }
}

fn matrix_json(m: &nalgebra::Matrix3<f64>) -> Value {
    Value::Array(
        (0..3)
            .map(|r| Value::Array((0..3).map(|c| number(m[(r, c)])).collect()))
            .collect(),
    )
}

fn probe_for(cfg: &RunConfig, n: usize) -> Result<PureState, CliError> {
    let base = cfg.probe.build(n)?;
    match cfg.squeeze() {
        Some(sq) => Ok(squeezed_probe(&base, &sq)?),
        None => Ok(base),
    }
}

/// Runs the computation for `cfg` on the current rayon pool.
pub fn compute(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut meta: Vec<(String, Meta)> = cfg
        .effective_flags()
        .into_iter()
        .filter(|(k, _)| *k != "phi" && *k != "format")
        .map(|(k, v)| (k.replace('-', "_"), Meta::Text(v)))
        .collect();
    if !matches!(cfg.command, CommandKind::Husimi | CommandKind::PmDist) {
        meta.push(("phi".into(), Meta::Numbers(cfg.phi.as_array().to_vec())));
    }
    let mut extra = Vec::new();
    let phi = &cfg.phi;

    let table = match cfg.command {
        CommandKind::Qfim => {
            let base = cfg.probe.build(cfg.n)?;
            let r = match cfg.squeeze() {
                Some(sq) => qfim_echo(&base, &sq, phi)?,
                None => qfim_pure(&base, phi)?,
            };
            meta.push(("d_norm".into(), Meta::Number(r.d_norm)));
            meta.push(("total_variance".into(), Meta::Number(r.total_variance.value())));
            extra.push(("qfim".into(), matrix_json(&r.qfim)));
            extra.push(("d_matrix".into(), matrix_json(&r.d_matrix)));
            extra.push(("d_norm".into(), number(r.d_norm)));
            extra.push(("total_variance".into(), number(r.total_variance.value())));
            let mut t = SweepTable::new("row", vec![0.0, 1.0, 2.0])?;
            for (c, axis) in ["x", "y", "z"].iter().enumerate() {
                t.push_column(format!("qfim_{axis}"), (0..3).map(|r_| r.qfim[(r_, c)]).collect())?;
            }
            for (c, axis) in ["x", "y", "z"].iter().enumerate() {
                t.push_column(format!("d_{axis}"), (0..3).map(|r_| r.d_matrix[(r_, c)]).collect())?;
            }
            t
        }
        CommandKind::DnormScan => {
            scan_system_size(&cfg.probe.recipe(), &cfg.n_values(), phi, SizeQuantity::DNorm)?
        }
        CommandKind::SizeScan => {
            let recipe = match cfg.kind {
                Some(kind) => ProbeRecipe::OptimallySqueezed {
                    kind,
                    lambda_ratio: cfg.lambda_ratio,
                    bracket: (cfg.chi_grid.min, cfg.chi_grid.max),
                    coarse_points: cfg.chi_grid.points,
                },
                None => cfg.probe.recipe(),
            };
            scan_system_size(&recipe, &cfg.n_values(), phi, SizeQuantity::TotalVariance)?
        }
        CommandKind::SqueezeScan => {
            let kind = cfg.kind.expect("validated");
            let base = cfg.probe.build(cfg.n)?;
            let t = scan_chi_t(&base, kind, cfg.lambda_ratio, &cfg.chi_grid.values()?, phi)?;
            let db: Vec<f64> = t
                .column("xi_s_sq")
                .expect("scan_chi_t emits xi_s_sq")
                .iter()
                .map(|x| 10.0 * x.log10())
                .collect();
            t.clone().with_column("xi_s_sq_db", db)?
        }
        CommandKind::Optimize => {
            let kind = cfg.kind.expect("validated");
            let base = cfg.probe.build(cfg.n)?;
            let best = optimize_chi_t(
                &base,
                kind,
                cfg.lambda_ratio,
                (cfg.chi_grid.min, cfg.chi_grid.max),
                phi,
                cfg.chi_grid.points,
            )?;
            let sq = SqueezeConfig::new(kind, best.x).with_lambda_ratio(cfg.lambda_ratio);
            let r = qfim_pure(&squeezed_probe(&base, &sq)?, phi)?;
            SweepTable::new("n", vec![cfg.n as f64])?
                .with_column("chi_t_opt", vec![best.x])?
                .with_column("total_variance", vec![best.value])?
                .with_column("d_norm", vec![r.d_norm])?
        }
        CommandKind::NoiseScan => {
            let kind = cfg.kind.expect("validated");
            let base = cfg.probe.build(cfg.n)?;
            let r = correction_ratio(
                &base,
                kind,
                cfg.lambda_ratio,
                phi,
                &cfg.epsilon.values()?,
                (cfg.chi_grid.min, cfg.chi_grid.max),
                cfg.chi_grid.points,
            )?;
            meta.push(("chi_t_opt".into(), Meta::Number(r.chi_t_opt)));
            r.table
        }
        CommandKind::Husimi => {
            let state = probe_for(cfg, cfg.n)?;
            let g = husimi_grid(&state, cfg.theta_points, cfg.phi_points)?;
            let fl = spin_fluctuation_with(&state, cfg.theta_points, cfg.phi_points, cfg.measure)?;
            meta.push(("delta_sq".into(), Meta::Number(fl.delta_sq)));
            meta.push(("theta_bar".into(), Meta::Number(fl.theta_bar)));
            meta.push(("phi_bar".into(), Meta::Number(fl.phi_bar)));
            meta.push(("phi_nodes".into(), Meta::Numbers(g.phi_nodes.clone())));
            let mut t = SweepTable::new("theta", g.theta_nodes.clone())?;
            for j in 0..g.phi_nodes.len() {
                t.push_column(format!("q_phi_{j}"), g.values.column(j).iter().copied().collect())?;
            }
            t
        }
        CommandKind::PmDist => {
            let state = probe_for(cfg, cfg.n)?;
            let mut p = pm_distribution(&state);
            p.reverse();
            let j = cfg.n as f64 / 2.0;
            let m: Vec<f64> = (0..=cfg.n).map(|k| k as f64 - j).collect();
            SweepTable::new("m", m)?.with_column("p", p)?
        }
    };
    Ok(Output { meta, table, extra })
}

const DETERMINISM_NOTE: &str =
    "deterministic: no random seeds; parallel results are gathered in axis order";

fn meta_text(m: &Meta) -> String {
    match m {
        Meta::Text(s) => s.clone(),
        Meta::Number(v) => v.to_string(),
        Meta::Numbers(vs) => vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
    }
}

fn meta_json(m: &Meta) -> Value {
    match m {
        Meta::Text(s) => Value::String(s.clone()),
        Meta::Number(v) => number(*v),
        Meta::Numbers(vs) => Value::Array(vs.iter().map(|&v| number(v)).collect()),
    }
}

/// Serializes `out` for `cfg` in the configured format.
pub fn render(cfg: &RunConfig, out: &Output) -> String {
    match cfg.format {
        OutputFormat::Csv => render_csv(cfg, out),
        OutputFormat::Json => render_json(cfg, out),
    }
}

fn render_csv(cfg: &RunConfig, out: &Output) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {TOOL} {VERSION}");
    let _ = writeln!(s, "# command: {}", cfg.canonical_command());
    let _ = writeln!(s, "# subcommand: {}", cfg.command.name());
    for (k, v) in &out.meta {
        let _ = writeln!(s, "# {k}: {}", meta_text(v));
    }
    let _ = writeln!(s, "# {DETERMINISM_NOTE}");
    let t = &out.table;
    let header: Vec<&str> = std::iter::once(t.axis_name())
        .chain(t.columns().iter().map(|(n, _)| n.as_str()))
        .collect();
    let _ = writeln!(s, "{}", header.join(","));
    for (row, x) in t.axis().iter().enumerate() {
        let mut line = x.to_string();
        for (_, col) in t.columns() {
            let _ = write!(line, ",{}", col[row]);
        }
        let _ = writeln!(s, "{line}");
    }
    s
}

fn render_json(cfg: &RunConfig, out: &Output) -> String {
    let mut meta = Map::new();
    meta.insert("tool".into(), json!(TOOL));
    meta.insert("version".into(), json!(VERSION));
    meta.insert("command".into(), json!(cfg.canonical_command()));
    meta.insert("subcommand".into(), json!(cfg.command.name()));
    for (k, v) in &out.meta {
        meta.insert(k.clone(), meta_json(v));
    }
    meta.insert("determinism".into(), json!(DETERMINISM_NOTE));
    meta.insert("axis_name".into(), json!(out.table.axis_name()));
    let mut columns = Map::new();
    for (name, col) in out.table.columns() {
        columns.insert(name.clone(), Value::Array(col.iter().map(|&v| number(v)).collect()));
    }
    let mut root = Map::new();
    root.insert("meta".into(), Value::Object(meta));
    root.insert(
        "axis".into(),
        Value::Array(out.table.axis().iter().map(|&v| number(v)).collect()),
    );
    root.insert("columns".into(), Value::Object(columns));
    for (k, v) in &out.extra {
        root.insert(k.clone(), v.clone());
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values serialize");
    text.push('\n');
    text
}

/// Names of columns holding a variance, where `inf` marks a singular QFIM.
const VARIANCE_COLUMNS: [&str; 3] = ["total_variance", "variance_wo", "variance_w"];

/// Computes, renders and writes the artifact, warning on standard error
/// about singular rows.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let work = || -> Result<String, CliError> {
        let out = compute(cfg)?;
        for name in VARIANCE_COLUMNS {
            if let Some(col) = out.table.column(name) {
                let singular = col.iter().filter(|v| v.is_infinite()).count();
                if singular > 0 {
                    eprintln!("warning: {singular} row(s) of {name} have a singular QFIM (written as inf)");
                }
            }
        }
        Ok(render(cfg, &out))
    };
    let text = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Parses and executes; returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|cfg| execute(&cfg));
    match result {
        Ok(()) => 0,
        Err(CliError::Help(text)) => {
            print!("{text}");
            0
        }
        Err(CliError::Usage(msg)) => {
            eprint!("{msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            2
        }
        Err(e) => {
            eprintln!("{TOOL}: {e}");
            e.exit_code()
        }
    }
}
