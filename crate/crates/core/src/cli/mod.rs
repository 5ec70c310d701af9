//! Command-line front end: config loading, the three analysis runs, and CSV
//! and SVG output.

mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{
    Complement, EstimateSpec, ExperimentConfig, FixedPointSpec, Method, MixtureSpec,
    PartitionSpec, SamplerSpec, ScaleSpec, ScheduleSpec, ScoreSource,
};
pub use output::{config_hash, num, write_atomic, Table, TOOL_VERSION};

use crate::bifurcation::trace_bifurcations;
use crate::entropy::{entropy_profile, GridPolicy};
use crate::error::{Error, Result};
use crate::tracker::{
    estimate_conditional_entropy, BranchLabels, EstimatorSettings, GmmScoreModel,
    McEntropyEstimate, ReplayScoreModel,
};

#[derive(Debug, Parser)]
#[command(name = "diffusion-entropy", version, about = "Class-information entropy and reverse-drift bifurcations of 1-D diffusion models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quadrature entropy profile, rate and information transfer per partition.
    Profile(RunArgs),
    /// Monte-Carlo entropy by ancestral sampling with posterior tracking.
    Estimate(RunArgs),
    /// Fixed points of the reverse drift across noise levels.
    FixedPoints(RunArgs),
    /// Parse and check a config without running anything.
    ValidateConfig(ConfigArg),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

impl RunArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(n) = self.samples {
            config.samples = n;
        }
        if let Some(g) = self.grid {
            config.grid = g;
        }
        if let Some(s) = self.stride {
            config.stride = s;
        }
        if let Some(o) = &self.out {
            config.out = Some(o.clone());
        }
    }
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let (args, method) = match &cli.command {
        Command::ValidateConfig(a) => {
            ExperimentConfig::load(&a.config)?.validate()?;
            return Ok(Vec::new());
        }
        Command::Profile(a) => (a, Method::Quadrature),
        Command::Estimate(a) => (a, Method::MonteCarlo),
        Command::FixedPoints(a) => (a, Method::FixedPoints),
    };
    let mut config = ExperimentConfig::load(&args.config)?;
    args.apply(&mut config);
    if let Some(m) = config.method {
        if m != method {
            return Err(Error::Config(format!(
                "config declares method {m:?} but the {method:?} command was run"
            )));
        }
    }
    config.validate()?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    match method {
        Method::Quadrature => run_profile(&config, &out, args.svg),
        Method::MonteCarlo => run_estimate(&config, &out),
        Method::FixedPoints => run_fixed_points(&config, &out, args.svg),
    }
}

fn header(table: &mut Table, config: &ExperimentConfig) -> Result<()> {
    // the output location does not change results and is left out of the hash
    let canonical = ExperimentConfig {
        out: None,
        ..config.clone()
    }
    .to_toml()?;
    table
        .comment(TOOL_VERSION)
        .comment(format!("config-sha256 {}", config_hash(&canonical)));
    Ok(())
}

fn save(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    write_atomic(&path, bytes)?;
    written.push(path);
    Ok(())
}

fn require_partitions(config: &ExperimentConfig) -> Result<()> {
    if config.partitions.is_empty() {
        return Err(Error::Config("at least one [[partitions]] entry is required".into()));
    }
    Ok(())
}

/// Writes `profile_<partition>.csv` for every partition and optionally
/// `profile.svg` with the entropy rate of each.
pub fn run_profile(config: &ExperimentConfig, out: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    require_partitions(config)?;
    let mixture = config.mixture()?;
    let schedule = config.schedule()?;
    let policy = GridPolicy::Auto {
        points: config.grid,
    };
    let mut written = Vec::new();
    let mut series = Vec::new();
    for (label, partition) in config.partitions(&mixture)? {
        let profile = entropy_profile(&mixture, &partition, &schedule, policy, config.stride)?;
        let s = profile.normalized_times();
        let mut table = Table::new(&["t", "s", "H_bits", "dH_ds", "dH_dg", "transfer_bits"]);
        header(&mut table, config)?;
        table.comment(format!("partition {label}"));
        for (i, &t) in profile.times.steps().iter().enumerate() {
            table.row(vec![
                t.to_string(),
                num(s[i]),
                num(profile.h_bits[i]),
                num(profile.rate_bits[i]),
                num(-profile.rate_bits[i]),
                num(profile.transfer_bits[i]),
            ]);
        }
        save(out.join(format!("profile_{label}.csv")), &table.to_bytes()?, &mut written)?;
        series.push((label, s.into_iter().zip(profile.rate_bits).collect::<Vec<_>>()));
    }
    if svg {
        let series: Vec<svg::Series> = series
            .iter()
            .map(|(name, points)| svg::Series {
                name,
                points: points.clone(),
            })
            .collect();
        let chart = svg::line_chart("Entropy rate", "s = t/T", "dH/ds (bits)", &series);
        save(out.join("profile.svg"), chart.as_bytes(), &mut written)?;
    }
    Ok(written)
}

fn estimate_for(
    config: &ExperimentConfig,
    partition: &crate::model::Partition,
) -> Result<McEntropyEstimate> {
    let mixture = config.mixture()?;
    let schedule = config.schedule()?;
    let settings = EstimatorSettings {
        prior_z0: partition.prior_z0(),
        n_z0: config.samples,
        n_z1: config.samples,
        seed: config.seed,
        scale: config.estimate.posterior_scale.into(),
        labels: match config.estimate.complement {
            Complement::Exact => BranchLabels::default(),
            Complement::Null => BranchLabels::null_complement(),
        },
        sampler: config.estimate.sampler.into(),
    };
    match &config.estimate.score_model {
        ScoreSource::Exact => {
            let model = GmmScoreModel::new(&mixture, &schedule, Some(partition.clone()))?;
            estimate_conditional_entropy(&model, &schedule, &settings)
        }
        ScoreSource::Replay { path } => {
            let model = ReplayScoreModel::from_path(path)?;
            estimate_conditional_entropy(&model, &schedule, &settings)
        }
    }
}

/// Writes `estimate_<partition>.csv` for every partition.
pub fn run_estimate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    require_partitions(config)?;
    let mixture = config.mixture()?;
    let mut written = Vec::new();
    for (label, partition) in config.partitions(&mixture)? {
        let est = estimate_for(config, &partition)?;
        let total = est.steps();
        let mut table = Table::new(&[
            "t", "s", "H_bits", "H_z0_mean", "H_z1_mean", "N_z0", "N_z1", "seed",
        ]);
        header(&mut table, config)?;
        table.comment(format!("partition {label}"));
        for t in (0..=total).filter(|t| t % config.stride == 0 || *t == total) {
            table.row(vec![
                t.to_string(),
                num(t as f64 / total as f64),
                num(est.h_bits[t]),
                num(est.h_z0_mean[t]),
                num(est.h_z1_mean[t]),
                est.n_z0.to_string(),
                est.n_z1.to_string(),
                est.seed.to_string(),
            ]);
        }
        save(out.join(format!("estimate_{label}.csv")), &table.to_bytes()?, &mut written)?;
    }
    Ok(written)
}

/// Writes `fixed_points.csv`, `critical_levels.csv` and optionally
/// `fixed_points.svg`.
pub fn run_fixed_points(config: &ExperimentConfig, out: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    let mixture = config.mixture()?;
    let schedule = config.schedule()?;
    let diagram = trace_bifurcations(&mixture, &schedule, config.stride, &config.fixed_point_options())?;
    let mut written = Vec::new();

    let mut table = Table::new(&["t", "s", "alpha_bar", "x_star", "stability"]);
    header(&mut table, config)?;
    let mut markers = Vec::new();
    for level in &diagram.levels {
        for p in &level.set.points {
            table.row(vec![
                level.t.to_string(),
                num(level.s),
                num(p.alpha_bar),
                num(p.x_star),
                p.stability.to_string(),
            ]);
            markers.push(svg::Marker {
                x: level.s,
                y: p.x_star,
                filled: p.stability == crate::bifurcation::Stability::Stable,
            });
        }
    }
    save(out.join("fixed_points.csv"), &table.to_bytes()?, &mut written)?;

    let mut table = Table::new(&["t", "s", "alpha_bar", "count_below", "count_above"]);
    header(&mut table, config)?;
    for c in &diagram.critical {
        table.row(vec![
            c.t.to_string(),
            num(c.s),
            num(c.alpha_bar),
            c.count_below.to_string(),
            c.count_above.to_string(),
        ]);
    }
    save(out.join("critical_levels.csv"), &table.to_bytes()?, &mut written)?;

    if svg {
        let chart = svg::scatter(
            "Fixed points of the reverse drift (filled: stable)",
            "s = t/T",
            "x*",
            &markers,
        );
        save(out.join("fixed_points.svg"), chart.as_bytes(), &mut written)?;
    }
    Ok(written)
}
