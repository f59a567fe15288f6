//! Configuration-driven experiment runner: TOML configs in, CSV / JSON-lines
//! rows out, plus per-(q, T) aggregation.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ais::{run_ais, run_bdmc};
use crate::deformed::QOrder;
use crate::density::{
    make_gaussian, make_student_t, nu_from_q, Covariance, DensityHandle, GaussianSpec, StudentTSpec,
};
use crate::error::{Error, Result};
use crate::qpath::{linear_schedule, QPath, Schedule};
use crate::sampler::{mix64, HmcConfig, RngStream};

pub const CSV_HEADER: &str = "mode,q,T,seed,log_lower,log_upper,z_estimate,ess,n_invalid,wall_ms";
pub const GRID_HEADER: &str = "q,beta,z,log_density";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Ais,
    Bdmc,
    DensityGrid,
    PartitionMc,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ais => "ais",
            Mode::Bdmc => "bdmc",
            Mode::DensityGrid => "density-grid",
            Mode::PartitionMc => "partition-mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// One endpoint density. Vector parameters give diagonal covariance/scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointSpec {
    Gaussian {
        mean: OneOrMany<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variance: Option<OneOrMany<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        std: Option<OneOrMany<f64>>,
    },
    StudentT {
        mean: OneOrMany<f64>,
        scale: OneOrMany<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dof: Option<f64>,
        /// Alternative to `dof`: the order of the q-exponential family.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
    },
}

fn broadcast(field: &str, values: Vec<f64>, dim: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values),
        n => Err(Error::config(
            field,
            format!("has {n} entries, expected 1 or {dim}"),
        )),
    }
}

impl EndpointSpec {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        EndpointSpec::Gaussian {
            mean: OneOrMany::One(mean),
            variance: Some(OneOrMany::One(variance)),
            std: None,
        }
    }

    pub fn student_t(mean: f64, scale: f64, dof: f64) -> Self {
        EndpointSpec::StudentT {
            mean: OneOrMany::One(mean),
            scale: OneOrMany::One(scale),
            dof: Some(dof),
            q: None,
        }
    }

    /// Builds the density, naming `prefix.<field>` in any error.
    pub fn build(&self, prefix: &str) -> Result<DensityHandle> {
        let field = |f: &str| format!("{prefix}.{f}");
        match self {
            EndpointSpec::Gaussian {
                mean,
                variance,
                std,
            } => {
                let mean = mean.to_vec();
                let dim = mean.len();
                let var = match (variance, std) {
                    (Some(v), None) => broadcast(&field("variance"), v.to_vec(), dim)?,
                    (None, Some(s)) => broadcast(&field("std"), s.to_vec(), dim)?
                        .into_iter()
                        .map(|s| if s > 0.0 { s * s } else { s })
                        .collect(),
                    _ => {
                        return Err(Error::config(
                            field("variance"),
                            "give exactly one of `variance` or `std`",
                        ))
                    }
                };
                let key = if variance.is_some() {
                    "variance"
                } else {
                    "std"
                };
                if let Some(v) = var.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::config(
                        field(key),
                        format!("must be positive, got {v}"),
                    ));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::config(field("mean"), "must be finite"));
                }
                make_gaussian(GaussianSpec {
                    mean,
                    covariance: Covariance::Diagonal(var),
                })
                .map_err(|e| Error::config(prefix, e.to_string()))
            }
            EndpointSpec::StudentT {
                mean,
                scale,
                dof,
                q,
            } => {
                let mean = mean.to_vec();
                let dim = mean.len();
                let scale = broadcast(&field("scale"), scale.to_vec(), dim)?;
                if let Some(s) = scale.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::config(
                        field("scale"),
                        format!("must be positive, got {s}"),
                    ));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::config(field("mean"), "must be finite"));
                }
                let dof = match (dof, q) {
                    (Some(d), None) => {
                        if !(d.is_finite() && *d > 0.0) {
                            return Err(Error::config(
                                field("dof"),
                                format!("must be positive, got {d}"),
                            ));
                        }
                        *d
                    }
                    (None, Some(q)) => {
                        nu_from_q(*q, dim).map_err(|e| Error::config(field("q"), e.to_string()))?
                    }
                    _ => {
                        return Err(Error::config(
                            field("dof"),
                            "give exactly one of `dof` or `q`",
                        ))
                    }
                };
                make_student_t(StudentTSpec {
                    mean,
                    scale: Covariance::Diagonal(scale),
                    dof,
                })
                .map_err(|e| Error::config(prefix, e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    Linear {
        #[serde(rename = "T")]
        steps: OneOrMany<i64>,
    },
    Explicit {
        betas: Vec<f64>,
    },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Vec<Schedule>> {
        match self {
            ScheduleSpec::Linear { steps } => {
                let steps = steps.to_vec();
                if steps.is_empty() {
                    return Err(Error::config("schedule.T", "must not be empty"));
                }
                steps
                    .into_iter()
                    .map(|t| {
                        if t < 1 {
                            return Err(Error::config(
                                "schedule.T",
                                format!("must be a positive integer, got {t}"),
                            ));
                        }
                        linear_schedule(t as usize)
                    })
                    .collect()
            }
            ScheduleSpec::Explicit { betas } => Ok(vec![Schedule::new(betas.clone())
                .map_err(|e| Error::config("schedule.betas", e.to_string()))?]),
        }
    }
}

/// Overrides for [`HmcConfig`]; missing fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcSection {
    pub step_size: Option<f64>,
    pub n_leapfrog: Option<usize>,
    pub transitions_per_temperature: Option<usize>,
    pub mass: Option<f64>,
    pub step_jitter: Option<f64>,
}

impl HmcSection {
    pub fn build(&self) -> Result<HmcConfig> {
        let d = HmcConfig::default();
        let cfg = HmcConfig {
            step_size: self.step_size.unwrap_or(d.step_size),
            n_leapfrog: self.n_leapfrog.unwrap_or(d.n_leapfrog),
            transitions_per_temperature: self
                .transitions_per_temperature
                .unwrap_or(d.transitions_per_temperature),
            mass: self.mass.unwrap_or(d.mass),
            step_jitter: self.step_jitter.unwrap_or(d.step_jitter),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_n_betas() -> usize {
    10
}

fn default_z_min() -> f64 {
    -10.0
}

fn default_z_max() -> f64 {
    10.0
}

fn default_n_points() -> usize {
    201
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Equally spaced betas from 0 to 1 inclusive.
    #[serde(default = "default_n_betas")]
    pub n_betas: usize,
    #[serde(default = "default_z_min")]
    pub z_min: f64,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_betas: default_n_betas(),
            z_min: default_z_min(),
            z_max: default_z_max(),
            n_points: default_n_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub beta: f64,
    pub n_samples: usize,
}

fn default_n_chains() -> usize {
    1000
}

fn default_n_seeds() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub base: EndpointSpec,
    pub target: EndpointSpec,
    pub q_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default = "default_n_chains")]
    pub n_chains: usize,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Known `Z_T / Z_0`, used for the absolute error column of summaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_true: Option<f64>,
    #[serde(default)]
    pub hmc: HmcSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSection>,
}

/// Everything a run needs, built and checked up front.
pub struct Prepared {
    pub paths: Vec<QPath>,
    pub schedules: Vec<Schedule>,
    pub hmc: HmcConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value =
            toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path == "." {
                    "<root>".to_string()
                } else {
                    path
                },
                e.inner().to_string(),
            )
        })?;
        cfg.prepare()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates every field and builds the paths and schedules.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.q_values.is_empty() {
            return Err(Error::config("q_values", "must not be empty"));
        }
        if let Some(q) = self.q_values.iter().find(|q| !q.is_finite()) {
            return Err(Error::config(
                "q_values",
                format!("must be finite, got {q}"),
            ));
        }
        let base = self.base.build("base")?;
        let target = self.target.build("target")?;
        if base.dim() != target.dim() {
            return Err(Error::config(
                "target.mean",
                format!(
                    "dimension {} differs from base dimension {}",
                    target.dim(),
                    base.dim()
                ),
            ));
        }
        let paths = self
            .q_values
            .iter()
            .map(|&q| QPath::new(base.clone(), target.clone(), QOrder::new(q)?))
            .collect::<Result<Vec<_>>>()?;
        let hmc = self.hmc.build()?;
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        if let Some(z) = self.z_true {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::config(
                    "z_true",
                    format!("must be positive, got {z}"),
                ));
            }
        }

        let mut schedules = Vec::new();
        match self.mode {
            Mode::Ais | Mode::Bdmc => {
                let spec = self
                    .schedule
                    .as_ref()
                    .ok_or_else(|| Error::config("schedule", "required for this mode"))?;
                schedules = spec.build()?;
                if self.n_chains == 0 {
                    return Err(Error::config("n_chains", "must be at least 1"));
                }
            }
            Mode::DensityGrid => {
                let g = self.grid.clone().unwrap_or_default();
                if g.n_betas < 2 {
                    return Err(Error::config("grid.n_betas", "must be at least 2"));
                }
                if g.n_points < 2 {
                    return Err(Error::config("grid.n_points", "must be at least 2"));
                }
                if !(g.z_min.is_finite() && g.z_max.is_finite() && g.z_min < g.z_max) {
                    return Err(Error::config("grid.z_max", "need finite z_min < z_max"));
                }
                if base.dim() != 1 {
                    return Err(Error::config("base.mean", "density grids are 1-d"));
                }
            }
            Mode::PartitionMc => {
                let p = self
                    .partition
                    .as_ref()
                    .ok_or_else(|| Error::config("partition", "required for partition-mc"))?;
                if !(0.0..=1.0).contains(&p.beta) {
                    return Err(Error::config(
                        "partition.beta",
                        format!("must lie in [0, 1], got {}", p.beta),
                    ));
                }
                if p.n_samples == 0 {
                    return Err(Error::config("partition.n_samples", "must be at least 1"));
                }
            }
        }
        Ok(Prepared {
            paths,
            schedules,
            hmc,
        })
    }
}

/// One (q, T, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: Mode,
    pub q: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub seed: u64,
    pub log_lower: f64,
    pub log_upper: Option<f64>,
    pub z_estimate: f64,
    pub ess: f64,
    pub n_invalid: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub q: f64,
    pub beta: f64,
    pub z: f64,
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Runs(Vec<ResultRow>),
    Grid(Vec<GridRow>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock times in `wall_ms`. Off by default so output bytes
    /// depend only on the config.
    pub timings: bool,
}

/// Seed of the `(q, T, seed)` work item; chains use substreams of it.
pub fn derive_seed(base_seed: u64, q_index: usize, t_index: usize, seed_index: usize) -> u64 {
    let mut h = mix64(base_seed);
    for part in [q_index as u64, t_index as u64, seed_index as u64] {
        h = mix64(h ^ part.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    h
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.q.total_cmp(&b.q)
            .then(a.steps.cmp(&b.steps))
            .then(a.seed.cmp(&b.seed))
    });
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    let prep = cfg.prepare()?;
    match cfg.mode {
        Mode::DensityGrid => Ok(ExperimentOutput::Grid(density_grid(cfg, &prep)?)),
        Mode::PartitionMc => {
            let p = cfg.partition.as_ref().expect("validated");
            let mut rows = Vec::new();
            for (qi, path) in prep.paths.iter().enumerate() {
                for s in 0..cfg.n_seeds {
                    let start = Instant::now();
                    let mut rng = RngStream::new(derive_seed(cfg.base_seed, qi, 0, s), 0).rng();
                    let est = path.estimate_partition(p.beta, p.n_samples, &mut rng)?;
                    rows.push(ResultRow {
                        mode: Mode::PartitionMc,
                        q: path.q().value(),
                        steps: 0,
                        seed: s as u64,
                        log_lower: est.log_z,
                        log_upper: None,
                        z_estimate: est.log_z.exp(),
                        ess: est.ess,
                        n_invalid: 0,
                        wall_ms: elapsed(start, opts),
                    });
                }
            }
            sort_rows(&mut rows);
            Ok(ExperimentOutput::Runs(rows))
        }
        Mode::Ais | Mode::Bdmc => {
            let mut rows = Vec::new();
            for (qi, path) in prep.paths.iter().enumerate() {
                for (ti, schedule) in prep.schedules.iter().enumerate() {
                    for s in 0..cfg.n_seeds {
                        let start = Instant::now();
                        let stream = RngStream::new(derive_seed(cfg.base_seed, qi, ti, s), 0);
                        let row = if cfg.mode == Mode::Ais {
                            let r = run_ais(path, schedule, &prep.hmc, cfg.n_chains, stream)?;
                            ResultRow {
                                mode: Mode::Ais,
                                q: path.q().value(),
                                steps: schedule.steps(),
                                seed: s as u64,
                                log_lower: r.log_ratio_estimate,
                                log_upper: None,
                                z_estimate: r.log_ratio_estimate.exp(),
                                ess: r.ess,
                                n_invalid: r.n_invalid,
                                wall_ms: 0,
                            }
                        } else {
                            let r = run_bdmc(path, schedule, &prep.hmc, cfg.n_chains, stream)?;
                            ResultRow {
                                mode: Mode::Bdmc,
                                q: path.q().value(),
                                steps: schedule.steps(),
                                seed: s as u64,
                                log_lower: r.lower,
                                log_upper: Some(r.upper),
                                z_estimate: r.lower.exp(),
                                ess: r.forward.ess,
                                n_invalid: r.forward.n_invalid + r.reverse.n_invalid,
                                wall_ms: 0,
                            }
                        };
                        rows.push(ResultRow {
                            wall_ms: elapsed(start, opts),
                            ..row
                        });
                    }
                }
            }
            sort_rows(&mut rows);
            Ok(ExperimentOutput::Runs(rows))
        }
    }
}

fn elapsed(start: Instant, opts: RunOptions) -> u64 {
    if opts.timings {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn density_grid(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<GridRow>> {
    let g = cfg.grid.clone().unwrap_or_default();
    let mut rows = Vec::with_capacity(prep.paths.len() * g.n_betas * g.n_points);
    let mut paths: Vec<&QPath> = prep.paths.iter().collect();
    paths.sort_by(|a, b| a.q().value().total_cmp(&b.q().value()));
    for path in paths {
        for i in 0..g.n_betas {
            let beta = i as f64 / (g.n_betas - 1) as f64;
            for j in 0..g.n_points {
                let z = g.z_min + (g.z_max - g.z_min) * j as f64 / (g.n_points - 1) as f64;
                rows.push(GridRow {
                    q: path.q().value(),
                    beta,
                    z,
                    log_density: path.log_density_at(beta, &[z])?,
                });
            }
        }
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Io(format!(
            "unexpected CSV header `{}`",
            header.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_grid_csv<W: Write>(rows: &[GridRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(GRID_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(input: R) -> Result<Vec<GridRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// JSON-lines mirror of the CSV rows. Non-finite numbers become `null`.
pub fn write_jsonl<W: Write, T: Serialize>(rows: &[T], mut out: W) -> Result<()> {
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub q: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub n_seeds: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); absent with a single seed.
    pub std: Option<f64>,
    pub abs_error: Option<f64>,
    pub mean_log_lower: f64,
    pub mean_log_upper: Option<f64>,
}

/// Mean and spread of `z_estimate` across seeds for each `(q, T)`.
pub fn aggregate(rows: &[ResultRow], z_true: Option<f64>) -> Result<Vec<SummaryRow>> {
    let Some(first) = rows.first() else {
        return Ok(Vec::new());
    };
    if rows.iter().any(|r| r.mode != first.mode) {
        return Err(Error::precondition(
            "cannot aggregate rows from different modes",
        ));
    }
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.q.total_cmp(&b.q).then(a.steps.cmp(&b.steps)));
    let mut out = Vec::new();
    for group in
        sorted.chunk_by(|a, b| a.q.total_cmp(&b.q) == Ordering::Equal && a.steps == b.steps)
    {
        let n = group.len();
        let mean = group.iter().map(|r| r.z_estimate).sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| {
            (group
                .iter()
                .map(|r| (r.z_estimate - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64)
                .sqrt()
        });
        let mean_log_upper = if group.iter().all(|r| r.log_upper.is_some()) {
            Some(
                group
                    .iter()
                    .map(|r| r.log_upper.unwrap_or(0.0))
                    .sum::<f64>()
                    / n as f64,
            )
        } else {
            None
        };
        out.push(SummaryRow {
            mode: first.mode,
            q: group[0].q,
            steps: group[0].steps,
            n_seeds: n,
            mean,
            std,
            abs_error: z_true.map(|z| (mean - z).abs()),
            mean_log_lower: group.iter().map(|r| r.log_lower).sum::<f64>() / n as f64,
            mean_log_upper,
        });
    }
    Ok(out)
}

/// Plain-text table with `mean ± std` cells.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut s = String::new();
    let bdmc = summary.iter().any(|r| r.mean_log_upper.is_some());
    if bdmc {
        s.push_str("q       T     log_lower   log_upper   gap\n");
        for r in summary {
            let up = r.mean_log_upper.unwrap_or(f64::NAN);
            s.push_str(&format!(
                "{:<7} {:<5} {:>10.5}  {:>10.5}  {:>9.5}\n",
                r.q,
                r.steps,
                r.mean_log_lower,
                up,
                up - r.mean_log_lower
            ));
        }
    } else {
        s.push_str("q       T     Z estimate          |err|\n");
        for r in summary {
            let cell = match r.std {
                Some(sd) => format!("{:.4} ± {:.4}", r.mean, sd),
                None => format!("{:.4}", r.mean),
            };
            let err = r.abs_error.map(|e| format!("{e:.4}")).unwrap_or_default();
            s.push_str(&format!("{:<7} {:<5} {:<19} {}\n", r.q, r.steps, cell, err));
        }
    }
    s
}

fn far_pair() -> (EndpointSpec, EndpointSpec) {
    (
        EndpointSpec::gaussian(-4.0, 3.0),
        EndpointSpec::gaussian(4.0, 1.0),
    )
}

/// N(-4, 3) -> N(4, 1) at T = 100 for q near the mixture and geometric ends.
pub fn table1_config() -> ExperimentConfig {
    let (base, target) = far_pair();
    ExperimentConfig {
        mode: Mode::Ais,
        base,
        target,
        q_values: vec![0.0, 0.05, 0.1, 0.9, 0.95, 1.0],
        schedule: Some(ScheduleSpec::Linear {
            steps: OneOrMany::One(100),
        }),
        n_chains: 2000,
        n_seeds: 10,
        base_seed: 2020,
        z_true: Some(1.0),
        hmc: HmcSection::default(),
        grid: None,
        partition: None,
    }
}

/// BDMC bounds over a sweep of schedule lengths.
pub fn bdmc_curve_config() -> ExperimentConfig {
    let (base, target) = far_pair();
    ExperimentConfig {
        mode: Mode::Bdmc,
        base,
        target,
        q_values: vec![0.5, 0.9, 1.0],
        schedule: Some(ScheduleSpec::Linear {
            steps: OneOrMany::Many(vec![2, 5, 10, 25, 50, 100, 200]),
        }),
        n_chains: 1000,
        n_seeds: 10,
        base_seed: 2020,
        z_true: Some(1.0),
        hmc: HmcSection::default(),
        grid: None,
        partition: None,
    }
}

/// Ridge data: intermediate log-densities at 10 equally spaced betas.
pub fn density_grid_config() -> ExperimentConfig {
    let (base, target) = far_pair();
    ExperimentConfig {
        mode: Mode::DensityGrid,
        base,
        target,
        q_values: vec![0.0, 0.5, 0.9, 1.0],
        schedule: None,
        n_chains: default_n_chains(),
        n_seeds: 1,
        base_seed: 0,
        z_true: None,
        hmc: HmcSection::default(),
        grid: Some(GridSection::default()),
        partition: None,
    }
}
