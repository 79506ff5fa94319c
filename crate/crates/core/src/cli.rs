//! The `run`, `sweep` and `verify` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::metrics::{write_csv, MetricsError, MetricsLog};
use crate::netsim::{load_scenario, ConfigError, ScenarioFile, SimConfig, World};
use crate::oracle::{verify_election, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("election mismatch in {} node(s)", .0.mismatches.len())]
    Mismatch(VerifyReport),
}

impl CliError {
    /// 1 validation, 2 runtime, 3 oracle mismatch.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Mismatch(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn load(scenario: &Path, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let mut config = load_scenario(scenario)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn summary_text(log: &MetricsLog) -> String {
    let mut out = String::new();
    for (subject, n, time) in log.formation_rows() {
        let time = time.map_or_else(|| "none".to_string(), |t| t.to_string());
        let _ = writeln!(out, "{subject} n={n} time_to_form={time}");
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub struct RunReport {
    pub metrics: MetricsLog,
    pub files: Vec<PathBuf>,
}

/// Runs one scenario and writes the metrics CSVs plus `summary.txt`.
pub fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<RunReport, CliError> {
    let config = load(scenario, seed)?;
    let trace = config.trace;
    let mut world = World::new(config)?;
    world.run_to_completion();
    let mut files = world.metrics().export(out)?;

    if trace {
        let path = out.join("trace.csv");
        write_csv(
            &path,
            ["tick", "msg_type", "origin", "receiver", "subject", "value"],
            |w| {
                for r in world.trace() {
                    w.write_record([
                        r.tick.to_string(),
                        r.msg_type.to_string(),
                        r.origin.to_string(),
                        r.receiver.to_string(),
                        r.subject.clone(),
                        r.value.to_string(),
                    ])?;
                }
                Ok(())
            },
        )?;
        files.push(path);
    }

    let summary = out.join("summary.txt");
    write_file(&summary, &summary_text(world.metrics()))?;
    files.push(summary);
    Ok(RunReport {
        metrics: world.into_metrics(),
        files,
    })
}

/// Sweep over the head count of one subject.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PathBuf,
    /// Subject whose head count varies; defaults to the first catalog subject.
    pub subject: Option<String>,
    pub nodes_per_subject: Vec<u32>,
    pub seeds_per_point: u32,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
}

fn default_base_seed() -> u64 {
    1
}

impl SweepSpec {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let spec: SweepSpec = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if spec.nodes_per_subject.is_empty() {
            return Err(CliError::Validation(
                "invalid `nodes_per_subject`: list is empty".into(),
            ));
        }
        if spec.seeds_per_point == 0 {
            return Err(CliError::Validation(
                "invalid `seeds_per_point`: must be at least 1".into(),
            ));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_nodes: u32,
    pub seed: u64,
    pub time_to_form: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `(n_nodes, median time_to_form)` in sweep order.
    pub medians: Vec<(u32, f64)>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}

/// Runs every `(nodes_per_subject, seed)` point and writes `sweep.csv`
/// and `sweep_medians.csv`.
pub fn cmd_sweep(spec_path: &Path, out: &Path) -> Result<SweepReport, CliError> {
    let spec = SweepSpec::read(spec_path)?;
    let spec_dir = spec_path.parent().unwrap_or_else(|| Path::new("."));
    let base_path = spec_dir.join(&spec.base);
    let base_file = ScenarioFile::read(&base_path)?;
    let base = base_file.resolve(base_path.parent().unwrap_or_else(|| Path::new(".")))?;
    let subject = match &spec.subject {
        Some(s) if base.catalog.subject(s).is_some() => s.clone(),
        Some(s) => {
            return Err(CliError::Validation(format!(
                "invalid `subject`: `{s}` is not in the catalog"
            )))
        }
        None => base.catalog.subjects()[0].id.clone(),
    };

    let mut points = Vec::new();
    for &n in &spec.nodes_per_subject {
        for k in 0..u64::from(spec.seeds_per_point) {
            let mut config = base.clone();
            config.subject_counts.insert(subject.clone(), n);
            config.seed = spec.base_seed + k;
            config.validate()?;
            points.push((n, config));
        }
    }

    let results: Vec<Result<SweepRow, CliError>> = points
        .into_par_iter()
        .map(|(n, config)| {
            let seed = config.seed;
            let log = crate::netsim::run(config)?;
            let time = log
                .time_to_form(&subject)
                .map_err(|e| CliError::Runtime(format!("n={n} seed={seed}: {e}")))?;
            Ok(SweepRow {
                n_nodes: n,
                seed,
                time_to_form: time,
            })
        })
        .collect();
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let medians: Vec<(u32, f64)> = spec
        .nodes_per_subject
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.n_nodes == n)
                .map(|r| r.time_to_form as f64)
                .collect();
            (n, median(&mut v))
        })
        .collect();

    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    write_csv(
        &out.join("sweep.csv"),
        ["n_nodes", "seed", "time_to_form_ticks"],
        |w| {
            for r in &rows {
                w.write_record([
                    r.n_nodes.to_string(),
                    r.seed.to_string(),
                    r.time_to_form.to_string(),
                ])?;
            }
            Ok(())
        },
    )?;
    write_csv(
        &out.join("sweep_medians.csv"),
        ["n_nodes", "median_time_to_form_ticks"],
        |w| {
            for (n, m) in &medians {
                w.write_record([n.to_string(), m.to_string()])?;
            }
            Ok(())
        },
    )?;
    Ok(SweepReport { rows, medians })
}

/// Runs the scenario through Converge and checks the election against the
/// brute-force oracle.
pub fn cmd_verify(scenario: &Path, seed: Option<u64>) -> Result<VerifyReport, CliError> {
    let config = load(scenario, seed)?;
    verify_config(config)
}

pub fn verify_config(config: SimConfig) -> Result<VerifyReport, CliError> {
    let mut world = World::new(config)?;
    world.run_until(world.schedule().converge);
    let report = verify_election(&world);
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::Mismatch(report))
    }
}
