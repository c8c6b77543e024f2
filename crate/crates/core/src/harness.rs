//! Experiment configuration, orchestration and artifact output for the `dpr`
//! command line tool.
//!
//! Every run writes its artifacts plus a `manifest.json` holding the resolved
//! configuration, the version string and the artifact list; JSON artifacts
//! also embed the same metadata directly. Nothing time-dependent is written,
//! so identical configurations produce byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{sweep_compare, write_comparison_csv, CompareConfig, SparseSolverConfig};
use crate::conditions::{
    angle_distortion_check, rrcp_deviation, subgradient_vs_h, tessellation_count, wdc_deviation,
    write_reports_csv, DeviationReport, TessellationCount,
};
use crate::error::{Error, Result};
use crate::landscape::{idealized_critical_points, landscape_grid, write_landscape_csv, CriticalSearch, InstanceSpec, ProblemInstance};
use crate::linalg;
use crate::seed::{label, SeedStream};
use crate::solver::{reconstruction_error, relative_latent_error, run_restarts, SolverConfig};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("DPR_GIT_DESCRIBE"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Solve,
    Sweep,
    Landscape,
    VerifyWdc,
    VerifyRrcp,
    Tessellate,
    Compare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<Kind>,
    /// Mandatory, either here or on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_success")]
    pub success_threshold: f64,
    /// Samples per report for the verify kinds.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Half-width of the landscape grid, in units of `‖x_*‖`.
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Subspace dimension for `tessellate`.
    #[serde(default = "default_ell")]
    pub ell: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub sparse: SparseSolverConfig,
    /// Not echoed into artifacts, so a run's files do not depend on where they go.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}
fn default_success() -> f64 {
    1e-2
}
fn default_samples() -> usize {
    200
}
fn default_extent() -> f64 {
    2.0
}
fn default_resolution() -> usize {
    101
}
fn default_ell() -> usize {
    2
}
fn default_probes() -> usize {
    100_000
}

/// Command-line values that take precedence over the JSON document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if o.kind.is_some() {
            self.kind = o.kind;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.output.is_some() {
            self.output = o.output.clone();
        }
        self
    }

    pub fn kind(&self) -> Result<Kind> {
        self.kind.ok_or_else(|| Error::InvalidConfig("kind is required".into()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidConfig("seed is required".into()))
    }

    pub fn instance(&self) -> Result<&InstanceSpec> {
        self.instance
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("instance is required for this kind".into()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        self.seed()?;
        self.solver.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::InvalidConfig("success_threshold must be positive".into()));
        }
        match kind {
            Kind::Tessellate => {
                if self.m_grid.is_empty() || self.m_grid.contains(&0) {
                    return Err(Error::InvalidConfig("tessellate needs a positive m_grid".into()));
                }
                if self.ell == 0 {
                    return Err(Error::InvalidConfig("ell must be >= 1".into()));
                }
            }
            Kind::Sweep | Kind::Compare => {
                self.instance()?.dims()?;
                if self.m_grid.is_empty() {
                    return Err(Error::InvalidConfig("m_grid must be non-empty".into()));
                }
            }
            Kind::Landscape => {
                let inst = self.instance()?;
                inst.validate()?;
                if inst.k != 2 {
                    return Err(Error::InvalidConfig("landscape needs k = 2".into()));
                }
                if self.resolution < 2 || !(self.extent > 0.0) {
                    return Err(Error::InvalidConfig("need resolution >= 2 and extent > 0".into()));
                }
            }
            Kind::Solve | Kind::VerifyWdc | Kind::VerifyRrcp => {
                self.instance()?.validate()?;
                if self.samples == 0 {
                    return Err(Error::InvalidConfig("samples must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub success_rate: f64,
    pub mean_rel_err: f64,
    pub trials: usize,
}

/// Success rate of restarted solves versus `m`; success means relative latent
/// error below `success_threshold`. Trials run in parallel on disjoint seeds.
pub fn phase_transition_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let base = config.instance()?;
    if config.m_grid.is_empty() {
        return Err(Error::InvalidConfig("m_grid must be non-empty".into()));
    }
    let root = SeedStream::new(config.seed()?).child(label::TRIALS);
    config
        .m_grid
        .iter()
        .map(|&m| {
            let spec = InstanceSpec { m, ..base.clone() };
            let errs = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let stream = root.child(m as u64).child(t as u64);
                    let inst = ProblemInstance::sample(&spec, stream.child(label::INSTANCE).root())?;
                    let solver = SolverConfig {
                        seed: stream.child(label::RESTARTS).root(),
                        ..config.solver.clone()
                    };
                    let trace = run_restarts(&inst, &solver)?;
                    Ok(relative_latent_error(trace.x_hat().view(), inst.x_star().view()))
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = errs.len() as f64;
            Ok(SweepRow {
                m,
                success_rate: errs.iter().filter(|&&e| e < config.success_threshold).count() as f64 / n,
                mean_rel_err: errs.iter().sum::<f64>() / n,
                trials: errs.len(),
            })
        })
        .collect()
}

/// What a run produced: a one-line summary and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub line: String,
    pub artifacts: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    meta: Value,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json(&mut self, name: &str, body: Value) -> Result<()> {
        let doc = json!({"meta": self.meta, "result": body});
        fs::write(self.path(name), serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    fn csv<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(fs::File) -> Result<()>,
    {
        let file = fs::File::create(self.path(name))?;
        write(file)
    }

    fn finish(self) -> Result<Vec<PathBuf>> {
        let names: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = json!({"meta": self.meta, "artifacts": names});
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        let mut all = self.written;
        all.push(path);
        Ok(all)
    }
}

fn ensure_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

/// Validates the configuration, runs the experiment and writes its artifacts.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let kind = config.kind()?;
    let seed = config.seed()?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir)?;
    let mut out = Artifacts {
        dir,
        meta: json!({"version": VERSION, "config": config}),
        written: Vec::new(),
    };
    let line = match kind {
        Kind::Solve => run_solve(config, seed, &mut out)?,
        Kind::Sweep => {
            let rows = phase_transition_sweep(config)?;
            ensure_finite(rows.iter().map(|r| r.mean_rel_err), "sweep")?;
            out.csv("sweep.csv", |f| write_rows(&rows, f))?;
            let cells: Vec<String> = rows.iter().map(|r| format!("m={}:{:.2}", r.m, r.success_rate)).collect();
            format!("sweep: success {}", cells.join(" "))
        }
        Kind::Landscape => {
            let inst = ProblemInstance::sample(config.instance()?, seed)?;
            let rows = landscape_grid(&inst, config.extent, config.resolution)?;
            ensure_finite(rows.iter().flat_map(|r| [r.idealized, r.f, r.h_norm, r.v_norm]), "landscape")?;
            out.csv("landscape.csv", |f| write_landscape_csv(&rows, f))?;
            let points = idealized_critical_points(inst.x_star().view(), inst.depth(), &CriticalSearch::default())?;
            out.json("critical_points.json", json!({"x_star": inst.x_star().to_vec(), "points": points}))?;
            format!("landscape: {} grid points, {} critical points of F", rows.len(), points.len())
        }
        Kind::VerifyWdc => {
            let inst = ProblemInstance::sample(config.instance()?, seed)?;
            let reports = inst
                .net()
                .weights()
                .iter()
                .enumerate()
                .map(|(i, w)| Ok((format!("wdc_layer{}", i + 1), wdc_deviation(w.view(), config.samples, seed)?)))
                .collect::<Result<Vec<_>>>()?;
            write_reports(&mut out, "wdc", &reports)?
        }
        Kind::VerifyRrcp => {
            let inst = ProblemInstance::sample(config.instance()?, seed)?;
            let reports = vec![
                ("rrcp".to_string(), rrcp_deviation(inst.ensemble(), inst.net(), config.samples, seed)?),
                (
                    "angle_distortion".to_string(),
                    angle_distortion_check(inst.ensemble(), inst.net(), config.samples, seed)?,
                ),
                ("subgradient_vs_h".to_string(), subgradient_vs_h(&inst, config.samples, seed)?),
            ];
            write_reports(&mut out, "rrcp", &reports)?
        }
        Kind::Tessellate => {
            let counts = config
                .m_grid
                .iter()
                .map(|&m| {
                    let mut rng = SeedStream::new(seed).child(label::MEASUREMENTS).child(m as u64).rng();
                    let a: Array2<f64> = linalg::gaussian_matrix(&mut rng, m, config.ell, 1.0);
                    tessellation_count(a.view(), config.ell, config.probes, seed)
                })
                .collect::<Result<Vec<TessellationCount>>>()?;
            out.csv("tessellate.csv", |f| write_rows(&counts, f))?;
            let cells: Vec<String> = counts.iter().map(|c| format!("m={}:{}", c.m, c.count)).collect();
            format!("tessellate: ell={} counts {}", config.ell, cells.join(" "))
        }
        Kind::Compare => {
            let cmp = CompareConfig {
                generator: config.instance()?.clone(),
                sparse: config.sparse.clone(),
                solver: config.solver.clone(),
                m_grid: config.m_grid.clone(),
                trials: config.trials,
                success_threshold: config.success_threshold,
                seed,
            };
            let rows = sweep_compare(&cmp)?;
            ensure_finite(rows.iter().map(|r| r.mean_err), "comparison")?;
            out.csv("compare.csv", |f| write_comparison_csv(&rows, f))?;
            let cells: Vec<String> =
                rows.iter().map(|r| format!("{}@{}:{:.2}", r.algo, r.m, r.success_rate)).collect();
            format!("compare: success {}", cells.join(" "))
        }
    };
    Ok(RunSummary {
        line,
        artifacts: out.finish()?,
    })
}

fn write_rows<T: Serialize>(rows: &[T], file: fs::File) -> Result<()> {
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_reports(out: &mut Artifacts, stem: &str, reports: &[(String, DeviationReport)]) -> Result<String> {
    ensure_finite(reports.iter().flat_map(|(_, r)| [r.max_dev, r.mean_dev, r.p50, r.p95]), stem)?;
    let body: serde_json::Map<String, Value> = reports
        .iter()
        .map(|(n, r)| Ok((n.clone(), serde_json::to_value(r)?)))
        .collect::<Result<_>>()?;
    out.json(&format!("{stem}.json"), Value::Object(body))?;
    out.csv(&format!("{stem}.csv"), |f| write_reports_csv(reports, f))?;
    let cells: Vec<String> = reports.iter().map(|(n, r)| format!("{n} p95={:.3e}", r.p95)).collect();
    Ok(format!("{stem}: {}", cells.join(", ")))
}

fn run_solve(config: &ExperimentConfig, seed: u64, out: &mut Artifacts) -> Result<String> {
    let stream = SeedStream::new(seed);
    let inst = ProblemInstance::sample(config.instance()?, stream.child(label::INSTANCE).root())?;
    let solver = SolverConfig {
        seed: stream.child(label::RESTARTS).root(),
        ..config.solver.clone()
    };
    let trace = run_restarts(&inst, &solver)?;
    let x_hat = trace.x_hat();
    let rel_err = relative_latent_error(x_hat.view(), inst.x_star().view());
    let recon = reconstruction_error(inst.net(), x_hat.view(), inst.y_star().view())?;
    let blank = reconstruction_error(inst.net(), ndarray::Array1::zeros(inst.k()).view(), inst.y_star().view())?;
    ensure_finite([rel_err, recon, trace.final_f()], "solve")?;
    out.csv("trace.csv", |f| trace.write_csv(f))?;
    out.json(
        "summary.json",
        json!({
            "rel_err": rel_err,
            "reconstruction_error": recon,
            "blank_reconstruction_error": blank,
            "final_f": trace.final_f(),
            "iterations": trace.iterations(),
            "negations": trace.negations(),
            "status": trace.status,
            "rate_estimate": trace.rate_estimate(),
            "x_hat": x_hat.to_vec(),
            "x_star": inst.x_star().to_vec(),
        }),
    )?;
    Ok(format!(
        "solve: rel_err={rel_err:.3e} reconstruction_error={recon:.3e} f={:.3e} iterations={} status={:?}",
        trace.final_f(),
        trace.iterations(),
        trace.status
    ))
}

/// Process exit code for an error: 2 for configuration, 3 for numeric failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidDims(_) | Error::DimensionMismatch { .. } => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}
