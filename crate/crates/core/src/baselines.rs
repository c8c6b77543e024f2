//! A sparse phase retrieval baseline (spectral initialization followed by
//! hard-thresholded amplitude flow) and a sweep comparing it with the
//! generative-prior solver at matched intrinsic dimension.

use std::io::Write;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::landscape::{InstanceSpec, ProblemInstance};
use crate::linalg;
use crate::phaseless::{observe, sgn, MeasurementEnsemble};
use crate::seed::{label, SeedStream};
use crate::solver::{run_restarts, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseSolverConfig {
    pub sparsity: usize,
    /// Step relative to the average squared column norm of `A`.
    pub step: f64,
    pub iters: usize,
    /// Measurements with the largest normalized amplitude used to build the
    /// spectral matrix; 0 means all.
    pub init_samples: usize,
}

impl Default for SparseSolverConfig {
    fn default() -> Self {
        Self {
            sparsity: 6,
            step: 0.6,
            iters: 1000,
            init_samples: 0,
        }
    }
}

impl SparseSolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sparsity == 0 || self.sparsity > n {
            return Err(Error::InvalidConfig(format!(
                "sparsity {} must be in 1..={n}",
                self.sparsity
            )));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig("step must be positive".into()));
        }
        Ok(())
    }
}

/// Keeps the `s` entries of largest magnitude (ties broken by index).
pub fn hard_threshold(v: &mut Array1<f64>, s: usize) {
    if s >= v.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    for &i in &idx[s..] {
        v[i] = 0.0;
    }
}

fn top_indices(scores: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

/// Estimate of an `s`-sparse `y` from `b = |A y|`, up to global sign.
///
/// The support is guessed from the coordinates with largest
/// `Σ_i b_i² a_ij²`, the initial direction is the leading eigenvector of
/// `Σ_{i∈I} â_i â_iᵀ` restricted to that support (`I` the rows with largest
/// `b_i/‖a_i‖`), scaled to the norm implied by `‖b‖`. Then
/// `y ← H_s(y - μ/c Aᵀ(A y - b ∘ sgn(A y)))` where `c = (‖A‖_F²/n)(1 + √(s/m))²`
/// estimates the largest eigenvalue of `A_Sᵀ A_S` over `s`-column subsets.
pub fn thresholded_amplitude_flow(
    a: ArrayView2<f64>,
    b: ArrayView1<f64>,
    config: &SparseSolverConfig,
) -> Result<Array1<f64>> {
    let (m, n) = a.dim();
    check_len("amplitudes", m, b.len())?;
    config.validate(n)?;
    let s = config.sparsity;
    let col_scale = a.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if col_scale == 0.0 || b.iter().all(|&v| v == 0.0) {
        return Ok(Array1::zeros(n));
    }

    let b2 = b.mapv(|v| v * v);
    let scores: Vec<f64> = (0..n)
        .map(|j| a.column(j).iter().zip(&b2).map(|(x, w)| w * x * x).sum())
        .collect();
    let support = top_indices(&scores, s);
    let row_norms: Vec<f64> = a.outer_iter().map(|r| linalg::norm(r)).collect();
    let ratios: Vec<f64> = (0..m)
        .map(|i| if row_norms[i] > 0.0 { b[i] / row_norms[i] } else { 0.0 })
        .collect();
    let rows = if config.init_samples == 0 { m } else { config.init_samples.min(m) };
    let chosen = top_indices(&ratios, rows);
    let sub: Vec<Array1<f64>> = chosen
        .iter()
        .filter(|&&i| row_norms[i] > 0.0)
        .map(|&i| support.iter().map(|&j| a[[i, j]] / row_norms[i]).collect())
        .collect();
    let mut v = Array1::from_elem(s, 1.0 / (s as f64).sqrt());
    for _ in 0..linalg::POWER_ITERS {
        let mut next = Array1::zeros(s);
        for r in &sub {
            next.scaled_add(r.dot(&v), r);
        }
        let Some(u) = linalg::unit(next.view()) else { break };
        let done = linalg::norm((&u - &v).view()) < linalg::POWER_TOL;
        v = u;
        if done {
            break;
        }
    }
    let scale = linalg::norm(b) / col_scale.sqrt();
    let mut y = Array1::zeros(n);
    for (&j, &vj) in support.iter().zip(&v) {
        y[j] = scale * vj;
    }

    let mu = config.step / (col_scale * (1.0 + (s as f64 / m as f64).sqrt()).powi(2));
    for _ in 0..config.iters {
        let ay = a.dot(&y);
        let r: Array1<f64> = ay.iter().zip(&b).map(|(&p, &bi)| p - bi * sgn(p)).collect();
        y.scaled_add(-mu, &a.t().dot(&r));
        hard_threshold(&mut y, s);
    }
    Ok(y)
}

/// `min(‖ŷ - y‖, ‖ŷ + y‖) / ‖y‖`.
pub fn sign_invariant_error(y_hat: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let plus = linalg::norm((&y_hat - &y).view());
    let minus = linalg::norm((&y_hat + &y).view());
    plus.min(minus) / linalg::norm(y)
}

/// Unit-norm `s`-sparse vector with uniform support and Gaussian entries.
pub fn sparse_signal(n: usize, s: usize, seed: u64) -> Result<Array1<f64>> {
    if s == 0 || s > n {
        return Err(Error::InvalidConfig(format!("sparsity {s} must be in 1..={n}")));
    }
    let mut rng = SeedStream::new(seed).rng();
    loop {
        let mut y = Array1::zeros(n);
        let values = linalg::gaussian_vector(&mut rng, s);
        for (j, v) in sample(&mut rng, n, s).into_iter().zip(values) {
            y[j] = v;
        }
        if let Some(u) = linalg::unit(y.view()) {
            return Ok(u);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Generative family; `m` and `noise_ratio` are overridden by the sweep.
    pub generator: InstanceSpec,
    pub sparse: SparseSolverConfig,
    pub solver: SolverConfig,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_success")]
    pub success_threshold: f64,
    pub seed: u64,
}

fn default_success() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub m: usize,
    pub algo: String,
    pub mean_err: f64,
    pub success_rate: f64,
    pub trials: usize,
}

pub const ALGO_DPR: &str = "dpr";
pub const ALGO_SPARSE: &str = "sparse_taf";

/// Relative signal error of the generative solver on one trial.
fn dpr_trial(config: &CompareConfig, m: usize, seed: u64) -> Result<f64> {
    let spec = InstanceSpec {
        m,
        noise_ratio: 0.0,
        ..config.generator.clone()
    };
    let inst = ProblemInstance::sample(&spec, seed)?;
    let solver = SolverConfig {
        seed: SeedStream::new(seed).child(label::RESTARTS).root(),
        ..config.solver.clone()
    };
    let trace = run_restarts(&inst, &solver)?;
    let y = inst.net().forward(trace.x_hat().view())?;
    let ys = inst.y_star();
    Ok(linalg::norm((&y - ys).view()) / linalg::norm(ys.view()))
}

fn sparse_trial(config: &CompareConfig, n: usize, m: usize, seed: u64) -> Result<f64> {
    let stream = SeedStream::new(seed);
    let y = sparse_signal(n, config.sparse.sparsity, stream.child(label::GROUND_TRUTH).root())?;
    let ens = MeasurementEnsemble::sample(m, n, stream.child(label::MEASUREMENTS).root())?;
    let obs = observe(&ens, y.view(), Array1::zeros(m).view())?;
    let y_hat = thresholded_amplitude_flow(ens.matrix().view(), obs.b().view(), &config.sparse)?;
    Ok(sign_invariant_error(y_hat.view(), y.view()))
}

/// Mean error and success rate per `m` for both methods. `m = 0` means no
/// data: both estimates are zero, so the error is 1 and nothing succeeds.
pub fn sweep_compare(config: &CompareConfig) -> Result<Vec<ComparisonRow>> {
    if config.m_grid.is_empty() || config.trials == 0 {
        return Err(Error::InvalidConfig("m_grid and trials must be non-empty".into()));
    }
    config.generator.dims()?;
    config.solver.validate()?;
    let n = config.generator.dims()?.output_dim();
    config.sparse.validate(n)?;
    let root = SeedStream::new(config.seed).child(label::TRIALS);
    let mut rows = Vec::new();
    for &m in &config.m_grid {
        let trial_seeds: Vec<u64> = (0..config.trials)
            .map(|t| root.child(m as u64).child(t as u64).root())
            .collect();
        let (dpr, sparse): (Vec<f64>, Vec<f64>) = if m == 0 {
            (vec![1.0; config.trials], vec![1.0; config.trials])
        } else {
            let errs = trial_seeds
                .par_iter()
                .map(|&s| {
                    let baseline_seed = SeedStream::new(s).child(label::BASELINE).root();
                    Ok((dpr_trial(config, m, s)?, sparse_trial(config, n, m, baseline_seed)?))
                })
                .collect::<Result<Vec<_>>>()?;
            errs.into_iter().unzip()
        };
        for (algo, errs) in [(ALGO_DPR, dpr), (ALGO_SPARSE, sparse)] {
            let t = errs.len() as f64;
            rows.push(ComparisonRow {
                m,
                algo: algo.into(),
                mean_err: errs.iter().sum::<f64>() / t,
                success_rate: errs.iter().filter(|&&e| e < config.success_threshold).count() as f64 / t,
                trials: errs.len(),
            });
        }
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
