//! Subgradient descent with a negation step, the two-branch variant, restarts
//! and stopping logic.

use std::io::Write;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::generator::GeneratorNet;
use crate::landscape::ProblemInstance;
use crate::linalg;
use crate::seed::{label, SeedStream};

/// Iterates closer than this are treated as stationary.
pub const STEP_TOL: f64 = 1e-9;
/// Consecutive increases of `f` after which a run is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 50;
/// Relative decrease of the best `f` required within `stall_window` iterations.
pub const STALL_DECREASE: f64 = 1e-3;
/// Scale of the Gaussian kick applied to an iterate that lands on 0.
pub const ZERO_KICK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PlainSubgradient,
    AdaptiveMoment,
}

/// Step scaling for [`Variant::AdaptiveMoment`]. Defaults are the usual Adam values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// `None` means `2^d / (10 d²)`.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// Stop once `2^d ‖v‖ / scale < grad_tol`, where `scale = 2^{d/2} ‖b‖`.
    pub grad_tol: f64,
    /// Stop when the best `f` has not dropped by a relative `1e-3` within this
    /// many iterations; 0 disables the rule.
    pub stall_window: usize,
    pub restarts: usize,
    pub variant: Variant,
    /// Compare `f(x)` with `f(-x)` before every step.
    pub negation: bool,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iters: 5000,
            grad_tol: 1e-7,
            stall_window: 200,
            restarts: 5,
            variant: Variant::PlainSubgradient,
            negation: true,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

pub fn default_step_size(depth: usize) -> f64 {
    let d = depth as f64;
    2f64.powi(depth as i32) / (10.0 * d * d)
}

impl SolverConfig {
    pub fn step_size_for(&self, depth: usize) -> f64 {
        self.step_size.unwrap_or_else(|| default_step_size(depth))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.step_size {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig("step_size must be positive".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.eps > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::InvalidConfig("invalid adaptive-moment parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    GradTol,
    StepTol,
    MaxIters,
    Stalled,
    Diverged,
}

/// State at iteration `t`, after the negation decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub negated: bool,
    pub grad_norm: f64,
    pub rel_latent_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateTrace {
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub x0: Vec<f64>,
    /// Steps where `f` went up although no negation happened.
    pub increases: usize,
}

impl IterateTrace {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("a trace has at least one record")
    }

    pub fn x_hat(&self) -> Array1<f64> {
        Array1::from(self.last().x.clone())
    }

    pub fn final_f(&self) -> f64 {
        self.last().f
    }

    pub fn iterations(&self) -> usize {
        self.last().t
    }

    pub fn negations(&self) -> usize {
        self.records.iter().filter(|r| r.negated).count()
    }

    /// Per-iteration contraction factor of `f`, fitted on the second half of
    /// the trace by least squares on `log f`.
    pub fn rate_estimate(&self) -> Option<f64> {
        let tail: Vec<(f64, f64)> = self.records[self.records.len() / 2..]
            .iter()
            .filter(|r| r.f > 0.0)
            .map(|r| (r.t as f64, r.f.ln()))
            .collect();
        if tail.len() < 3 {
            return None;
        }
        let n = tail.len() as f64;
        let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        (sxx > 0.0).then(|| (sxy / sxx).exp())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "f", "grad_norm", "negated", "rel_latent_err"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.f.to_string(),
                r.grad_norm.to_string(),
                r.negated.to_string(),
                r.rel_latent_err.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn relative_latent_error(x: ArrayView1<f64>, x_star: ArrayView1<f64>) -> f64 {
    linalg::norm((&x - &x_star).view()) / linalg::norm(x_star)
}

/// `‖G(x̂) - y_*‖ / √n_d`.
pub fn reconstruction_error(
    net: &GeneratorNet,
    x_hat: ArrayView1<f64>,
    y_star: ArrayView1<f64>,
) -> Result<f64> {
    check_len("reconstruction target", net.output_dim(), y_star.len())?;
    let y = net.forward(x_hat)?;
    Ok(linalg::norm((&y - &y_star).view()) / (y_star.len() as f64).sqrt())
}

/// Stand-in for `‖x_*‖` computed from the data: `‖b‖ ≈ 2^{-d/2} ‖x_*‖`.
fn observed_scale(inst: &ProblemInstance) -> f64 {
    let s = 2f64.powf(inst.depth() as f64 / 2.0) * linalg::norm(inst.observation().b().view());
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn is_zero(x: ArrayView1<f64>) -> bool {
    x.iter().all(|&v| v == 0.0)
}

/// One iteration: `x̄ = -x` if `f(-x) < f(x)` else `x`, then `x̄ - α v_x̄`.
pub fn dpr_step(inst: &ProblemInstance, x: ArrayView1<f64>, alpha: f64) -> Result<(Array1<f64>, bool)> {
    if is_zero(x) {
        return Err(Error::ZeroVector("iterate"));
    }
    let neg = x.mapv(|v| -v);
    let negated = inst.objective(neg.view())? < inst.objective(x)?;
    let xbar = if negated { neg } else { x.to_owned() };
    let v = inst.subgradient(xbar.view())?.v;
    Ok((&xbar - &(alpha * &v), negated))
}

struct Adam {
    p: AdamParams,
    m: Array1<f64>,
    v: Array1<f64>,
    t: i32,
}

impl Adam {
    fn new(p: AdamParams, k: usize) -> Self {
        Self {
            p,
            m: Array1::zeros(k),
            v: Array1::zeros(k),
            t: 0,
        }
    }

    fn step(&mut self, g: &Array1<f64>) -> Array1<f64> {
        self.t += 1;
        let p = self.p;
        self.m = p.beta1 * &self.m + (1.0 - p.beta1) * g;
        self.v = p.beta2 * &self.v + (1.0 - p.beta2) * &g.mapv(|x| x * x);
        let mc = 1.0 - p.beta1.powi(self.t);
        let vc = 1.0 - p.beta2.powi(self.t);
        let mut d = Array1::zeros(g.len());
        for i in 0..g.len() {
            d[i] = p.lr * (self.m[i] / mc) / ((self.v[i] / vc).sqrt() + p.eps);
        }
        d
    }
}

/// Descent from `x0` until one of the stopping rules fires.
pub fn solve(inst: &ProblemInstance, config: &SolverConfig, x0: ArrayView1<f64>) -> Result<IterateTrace> {
    config.validate()?;
    check_len("initial point", inst.k(), x0.len())?;
    if is_zero(x0) {
        return Err(Error::ZeroVector("x0"));
    }
    let alpha = config.step_size_for(inst.depth());
    let grad_scale = 2f64.powi(inst.depth() as i32) / observed_scale(inst);
    let x_star = inst.x_star().view();
    let mut kick_rng = SeedStream::new(config.seed).child(label::PERTURB).rng();
    let mut adam = Adam::new(config.adam, inst.k());

    let mut x = x0.to_owned();
    let mut records = Vec::new();
    let mut increases = 0;
    let mut run = 0;
    let mut prev_f = f64::INFINITY;
    let (mut mark_f, mut mark_t) = (f64::INFINITY, 0);
    let mut status = Status::MaxIters;
    for t in 0..=config.max_iters {
        let mut eval = inst.evaluate(x.view())?;
        let mut negated = false;
        if config.negation {
            let neg = x.mapv(|v| -v);
            if inst.objective(neg.view())? < eval.f {
                eval = inst.evaluate(neg.view())?;
                x = neg;
                negated = true;
            }
        }
        if !eval.f.is_finite() || eval.direction.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite objective at iteration {t}")));
        }
        let grad_norm = linalg::norm(eval.direction.v.view());
        records.push(IterRecord {
            t,
            x: x.to_vec(),
            f: eval.f,
            negated,
            grad_norm,
            rel_latent_err: relative_latent_error(x.view(), x_star),
        });
        if eval.f > prev_f && !negated {
            increases += 1;
            run += 1;
            if run >= DIVERGENCE_WINDOW {
                status = Status::Diverged;
                break;
            }
        } else {
            run = 0;
        }
        prev_f = eval.f;
        if grad_norm * grad_scale < config.grad_tol {
            status = Status::GradTol;
            break;
        }
        if eval.f < (1.0 - STALL_DECREASE) * mark_f {
            (mark_f, mark_t) = (eval.f, t);
        } else if config.stall_window > 0 && t - mark_t >= config.stall_window {
            status = Status::Stalled;
            break;
        }
        if t == config.max_iters {
            break;
        }
        let step = match config.variant {
            Variant::PlainSubgradient => alpha * &eval.direction.v,
            Variant::AdaptiveMoment => adam.step(&eval.direction.v),
        };
        let mut next = &x - &step;
        if is_zero(next.view()) {
            next = ZERO_KICK * linalg::gaussian_vector(&mut kick_rng, inst.k());
        }
        let moved = linalg::norm((&next - &x).view());
        x = next;
        if moved < STEP_TOL {
            status = Status::StepTol;
            let eval = inst.evaluate(x.view())?;
            records.push(IterRecord {
                t: t + 1,
                x: x.to_vec(),
                f: eval.f,
                negated: false,
                grad_norm: linalg::norm(eval.direction.v.view()),
                rel_latent_err: relative_latent_error(x.view(), x_star),
            });
            break;
        }
    }
    Ok(IterateTrace {
        records,
        status,
        x0: x0.to_vec(),
        increases,
    })
}

/// Runs without per-step negation from `x0` and from `-x0` and keeps the
/// branch with the smaller final objective.
pub fn solve_two_branch(
    inst: &ProblemInstance,
    config: &SolverConfig,
    x0: ArrayView1<f64>,
) -> Result<IterateTrace> {
    let cfg = SolverConfig {
        negation: false,
        ..config.clone()
    };
    let plus = solve(inst, &cfg, x0)?;
    let minus = solve(inst, &cfg, x0.mapv(|v| -v).view())?;
    Ok(if minus.final_f() < plus.final_f() { minus } else { plus })
}

/// Gaussian start for restart `r`, drawn from its own stream.
pub fn restart_start(seed: u64, r: usize, k: usize) -> Array1<f64> {
    let mut rng = SeedStream::new(seed)
        .child(label::RESTARTS)
        .child(r as u64)
        .rng();
    linalg::gaussian_vector(&mut rng, k) / (k as f64).sqrt()
}

/// Restart `r` runs with a per-restart seed so their zero kicks are independent.
fn restart_config(config: &SolverConfig, r: usize) -> SolverConfig {
    SolverConfig {
        seed: SeedStream::new(config.seed).child(label::RESTARTS).child(r as u64).root(),
        ..config.clone()
    }
}

/// Best of `config.restarts` independent runs: lowest reconstruction error
/// when the data is noiseless, lowest final objective otherwise.
pub fn run_restarts(inst: &ProblemInstance, config: &SolverConfig) -> Result<IterateTrace> {
    run_restarts_with(inst, config, solve)
}

/// As [`run_restarts`], with the two-branch variant per restart.
pub fn run_restarts_two_branch(inst: &ProblemInstance, config: &SolverConfig) -> Result<IterateTrace> {
    run_restarts_with(inst, config, solve_two_branch)
}

fn run_restarts_with(
    inst: &ProblemInstance,
    config: &SolverConfig,
    method: fn(&ProblemInstance, &SolverConfig, ArrayView1<f64>) -> Result<IterateTrace>,
) -> Result<IterateTrace> {
    config.validate()?;
    let traces: Vec<IterateTrace> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let x0 = restart_start(config.seed, r, inst.k());
            method(inst, &restart_config(config, r), x0.view())
        })
        .collect::<Result<_>>()?;
    let score = |t: &IterateTrace| -> Result<f64> {
        if inst.is_noiseless() {
            reconstruction_error(inst.net(), t.x_hat().view(), inst.y_star().view())
        } else {
            Ok(t.final_f())
        }
    };
    let mut best: Option<(f64, IterateTrace)> = None;
    for t in traces {
        let s = score(&t)?;
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            best = Some((s, t));
        }
    }
    Ok(best.expect("restarts >= 1").1)
}
