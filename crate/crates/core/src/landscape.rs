//! The amplitude objective `f(x) = ½‖|A G(x)| - b‖²`, its subgradient, and the
//! analytic quantities describing its large-width landscape: the direction
//! `h_x` (which is the exact gradient of the idealized loss `F`), the
//! intermediate `w_x`, the vector `h̃_{x,y}`, and the set `S_β` where `h_x`
//! is small.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{array, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::generator::{backprop, rho_d, AngleProfile, GeneratorNet, NetworkDims};
use crate::linalg;
use crate::phaseless::{observe, phi_matrix, sgn, MeasurementEnsemble, PhaselessObservation};
use crate::seed::{label, SeedStream};

/// How to draw one random recovery task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub k: usize,
    pub layer_dims: Vec<usize>,
    pub m: usize,
    /// `‖η‖ = noise_ratio · 2^{-d/2} · ‖x_*‖`.
    #[serde(default)]
    pub noise_ratio: f64,
    #[serde(default = "one")]
    pub x_star_norm: f64,
}

fn one() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn dims(&self) -> Result<NetworkDims> {
        NetworkDims::new(self.k, self.layer_dims.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.dims()?;
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be positive".into()));
        }
        if !(self.noise_ratio >= 0.0 && self.noise_ratio.is_finite()) {
            return Err(Error::InvalidConfig("noise_ratio must be finite and >= 0".into()));
        }
        if !(self.x_star_norm > 0.0 && self.x_star_norm.is_finite()) {
            return Err(Error::InvalidConfig("x_star_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    net: GeneratorNet,
    ensemble: MeasurementEnsemble,
    x_star: Array1<f64>,
    y_star: Array1<f64>,
    obs: PhaselessObservation,
}

/// One selected element of the Clarke subdifferential.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentDirection {
    pub v: Array1<f64>,
    /// False when some activation or measurement sign was exactly tied.
    pub differentiable: bool,
}

/// Objective value and subgradient from a single forward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub direction: DescentDirection,
}

impl ProblemInstance {
    pub fn new(
        net: GeneratorNet,
        ensemble: MeasurementEnsemble,
        x_star: Array1<f64>,
        eta: Array1<f64>,
    ) -> Result<Self> {
        check_len("measurement columns", net.output_dim(), ensemble.n())?;
        let y_star = net.forward(x_star.view())?;
        let obs = observe(&ensemble, y_star.view(), eta.view())?;
        Ok(Self {
            net,
            ensemble,
            x_star,
            y_star,
            obs,
        })
    }

    /// Gaussian net, Gaussian ensemble, `x_*` uniform on the sphere of radius
    /// `x_star_norm`, and noise of the requested norm in a uniform direction.
    pub fn sample(spec: &InstanceSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let dims = spec.dims()?;
        let stream = SeedStream::new(seed);
        let net = GeneratorNet::sample_gaussian(&dims, stream.child(label::NET).root());
        let ensemble = MeasurementEnsemble::sample(
            spec.m,
            dims.output_dim(),
            stream.child(label::MEASUREMENTS).root(),
        )?;
        let x_star = spec.x_star_norm
            * linalg::random_unit(&mut stream.child(label::GROUND_TRUTH).rng(), spec.k);
        let eta_norm =
            spec.noise_ratio * 2f64.powf(-(dims.depth() as f64) / 2.0) * spec.x_star_norm;
        let eta = if eta_norm > 0.0 {
            eta_norm * linalg::random_unit(&mut stream.child(label::NOISE).rng(), spec.m)
        } else {
            Array1::zeros(spec.m)
        };
        Self::new(net, ensemble, x_star, eta)
    }

    pub fn net(&self) -> &GeneratorNet {
        &self.net
    }

    pub fn ensemble(&self) -> &MeasurementEnsemble {
        &self.ensemble
    }

    pub fn x_star(&self) -> &Array1<f64> {
        &self.x_star
    }

    pub fn y_star(&self) -> &Array1<f64> {
        &self.y_star
    }

    pub fn observation(&self) -> &PhaselessObservation {
        &self.obs
    }

    pub fn depth(&self) -> usize {
        self.net.depth()
    }

    pub fn k(&self) -> usize {
        self.net.k()
    }

    pub fn is_noiseless(&self) -> bool {
        self.obs.eta().iter().all(|&v| v == 0.0)
    }

    pub fn objective(&self, x: ArrayView1<f64>) -> Result<f64> {
        let y = self.net.forward(x)?;
        let ay = self.ensemble.apply(y.view())?;
        Ok(0.5
            * ay.iter()
                .zip(self.obs.b())
                .map(|(a, b)| (a.abs() - b).powi(2))
                .sum::<f64>())
    }

    /// `f(x)` together with `Λ_xᵀ A_{G(x)}ᵀ(|A G(x)| - b)`.
    pub fn evaluate(&self, x: ArrayView1<f64>) -> Result<Evaluation> {
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector("iterate"));
        }
        let pre = self.net.pre_activations(x)?;
        let y = pre.last().expect("depth >= 1").mapv(|v| v.max(0.0));
        let ay = self.ensemble.matrix().dot(&y);
        let mut f = 0.0;
        let mut tied = pre.iter().flatten().any(|&p| p == 0.0);
        let signed: Array1<f64> = ay
            .iter()
            .zip(self.obs.b())
            .map(|(&a, &b)| {
                let r = a.abs() - b;
                f += r * r;
                tied |= a == 0.0;
                sgn(a) * r
            })
            .collect();
        let r = self.ensemble.matrix().t().dot(&signed);
        let v = backprop(self.net.weights(), &pre, r);
        Ok(Evaluation {
            f: 0.5 * f,
            direction: DescentDirection {
                v,
                differentiable: !tied,
            },
        })
    }

    /// Subgradients for the columns of `xs` (`k x B`), using matrix-matrix
    /// products so wide instances stream their weights once per batch.
    pub fn subgradient_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len("latent batch rows", self.k(), xs.nrows())?;
        let mut masks = Vec::with_capacity(self.depth());
        let mut h = xs.to_owned();
        for w in self.net.weights() {
            let pre = w.dot(&h);
            masks.push(pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
            h = pre.mapv(|v| v.max(0.0));
        }
        let mut s = self.ensemble.matrix().dot(&h);
        for mut col in s.columns_mut() {
            col.zip_mut_with(self.obs.b(), |a, &bi| *a = sgn(*a) * (a.abs() - bi));
        }
        let mut r = self.ensemble.matrix().t().dot(&s);
        for (w, mask) in self.net.weights().iter().zip(&masks).rev() {
            r *= mask;
            r = w.t().dot(&r);
        }
        Ok(r)
    }

    pub fn subgradient(&self, x: ArrayView1<f64>) -> Result<DescentDirection> {
        Ok(self.evaluate(x)?.direction)
    }

    /// Smallest `|pre-activation|` or `|⟨a_i, G(x)⟩|` at `x`; distance proxy to a kink.
    pub fn kink_margin(&self, x: ArrayView1<f64>) -> Result<f64> {
        let pre = self.net.pre_activations(x)?;
        let y = pre.last().expect("depth >= 1").mapv(|v| v.max(0.0));
        let ay = self.ensemble.apply(y.view())?;
        Ok(pre
            .iter()
            .flatten()
            .chain(ay.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs())))
    }

    /// `w_x = Λ_xᵀ(Λ_x x - Φ_{x_d, x_{*,d}} Λ_{x_*} x_*)`.
    pub fn w_direction(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroVector("x"));
        }
        let xd = self.net.forward(x)?;
        let phi = phi_matrix(xd.view(), self.y_star.view())?;
        let r = &xd - &phi.apply(self.y_star.view());
        self.net.jacobian_transpose_apply(x, r.view())
    }
}

pub fn objective(inst: &ProblemInstance, x: ArrayView1<f64>) -> Result<f64> {
    inst.objective(x)
}

pub fn subgradient(inst: &ProblemInstance, x: ArrayView1<f64>) -> Result<DescentDirection> {
    inst.subgradient(x)
}

pub fn w_direction(inst: &ProblemInstance, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    inst.w_direction(x)
}

fn pow2(d: usize) -> f64 {
    2f64.powi(d as i32)
}

/// The analytic direction
/// `h_x = 2^{-d}[-ψ_d ζ_0 ‖x_*‖ x̂_* + (‖x‖ - ‖x_*‖(2 sin θ̄_d/π + ψ_d Σ)) x̂]`.
///
/// Equals the gradient of [`idealized_loss`]; vanishes at `x_*` and `-ρ_d x_*`.
pub fn h_direction(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<Array1<f64>> {
    let p = AngleProfile::new(x, x_star, depth)?;
    let nx = linalg::norm(x);
    let ns = linalg::norm(x_star);
    let scale = 1.0 / pow2(depth);
    let star_coeff = -p.psi_d * p.zeta[0] * scale;
    let x_coeff = scale * (nx - ns * p.radial_coefficient()) / nx;
    Ok(star_coeff * &x_star + &(x_coeff * &x))
}

/// `h̃_{x,y} = 2^{-d}[ζ_0 y + Σ_{i<d} (sin θ̄_i/π) ζ_{i+1} (‖y‖/‖x‖) x]` with `θ̄_0 = ∠(x, y)`.
pub fn h_tilde(x: ArrayView1<f64>, y: ArrayView1<f64>, depth: usize) -> Result<Array1<f64>> {
    let p = AngleProfile::new(x, y, depth)?;
    let scale = 1.0 / pow2(depth);
    let ratio = linalg::norm(y) / linalg::norm(x);
    Ok(scale * p.zeta[0] * &y + &((scale * p.sin_sum() * ratio) * &x))
}

/// Idealized loss
/// `F(x) = (‖x‖² + ‖x_*‖²)/2^{d+1} - 2^{-d}[ψ_d ζ_0 ⟨x, x_*⟩ + (2 sin θ̄_d/π + ψ_d Σ) ‖x‖‖x_*‖]`.
///
/// At `x = 0` (or `x_* = 0`) the cross terms vanish and the limit is returned.
pub fn idealized_loss(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<f64> {
    check_len("idealized loss", x.len(), x_star.len())?;
    let nx = linalg::norm(x);
    let ns = linalg::norm(x_star);
    let base = (nx * nx + ns * ns) / pow2(depth + 1);
    if nx == 0.0 || ns == 0.0 {
        return Ok(base);
    }
    let p = AngleProfile::new(x, x_star, depth)?;
    let cross = p.psi_d * p.zeta[0] * x.dot(&x_star) + p.radial_coefficient() * nx * ns;
    Ok(base - cross / pow2(depth))
}

/// `x ∈ S_β  ⇔  ‖h_x‖ <= β 2^{-d} max(‖x‖, ‖x_*‖)`.
pub fn s_beta_membership(
    x: ArrayView1<f64>,
    x_star: ArrayView1<f64>,
    depth: usize,
    beta: f64,
) -> Result<bool> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("β = {beta} must be positive")));
    }
    let h = h_direction(x, x_star, depth)?;
    let bound = beta / pow2(depth) * linalg::norm(x).max(linalg::norm(x_star));
    Ok(linalg::norm(h.view()) <= bound)
}

/// One row of a two-dimensional landscape scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub x1: f64,
    pub x2: f64,
    #[serde(rename = "F")]
    pub idealized: f64,
    pub f: f64,
    pub h_norm: f64,
    pub v_norm: f64,
}

/// Radius of the ball around the origin skipped by landscape scans.
pub const ORIGIN_EXCLUSION: f64 = 1e-3;

/// Square grid `[-extent, extent]²` with `resolution` points per side (k = 2 only).
pub fn landscape_grid(
    inst: &ProblemInstance,
    extent: f64,
    resolution: usize,
) -> Result<Vec<LandscapeRow>> {
    if inst.k() != 2 {
        return Err(Error::InvalidConfig(format!(
            "landscape scans need k = 2, got {}",
            inst.k()
        )));
    }
    if resolution < 2 || !(extent > 0.0) {
        return Err(Error::InvalidConfig("landscape grid needs resolution >= 2 and extent > 0".into()));
    }
    let d = inst.depth();
    let xs = inst.x_star().view();
    let step = 2.0 * extent / (resolution - 1) as f64;
    let mut rows = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let x = array![-extent + step * i as f64, -extent + step * j as f64];
            if linalg::norm(x.view()) < ORIGIN_EXCLUSION {
                continue;
            }
            let eval = inst.evaluate(x.view())?;
            rows.push(LandscapeRow {
                x1: x[0],
                x2: x[1],
                idealized: idealized_loss(x.view(), xs, d)?,
                f: eval.f,
                h_norm: linalg::norm(h_direction(x.view(), xs, d)?.view()),
                v_norm: linalg::norm(eval.direction.v.view()),
            });
        }
    }
    Ok(rows)
}

pub fn write_landscape_csv<W: Write>(rows: &[LandscapeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
    /// Nonsmooth point where every direction descends (the origin).
    NonsmoothMaximum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub kind: CriticalKind,
    pub loss: f64,
}

/// Resolution of the critical-point search of `F` in the plane.
#[derive(Debug, Clone, Copy)]
pub struct CriticalSearch {
    /// Radial samples in `[r_min, r_max] · ‖x_*‖`.
    pub radial: usize,
    /// Samples of the angle to `x_*` in `[0, π]`.
    pub angular: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Points closer than this (relative to `‖x_*‖`) are merged.
    pub merge_tol: f64,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            radial: 200,
            angular: 400,
            r_min: 0.02,
            r_max: 2.0,
            merge_tol: 1e-3,
        }
    }
}

const BISECTION_STEPS: usize = 200;

/// Critical points of the idealized loss in `R²`.
///
/// `F` depends on `x` only through `r = ‖x‖` and the angle `t` to `x_*`, so
/// `h_x` splits into a radial part `∂F/∂r` and an angular part `r⁻¹ ∂F/∂t`.
/// For each sampled angle the radial part is bracketed on the radial grid and
/// bisected. Along that curve, critical points are the two symmetry rays
/// `t ∈ {0, π}` (where the angular part vanishes identically) and interior
/// sign changes of the angular part, again refined by bisection. Working with
/// signs instead of `‖h‖` matters: for `d = 1` the loss is flat to sixth order
/// in `t` around `-ρ_1 x_*`, and for `d >= 2` it has a kink along that ray.
/// The origin, where `F` is not differentiable, is reported when `F`
/// decreases along every sampled direction.
pub fn idealized_critical_points(
    x_star: ArrayView1<f64>,
    depth: usize,
    search: &CriticalSearch,
) -> Result<Vec<CriticalPoint>> {
    check_len("critical point search (k = 2)", 2, x_star.len())?;
    if search.radial < 2 || search.angular < 2 || !(0.0 < search.r_min && search.r_min < search.r_max) {
        return Err(Error::InvalidConfig("degenerate critical point search grid".into()));
    }
    let ns = linalg::norm(x_star);
    let u = linalg::unit(x_star).ok_or(Error::ZeroVector("x_star"))?;
    let e = array![-u[1], u[0]];
    let at = |r: f64, t: f64| &u * (r * t.cos()) + &e * (r * t.sin());
    // (radial, angular) components of h at polar coordinates (r, t).
    let polar_h = |r: f64, t: f64| -> Result<(f64, f64)> {
        let h = h_direction(at(r, t).view(), x_star, depth)?;
        let radial = h[0] * (u[0] * t.cos() + e[0] * t.sin()) + h[1] * (u[1] * t.cos() + e[1] * t.sin());
        let angular = h[0] * (e[0] * t.cos() - u[0] * t.sin()) + h[1] * (e[1] * t.cos() - u[1] * t.sin());
        Ok((radial, angular))
    };
    let radial_roots = |t: f64| -> Result<Vec<f64>> {
        let step = ns * (search.r_max - search.r_min) / (search.radial - 1) as f64;
        let mut roots = Vec::new();
        let mut lo = ns * search.r_min;
        let mut f_lo = polar_h(lo, t)?.0;
        for i in 1..search.radial {
            let hi = ns * search.r_min + step * i as f64;
            let f_hi = polar_h(hi, t)?.0;
            if f_lo == 0.0 {
                roots.push(lo);
            } else if f_lo * f_hi < 0.0 {
                roots.push(bisect(lo, hi, f_lo, |r| Ok(polar_h(r, t)?.0))?);
            }
            lo = hi;
            f_lo = f_hi;
        }
        if f_lo == 0.0 {
            roots.push(lo);
        }
        Ok(roots)
    };

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for t in [0.0, PI] {
        for r in radial_roots(t)? {
            candidates.push((r, t));
        }
    }
    // Interior angles: follow each radial root and watch the angular sign.
    let angle = |j: usize| PI * j as f64 / (search.angular - 1) as f64;
    let mut previous: Vec<(f64, f64)> = Vec::new();
    for j in 1..search.angular - 1 {
        let t = angle(j);
        let mut current = Vec::new();
        for r in radial_roots(t)? {
            let a = polar_h(r, t)?.1;
            if a == 0.0 {
                candidates.push((r, t));
            }
            if let Some(&(_, a_prev)) = previous.iter().find(|(rp, _)| (rp - r).abs() < 0.05 * ns) {
                if a * a_prev < 0.0 {
                    let t_prev = angle(j - 1);
                    let angular_at = |s: f64| -> Result<f64> {
                        let rs = radial_roots(s)?;
                        let r_s = rs
                            .iter()
                            .copied()
                            .min_by(|p, q| (p - r).abs().total_cmp(&(q - r).abs()))
                            .ok_or_else(|| Error::Numeric("lost radial root".into()))?;
                        Ok(polar_h(r_s, s)?.1)
                    };
                    let ts = bisect(t_prev, t, a_prev, angular_at)?;
                    let r_s = radial_roots(ts)?
                        .into_iter()
                        .min_by(|p, q| (p - r).abs().total_cmp(&(q - r).abs()))
                        .ok_or_else(|| Error::Numeric("lost radial root".into()))?;
                    candidates.push((r_s, ts));
                    candidates.push((r_s, -ts));
                }
            }
            current.push((r, a));
        }
        previous = current;
    }

    // Radial and angular behaviour from the signs of the components of h on
    // either side; a sampled circle cannot resolve the higher-order flatness.
    let kind_at = |r: f64, t: f64| -> Result<CriticalKind> {
        let dr = 1e-3 * ns;
        let radial = shape(polar_h(r - dr, t)?.0, polar_h(r + dr, t)?.0);
        let dt = 1e-2;
        // Reflection symmetry about the x_* axis extends the angle past 0 and π.
        let below = if t - dt < 0.0 { -polar_h(r, dt - t)?.1 } else { polar_h(r, t - dt)?.1 };
        let above = if t + dt > PI {
            -polar_h(r, 2.0 * PI - t - dt)?.1
        } else {
            polar_h(r, t + dt)?.1
        };
        let angular = shape(below, above);
        Ok(match (radial, angular) {
            (Some(true), Some(true)) => CriticalKind::Minimum,
            (Some(false), Some(false)) => CriticalKind::Maximum,
            _ => CriticalKind::Saddle,
        })
    };

    let mut found: Vec<CriticalPoint> = Vec::new();
    for (r, t) in candidates {
        let x = at(r, t);
        let duplicate = found.iter().any(|c| {
            (c.location[0] - x[0]).hypot(c.location[1] - x[1]) < search.merge_tol * ns
        });
        if duplicate {
            continue;
        }
        found.push(CriticalPoint {
            location: x.to_vec(),
            kind: kind_at(r, t.abs())?,
            loss: idealized_loss(x.view(), x_star, depth)?,
        });
    }
    let origin = Array1::zeros(2);
    if classify(origin.view(), x_star, depth, 1e-6 * ns)? == CriticalKind::Maximum {
        found.push(CriticalPoint {
            location: vec![0.0, 0.0],
            kind: CriticalKind::NonsmoothMaximum,
            loss: idealized_loss(origin.view(), x_star, depth)?,
        });
    }
    Ok(found)
}

/// Root of `f` in `[lo, hi]` given `f(lo)` and a sign change on the bracket.
fn bisect(mut lo: f64, mut hi: f64, mut f_lo: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `Some(true)` for a local minimum of a 1-D function given its derivative
/// just before and after the point, `Some(false)` for a maximum.
fn shape(before: f64, after: f64) -> Option<bool> {
    if before < 0.0 && after > 0.0 {
        Some(true)
    } else if before > 0.0 && after < 0.0 {
        Some(false)
    } else {
        None
    }
}

/// Compares `F` on a circle of the given radius with its value at `x`.
fn classify(
    x: ArrayView1<f64>,
    x_star: ArrayView1<f64>,
    depth: usize,
    radius: f64,
) -> Result<CriticalKind> {
    let centre = idealized_loss(x, x_star, depth)?;
    let (mut above, mut below) = (0, 0);
    let samples = 720;
    for j in 0..samples {
        let t = 2.0 * PI * j as f64 / samples as f64;
        let p = &x + &array![radius * t.cos(), radius * t.sin()];
        let v = idealized_loss(p.view(), x_star, depth)?;
        if v > centre {
            above += 1;
        } else if v < centre {
            below += 1;
        }
    }
    Ok(if below == 0 {
        CriticalKind::Minimum
    } else if above == 0 {
        CriticalKind::Maximum
    } else {
        CriticalKind::Saddle
    })
}

/// Location of the spurious critical point of `F`: `-ρ_d x_*`.
pub fn negative_multiple(x_star: ArrayView1<f64>, depth: usize) -> Array1<f64> {
    -rho_d(depth).rho * &x_star
}
