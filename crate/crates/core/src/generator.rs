//! Expansive ReLU generators `G(x) = relu(W_d ... relu(W_1 x))` and the
//! latent-angle quantities attached to them.
//!
//! Activation ties follow the strict convention: a unit whose pre-activation
//! is exactly zero is treated as inactive, so `W_{i,+,x}` zeroes that row.
//! At `x = 0` every unit is tied and `Λ_0` is the zero matrix.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::seed::SeedStream;

/// Clamp slack on `acos` arguments before rounding is treated as a bug.
pub const ACOS_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    k: usize,
    layer_dims: Vec<usize>,
}

impl NetworkDims {
    /// Validates `0 < k = n_0 < n_1 < ... < n_d` with `d >= 1`.
    pub fn new(k: usize, layer_dims: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDims("latent dimension must be positive".into()));
        }
        if layer_dims.is_empty() {
            return Err(Error::InvalidDims("at least one layer is required".into()));
        }
        let mut prev = k;
        for (i, &n) in layer_dims.iter().enumerate() {
            if n <= prev {
                return Err(Error::InvalidDims(format!(
                    "layer {} has width {n}, not wider than {prev}",
                    i + 1
                )));
            }
            prev = n;
        }
        Ok(Self { k, layer_dims })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated nonempty")
    }

    /// `n_i`, with `n_0 = k`.
    pub fn width(&self, i: usize) -> usize {
        if i == 0 {
            self.k
        } else {
            self.layer_dims[i - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    dims: NetworkDims,
    weights: Vec<Array2<f64>>,
}

/// On-disk layout: dims header plus one row-major block per layer.
#[derive(Serialize, Deserialize)]
struct NetFile {
    format: String,
    k: usize,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

const NET_FORMAT: &str = "dpr-generator-v1";

impl GeneratorNet {
    /// Gaussian weights with `W_i[r, c] ~ N(0, 1/n_i)`.
    pub fn sample_gaussian(dims: &NetworkDims, seed: u64) -> Self {
        let stream = SeedStream::new(seed);
        let weights = (1..=dims.depth())
            .map(|i| {
                let (rows, cols) = (dims.width(i), dims.width(i - 1));
                let mut rng = stream.child(i as u64).rng();
                linalg::gaussian_matrix(&mut rng, rows, cols, (1.0 / rows as f64).sqrt())
            })
            .collect();
        Self {
            dims: dims.clone(),
            weights,
        }
    }

    pub fn from_weights(k: usize, weights: Vec<Array2<f64>>) -> Result<Self> {
        let dims = NetworkDims::new(k, weights.iter().map(|w| w.nrows()).collect())?;
        for (i, w) in weights.iter().enumerate() {
            check_len("weight columns", dims.width(i), w.ncols())?;
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("layer {} has non-finite weights", i + 1)));
            }
        }
        Ok(Self { dims, weights })
    }

    pub fn dims(&self) -> &NetworkDims {
        &self.dims
    }

    pub fn depth(&self) -> usize {
        self.dims.depth()
    }

    pub fn k(&self) -> usize {
        self.dims.k()
    }

    pub fn output_dim(&self) -> usize {
        self.dims.output_dim()
    }

    /// `W_i` for `1 <= i <= d`.
    pub fn weight(&self, i: usize) -> &Array2<f64> {
        &self.weights[i - 1]
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("latent vector", self.k(), x.len())?;
        let mut h = x.to_owned();
        for w in &self.weights {
            h = w.dot(&h);
            h.mapv_inplace(relu);
        }
        Ok(h)
    }

    /// Pre-activations `W_i x_{i-1}` of every layer, in order.
    pub fn pre_activations(&self, x: ArrayView1<f64>) -> Result<Vec<Array1<f64>>> {
        check_len("latent vector", self.k(), x.len())?;
        let mut out = Vec::with_capacity(self.depth());
        let mut h = x.to_owned();
        for w in &self.weights {
            let pre = w.dot(&h);
            h = pre.mapv(relu);
            out.push(pre);
        }
        Ok(out)
    }

    /// Forward pass on the columns of a `k x B` batch.
    pub fn forward_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_len("latent batch rows", self.k(), xs.nrows())?;
        let mut h = xs.to_owned();
        for w in &self.weights {
            h = w.dot(&h);
            h.mapv_inplace(relu);
        }
        Ok(h)
    }

    /// `W_{i,+,x}`: rows of `W_i` kept where the layer-`i` pre-activation is strictly positive.
    pub fn active_weights(&self, x: ArrayView1<f64>, layer: usize) -> Result<Array2<f64>> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::Domain(format!(
                "layer index {layer} outside 1..={}",
                self.depth()
            )));
        }
        let pre = self.pre_activations(x)?;
        let mut w = self.weight(layer).clone();
        apply_row_mask(&mut w, pre[layer - 1].view());
        Ok(w)
    }

    /// `Λ_x = W_{d,+,x} ... W_{1,+,x}` (`n_d x k`), so that `G(x) = Λ_x x`.
    pub fn jacobian(&self, x: ArrayView1<f64>) -> Result<Array2<f64>> {
        let pre = self.pre_activations(x)?;
        let mut lambda = Array2::<f64>::eye(self.k());
        for (w, p) in self.weights.iter().zip(&pre) {
            lambda = w.dot(&lambda);
            apply_row_mask(&mut lambda, p.view());
        }
        Ok(lambda)
    }

    /// `Λ_xᵀ r` by back-propagation through the activation masks.
    pub fn jacobian_transpose_apply(
        &self,
        x: ArrayView1<f64>,
        r: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        check_len("output-space vector", self.output_dim(), r.len())?;
        let pre = self.pre_activations(x)?;
        Ok(backprop(&self.weights, &pre, r.to_owned()))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetFile {
            format: NET_FORMAT.into(),
            k: self.k(),
            layer_dims: self.dims.layer_dims.clone(),
            weights: self.weights.iter().map(|w| w.iter().copied().collect()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: NetFile = serde_json::from_str(s)?;
        if file.format != NET_FORMAT {
            return Err(Error::InvalidConfig(format!("unknown net format {}", file.format)));
        }
        let dims = NetworkDims::new(file.k, file.layer_dims)?;
        if file.weights.len() != dims.depth() {
            return Err(Error::DimensionMismatch {
                context: "weight blocks",
                expected: dims.depth(),
                actual: file.weights.len(),
            });
        }
        let weights = file
            .weights
            .into_iter()
            .enumerate()
            .map(|(i, flat)| {
                let shape = (dims.width(i + 1), dims.width(i));
                check_len("weight block length", shape.0 * shape.1, flat.len())?;
                Ok(Array2::from_shape_vec(shape, flat).expect("length checked"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_weights(dims.k(), weights)
    }
}

pub(crate) fn backprop(
    weights: &[Array2<f64>],
    pre: &[Array1<f64>],
    mut r: Array1<f64>,
) -> Array1<f64> {
    for (w, p) in weights.iter().zip(pre).rev() {
        Zip::from(&mut r).and(p).for_each(|ri, &pi| {
            if pi <= 0.0 {
                *ri = 0.0;
            }
        });
        r = w.t().dot(&r);
    }
    r
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn apply_row_mask(m: &mut Array2<f64>, pre: ArrayView1<f64>) {
    for (mut row, &p) in m.axis_iter_mut(Axis(0)).zip(pre.iter()) {
        if p <= 0.0 {
            row.fill(0.0);
        }
    }
}

fn clamped_acos(c: f64) -> f64 {
    debug_assert!(c.abs() <= 1.0 + ACOS_CLAMP_TOL, "acos argument {c}");
    c.clamp(-1.0, 1.0).acos()
}

fn check_angle(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {theta} outside [0, π]")))
    }
}

/// Angle map of one ReLU layer: `g(θ) = acos(((π - θ) cos θ + sin θ) / π)`.
pub fn g_theta(theta: f64) -> Result<f64> {
    check_angle(theta)?;
    Ok(g_unchecked(theta))
}

fn g_unchecked(theta: f64) -> f64 {
    clamped_acos(((PI - theta) * theta.cos() + theta.sin()) / PI)
}

/// Angle recursion `θ̄_0 = ∠(x, x_*)`, `θ̄_i = g(θ̄_{i-1})` and its derived products.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleProfile {
    /// `θ̄_0 ..= θ̄_d`.
    pub theta_bar: Vec<f64>,
    /// `(π - 2θ̄_d) / π`.
    pub psi_d: f64,
    /// `ζ_i = ∏_{j=i}^{d-1} (π - θ̄_j) / π` for `i = 0..=d`; `ζ_d = 1`.
    pub zeta: Vec<f64>,
}

impl AngleProfile {
    pub fn from_angle(theta0: f64, depth: usize) -> Result<Self> {
        check_angle(theta0)?;
        let mut theta_bar = Vec::with_capacity(depth + 1);
        theta_bar.push(theta0);
        for i in 0..depth {
            theta_bar.push(g_unchecked(theta_bar[i]));
        }
        let mut zeta = vec![1.0; depth + 1];
        for i in (0..depth).rev() {
            zeta[i] = zeta[i + 1] * (PI - theta_bar[i]) / PI;
        }
        let psi_d = (PI - 2.0 * theta_bar[depth]) / PI;
        Ok(Self {
            theta_bar,
            psi_d,
            zeta,
        })
    }

    pub fn new(x: ArrayView1<f64>, x_star: ArrayView1<f64>, depth: usize) -> Result<Self> {
        check_len("angle profile", x.len(), x_star.len())?;
        let theta0 = linalg::angle(x, x_star).ok_or(Error::ZeroVector("x and x_star"))?;
        Self::from_angle(theta0, depth)
    }

    pub fn depth(&self) -> usize {
        self.theta_bar.len() - 1
    }

    pub fn theta_d(&self) -> f64 {
        self.theta_bar[self.depth()]
    }

    /// `Σ_{i<d} (sin θ̄_i / π) ζ_{i+1}`.
    pub fn sin_sum(&self) -> f64 {
        (0..self.depth())
            .map(|i| self.theta_bar[i].sin() / PI * self.zeta[i + 1])
            .sum()
    }

    /// Coefficient of `‖x‖‖x_*‖` in the idealized loss: `2 sin θ̄_d / π + ψ_d Σ`.
    pub fn radial_coefficient(&self) -> f64 {
        2.0 * self.theta_d().sin() / PI + self.psi_d * self.sin_sum()
    }
}

/// `ρ_d` and `Γ_d` from the antipodal recursion `θ̆_0 = π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoProfile {
    pub rho: f64,
    pub gamma: f64,
}

pub fn rho_d(depth: usize) -> RhoProfile {
    static CACHE: OnceLock<Mutex<HashMap<usize, RhoProfile>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("rho cache poisoned").get(&depth) {
        return *r;
    }
    let breve = AngleProfile::from_angle(PI, depth).expect("π is in domain");
    let r = RhoProfile {
        rho: breve.radial_coefficient(),
        gamma: breve.sin_sum(),
    };
    cache.lock().expect("rho cache poisoned").insert(depth, r);
    r
}
