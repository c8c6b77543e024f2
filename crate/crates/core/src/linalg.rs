//! Dense helpers shared by the numerical modules.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::seed::SeedStream;

pub const POWER_ITERS: usize = 200;
pub const POWER_TOL: f64 = 1e-9;

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn unit(v: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = norm(v);
    if n > 0.0 && n.is_finite() {
        Some(&v / n)
    } else {
        None
    }
}

/// Angle between two nonzero vectors, `2 atan2(|x̂ - ŷ|, |x̂ + ŷ|)`.
///
/// Accurate near 0 and π where `acos` of the cosine loses half the digits.
pub fn angle(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let xh = unit(x)?;
    let yh = unit(y)?;
    let diff = norm((&xh - &yh).view());
    let sum = norm((&xh + &yh).view());
    Some(2.0 * diff.atan2(sum))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || std * rng.sample::<f64, _>(StandardNormal))
}

pub fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Array1<f64> {
    loop {
        let v = gaussian_vector(rng, n);
        if let Some(u) = unit(v.view()) {
            return u;
        }
    }
}

/// Largest singular value by power iteration on `BᵀB`.
///
/// Converges from below; stops after [`POWER_ITERS`] rounds or when the
/// relative change of the estimate drops under [`POWER_TOL`].
pub fn spectral_norm(b: ArrayView2<f64>) -> f64 {
    let cols = b.ncols();
    if cols == 0 || b.nrows() == 0 {
        return 0.0;
    }
    // Fixed start so the estimate is a deterministic function of `b`.
    let mut rng = SeedStream::new(0x5EED_0F_5EC7).rng();
    let mut v = random_unit(&mut rng, cols);
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERS {
        let bv = b.dot(&v);
        let w = b.t().dot(&bv);
        let wn = norm(w.view());
        if wn == 0.0 {
            return 0.0;
        }
        let next = wn.sqrt();
        v = w / wn;
        let done = (next - sigma).abs() <= POWER_TOL * next;
        sigma = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient at the final vector is a tighter lower bound.
    sigma.max(norm(b.dot(&v).view()))
}

/// Orthonormal basis (as columns) of the span of the given columns, by
/// modified Gram-Schmidt; columns with relative residual under `tol` are dropped.
pub fn orthonormal_columns(vectors: ArrayView2<f64>, tol: f64) -> Array2<f64> {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    for col in vectors.axis_iter(Axis(1)) {
        let scale = norm(col);
        if scale == 0.0 {
            continue;
        }
        let mut r = col.to_owned();
        for q in &basis {
            let c = q.dot(&r);
            r.scaled_add(-c, q);
        }
        for q in &basis {
            let c = q.dot(&r);
            r.scaled_add(-c, q);
        }
        let rn = norm(r.view());
        if rn > tol * scale {
            basis.push(r / rn);
        }
    }
    let mut out = Array2::zeros((vectors.nrows(), basis.len()));
    for (j, q) in basis.iter().enumerate() {
        out.column_mut(j).assign(q);
    }
    out
}
