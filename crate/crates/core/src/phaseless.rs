//! Gaussian measurement ensembles, phaseless observations `b = |A y_*| + η`,
//! the sign-diagonal operators `A_z = diag(sgn(Az)) A`, and the structured
//! matrices `Φ_{z,w}`, `Q_{x,y}` and `M_{x̂↔ŷ}`.
//!
//! `Φ`, `Q` and `M` are kept in rank-2 form (an identity coefficient, a swap
//! coefficient and two unit vectors); dense materialization exists for tests
//! and small diagnostics only.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::seed::SeedStream;

/// Below this `sin θ` the swap matrix uses the collinear formula `±x̂x̂ᵀ`.
pub const DEGENERATE_SIN: f64 = 1e-9;
/// Accepted deviation of a "unit" vector's norm from one.
pub const UNIT_TOL: f64 = 1e-8;

/// `sgn` with `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    a: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format: String,
    m: usize,
    n: usize,
    a: Vec<f64>,
}

const ENSEMBLE_FORMAT: &str = "dpr-ensemble-v1";

impl MeasurementEnsemble {
    /// `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
    pub fn sample(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidDims(format!("ensemble shape {m}x{n}")));
        }
        let mut rng = SeedStream::new(seed).rng();
        Ok(Self {
            a: linalg::gaussian_matrix(&mut rng, m, n, (1.0 / m as f64).sqrt()),
        })
    }

    pub fn from_matrix(a: Array2<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("measurement matrix has non-finite entries".into()));
        }
        Ok(Self { a })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_len("signal vector", self.n(), v.len())?;
        Ok(self.a.dot(&v))
    }

    /// `A_z v = diag(sgn(Az)) A v`.
    pub fn sign_apply(&self, z: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        let az = self.apply(z)?;
        let mut av = self.apply(v)?;
        Zip::from(&mut av).and(&az).for_each(|o, &s| *o *= sgn(s));
        Ok(av)
    }

    /// `A_zᵀ r = Aᵀ diag(sgn(Az)) r`.
    pub fn sign_transpose_apply(
        &self,
        z: ArrayView1<f64>,
        r: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        check_len("measurement-space vector", self.m(), r.len())?;
        let az = self.apply(z)?;
        let signed = Zip::from(&az).and(r).map_collect(|&s, &ri| sgn(s) * ri);
        Ok(self.a.t().dot(&signed))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&EnsembleFile {
            format: ENSEMBLE_FORMAT.into(),
            m: self.m(),
            n: self.n(),
            a: self.a.iter().copied().collect(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(s)?;
        if file.format != ENSEMBLE_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unknown ensemble format {}",
                file.format
            )));
        }
        check_len("ensemble entries", file.m * file.n, file.a.len())?;
        Self::from_matrix(Array2::from_shape_vec((file.m, file.n), file.a).expect("checked"))
    }
}

/// `diag(sgn(Az)) A v`, never forming the `m x m` diagonal.
pub fn sign_matrix_apply(
    ensemble: &MeasurementEnsemble,
    z: ArrayView1<f64>,
    v: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    ensemble.sign_apply(z, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaselessObservation {
    b: Array1<f64>,
    eta: Array1<f64>,
}

impl PhaselessObservation {
    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn eta(&self) -> &Array1<f64> {
        &self.eta
    }

    pub fn noise_norm(&self) -> f64 {
        linalg::norm(self.eta.view())
    }

    /// Single-column CSV with header `b_i`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["b_i"])?;
        for v in &self.b {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `b = |A y_*| + η`.
pub fn observe(
    ensemble: &MeasurementEnsemble,
    y_star: ArrayView1<f64>,
    eta: ArrayView1<f64>,
) -> Result<PhaselessObservation> {
    check_len("noise vector", ensemble.m(), eta.len())?;
    let b = ensemble.apply(y_star)?.mapv(f64::abs) + eta;
    Ok(PhaselessObservation {
        b,
        eta: eta.to_owned(),
    })
}

/// `M_{x̂↔ŷ}` as `Σ c_j u_j u_jᵀ` with at most two terms.
///
/// Generic case: eigenvectors `(ŷ ± x̂)/‖ŷ ± x̂‖` with eigenvalues `±1`.
/// Collinear case (`sin θ` under [`DEGENERATE_SIN`]): `x̂x̂ᵀ` or `-x̂x̂ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapOperator {
    terms: Vec<(f64, Array1<f64>)>,
    dim: usize,
}

impl SwapOperator {
    pub fn new(x_hat: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> Result<Self> {
        check_len("swap operator", x_hat.len(), y_hat.len())?;
        if (linalg::norm(x_hat) - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnit("x_hat"));
        }
        if (linalg::norm(y_hat) - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnit("y_hat"));
        }
        let theta = linalg::angle(x_hat, y_hat).expect("unit vectors");
        Ok(Self::from_units(x_hat, y_hat, theta))
    }

    fn from_units(x_hat: ArrayView1<f64>, y_hat: ArrayView1<f64>, theta: f64) -> Self {
        let dim = x_hat.len();
        let terms = if theta.sin() < DEGENERATE_SIN {
            let c = if theta < PI / 2.0 { 1.0 } else { -1.0 };
            vec![(c, x_hat.to_owned())]
        } else {
            let minus = linalg::unit((&y_hat - &x_hat).view()).expect("not collinear");
            let plus = linalg::unit((&y_hat + &x_hat).view()).expect("not collinear");
            vec![(-1.0, minus), (1.0, plus)]
        };
        Self { terms, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for (c, u) in &self.terms {
            out.scaled_add(c * u.dot(&v), u);
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for (c, u) in &self.terms {
            let col = u.view().insert_axis(ndarray::Axis(1));
            let row = u.view().insert_axis(ndarray::Axis(0));
            m.scaled_add(*c, &col.dot(&row));
        }
        m
    }
}

pub fn swap_matrix(x_hat: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> Result<SwapOperator> {
    SwapOperator::new(x_hat, y_hat)
}

/// `identity · I + swap · M_{x̂↔ŷ}`; the shared form of `Φ` and `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityPlusSwap {
    pub identity: f64,
    pub swap: f64,
    /// Angle between the defining vectors; `None` for the zero operator.
    pub theta: Option<f64>,
    m: Option<SwapOperator>,
    dim: usize,
}

impl IdentityPlusSwap {
    fn zero(dim: usize) -> Self {
        Self {
            identity: 0.0,
            swap: 0.0,
            theta: None,
            m: None,
            dim,
        }
    }

    fn build(
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        coeffs: impl Fn(f64) -> (f64, f64),
    ) -> Option<Self> {
        let xh = linalg::unit(x)?;
        let yh = linalg::unit(y)?;
        let theta = linalg::angle(xh.view(), yh.view())?;
        let (identity, swap) = coeffs(theta);
        Some(Self {
            identity,
            swap,
            theta: Some(theta),
            m: Some(SwapOperator::from_units(xh.view(), yh.view(), theta)),
            dim: x.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = self.identity * &v;
        if let Some(m) = &self.m {
            out.scaled_add(self.swap, &m.apply(v));
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = self.identity * Array2::eye(self.dim);
        if let Some(m) = &self.m {
            d.scaled_add(self.swap, &m.to_dense());
        }
        d
    }
}

/// `Φ_{z,w} = ((π - 2θ)/π) I + (2 sin θ/π) M_{ẑ↔ŵ}`, and `0` if either input is zero.
pub fn phi_matrix(z: ArrayView1<f64>, w: ArrayView1<f64>) -> Result<IdentityPlusSwap> {
    check_len("phi matrix", z.len(), w.len())?;
    Ok(IdentityPlusSwap::build(z, w, |t| ((PI - 2.0 * t) / PI, 2.0 * t.sin() / PI))
        .unwrap_or_else(|| IdentityPlusSwap::zero(z.len())))
}

/// `Q_{x,y} = ((π - θ)/2π) I + (sin θ/2π) M_{x̂↔ŷ}`.
pub fn q_matrix(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<IdentityPlusSwap> {
    check_len("q matrix", x.len(), y.len())?;
    IdentityPlusSwap::build(x, y, |t| ((PI - t) / (2.0 * PI), t.sin() / (2.0 * PI)))
        .ok_or(Error::ZeroVector("x and y"))
}

/// Angle after the phaseless map: `φ(θ) = acos(((π - 2θ) cos θ + 2 sin θ)/π)`.
pub fn varphi(theta: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("angle {theta} outside [0, π]")));
    }
    Ok((((PI - 2.0 * theta) * theta.cos() + 2.0 * theta.sin()) / PI)
        .clamp(-1.0, 1.0)
        .acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn max_abs(m: &Array2<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn sample_is_reproducible_and_scaled() {
        let a = MeasurementEnsemble::sample(3, 4, 5).unwrap();
        assert_eq!(a, MeasurementEnsemble::sample(3, 4, 5).unwrap());
        assert!(MeasurementEnsemble::sample(0, 4, 5).is_err());
        assert_eq!(MeasurementEnsemble::sample(1, 1, 9).unwrap().matrix().dim(), (1, 1));
    }

    #[test]
    fn isometry_in_expectation() {
        // m=1000, n=50: mean of ‖Az‖² over 100 draws for a fixed unit z.
        let mut rng = SeedStream::new(77).rng();
        let z = linalg::random_unit(&mut rng, 50);
        let mean: f64 = (0..100)
            .map(|s| {
                let a = MeasurementEnsemble::sample(1000, 50, s).unwrap();
                let az = a.apply(z.view()).unwrap();
                az.dot(&az)
            })
            .sum::<f64>()
            / 100.0;
        assert!((mean - 1.0).abs() < 0.1, "mean energy {mean}");
    }

    #[test]
    fn observation_basics() {
        let a = MeasurementEnsemble::sample(6, 4, 1).unwrap();
        let zero = Array1::zeros(4);
        let obs = observe(&a, zero.view(), Array1::zeros(6).view()).unwrap();
        assert!(obs.b().iter().all(|&v| v == 0.0));
        let y = array![0.3, -1.0, 2.0, 0.5];
        let p = observe(&a, y.view(), Array1::zeros(6).view()).unwrap();
        let n = observe(&a, (-&y).view(), Array1::zeros(6).view()).unwrap();
        assert_eq!(p, n);
        assert!(p.b().iter().all(|&v| v >= 0.0));
        assert!(observe(&a, y.view(), Array1::zeros(5).view()).is_err());
        assert_eq!(p.noise_norm(), 0.0);
    }

    #[test]
    fn observation_csv_has_header() {
        let a = MeasurementEnsemble::from_matrix(array![[1.0, 0.0], [0.0, -2.0]]).unwrap();
        let obs = observe(&a, array![1.0, 1.0].view(), array![0.0, 0.5].view()).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "b_i\n1\n2.5\n");
    }

    #[test]
    fn sign_apply_identities() {
        let a = MeasurementEnsemble::sample(20, 8, 3).unwrap();
        let mut rng = SeedStream::new(4).rng();
        let z = linalg::gaussian_vector(&mut rng, 8);
        let v = linalg::gaussian_vector(&mut rng, 8);
        let azz = a.sign_apply(z.view(), z.view()).unwrap();
        assert_abs_diff_eq!(azz, a.apply(z.view()).unwrap().mapv(f64::abs), epsilon = 1e-14);
        // Positive rescaling of z leaves the sign pattern unchanged.
        assert_eq!(
            a.sign_apply(z.view(), v.view()).unwrap(),
            a.sign_apply((3.7 * &z).view(), v.view()).unwrap()
        );
    }

    #[test]
    fn sign_apply_all_positive_is_plain_apply() {
        let a = MeasurementEnsemble::from_matrix(array![[1.0, 2.0], [0.5, 0.1], [3.0, 1.0]]).unwrap();
        let z = array![1.0, 1.0];
        let v = array![-2.0, 0.7];
        assert_eq!(a.sign_apply(z.view(), v.view()).unwrap(), a.apply(v.view()).unwrap());
    }

    #[test]
    fn sign_gram_matches_dense_oracle() {
        let mut rng = SeedStream::new(8).rng();
        for trial in 0..10 {
            let (m, n) = (5 + trial, 3 + trial);
            let a = MeasurementEnsemble::sample(m, n, trial as u64).unwrap();
            let z = linalg::gaussian_vector(&mut rng, n);
            let v = linalg::gaussian_vector(&mut rng, n);
            let fast = a
                .sign_transpose_apply(z.view(), a.sign_apply(z.view(), v.view()).unwrap().view())
                .unwrap();
            let signs = a.apply(z.view()).unwrap().mapv(sgn);
            let dense = Array2::from_diag(&signs).dot(a.matrix());
            let oracle = dense.t().dot(&dense).dot(&v);
            assert_abs_diff_eq!(fast, oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn sgn_of_zero_is_zero() {
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(-3.0), -1.0);
        let a = MeasurementEnsemble::from_matrix(array![[1.0, -1.0]]).unwrap();
        let out = a.sign_apply(array![1.0, 1.0].view(), array![5.0, 0.0].view()).unwrap();
        assert_eq!(out, array![0.0]);
    }

    /// Rotation construction of `M`: `R` maps `x̂ -> e1`, `ŷ -> cos θ e1 + sin θ e2`.
    fn rotation_oracle(xh: &Array1<f64>, yh: &Array1<f64>) -> Array2<f64> {
        let n = xh.len();
        let c = xh.dot(yh);
        let theta = c.clamp(-1.0, 1.0).acos();
        let r2 = (yh - &(c * xh)) / theta.sin();
        let mut cols = Array2::zeros((n, n + 2));
        cols.column_mut(0).assign(xh);
        cols.column_mut(1).assign(&r2);
        for i in 0..n {
            cols[[i, i + 2]] = 1.0;
        }
        let q = linalg::orthonormal_columns(cols.view(), 1e-10);
        let r = q.t().to_owned();
        let mut b = Array2::zeros((n, n));
        b[[0, 0]] = theta.cos();
        b[[0, 1]] = theta.sin();
        b[[1, 0]] = theta.sin();
        b[[1, 1]] = -theta.cos();
        r.t().dot(&b).dot(&r)
    }

    #[test]
    fn swap_matches_rotation_construction() {
        let mut rng = SeedStream::new(21).rng();
        for n in [2, 3] {
            for _ in 0..200 {
                let xh = linalg::random_unit(&mut rng, n);
                let yh = linalg::random_unit(&mut rng, n);
                let m = swap_matrix(xh.view(), yh.view()).unwrap().to_dense();
                assert!(max_abs(&(&m - &rotation_oracle(&xh, &yh))) < 1e-9);
            }
        }
    }

    #[test]
    fn swap_defining_property() {
        let mut rng = SeedStream::new(22).rng();
        let mut worst = 0.0f64;
        for i in 0..10_000 {
            let n = 2 + i % 7;
            let xh = linalg::random_unit(&mut rng, n);
            let yh = linalg::random_unit(&mut rng, n);
            let m = swap_matrix(xh.view(), yh.view()).unwrap();
            worst = worst.max(linalg::norm((&m.apply(xh.view()) - &yh).view()));
            worst = worst.max(linalg::norm((&m.apply(yh.view()) - &xh).view()));
        }
        assert!(worst <= 1e-12, "worst swap residual {worst}");
    }

    #[test]
    fn swap_is_reflection_on_plane_and_zero_off_it() {
        let x = array![1.0, 0.0, 0.0];
        let y = array![0.6, 0.8, 0.0];
        let m = swap_matrix(x.view(), y.view()).unwrap().to_dense();
        let m2 = m.dot(&m);
        let proj = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(max_abs(&(&m2 - &proj)) < 1e-14);
        assert_abs_diff_eq!(m.dot(&array![0.0, 0.0, 1.0]), Array1::zeros(3), epsilon = 1e-15);
    }

    #[test]
    fn swap_degenerate_cases() {
        let x = array![0.0, 1.0];
        let same = swap_matrix(x.view(), x.view()).unwrap().to_dense();
        assert_eq!(same, array![[0.0, 0.0], [0.0, 1.0]]);
        let opp = swap_matrix(x.view(), (-&x).view()).unwrap().to_dense();
        assert_eq!(opp, array![[0.0, 0.0], [0.0, -1.0]]);
        assert!(swap_matrix(array![2.0, 0.0].view(), x.view()).is_err());
    }

    #[test]
    fn phi_special_values() {
        let z = array![0.3, -0.4, 1.2, 0.0];
        let eye = Array2::<f64>::eye(4);
        assert!(max_abs(&(&phi_matrix(z.view(), z.view()).unwrap().to_dense() - &eye)) < 1e-15);
        let anti = phi_matrix(z.view(), (-&z).view()).unwrap().to_dense();
        assert!(max_abs(&(&anti + &eye)) < 1e-15);
        let zero = phi_matrix(z.view(), Array1::zeros(4).view()).unwrap();
        assert_eq!(zero.to_dense(), Array2::<f64>::zeros((4, 4)));
        let sym = phi_matrix(z.view(), array![1.0, 0.5, 0.0, 2.0].view()).unwrap().to_dense();
        assert!(max_abs(&(&sym - &sym.t())) < 1e-15);
    }

    #[test]
    fn phi_planar_oracle() {
        // In the plane, Φ = E[sgn(aᵀz) sgn(aᵀw) a aᵀ] for a ~ N(0, I_2); integrate
        // over the direction angle with the midpoint rule.
        let mut rng = SeedStream::new(5).rng();
        for _ in 0..20 {
            let z = linalg::gaussian_vector(&mut rng, 2);
            let w = linalg::gaussian_vector(&mut rng, 2);
            let steps = 200_000;
            let mut acc = Array2::<f64>::zeros((2, 2));
            for i in 0..steps {
                let t = 2.0 * PI * (i as f64 + 0.5) / steps as f64;
                let u = array![t.cos(), t.sin()];
                let s = sgn(u.dot(&z)) * sgn(u.dot(&w));
                // E[r²] = 2 for the radial part of a standard 2D Gaussian.
                acc[[0, 0]] += s * u[0] * u[0];
                acc[[0, 1]] += s * u[0] * u[1];
                acc[[1, 0]] += s * u[1] * u[0];
                acc[[1, 1]] += s * u[1] * u[1];
            }
            let oracle = acc * (2.0 / steps as f64);
            let phi = phi_matrix(z.view(), w.view()).unwrap().to_dense();
            assert!(max_abs(&(&phi - &oracle)) < 1e-4);
        }
    }

    #[test]
    fn q_special_values_and_norm_bound() {
        let x = array![1.0, 2.0, 3.0];
        let q = q_matrix(x.view(), x.view()).unwrap().to_dense();
        assert!(max_abs(&(&q - &(0.5 * Array2::<f64>::eye(3)))) < 1e-15);
        let q = q_matrix(x.view(), (-&x).view()).unwrap().to_dense();
        assert!(max_abs(&q) < 1e-15);
        assert!(q_matrix(x.view(), Array1::zeros(3).view()).is_err());

        let mut rng = SeedStream::new(6).rng();
        for _ in 0..500 {
            let x = linalg::gaussian_vector(&mut rng, 5);
            let y = linalg::gaussian_vector(&mut rng, 5);
            let q = q_matrix(x.view(), y.view()).unwrap();
            // On span{x,y} the eigenvalues are (π - θ ± sin θ)/2π; elsewhere (π - θ)/2π.
            let t = q.theta.unwrap();
            let oracle = (PI - t + t.sin()) / (2.0 * PI);
            let norm = linalg::spectral_norm(q.to_dense().view());
            assert!((norm - oracle).abs() < 1e-8);
            assert!(norm <= 0.5 + 1.0 / (2.0 * PI) + 1e-12);
        }
    }

    #[test]
    fn varphi_values() {
        assert_eq!(varphi(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(varphi(PI).unwrap(), 0.0, epsilon = 1e-7);
        assert!(varphi(4.0).is_err());
        for i in 0..=1000 {
            let t = PI * i as f64 / 1000.0;
            assert!(varphi(t).unwrap().cos() >= 2.0 / PI - 1e-15);
        }
    }

    #[test]
    fn relative_angle_bound() {
        let mut rng = SeedStream::new(31).rng();
        for _ in 0..2000 {
            let n = rng.random_range(2..6);
            let x1 = linalg::gaussian_vector(&mut rng, n);
            let x2 = linalg::gaussian_vector(&mut rng, n);
            let y = linalg::gaussian_vector(&mut rng, n);
            let a = linalg::angle(x1.view(), y.view()).unwrap();
            let b = linalg::angle(x2.view(), y.view()).unwrap();
            let c = linalg::angle(x1.view(), x2.view()).unwrap();
            assert!((a - b).abs() <= c + 1e-12);
        }
    }

    #[test]
    fn ensemble_json_round_trip() {
        let a = MeasurementEnsemble::sample(4, 7, 12).unwrap();
        assert_eq!(MeasurementEnsemble::from_json(&a.to_json().unwrap()).unwrap(), a);
    }
}
