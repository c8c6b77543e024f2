//! Monte-Carlo probes of the concentration conditions behind the landscape
//! analysis: the weight distribution condition, range-restricted concentration,
//! angle distortion, sign-pattern counts and submatrix norms.
//!
//! Suprema over continua are estimated by sampling, so every report is a lower
//! bound on the true worst case, not a certificate.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::Write;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{check_len, Error, Result};
use crate::generator::GeneratorNet;
use crate::landscape::{h_direction, ProblemInstance};
use crate::linalg;
use crate::phaseless::{phi_matrix, q_matrix, varphi, MeasurementEnsemble};
use crate::seed::{label, SeedStream};

/// The constant in the range-restricted concentration property.
pub const RRCP_L: f64 = 33.0;
/// Angle of the nearly parallel structured pairs.
pub const NEAR_PARALLEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub samples: usize,
    pub max_dev: f64,
    pub mean_dev: f64,
    pub p50: f64,
    pub p95: f64,
    pub config: Value,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DeviationReport {
    pub fn from_samples(mut devs: Vec<f64>, config: Value) -> Result<Self> {
        if devs.is_empty() {
            return Err(Error::InvalidConfig("no samples".into()));
        }
        if devs.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numeric("non-finite deviation".into()));
        }
        devs.sort_by(f64::total_cmp);
        Ok(Self {
            samples: devs.len(),
            max_dev: *devs.last().expect("non-empty"),
            mean_dev: devs.iter().sum::<f64>() / devs.len() as f64,
            p50: quantile(&devs, 0.5),
            p95: quantile(&devs, 0.95),
            config,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Long-format CSV (`label,stat,value`) of several reports.
pub fn write_reports_csv<W: Write>(reports: &[(String, DeviationReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "stat", "value"])?;
    for (name, r) in reports {
        for (stat, v) in [
            ("samples", r.samples as f64),
            ("max_dev", r.max_dev),
            ("mean_dev", r.mean_dev),
            ("p50", r.p50),
            ("p95", r.p95),
        ] {
            w.write_record([name.as_str(), stat, &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sample_rng(seed: u64, i: usize) -> rand_chacha::ChaCha8Rng {
    SeedStream::new(seed).child(label::PROBES).child(i as u64).rng()
}

/// Unit vector at angle `t` from the unit vector `x`, in a random plane.
fn rotate_towards<R: Rng>(rng: &mut R, x: &Array1<f64>, t: f64) -> Array1<f64> {
    loop {
        let g = linalg::gaussian_vector(rng, x.len());
        let perp = &g - &(x * g.dot(x));
        if let Some(p) = linalg::unit(perp.view()) {
            return x * t.cos() + p * t.sin();
        }
    }
}

/// Cap on the coordinate axes and random directions used for structured pairs.
const STRUCTURED_AXES: usize = 8;

/// Structured pairs: coordinate pairs among the first few axes, antipodes and
/// nearly parallel pairs.
fn structured_pairs(k: usize, seed: u64) -> Vec<(Array1<f64>, Array1<f64>)> {
    let mut pairs = Vec::new();
    let e = |i: usize| {
        let mut v = Array1::zeros(k);
        v[i] = 1.0;
        v
    };
    let axes = k.min(STRUCTURED_AXES);
    for i in 0..axes {
        for j in 0..axes {
            pairs.push((e(i), e(j)));
        }
    }
    let mut rng = SeedStream::new(seed).child(label::PROBES).rng();
    for _ in 0..STRUCTURED_AXES {
        let x = linalg::random_unit(&mut rng, k);
        pairs.push((x.clone(), -&x));
        if k > 1 {
            let y = rotate_towards(&mut rng, &x, NEAR_PARALLEL);
            pairs.push((x, y));
        }
    }
    pairs
}

/// `‖W_{+,x}ᵀ W_{+,y} - Q_{x,y}‖` for `W` of shape `n x k`.
pub fn wdc_pair_deviation(w: ArrayView2<f64>, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
    let (wx, wy) = (w.dot(x), w.dot(y));
    let active: Vec<usize> = (0..w.nrows()).filter(|&i| wx[i] > 0.0 && wy[i] > 0.0).collect();
    let rows = w.select(Axis(0), &active);
    let diff = rows.t().dot(&rows) - q_matrix(x.view(), y.view())?.to_dense();
    Ok(linalg::spectral_norm(diff.view()))
}

/// Weight distribution condition probe over random unit pairs plus the
/// structured pairs.
pub fn wdc_deviation(w: ArrayView2<f64>, num_pairs: usize, seed: u64) -> Result<DeviationReport> {
    let (n, k) = w.dim();
    if n < k || k == 0 {
        return Err(Error::InvalidDims(format!("weight matrix {n}x{k} must have n >= k >= 1")));
    }
    let mut pairs = structured_pairs(k, seed);
    pairs.extend((0..num_pairs).map(|i| {
        let mut rng = sample_rng(seed, i);
        (linalg::random_unit(&mut rng, k), linalg::random_unit(&mut rng, k))
    }));
    let devs = pairs
        .par_iter()
        .map(|(x, y)| wdc_pair_deviation(w, x, y))
        .collect::<Result<Vec<_>>>()?;
    DeviationReport::from_samples(
        devs,
        json!({"op": "wdc", "n": n, "k": k, "num_pairs": num_pairs, "seed": seed}),
    )
}

fn latent_batch(k: usize, count: usize, seed: u64) -> Array2<f64> {
    let mut out = Array2::zeros((k, count));
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        col.assign(&linalg::gaussian_vector(&mut sample_rng(seed, j), k));
    }
    out
}

/// Range-restricted concentration probe:
/// `|⟨(A_{G(x)}ᵀ A_{G(y)} - Φ_{G(x),G(y)}) u, v⟩| / (‖u‖ ‖v‖ L)` with
/// `u = G(x₁) - G(x₂)`, `v = G(x₃) - G(x₄)`. The first tuple is the diagonal
/// case `x = y`, `x₁ = x₃`, `x₂ = x₄`.
pub fn rrcp_deviation(
    ens: &MeasurementEnsemble,
    net: &GeneratorNet,
    num_tuples: usize,
    seed: u64,
) -> Result<DeviationReport> {
    check_len("measurement columns", net.output_dim(), ens.n())?;
    if num_tuples == 0 {
        return Err(Error::InvalidConfig("num_tuples must be positive".into()));
    }
    let k = net.k();
    let mut latents = latent_batch(k, 6 * num_tuples, seed);
    {
        let first = latents.slice(s![.., 0..6]).to_owned();
        latents.column_mut(1).assign(&first.column(0));
        latents.column_mut(4).assign(&first.column(2));
        latents.column_mut(5).assign(&first.column(3));
    }
    let g = net.forward_batch(latents.view())?;
    let mut vecs = Array2::zeros((g.nrows(), 4 * num_tuples));
    for t in 0..num_tuples {
        let c = |i: usize| g.column(6 * t + i);
        vecs.column_mut(4 * t).assign(&c(0));
        vecs.column_mut(4 * t + 1).assign(&c(1));
        vecs.column_mut(4 * t + 2).assign(&(&c(2) - &c(3)));
        vecs.column_mut(4 * t + 3).assign(&(&c(4) - &c(5)));
    }
    let av = ens.matrix().dot(&vecs);
    let mut devs = Vec::with_capacity(num_tuples);
    for t in 0..num_tuples {
        let (z, w, u, v) = (
            vecs.column(4 * t),
            vecs.column(4 * t + 1),
            vecs.column(4 * t + 2),
            vecs.column(4 * t + 3),
        );
        let (nu, nv) = (linalg::norm(u), linalg::norm(v));
        if nu == 0.0 || nv == 0.0 {
            continue;
        }
        let (az, aw, au, avv) = (
            av.column(4 * t),
            av.column(4 * t + 1),
            av.column(4 * t + 2),
            av.column(4 * t + 3),
        );
        // ⟨A_zᵀ A_w u, v⟩ = ⟨sgn(Aw) ∘ Au, sgn(Az) ∘ Av⟩
        let measured: f64 = (0..az.len())
            .map(|i| crate::phaseless::sgn(aw[i]) * au[i] * crate::phaseless::sgn(az[i]) * avv[i])
            .sum();
        let ideal = phi_matrix(z, w)?.apply(u).dot(&v);
        devs.push((measured - ideal).abs() / (nu * nv * RRCP_L));
    }
    DeviationReport::from_samples(
        devs,
        json!({"op": "rrcp", "m": ens.m(), "n": ens.n(), "k": k,
               "layer_dims": net.dims().layer_dims(), "num_tuples": num_tuples,
               "L": RRCP_L, "seed": seed}),
    )
}

/// `|cos ∠(|A G(x)|, |A G(y)|) - cos φ(∠(G(x), G(y)))|` over random pairs.
/// The first pair has `y = x`.
pub fn angle_distortion_check(
    ens: &MeasurementEnsemble,
    net: &GeneratorNet,
    num_pairs: usize,
    seed: u64,
) -> Result<DeviationReport> {
    check_len("measurement columns", net.output_dim(), ens.n())?;
    if num_pairs == 0 {
        return Err(Error::InvalidConfig("num_pairs must be positive".into()));
    }
    let mut latents = latent_batch(net.k(), 2 * num_pairs, seed);
    let first = latents.column(0).to_owned();
    latents.column_mut(1).assign(&first);
    let g = net.forward_batch(latents.view())?;
    let ag = ens.matrix().dot(&g).mapv(f64::abs);
    let mut devs = Vec::with_capacity(num_pairs);
    for t in 0..num_pairs {
        let (gx, gy) = (g.column(2 * t), g.column(2 * t + 1));
        let (Some(theta_d), Some(theta_1)) = (
            linalg::angle(gx, gy),
            linalg::angle(ag.column(2 * t), ag.column(2 * t + 1)),
        ) else {
            continue;
        };
        devs.push((theta_1.cos() - varphi(theta_d)?.cos()).abs());
    }
    DeviationReport::from_samples(
        devs,
        json!({"op": "angle_distortion", "m": ens.m(), "n": ens.n(), "k": net.k(),
               "layer_dims": net.dims().layer_dims(), "num_pairs": num_pairs, "seed": seed}),
    )
}

/// `2^d ‖v_x - h_x‖ / max(‖x‖, ‖x_*‖)` for `x` on spheres of radius
/// `{0.5, 1, 2} · ‖x_*‖` (cycled).
pub fn subgradient_vs_h(inst: &ProblemInstance, num_points: usize, seed: u64) -> Result<DeviationReport> {
    if num_points == 0 {
        return Err(Error::InvalidConfig("num_points must be positive".into()));
    }
    let (k, d) = (inst.k(), inst.depth());
    let ns = linalg::norm(inst.x_star().view());
    let radii = [0.5, 1.0, 2.0];
    let mut xs = Array2::zeros((k, num_points));
    for (j, mut col) in xs.columns_mut().into_iter().enumerate() {
        let r = radii[j % radii.len()] * ns;
        col.assign(&(r * linalg::random_unit(&mut sample_rng(seed, j), k)));
    }
    let vs = inst.subgradient_batch(xs.view())?;
    let scale = 2f64.powi(d as i32);
    let devs = (0..num_points)
        .map(|j| {
            let x = xs.column(j);
            let h = h_direction(x, inst.x_star().view(), d)?;
            let diff = &vs.column(j) - &h;
            Ok(scale * linalg::norm(diff.view()) / linalg::norm(x).max(ns))
        })
        .collect::<Result<Vec<_>>>()?;
    DeviationReport::from_samples(
        devs,
        json!({"op": "subgradient_vs_h", "m": inst.ensemble().m(), "k": k,
               "layer_dims": inst.net().dims().layer_dims(),
               "noise_norm": inst.observation().noise_norm(),
               "num_points": num_points, "seed": seed}),
    )
}

/// Sign pattern with no zero entries, or `None`.
fn pattern(b: ArrayView2<f64>, v: &[f64]) -> Option<Vec<bool>> {
    b.outer_iter()
        .map(|row| {
            let s: f64 = row.iter().zip(v).map(|(a, c)| a * c).sum();
            (s != 0.0).then_some(s > 0.0)
        })
        .collect()
}

/// `2 Σ_{i<ell} C(m-1, i)`: regions cut out of an `ell`-dimensional space by
/// `m` generic hyperplanes through the origin.
pub fn region_formula(m: usize, ell: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for i in 0..ell.min(m) {
        if i > 0 {
            c = c * (m - i) as u128 / i as u128;
        }
        total += c;
    }
    2 * total
}

/// Distinct full sign patterns of `b v` for `v` on the unit circle (`ell = 2`)
/// or `v = ±1` (`ell = 1`), found by sweeping the arcs between consecutive
/// hyperplane crossings.
pub fn sweep_patterns(b: ArrayView2<f64>) -> Result<Vec<Vec<bool>>> {
    let ell = b.ncols();
    let mut found: Vec<Vec<bool>> = Vec::new();
    let mut add = |p: Option<Vec<bool>>| {
        if let Some(p) = p {
            if !found.contains(&p) {
                found.push(p);
            }
        }
    };
    match ell {
        1 => {
            add(pattern(b, &[1.0]));
            add(pattern(b, &[-1.0]));
        }
        2 => {
            let mut cuts: Vec<f64> = b
                .outer_iter()
                .filter(|r| r[0] != 0.0 || r[1] != 0.0)
                .flat_map(|r| {
                    let t = (r[1].atan2(r[0]) + PI / 2.0).rem_euclid(PI);
                    [t, t + PI]
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            if cuts.is_empty() {
                add(pattern(b, &[1.0, 0.0]));
            }
            for (i, &c) in cuts.iter().enumerate() {
                let next = if i + 1 < cuts.len() { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
                let t = 0.5 * (c + next);
                add(pattern(b, &[t.cos(), t.sin()]));
            }
        }
        _ => {
            return Err(Error::Domain(format!("exact sweep needs ell in {{1, 2}}, got {ell}")));
        }
    }
    Ok(found)
}

/// Distinct full sign patterns of `b v` over Gaussian probes `v`.
pub fn probe_patterns(b: ArrayView2<f64>, probes: usize, seed: u64) -> HashSet<Vec<bool>> {
    let mut rng = SeedStream::new(seed).child(label::PROBES).rng();
    let mut out = HashSet::new();
    let mut v = vec![0.0; b.ncols()];
    for _ in 0..probes {
        for c in v.iter_mut() {
            *c = rng.sample(rand_distr::StandardNormal);
        }
        if let Some(p) = pattern(b, &v) {
            out.insert(p);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TessellationCount {
    pub m: usize,
    pub ell: usize,
    pub count: usize,
    /// False when `count` is only a lower bound from random probes.
    pub exact: bool,
    pub region_formula: u128,
    /// `10 m^{2 ell}`.
    pub bound: f64,
}

/// Number of distinct matrices `diag(sgn(A v)) A` (patterns without zeros) for
/// `v` in the span of the first `ell` coordinate axes.
pub fn tessellation_count(a: ArrayView2<f64>, ell: usize, probes: usize, seed: u64) -> Result<TessellationCount> {
    let (m, n) = a.dim();
    if ell == 0 || ell > n {
        return Err(Error::InvalidDims(format!("subspace dimension {ell} must be in 1..={n}")));
    }
    let b = a.slice(s![.., 0..ell]);
    let (count, exact) = if ell <= 2 {
        (sweep_patterns(b)?.len(), true)
    } else {
        (probe_patterns(b, probes, seed).len(), false)
    };
    Ok(TessellationCount {
        m,
        ell,
        count,
        exact,
        region_formula: region_formula(m, ell),
        bound: 10.0 * (m as f64).powi(2 * ell as i32),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmatrixRow {
    pub rows: usize,
    pub report: DeviationReport,
    /// `√(|Ω|/m) + √(k/m)`.
    pub reference: f64,
}

/// `‖A_Ω U‖` for a random `k`-dimensional orthonormal `U` and random row sets
/// `Ω` of sizes `1, 2, 4, …, max_rows`. Row sets within a trial are nested, so
/// each trial's norms are nondecreasing in `|Ω|`.
pub fn submatrix_spectral_check(
    a: ArrayView2<f64>,
    subspace_dim: usize,
    max_rows: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<SubmatrixRow>> {
    let (m, n) = a.dim();
    if max_rows == 0 || max_rows > m {
        return Err(Error::InvalidConfig(format!("max_rows must be in 1..={m}")));
    }
    if subspace_dim == 0 || subspace_dim > n || trials == 0 {
        return Err(Error::InvalidConfig("need 1 <= subspace_dim <= n and trials >= 1".into()));
    }
    let stream = SeedStream::new(seed).child(label::PROBES);
    let g = linalg::gaussian_matrix(&mut stream.rng(), n, subspace_dim, 1.0);
    let u = linalg::orthonormal_columns(g.view(), 1e-12);
    let au = a.dot(&u);
    let mut sizes = Vec::new();
    let mut s = 1;
    while s < max_rows {
        sizes.push(s);
        s *= 2;
    }
    sizes.push(max_rows);
    let mut norms = vec![Vec::with_capacity(trials); sizes.len()];
    for t in 0..trials {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut stream.child(t as u64 + 1).rng());
        for (i, &s) in sizes.iter().enumerate() {
            let sub = au.select(Axis(0), &order[..s]);
            norms[i].push(linalg::spectral_norm(sub.view()));
        }
    }
    sizes
        .iter()
        .zip(norms)
        .map(|(&rows, samples)| {
            Ok(SubmatrixRow {
                rows,
                report: DeviationReport::from_samples(
                    samples,
                    json!({"op": "submatrix", "m": m, "n": n, "k": subspace_dim,
                           "rows": rows, "trials": trials, "seed": seed}),
                )?,
                reference: (rows as f64 / m as f64).sqrt() + (subspace_dim as f64 / m as f64).sqrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::NetworkDims;
    use crate::landscape::InstanceSpec;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn gaussian_w(n: usize, k: usize, seed: u64) -> Array2<f64> {
        linalg::gaussian_matrix(&mut SeedStream::new(seed).rng(), n, k, 1.0 / (n as f64).sqrt())
    }

    #[test]
    fn quantiles_and_ordering() {
        let r = DeviationReport::from_samples(vec![3.0, 1.0, 2.0, 4.0, 0.0], json!({})).unwrap();
        assert_eq!((r.samples, r.max_dev, r.mean_dev, r.p50), (5, 4.0, 2.0, 2.0));
        assert_abs_diff_eq!(r.p95, 3.8, epsilon = 1e-12);
        assert!(DeviationReport::from_samples(vec![], json!({})).is_err());
        assert!(DeviationReport::from_samples(vec![f64::NAN], json!({})).is_err());
    }

    #[test]
    fn report_csv_is_long_format() {
        let r = DeviationReport::from_samples(vec![1.0], json!({})).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[("a".into(), r)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("label,stat,value\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn wdc_diagonal_case_matches_half_identity() {
        let w = gaussian_w(64, 3, 1);
        let x = linalg::random_unit(&mut SeedStream::new(2).rng(), 3);
        let mut gram = Array2::<f64>::zeros((3, 3));
        for row in w.outer_iter() {
            if row.dot(&x) > 0.0 {
                for a in 0..3 {
                    for b in 0..3 {
                        gram[[a, b]] += row[a] * row[b];
                    }
                }
            }
        }
        let expected = linalg::spectral_norm((gram - Array2::<f64>::eye(3) * 0.5).view());
        assert_abs_diff_eq!(wdc_pair_deviation(w.view(), &x, &x).unwrap(), expected, epsilon = 1e-8);
    }

    #[test]
    fn wdc_is_falsifiable() {
        // Every row along e₁: the active Gram matrix is rank one.
        let mut w = Array2::zeros((200, 3));
        w.column_mut(0).fill(1.0 / (200f64).sqrt());
        let bad = wdc_deviation(w.view(), 100, 3).unwrap();
        let good = wdc_deviation(gaussian_w(2000, 3, 4).view(), 100, 3).unwrap();
        assert!(bad.p95 > 0.3, "{bad:?}");
        assert!(good.p95 < 0.1, "{good:?}");
        assert!(wdc_deviation(Array2::zeros((2, 3)).view(), 10, 0).is_err());
    }

    #[test]
    fn wdc_deviation_shrinks_with_width() {
        let p95: Vec<f64> = [64, 512, 4096]
            .iter()
            .map(|&n| wdc_deviation(gaussian_w(n, 4, 5).view(), 300, 6).unwrap().p95)
            .collect();
        assert!(p95[0] > p95[1] && p95[1] > p95[2], "{p95:?}");
    }

    #[test]
    fn wdc_invariant_under_latent_rotation() {
        // Rotating W's rows is the same as rotating every probe direction.
        let w = gaussian_w(400, 3, 7);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = array![[c, -c, 0.0], [c, c, 0.0], [0.0, 0.0, 1.0]];
        let a = wdc_deviation(w.view(), 2000, 8).unwrap();
        let b = wdc_deviation(w.dot(&rot).view(), 2000, 9).unwrap();
        for (x, y) in [(a.p50, b.p50), (a.p95, b.p95)] {
            assert!((x - y).abs() <= 0.2 * x.max(y), "{x} vs {y}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let w = gaussian_w(100, 3, 10);
        assert_eq!(wdc_deviation(w.view(), 50, 1).unwrap(), wdc_deviation(w.view(), 50, 1).unwrap());
    }

    fn net_and_ensemble(m: usize, seed: u64) -> (GeneratorNet, MeasurementEnsemble) {
        let dims = NetworkDims::new(3, vec![40, 160]).unwrap();
        let net = GeneratorNet::sample_gaussian(&dims, seed);
        (net, MeasurementEnsemble::sample(m, 160, seed + 1).unwrap())
    }

    #[test]
    fn rrcp_zero_matrix_is_phi_driven() {
        let (net, _) = net_and_ensemble(10, 11);
        let zero = MeasurementEnsemble::from_matrix(Array2::zeros((10, 160))).unwrap();
        let r = rrcp_deviation(&zero, &net, 50, 12).unwrap();
        // Only Φ remains, and ‖Φ‖ <= 1 + 2/π.
        assert!(r.max_dev <= (1.0 + 2.0 / PI) / RRCP_L + 1e-12);
        assert!(r.p50 > 0.0);
    }

    #[test]
    fn rrcp_shrinks_with_m() {
        let p95: Vec<f64> = [40, 640, 10240]
            .iter()
            .map(|&m| {
                let (net, ens) = net_and_ensemble(m, 13);
                rrcp_deviation(&ens, &net, 200, 14).unwrap().p95
            })
            .collect();
        assert!(p95[0] > p95[1] && p95[1] > p95[2], "{p95:?}");
    }

    #[test]
    fn angle_distortion_cases() {
        let (net, ens) = net_and_ensemble(4000, 15);
        let r = angle_distortion_check(&ens, &net, 200, 16).unwrap();
        assert!(r.p95 < 0.1, "{r:?}");
        let one = angle_distortion_check(&ens, &net, 1, 16).unwrap();
        assert_abs_diff_eq!(one.max_dev, 0.0, epsilon = 1e-7);
        let (net, small) = net_and_ensemble(30, 15);
        assert!(angle_distortion_check(&small, &net, 200, 16).unwrap().p95 > r.p95);
    }

    #[test]
    fn subgradient_vs_h_cases() {
        let spec = InstanceSpec { k: 3, layer_dims: vec![60, 240], m: 200, noise_ratio: 0.0, x_star_norm: 1.0 };
        let inst = ProblemInstance::sample(&spec, 17).unwrap();
        let r = subgradient_vs_h(&inst, 60, 18).unwrap();
        // ‖h‖ <= (4 + d/π) 2^{-d} max(‖x‖, ‖x_*‖) and a similar coarse bound for v.
        assert!(r.max_dev < 20.0, "{r:?}");
        assert_eq!(r.samples, 60);
    }

    #[test]
    fn region_formula_values() {
        assert_eq!(region_formula(5, 2), 10);
        assert_eq!(region_formula(7, 1), 2);
        assert_eq!(region_formula(6, 3), 2 * (1 + 5 + 10));
        assert_eq!(region_formula(2, 3), 4);
    }

    #[test]
    fn tessellation_small_cases() {
        let a = linalg::gaussian_matrix(&mut SeedStream::new(19).rng(), 5, 4, 1.0);
        let two = tessellation_count(a.view(), 2, 0, 0).unwrap();
        assert_eq!((two.count, two.exact, two.region_formula), (10, true, 10));
        let one = tessellation_count(a.view(), 1, 0, 0).unwrap();
        assert_eq!(one.count, 2);
        let three = tessellation_count(a.view(), 3, 20000, 1).unwrap();
        assert!(!three.exact);
        assert!(three.count as u128 <= region_formula(5, 3));
        assert!((three.count as f64) <= three.bound);
        assert!(tessellation_count(a.view(), 0, 0, 0).is_err());
        assert!(tessellation_count(a.view(), 5, 0, 0).is_err());
    }

    #[test]
    fn repeated_directions_merge_regions() {
        let b = array![[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        assert_eq!(sweep_patterns(b.view()).unwrap().len(), 4);
    }

    #[test]
    fn submatrix_norms() {
        let m = 400;
        let a = linalg::gaussian_matrix(&mut SeedStream::new(20).rng(), m, 50, 1.0 / (m as f64).sqrt());
        let rows = submatrix_spectral_check(a.view(), 3, m, 5, 21).unwrap();
        assert!(rows.windows(2).all(|w| w[0].report.max_dev <= w[1].report.max_dev));
        let full = rows.last().unwrap();
        assert!((full.report.p50 - 1.0).abs() < 3.0 * (3.0 / m as f64).sqrt() + 0.05, "{full:?}");
        let single = &rows[0];
        assert!(single.report.max_dev < 4.0 * (3.0 / m as f64).sqrt());
        assert!(submatrix_spectral_check(a.view(), 3, m + 1, 5, 21).is_err());
    }
}
