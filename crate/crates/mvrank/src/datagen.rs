//! Seeded samplers for the synthetic data processes.
//!
//! Three distributions cover everything the experiments need: an isotropic
//! Gaussian for the "normal" class, the uniform law on `[0,1]^d` as the
//! volume-measuring reference, and a radial law (uniform direction on the
//! unit sphere, Beta-distributed radius) for synthetic outliers, which get
//! dilated just past the radius of the observed normal cloud.
//!
//! Everything is deterministic given a seed; parallel repetitions should
//! derive their seeds through [`crate::rng::split_seed`].

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, standard_normal, SeededRng};
use rand::Rng;

/// Label value for points of the observed ("normal") class.
pub const LABEL_NORMAL: u8 = 1;
/// Label value for synthetic outliers / negatives.
pub const LABEL_OUTLIER: u8 = 0;

/// A set of points in R^d, optionally carrying binary class labels
/// (1 = normal, 0 = synthetic outlier).
///
/// Points are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    coords: Vec<f64>,
    dim: usize,
    labels: Option<Vec<u8>>,
}

impl Sample {
    /// Build a sample from a flat row-major coordinate buffer.
    pub fn from_flat(coords: Vec<f64>, dim: usize, labels: Option<Vec<u8>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::params("sample dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::params(format!(
                "coordinate buffer length {} is not a multiple of dim {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("sample points must be finite"));
        }
        let n = coords.len() / dim;
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::params(format!(
                    "label count {} does not match point count {n}",
                    l.len()
                )));
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::params("labels must be 0 or 1"));
            }
        }
        Ok(Sample { coords, dim, labels })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The i-th point as a coordinate slice.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Flat row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean norm of the i-th point.
    pub fn norm(&self, i: usize) -> f64 {
        self.point(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Drop labels, keeping the points.
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// Per-coordinate bounding box as (min, max) pairs.
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>> {
        if self.is_empty() {
            return Err(Error::params("bounding box of an empty sample"));
        }
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.points() {
            for (b, &v) in bounds.iter_mut().zip(p) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        Ok(bounds)
    }
}

/// Parameters of the radial law: direction uniform on the unit sphere,
/// radius distributed as Beta(alpha, beta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadLawParams {
    pub alpha: f64,
    pub beta: f64,
}

impl RadLawParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::params(format!(
                "radial law needs alpha > 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(RadLawParams { alpha, beta })
    }
}

fn check_counts(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::params("sample size must be at least 1"));
    }
    if d == 0 {
        return Err(Error::params("dimension must be at least 1"));
    }
    Ok(())
}

/// `n` i.i.d. draws from N(0, variance_scale * I_d).
pub fn sample_gaussian(n: usize, d: usize, variance_scale: f64, seed: u64) -> Result<Sample> {
    check_counts(n, d)?;
    if !(variance_scale > 0.0 && variance_scale.is_finite()) {
        return Err(Error::params(format!(
            "variance scale must be positive, got {variance_scale}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let sd = variance_scale.sqrt();
    let coords = (0..n * d).map(|_| sd * standard_normal(&mut rng)).collect();
    Sample::from_flat(coords, d, None)
}

/// `m` i.i.d. uniform points in [0,1]^d.
pub fn sample_uniform_cube(m: usize, d: usize, seed: u64) -> Result<Sample> {
    check_counts(m, d)?;
    let mut rng = rng_from_seed(seed);
    let coords = (0..m * d).map(|_| rng.gen::<f64>()).collect();
    Sample::from_flat(coords, d, None)
}

/// `m` i.i.d. draws v * r with v uniform on the unit sphere S^{d-1} and
/// r ~ Beta(alpha, beta); every point has norm at most 1.
pub fn sample_radlaw(m: usize, d: usize, params: RadLawParams, seed: u64) -> Result<Sample> {
    check_counts(m, d)?;
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(m * d);
    let mut dir = vec![0.0f64; d];
    for _ in 0..m {
        // Direction: normalize a standard Gaussian vector (rotation-invariant,
        // so the result is uniform on the sphere). A vector of norm ~0 is
        // astronomically unlikely but would misbehave, so redraw.
        loop {
            for v in dir.iter_mut() {
                *v = standard_normal(&mut rng);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-100 {
                for v in dir.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
        let r = sample_beta(params.alpha, params.beta, &mut rng);
        coords.extend(dir.iter().map(|v| v * r));
    }
    Sample::from_flat(coords, d, None)
}

/// Beta(alpha, beta) via the gamma-ratio construction G1/(G1+G2).
fn sample_beta(alpha: f64, beta: f64, rng: &mut SeededRng) -> f64 {
    let g1 = sample_gamma(alpha, rng);
    let g2 = sample_gamma(beta, rng);
    (g1 / (g1 + g2)).clamp(0.0, 1.0)
}

/// Gamma(shape, 1) with the Marsaglia-Tsang squeeze; shapes below 1 go
/// through the Gamma(shape + 1) boost.
fn sample_gamma(shape: f64, rng: &mut SeededRng) -> f64 {
    if shape < 1.0 {
        // G(a) = G(a+1) * U^(1/a)
        let boost = sample_gamma(shape + 1.0, rng);
        let u: f64 = crate::rng::uniform_open_right(rng);
        return boost * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v3 = v * v * v;
        let u: f64 = crate::rng::uniform_open_right(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v3;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v3 + v3.ln()) {
            return d * v3;
        }
    }
}

/// Maximum Euclidean norm over the sample's points.
pub fn compute_rad(sample: &Sample) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::params("rad of an empty sample"));
    }
    Ok((0..sample.len())
        .map(|i| sample.norm(i))
        .fold(0.0, f64::max))
}

/// Scale every point coordinate-wise by `factor`, preserving labels.
pub fn dilate(sample: &Sample, factor: f64) -> Result<Sample> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::params(format!(
            "dilation factor must be positive, got {factor}"
        )));
    }
    Sample::from_flat(
        sample.coords.iter().map(|v| v * factor).collect(),
        sample.dim,
        sample.labels.clone(),
    )
}

/// Concatenate normals then outliers into one labeled training sample
/// (labels 1 for the normals, 0 for the outliers, in that order).
pub fn make_train_set(normals: &Sample, outliers: &Sample) -> Result<Sample> {
    if normals.dim != outliers.dim {
        return Err(Error::params(format!(
            "dimension mismatch: normals are {}-d, outliers {}-d",
            normals.dim, outliers.dim
        )));
    }
    let mut coords = Vec::with_capacity(normals.coords.len() + outliers.coords.len());
    coords.extend_from_slice(&normals.coords);
    coords.extend_from_slice(&outliers.coords);
    let mut labels = vec![LABEL_NORMAL; normals.len()];
    labels.extend(std::iter::repeat_n(LABEL_OUTLIER, outliers.len()));
    Sample::from_flat(coords, normals.dim, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_variance_matches() {
        let s = sample_gaussian(1000, 2, 0.1, 17).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = s.points().map(|p| p[c]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!((var - 0.1).abs() < 0.02, "coordinate {c}: var = {var}");
        }
    }

    #[test]
    fn gaussian_degenerate_variance_collapses_to_origin() {
        let s = sample_gaussian(1, 2, 1e-12, 3).unwrap();
        assert!(s.norm(0) < 1e-5, "norm = {}", s.norm(0));
    }

    #[test]
    fn gaussian_mean_square_norm() {
        // E||X||^2 = d * variance for N(0, var*I_d). For a chi-square-like
        // sum, var(||X||^2) = 2 d var^2, so the MC std error at 100k draws
        // is var * sqrt(2d/100000) ~ 6.3e-4 at var=0.1, d=2.
        let n = 100_000;
        let s = sample_gaussian(n, 2, 0.1, 99).unwrap();
        let mean_sq = (0..n).map(|i| s.norm(i).powi(2)).sum::<f64>() / n as f64;
        let se = 0.1 * (4.0f64 / n as f64).sqrt();
        assert!(
            (mean_sq - 0.2).abs() < 3.0 * se,
            "mean ||X||^2 = {mean_sq}, want 0.2 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn uniform_cube_range_and_mean() {
        let s = sample_uniform_cube(500, 2, 5).unwrap();
        assert!(s.coords().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let one = sample_uniform_cube(1, 1, 5).unwrap();
        assert!((0.0..=1.0).contains(&one.point(0)[0]));

        let n = 100_000;
        let big = sample_uniform_cube(n, 2, 11).unwrap();
        let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        for c in 0..2 {
            let mean = big.points().map(|p| p[c]).sum::<f64>() / n as f64;
            assert!((mean - 0.5).abs() < 3.0 * se, "coordinate {c}: mean = {mean}");
        }
    }

    #[test]
    fn radlaw_norm_bound_and_beta_moments() {
        let params = RadLawParams::new(3.0, 1.0).unwrap();
        let n = 100_000;
        let s = sample_radlaw(n, 2, params, 23).unwrap();
        let radii: Vec<f64> = (0..n).map(|i| s.norm(i)).collect();
        assert!(radii.iter().all(|&r| (0.0..=1.0).contains(&r)));

        // Beta(3,1): mean 3/4, variance 3/80, fourth central moment ~ 0.004353.
        let mean = radii.iter().sum::<f64>() / n as f64;
        let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
        let mean_se = (3.0f64 / 80.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 0.75).abs() < 4.0 * mean_se, "mean radius = {mean}");
        // std error of the sample variance: sqrt((mu4 - mu2^2)/n)
        let mu2 = 3.0 / 80.0;
        let mu4 = 0.004_352_678_571_428_571;
        let var_se = ((mu4 - mu2 * mu2) / n as f64).sqrt();
        assert!((var - mu2).abs() < 4.0 * var_se, "radius variance = {var}");
    }

    #[test]
    fn radlaw_uniform_case_is_uniform_radius() {
        // Beta(1,1) is Uniform(0,1); in d=1 the point is +-r.
        let params = RadLawParams::new(1.0, 1.0).unwrap();
        let n = 100_000;
        let s = sample_radlaw(n, 1, params, 29).unwrap();
        let mean_abs = (0..n).map(|i| s.point(i)[0].abs()).sum::<f64>() / n as f64;
        let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean_abs - 0.5).abs() < 4.0 * se, "mean |x| = {mean_abs}");
    }

    #[test]
    fn radlaw_angles_pass_chi_square_uniformity() {
        let params = RadLawParams::new(3.0, 1.0).unwrap();
        let n = 100_000;
        let s = sample_radlaw(n, 2, params, 31).unwrap();
        let bins = 16usize;
        let mut counts = vec![0u64; bins];
        for p in s.points() {
            let angle = p[1].atan2(p[0]); // (-pi, pi]
            let frac = (angle + std::f64::consts::PI) / std::f64::consts::TAU;
            let b = ((frac * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square(15) critical value at p = 0.001
        assert!(chi2 < 37.697_298_218_353_83, "chi2 = {chi2}");
    }

    #[test]
    fn rad_examples() {
        let tri = Sample::from_flat(vec![0.0, 0.0, 3.0, 4.0], 2, None).unwrap();
        assert_eq!(compute_rad(&tri).unwrap(), 5.0);
        let origin = Sample::from_flat(vec![0.0, 0.0], 2, None).unwrap();
        assert_eq!(compute_rad(&origin).unwrap(), 0.0);
    }

    #[test]
    fn rad_of_gaussian_cloud_lands_in_expected_band() {
        // max of 1000 Rayleigh(sqrt(0.1)) draws falls in [1.0, 1.6] with
        // probability ~0.996; check a batch of seeded draws.
        let mut hits = 0;
        let runs = 100;
        for seed in 0..runs {
            let s = sample_gaussian(1000, 2, 0.1, 1000 + seed).unwrap();
            let rad = compute_rad(&s).unwrap();
            if (1.0..=1.6).contains(&rad) {
                hits += 1;
            }
        }
        // Binomial(100, 0.996): 97+ hits with overwhelming probability.
        assert!(hits >= 97, "only {hits}/{runs} rad values in [1.0, 1.6]");
    }

    #[test]
    fn dilate_examples() {
        let s = Sample::from_flat(vec![0.5, 0.5], 2, Some(vec![1])).unwrap();
        let doubled = dilate(&s, 2.0).unwrap();
        assert_eq!(doubled.point(0), &[1.0, 1.0]);
        assert_eq!(doubled.labels(), Some(&[1u8][..]));
        assert_eq!(dilate(&s, 1.0).unwrap(), s);

        let params = RadLawParams::new(3.0, 1.0).unwrap();
        let cloud = sample_radlaw(500, 2, params, 7).unwrap();
        let out = dilate(&cloud, 1.21).unwrap();
        assert!((0..out.len()).all(|i| out.norm(i) <= 1.21 + 1e-12));
    }

    #[test]
    fn train_set_concatenates_with_labels() {
        let normals = sample_gaussian(10, 2, 0.1, 1).unwrap();
        let outliers = sample_uniform_cube(4, 2, 2).unwrap();
        let train = make_train_set(&normals, &outliers).unwrap();
        assert_eq!(train.len(), 14);
        let labels = train.labels().unwrap();
        assert!(labels[..10].iter().all(|&l| l == LABEL_NORMAL));
        assert!(labels[10..].iter().all(|&l| l == LABEL_OUTLIER));
        assert_eq!(labels.iter().map(|&l| l as usize).sum::<usize>(), 10);
        assert_eq!(train.point(0), normals.point(0));
        assert_eq!(train.point(10), outliers.point(0));

        let mismatched = sample_uniform_cube(3, 3, 3).unwrap();
        assert!(make_train_set(&normals, &mismatched).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = sample_radlaw(50, 2, RadLawParams::new(2.0, 1.0).unwrap(), 77).unwrap();
        let b = sample_radlaw(50, 2, RadLawParams::new(2.0, 1.0).unwrap(), 77).unwrap();
        assert_eq!(a, b);
        let c = sample_radlaw(50, 2, RadLawParams::new(2.0, 1.0).unwrap(), 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn parameter_validation() {
        assert!(sample_gaussian(0, 2, 0.1, 1).is_err());
        assert!(sample_gaussian(5, 0, 0.1, 1).is_err());
        assert!(sample_gaussian(5, 2, 0.0, 1).is_err());
        assert!(RadLawParams::new(0.0, 1.0).is_err());
        assert!(RadLawParams::new(1.0, -2.0).is_err());
        assert!(dilate(&sample_uniform_cube(1, 1, 1).unwrap(), 0.0).is_err());
        let empty = Sample::from_flat(vec![], 2, None).unwrap();
        assert!(compute_rad(&empty).is_err());
    }
}
