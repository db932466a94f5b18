//! Mass-Volume curves: empirical estimation, summaries, and the analytic
//! optimum for the isotropic Gaussian.
//!
//! The MV curve of a scorer maps a mass level `alpha` to the volume of the
//! score's superlevel set holding that mass. Empirically, the threshold is
//! the `(1-alpha)`-quantile of the observed scores and the volume is the
//! fraction of uniform reference points scoring above it, which makes the
//! curve a right-continuous step function with breakpoints at `alpha = k/n`.
//!
//! Lower curves are better: the area under the empirical curve is tied to
//! the rank-sum statistic by an exact integer identity
//! (`check_mv_ranksum_identity`), and weighted rank statistics are line
//! integrals along the curve (`w_phi_from_mv`).

use crate::error::{Error, Result};
use crate::rankstats::ScoredPair;
use crate::scoregen::ScoreGen;

/// How to interpolate between breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Right-continuous step function (empirical Monte-Carlo curves).
    EmpiricalMc,
    /// Piecewise-linear between breakpoints (sampled analytic curves).
    Analytic,
}

/// A Mass-Volume curve stored as sorted `(alpha, volume)` breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MVCurve {
    breakpoints: Vec<(f64, f64)>,
    kind: CurveKind,
}

impl MVCurve {
    /// Validate and wrap a breakpoint list: alphas strictly increasing in
    /// [0, 1], volumes finite, nonnegative, and nondecreasing.
    pub fn new(breakpoints: Vec<(f64, f64)>, kind: CurveKind) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::params("an MV curve needs at least one breakpoint"));
        }
        for pair in breakpoints.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::params(format!(
                    "breakpoint alphas must be strictly increasing: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
            if pair[1].1 < pair[0].1 {
                return Err(Error::params(format!(
                    "volumes must be nondecreasing in alpha: {} then {}",
                    pair[0].1, pair[1].1
                )));
            }
        }
        for &(a, v) in &breakpoints {
            if !(0.0..=1.0).contains(&a) || !v.is_finite() || v < 0.0 {
                return Err(Error::params(format!(
                    "invalid breakpoint (alpha={a}, volume={v})"
                )));
            }
        }
        Ok(MVCurve { breakpoints, kind })
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    /// Evaluate the curve at `alpha` in [0, 1].
    ///
    /// Step curves are right-continuous; analytic curves interpolate
    /// linearly. Outside the breakpoint span the nearest value is held.
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::domain(format!(
                "MV curves are defined on [0,1], got alpha = {alpha}"
            )));
        }
        let bps = &self.breakpoints;
        // Index of the last breakpoint with bp.alpha <= alpha.
        let pos = bps.partition_point(|&(a, _)| a <= alpha);
        if pos == 0 {
            return Ok(bps[0].1);
        }
        let (a0, v0) = bps[pos - 1];
        match self.kind {
            CurveKind::EmpiricalMc => Ok(v0),
            CurveKind::Analytic => {
                if pos == bps.len() {
                    Ok(v0)
                } else {
                    let (a1, v1) = bps[pos];
                    Ok(v0 + (v1 - v0) * (alpha - a0) / (a1 - a0))
                }
            }
        }
    }

    /// Area under the curve over (0, 1): exact rectangle sums for step
    /// curves, trapezoids for analytic ones. The curve is extended as a
    /// constant outside its breakpoint span.
    pub fn auc(&self) -> f64 {
        let bps = &self.breakpoints;
        let mut area = bps[0].1 * bps[0].0; // [0, first alpha)
        for pair in bps.windows(2) {
            let width = pair[1].0 - pair[0].0;
            area += match self.kind {
                CurveKind::EmpiricalMc => pair[0].1 * width,
                CurveKind::Analytic => 0.5 * (pair[0].1 + pair[1].1) * width,
            };
        }
        let last = bps[bps.len() - 1];
        area + last.1 * (1.0 - last.0)
    }

    /// Multiply every volume by `factor` (e.g. the measure of the bounding
    /// cube the reference sample was drawn from).
    pub fn scale_volumes(&self, factor: f64) -> Result<MVCurve> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::params(format!(
                "volume scale factor must be positive, got {factor}"
            )));
        }
        MVCurve::new(
            self.breakpoints.iter().map(|&(a, v)| (a, v * factor)).collect(),
            self.kind,
        )
    }

    /// The curve as piecewise-affine pieces covering all of [0, 1]:
    /// `(a, b, v_at_a, slope)` with volume `v_at_a + slope * (alpha - a)`
    /// on [a, b].
    fn pieces(&self) -> Vec<(f64, f64, f64, f64)> {
        let bps = &self.breakpoints;
        let mut pieces = Vec::with_capacity(bps.len() + 1);
        if bps[0].0 > 0.0 {
            pieces.push((0.0, bps[0].0, bps[0].1, 0.0));
        }
        for pair in bps.windows(2) {
            let (a0, v0) = pair[0];
            let (a1, v1) = pair[1];
            let slope = match self.kind {
                CurveKind::EmpiricalMc => 0.0,
                CurveKind::Analytic => (v1 - v0) / (a1 - a0),
            };
            pieces.push((a0, a1, v0, slope));
        }
        let (al, vl) = bps[bps.len() - 1];
        if al < 1.0 {
            pieces.push((al, 1.0, vl, 0.0));
        }
        pieces
    }
}

/// Generalized inverse of the empirical cdf of `scores` at `u` in (0, 1]:
/// the smallest t with `F_hat(t) >= u`, i.e. the ceil(u*n)-th order statistic.
pub fn empirical_cdf_inverse(scores: &[f64], u: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::params("empirical cdf of an empty score list"));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::domain(format!(
            "empirical cdf inverse is defined on (0,1], got {u}"
        )));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("scores must not contain NaN"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
    let n = sorted.len();
    let idx = ((u * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[idx - 1])
}

/// Empirical Monte-Carlo MV curve of a scored pair: at each mass level the
/// threshold is the (1-alpha)-quantile of the observed scores and the volume
/// is the fraction of reference scores at or above it.
///
/// Breakpoints sit at `alpha = j/n`, j = 0..n-1; between them the threshold
/// (hence the volume) is constant, so the step representation is exact.
pub fn mv_curve_mc(pair: &ScoredPair) -> Result<MVCurve> {
    let mut xs = pair.observed().to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
    let mut us = pair.negative().to_vec();
    us.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
    let n = xs.len();
    let m = us.len();
    // On alpha in [j/n, (j+1)/n) the quantile ceil((1-alpha)n) equals n - j,
    // so the threshold is the (n-j)-th order statistic of the observed
    // scores, walking down from the maximum as alpha grows.
    let breakpoints = (0..n)
        .map(|j| {
            let threshold = xs[n - j - 1];
            let below = us.partition_point(|&v| v < threshold);
            (j as f64 / n as f64, (m - below) as f64 / m as f64)
        })
        .collect();
    MVCurve::new(breakpoints, CurveKind::EmpiricalMc)
}

/// Exact integer check of the rank-sum / MV-area identity
/// `n*m*(1 - auc) + n(n+1)/2 = rank_sum`.
///
/// Both sides reduce to integers: `n*m*auc` is the total count of reference
/// scores at or above each observed order statistic. Ties break the identity
/// (the threshold count and the rank count disagree on equal values), so
/// tied pools are rejected.
pub fn check_mv_ranksum_identity(pair: &ScoredPair) -> Result<bool> {
    if pair.tie_count() > 0 {
        return Err(Error::Ties(
            "the rank-sum/MV identity requires distinct pooled scores".into(),
        ));
    }
    let mut us = pair.negative().to_vec();
    us.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN scores"));
    let n = pair.n() as u64;
    let m = pair.m() as u64;
    // n*m*auc = sum over observed order statistics of #{u >= x_(k)}.
    let mut above_total: u64 = 0;
    for &x in pair.observed() {
        above_total += (us.len() - us.partition_point(|&v| v < x)) as u64;
    }
    let lhs = n * m - above_total + n * (n + 1) / 2;
    Ok(lhs == pair.rank_sum())
}

/// The weighted-rank summary of an MV curve:
/// `W_phi = integral over alpha of phi(1 - p*alpha - (1-p)*MV(alpha))`,
/// with `p` the observed-sample proportion n/(n+m).
///
/// The curve is piecewise affine in alpha, so each piece maps to an exact
/// integral of `phi` between two points of [0, 1]; no quadrature error
/// beyond the closed-form antiderivatives of `phi` itself.
pub fn w_phi_from_mv(phi: &ScoreGen, curve: &MVCurve, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "sample proportion p must lie in (0,1), got {p}"
        )));
    }
    if curve.breakpoints.iter().any(|&(_, v)| v > 1.0) {
        return Err(Error::domain(
            "w_phi_from_mv needs volumes in [0,1] (mass of the uniform \
             reference law); rescale the curve first",
        ));
    }
    let mut total = 0.0;
    for (a, b, v_a, slope) in curve.pieces() {
        // g(alpha) = 1 - p*alpha - (1-p)*v(alpha) is affine and decreasing
        // with rate c = p + (1-p)*slope > 0; substituting u = g(alpha) turns
        // the piece into an integral of phi over [g(b), g(a)].
        let c = p + (1.0 - p) * slope;
        let g = |alpha: f64| {
            (1.0 - p * alpha - (1.0 - p) * (v_a + slope * (alpha - a))).clamp(0.0, 1.0)
        };
        let (lo, hi) = (g(b), g(a));
        total += phi.integral(lo.min(hi), hi.max(lo))? / c;
    }
    Ok(total)
}

/// The optimal MV curve of N(0, variance_scale * I_2): the Lebesgue measure
/// of the centered ball holding mass `alpha`,
/// `2 * pi * variance_scale * ln(1/(1-alpha))`.
///
/// Only the planar case is implemented; other dimensions are rejected.
pub fn mv_star_gaussian(alpha: f64, variance_scale: f64, d: usize) -> Result<f64> {
    if d != 2 {
        return Err(Error::UnsupportedDimension {
            got: d,
            context: "the analytic Gaussian MV curve".into(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "mv_star_gaussian is defined on alpha in (0,1), got {alpha}"
        )));
    }
    if !(variance_scale > 0.0 && variance_scale.is_finite()) {
        return Err(Error::params(format!(
            "variance scale must be positive, got {variance_scale}"
        )));
    }
    // ||X||^2 / variance is chi-square(2): mass alpha sits in the ball of
    // squared radius -2 * variance * ln(1 - alpha).
    Ok(std::f64::consts::TAU * variance_scale * (-(-alpha).ln_1p()))
}

/// [`mv_star_gaussian`] sampled on a uniform grid of `grid_size` interior
/// alphas, as a piecewise-linear curve.
pub fn mv_star_gaussian_curve(variance_scale: f64, d: usize, grid_size: usize) -> Result<MVCurve> {
    if grid_size < 2 {
        return Err(Error::params("star-curve grid needs at least 2 points"));
    }
    let breakpoints = (0..grid_size)
        .map(|i| {
            let alpha = (i as f64 + 0.5) / grid_size as f64;
            mv_star_gaussian(alpha, variance_scale, d).map(|v| (alpha, v))
        })
        .collect::<Result<Vec<_>>>()?;
    MVCurve::new(breakpoints, CurveKind::Analytic)
}

/// L1 distance between a curve and the optimal one: since MV* lower-bounds
/// every curve, this is the difference of areas, clamped at zero (Monte-Carlo
/// noise can push the estimate slightly below the optimum).
pub fn d1_distance(curve: &MVCurve, star: &MVCurve) -> f64 {
    let diff = curve.auc() - star.auc();
    if diff < 0.0 {
        log::warn!(
            "MV curve area {} fell below the optimal area {} (MC noise); \
             clamping the d1 distance to 0",
            curve.auc(),
            star.auc()
        );
        return 0.0;
    }
    diff
}
