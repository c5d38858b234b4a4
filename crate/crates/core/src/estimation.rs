//! Monte Carlo summaries, weighted polynomial expansion fits, normality
//! checks and exponential tail-decay probes.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub stderr: f64,
    pub ci99_low: f64,
    pub ci99_high: f64,
}

impl MonteCarloSummary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn summarize(samples: &[f64]) -> Result<MonteCarloSummary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "summary needs at least 2 samples, got {n}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let stderr = (variance / n as f64).sqrt();
    Ok(MonteCarloSummary {
        count: n,
        mean,
        variance,
        stderr,
        ci99_low: mean - Z_99 * stderr,
        ci99_high: mean + Z_99 * stderr,
    })
}

/// Run `replicas` independent replicas on the current rayon pool and return
/// their results in replica order. The first failing replica's error wins.
pub fn replicate<T, F>(replicas: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..replicas as u64).into_par_iter().map(f).collect()
}

/// `|a - b| <= k * sqrt(se_a² + se_b²)`.
pub fn within_joint_stderr(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * (se_a * se_a + se_b * se_b).sqrt()
}

/// Sign attached to the boundary terms of an expansion.
///
/// `Minus` reads coefficients as `lead·s^d − Σ τ_i s^{d−i}` (largest component,
/// largest open cluster); `Plus` as `lead·s^d + Σ τ_i s^{d−i}` (cluster count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus" | "-" => Ok(Sign::Minus),
            "plus" | "+" => Ok(Sign::Plus),
            other => Err(Error::param("sign", format!("expected minus or plus, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub side: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    /// Monomial degrees, highest first (`d, d−1, …, 0`).
    pub degrees: Vec<u32>,
    /// Raw coefficients matching `degrees`.
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Weighted residual sum of squares (chi-square).
    pub rss: f64,
    pub r_squared: f64,
    pub dof: usize,
    pub sign: Sign,
    /// Coefficient of `s^d`.
    pub leading: f64,
    pub leading_stderr: f64,
    /// `tau[i-1] = sign · coefficient of s^{d−i}` for `i = 1..=d`.
    pub tau: Vec<f64>,
    pub tau_stderr: Vec<f64>,
}

impl ExpansionFit {
    pub fn reduced_chi_square(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.rss / self.dof as f64
        }
    }

    /// 99% normal interval for `τ_i` (1-based).
    pub fn tau_ci99(&self, i: usize) -> (f64, f64) {
        let (t, se) = (self.tau[i - 1], self.tau_stderr[i - 1]);
        (t - Z_99 * se, t + Z_99 * se)
    }

    /// Evaluate the fitted polynomial.
    pub fn predict(&self, side: f64) -> f64 {
        self.degrees
            .iter()
            .zip(&self.coefficients)
            .map(|(&k, &c)| c * side.powi(k as i32))
            .sum()
    }
}

/// Weighted least-squares fit of `Σ_{k=0}^{d} a_k s^k` with weights
/// `1/stderr²`.
///
/// Columns use `(s/s_max)^k` internally and are mapped back, so sides up to a
/// few hundred do not degrade the Vandermonde conditioning.
pub fn fit_expansion(points: &[FitPoint], degree: usize, sign: Sign) -> Result<ExpansionFit> {
    let n_coef = degree + 1;
    if points.len() < n_coef + 1 {
        return Err(Error::InsufficientData(format!(
            "degree {degree} expansion needs at least {} points, got {}",
            n_coef + 1,
            points.len()
        )));
    }
    for p in points {
        if !(p.stderr > 0.0) || !p.stderr.is_finite() {
            return Err(Error::param("stderr", format!("need stderr > 0 at side {}", p.side)));
        }
        if !p.side.is_finite() || !p.mean.is_finite() {
            return Err(Error::param("points", "non-finite side or mean"));
        }
    }
    let mut sides: Vec<f64> = points.iter().map(|p| p.side).collect();
    sides.sort_by(f64::total_cmp);
    if sides.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("duplicate side values make the fit rank deficient".into()));
    }
    let scale = sides.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("all sides are zero".into()));
    }

    let degrees: Vec<u32> = (0..=degree as u32).rev().collect();
    let n = points.len();
    let design = DMatrix::from_fn(n, n_coef, |i, j| {
        let t = points[i].side / scale;
        t.powi(degrees[j] as i32) / points[i].stderr
    });
    let rhs = DVector::from_fn(n, |i, _| points[i].mean / points[i].stderr);

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-13) {
        return Err(Error::Degenerate(format!(
            "design matrix is rank deficient (singular values {smin:e} / {smax:e})"
        )));
    }
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let inv_sq = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let cov_scaled = v_t.transpose() * inv_sq * v_t;

    let unscale: Vec<f64> = degrees.iter().map(|&k| scale.powi(k as i32)).collect();
    let coefficients: Vec<f64> = (0..n_coef).map(|j| scaled[j] / unscale[j]).collect();
    let covariance: Vec<Vec<f64>> = (0..n_coef)
        .map(|i| {
            (0..n_coef)
                .map(|j| {
                    let c = 0.5 * (cov_scaled[(i, j)] + cov_scaled[(j, i)]);
                    c / (unscale[i] * unscale[j])
                })
                .collect()
        })
        .collect();

    let residual = &design * &scaled - &rhs;
    let rss = residual.norm_squared();
    let w_sum: f64 = points.iter().map(|p| p.stderr.powi(-2)).sum();
    let y_bar = points.iter().map(|p| p.mean * p.stderr.powi(-2)).sum::<f64>() / w_sum;
    let tss: f64 = points
        .iter()
        .map(|p| ((p.mean - y_bar) / p.stderr).powi(2))
        .sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let f = sign.factor();
    let tau = (1..=degree).map(|i| f * coefficients[i]).collect();
    let tau_stderr = (1..=degree).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    Ok(ExpansionFit {
        leading: coefficients[0],
        leading_stderr: covariance[0][0].max(0.0).sqrt(),
        degrees,
        coefficients,
        covariance,
        rss,
        r_squared,
        dof: n - n_coef,
        sign,
        tau,
        tau_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    /// Kolmogorov–Smirnov distance of the standardized samples to N(0, 1).
    pub ks_distance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub side: f64,
    pub exponent: f64,
    /// `sd / side^exponent`.
    pub sigma_hat: f64,
}

pub const MIN_CLT_SAMPLES: usize = 500;

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// KS distance between the empirical distribution of `values` and `cdf`.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Standardize samples taken at a fixed side and compare against N(0, 1).
pub fn clt_check(samples: &[f64], side: f64, exponent: f64) -> Result<NormalityReport> {
    let n = samples.len();
    if n < MIN_CLT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "normality check needs at least {MIN_CLT_SAMPLES} samples, got {n}"
        )));
    }
    let summary = summarize(samples)?;
    let sd = summary.sd();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let z: Vec<f64> = samples.iter().map(|x| (x - summary.mean) / sd).collect();
    let nf = n as f64;
    let m2 = z.iter().map(|v| v * v).sum::<f64>() / nf;
    let m3 = z.iter().map(|v| v.powi(3)).sum::<f64>() / nf;
    let m4 = z.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
    Ok(NormalityReport {
        count: n,
        mean: summary.mean,
        sd,
        ks_distance: ks_distance(&z, standard_normal_cdf),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        side,
        exponent,
        sigma_hat: sd / side.powf(exponent),
    })
}

/// Empirical survival `P̂[X >= t]` at each threshold.
pub fn survival_curve(values: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| (t, values.iter().filter(|&&v| v >= t).count() as f64 / n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Negated slope of `ln P̂` against the threshold.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub poor_fit: bool,
}

/// R² below which a tail fit is flagged.
pub const TAIL_FIT_MIN_R2: f64 = 0.9;

/// Least-squares slope of `ln P̂` vs `n` over the points with `P̂ > 0`.
pub fn tail_decay_rate(survival: &[(f64, f64)]) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = survival
        .iter()
        .filter(|(n, p)| *p > 0.0 && p.is_finite() && n.is_finite())
        .map(|&(n, p)| (n, p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "tail fit needs at least 3 points with positive probability, got {}",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let x_bar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let y_bar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - x_bar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all thresholds coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - x_bar) * (p.1 - y_bar)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - y_bar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    Ok(TailFit {
        rate: -slope,
        intercept,
        r_squared,
        points_used: pts.len(),
        poor_fit: r_squared < TAIL_FIT_MIN_R2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::derive_substream;

    #[test]
    fn summary_small_cases() {
        let s = summarize(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.stderr), (1.0, 0.0, 0.0));
        let s = summarize(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.variance, s.stderr), (1.0, 2.0, 1.0));
        assert!((s.ci99_high - (1.0 + Z_99)).abs() < 1e-15);
        assert!(summarize(&[3.0]).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summary_of_uniforms() {
        let mut rng = derive_substream(42, b"uniform-moments", 0);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.uniform()).collect();
        let s = summarize(&xs).unwrap();
        assert!((s.mean - 0.5).abs() < 0.005);
        assert!((s.variance / (1.0 / 12.0) - 1.0).abs() < 0.1);
    }

    #[test]
    fn exact_quadratic_recovery() {
        let pts: Vec<FitPoint> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&s: &f64| FitPoint {
                side: s,
                mean: 2.0 * s * s - 3.0 * s + 1.0,
                stderr: 1.0,
            })
            .collect();
        let fit = fit_expansion(&pts, 2, Sign::Minus).unwrap();
        let want = [2.0, -3.0, 1.0];
        for (c, w) in fit.coefficients.iter().zip(want) {
            assert!((c - w).abs() < 1e-9 * w.abs().max(1.0), "{c} vs {w}");
        }
        assert_eq!(fit.degrees, vec![2, 1, 0]);
        assert!(fit.rss < 1e-16);
        assert_eq!(fit.leading, fit.coefficients[0]);
        // minus convention: τ₁ = +3, τ₂ = −1
        assert!((fit.tau[0] - 3.0).abs() < 1e-9);
        assert!((fit.tau[1] + 1.0).abs() < 1e-9);
        let plus = fit_expansion(&pts, 2, Sign::Plus).unwrap();
        assert!((plus.tau[0] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let p = |s: f64| FitPoint { side: s, mean: s, stderr: 1.0 };
        assert!(matches!(
            fit_expansion(&[p(1.0), p(2.0), p(3.0)], 2, Sign::Minus),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_expansion(&[p(1.0), p(2.0), p(2.0), p(3.0)], 2, Sign::Minus),
            Err(Error::Degenerate(_))
        ));
        let mut bad = vec![p(1.0), p(2.0), p(3.0), p(4.0)];
        bad[1].stderr = 0.0;
        assert!(fit_expansion(&bad, 2, Sign::Minus).is_err());
    }

    #[test]
    fn fit_covariance_matches_closed_form_for_a_line() {
        // Unweighted straight line: var(slope) = 1/Sxx, var(intercept) = Σx²/(n Sxx)
        let xs = [1.0, 2.0, 4.0, 7.0];
        let pts: Vec<FitPoint> = xs
            .iter()
            .map(|&x| FitPoint { side: x, mean: 0.5 * x + 2.0, stderr: 1.0 })
            .collect();
        let fit = fit_expansion(&pts, 1, Sign::Plus).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
        assert!((fit.covariance[0][0] - 1.0 / sxx).abs() < 1e-12);
        assert!((fit.covariance[1][1] - sum_sq / (n * sxx)).abs() < 1e-12);
        assert!((fit.covariance[0][1] + mean / sxx).abs() < 1e-12);
    }

    #[test]
    fn clt_on_normal_draws() {
        let mut rng = derive_substream(9, b"normal", 0);
        let z: Vec<f64> = (0..10_000)
            .map(|_| {
                let (u1, u2) = (1.0 - rng.uniform(), rng.uniform());
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let r = clt_check(&z, 4.0, 1.0).unwrap();
        assert!(r.ks_distance < 0.02, "{}", r.ks_distance);
        assert!(r.skewness.abs() < 0.1 && r.excess_kurtosis.abs() < 0.2);
        assert!((r.sigma_hat - r.sd / 4.0).abs() < 1e-15);
    }

    #[test]
    fn clt_rejects_degenerate() {
        assert!(matches!(clt_check(&vec![3.0; 600], 1.0, 1.0), Err(Error::Degenerate(_))));
        assert!(clt_check(&[1.0, 2.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn tail_rates() {
        let geo: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64, 0.5f64.powi(n))).collect();
        let fit = tail_decay_rate(&geo).unwrap();
        assert!((fit.rate - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12 && !fit.poor_fit);

        let flat: Vec<(f64, f64)> = (1..=5).map(|n| (n as f64, 0.3)).collect();
        let fit = tail_decay_rate(&flat).unwrap();
        assert_eq!(fit.rate, 0.0);
        assert!(fit.poor_fit);

        assert!(tail_decay_rate(&[(1.0, 0.5), (2.0, 0.0), (3.0, 0.1)]).is_err());
    }

    #[test]
    fn survival_counts_inclusive() {
        let s = survival_curve(&[0.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_eq!(s, vec![(1.0, 0.75), (2.0, 0.5), (3.0, 0.0)]);
    }
}
