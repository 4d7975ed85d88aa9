//! Exact sampling of fractional Brownian motion on the dyadic grid.
//!
//! The sampler draws fractional Gaussian noise by circulant embedding
//! (Davies-Harte), which realizes the exact finite-dimensional
//! distribution in O(N log N). A dense symmetric factorization is kept
//! as a fallback and correctness oracle at small orders.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::rng::StreamRng;

/// Largest grid order the sampler accepts (2^22 + 1 grid points).
pub const MAX_PATH_ORDER: u32 = 22;

/// Largest order for the dense-factorization fallback.
pub const MAX_DENSE_ORDER: u32 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum FbmError {
    #[error("hurst index {0} must lie in (0, 1)")]
    InvalidHurst(f64),
    #[error("path order {0} exceeds the cap {MAX_PATH_ORDER}")]
    OrderTooLarge(u32),
    #[error("path order must be at least {min}, got {got}")]
    OrderTooSmall { min: u32, got: u32 },
    #[error("circulant embedding spectrum negative beyond tolerance at order {0}")]
    EmbeddingFailed(u32),
    #[error("value stream has wrong length or bad entries")]
    MalformedValues,
}

/// A sampled path of fBm on the grid `{k * 2^-order : 0 <= k <= 2^order}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    hurst: f64,
    order: u32,
    seed: u64,
    values: Vec<f64>,
}

/// `E(B(t)B(s)) = (|t|^2a + |s|^2a - |t-s|^2a) / 2`.
pub fn covariance(alpha: f64, s: f64, t: f64) -> Result<f64, FbmError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FbmError::InvalidHurst(alpha));
    }
    let two_a = 2.0 * alpha;
    Ok(0.5 * (t.abs().powf(two_a) + s.abs().powf(two_a) - (t - s).abs().powf(two_a)))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
fn fgn_autocov(alpha: f64, k: u64) -> f64 {
    let two_a = 2.0 * alpha;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(two_a) - 2.0 * k.powf(two_a) + (k - 1.0).abs().powf(two_a))
}

/// Sample an fBm path on the dyadic grid of the given order.
///
/// Identical (alpha, order, seed) reproduces the path bit-for-bit on a
/// fixed platform; path ensembles should vary the seed per path.
pub fn sample_path(alpha: f64, order: u32, seed: u64) -> Result<FbmPath, FbmError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(FbmError::InvalidHurst(alpha));
    }
    if order > MAX_PATH_ORDER {
        return Err(FbmError::OrderTooLarge(order));
    }
    let n = 1usize << order;
    let mut rng = StreamRng::new(seed, 0);
    let fgn = match circulant_fgn(alpha, n, &mut rng) {
        Ok(noise) => noise,
        Err(_) if order <= MAX_DENSE_ORDER => {
            return dense_path(alpha, order, seed);
        }
        Err(e) => return Err(e),
    };
    let scale = (-(alpha * order as f64)).exp2();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for x in fgn {
        acc += x * scale;
        values.push(acc);
    }
    Ok(FbmPath {
        hurst: alpha,
        order,
        seed,
        values,
    })
}

/// Davies-Harte: embed the fGn covariance in a circulant of size 2N and
/// synthesize the noise from its spectrum.
fn circulant_fgn(alpha: f64, n: usize, rng: &mut StreamRng) -> Result<Vec<f64>, FbmError> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    for k in 0..=n {
        row[k].re = fgn_autocov(alpha, k as u64);
    }
    for k in 1..n {
        row[m - k].re = row[k].re;
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let lambda: Vec<f64> = row.iter().map(|c| c.re).collect();
    let max = lambda.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * max.max(1.0);
    if lambda.iter().any(|&l| l < -tol) {
        return Err(FbmError::EmbeddingFailed(n.trailing_zeros()));
    }

    let mut w: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    let mf = m as f64;
    w[0] = Complex::new((lambda[0].max(0.0) / mf).sqrt() * rng.standard_normal(), 0.0);
    for k in 1..n {
        let s = (lambda[k].max(0.0) / (2.0 * mf)).sqrt();
        let re = s * rng.standard_normal();
        let im = s * rng.standard_normal();
        w[k] = Complex::new(re, im);
        w[m - k] = Complex::new(re, -im);
    }
    w[n] = Complex::new((lambda[n].max(0.0) / mf).sqrt() * rng.standard_normal(), 0.0);

    fft.process(&mut w);
    Ok(w[..n].iter().map(|c| c.re).collect())
}

/// Dense route: factor the grid covariance matrix and push a normal
/// vector through it. Cubic cost, so capped at MAX_DENSE_ORDER.
fn dense_path(alpha: f64, order: u32, seed: u64) -> Result<FbmPath, FbmError> {
    let n = 1usize << order;
    let step = (-(order as f64)).exp2();
    let mut cov = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let t = (i + 1) as f64 * step;
            let s = (j + 1) as f64 * step;
            cov[i * n + j] = covariance(alpha, s, t)?;
        }
    }
    let chol = cholesky(&mut cov, n)?;
    let mut rng = StreamRng::new(seed, 0);
    let z: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let mut values = vec![0.0f64; n + 1];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += chol[i * n + j] * z[j];
        }
        values[i + 1] = acc;
    }
    Ok(FbmPath {
        hurst: alpha,
        order,
        seed,
        values,
    })
}

/// In-place lower Cholesky factor; the grid covariance is strictly
/// positive definite so failure means a caller bug.
fn cholesky(a: &mut [f64], n: usize) -> Result<&[f64], FbmError> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(FbmError::EmbeddingFailed(n.trailing_zeros()));
                }
                a[i * n + i] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(a)
}

impl FbmPath {
    /// Wrap an explicit value stream (diagnostic stubs, deserialization).
    pub fn from_values(
        hurst: f64,
        order: u32,
        seed: u64,
        values: Vec<f64>,
    ) -> Result<Self, FbmError> {
        if !(0.0 < hurst && hurst < 1.0) {
            return Err(FbmError::InvalidHurst(hurst));
        }
        if order > MAX_PATH_ORDER {
            return Err(FbmError::OrderTooLarge(order));
        }
        if values.len() != (1usize << order) + 1
            || values[0] != 0.0
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(FbmError::MalformedValues);
        }
        Ok(Self {
            hurst,
            order,
            seed,
            values,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at grid node `k * 2^-order`.
    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Grid step `2^-order`.
    pub fn step(&self) -> f64 {
        (-(self.order as f64)).exp2()
    }

    /// Worst ratio of increments to the modulus `sqrt(2 h^2a log(1/h))`
    /// over dyadic lags `h = 2^-j`, `2 <= j <= order`.
    pub fn holder_stat(&self) -> f64 {
        assert!(self.order >= 4, "holder_stat needs order >= 4");
        let n = self.values.len() - 1;
        let mut worst: f64 = 0.0;
        for j in 2..=self.order {
            let h = (-(j as f64)).exp2();
            let step = n >> j;
            let modulus = (2.0 * h.powf(2.0 * self.hurst) * (1.0 / h).ln()).sqrt();
            for i in 0..=(n - step) {
                let d = (self.values[i + step] - self.values[i]).abs();
                worst = worst.max(d / modulus);
            }
        }
        worst
    }

    /// CSV rows `k,t,B` with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,t,B\n");
        let step = self.step();
        for (k, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", k, k as f64 * step, v));
        }
        s
    }

    /// Compact binary format: alpha (f64 LE), order (u32 LE), seed
    /// (u64 LE), then the values as f64 LE.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.values.len());
        out.extend_from_slice(&self.hurst.to_le_bytes());
        out.extend_from_slice(&self.order.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, FbmError> {
        if bytes.len() < 20 {
            return Err(FbmError::MalformedValues);
        }
        let hurst = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let order = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let payload = &bytes[20..];
        if payload.len() % 8 != 0 {
            return Err(FbmError::MalformedValues);
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(hurst, order, seed, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        for alpha in [0.3, 0.5, 0.7] {
            assert!((covariance(alpha, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert_eq!(covariance(alpha, 0.0, 0.7).unwrap(), 0.0);
        }
        // alpha = 1/2 reduces to min(s, t)
        assert!((covariance(0.5, 0.25, 0.75).unwrap() - 0.25).abs() < 1e-15);
        assert!(covariance(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn path_starts_at_zero_and_is_deterministic() {
        let a = sample_path(0.7, 8, 12345).unwrap();
        assert_eq!(a.value_at(0), 0.0);
        assert_eq!(a.values().len(), 257);
        let b = sample_path(0.7, 8, 12345).unwrap();
        assert_eq!(a, b);
        let c = sample_path(0.7, 8, 12346).unwrap();
        assert_ne!(a.values()[1..], c.values()[1..]);
    }

    #[test]
    fn order_and_hurst_bounds() {
        assert!(sample_path(0.5, 23, 1).is_err());
        assert!(sample_path(0.0, 8, 1).is_err());
        assert!(sample_path(1.0, 8, 1).is_err());
    }

    #[test]
    fn variance_of_endpoint_matches_covariance() {
        // Monte Carlo oracle against covariance(): Var B(1) = 1
        let trials = 4000;
        let mut sum_sq = 0.0;
        for s in 0..trials {
            let p = sample_path(0.5, 6, 90_000 + s).unwrap();
            let b1 = *p.values().last().unwrap();
            sum_sq += b1 * b1;
        }
        let var = sum_sq / trials as f64;
        let se = (2.0 / trials as f64).sqrt(); // Var of chi^2 mean
        assert!(
            (var - 1.0).abs() < 5.0 * se,
            "Var B(1) = {var}, se = {se}"
        );
    }

    #[test]
    fn dense_route_matches_circulant_distribution() {
        // second-moment agreement between the two samplers at order 5
        let trials = 6000;
        let alpha = 0.7;
        let mut var_c = 0.0;
        let mut var_d = 0.0;
        for s in 0..trials {
            let c = sample_path(alpha, 5, 7_000 + s).unwrap();
            let d = dense_path(alpha, 5, 7_000 + s).unwrap();
            let mid_c = c.value_at(16);
            let mid_d = d.value_at(16);
            var_c += mid_c * mid_c;
            var_d += mid_d * mid_d;
        }
        var_c /= trials as f64;
        var_d /= trials as f64;
        let truth = covariance(alpha, 0.5, 0.5).unwrap();
        assert!((var_c - truth).abs() < 0.05, "circulant var {var_c} vs {truth}");
        assert!((var_d - truth).abs() < 0.05, "dense var {var_d} vs {truth}");
    }

    #[test]
    fn holder_stat_on_stubs() {
        let order = 4;
        let n = 1usize << order;
        let zeros = FbmPath::from_values(0.5, order, 0, vec![0.0; n + 1]).unwrap();
        assert_eq!(zeros.holder_stat(), 0.0);

        let linear: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let path = FbmPath::from_values(0.5, order, 0, linear).unwrap();
        // max over h of h / sqrt(2 h ln(1/h)) lands at h = 1/4
        let expected = 0.25 / (2.0 * 0.25 * 4.0f64.ln()).sqrt();
        assert!((path.holder_stat() - expected).abs() < 1e-12);
        assert!((expected - 0.3003).abs() < 1e-4);
    }

    #[test]
    fn binary_round_trip() {
        let p = sample_path(0.3, 6, 99).unwrap();
        let q = FbmPath::from_binary(&p.to_binary()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn from_values_validation() {
        assert!(FbmPath::from_values(0.5, 2, 0, vec![0.0; 5]).is_ok());
        assert!(FbmPath::from_values(0.5, 2, 0, vec![0.0; 4]).is_err());
        assert!(FbmPath::from_values(0.5, 2, 0, vec![1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(FbmPath::from_values(0.5, 2, 0, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]).is_err());
    }
}
