//! Binary-digit restriction sets: reals in [0,1] whose digit at every
//! position outside an allowed set S of positions is zero. The set of
//! positions is given by an explicit prefix plus a tail rule, and all
//! dimension quantities reduce to densities of S over windows.

use num_rational::Ratio;
use thiserror::Error;

use crate::dyadic::{DyadicInterval, IntervalFamily};
use crate::estimators::DimensionReport;

/// Hard cap on free digits when enumerating a cover (2^24 intervals).
pub const MAX_COVER_BITS: u32 = 24;
/// Hard cap on window endpoints for exact density queries.
pub const MAX_DENSITY_ORDER: u32 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum DigitSetError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("bad window ({0}, {1}): need m < n <= {MAX_DENSITY_ORDER}")]
    BadWindow(u32, u32),
    #[error("cover at order {order} needs {bits} free digits (cap {MAX_COVER_BITS})")]
    CoverTooLarge { order: u32, bits: u32 },
    #[error("bit string must be nonempty and consist of 0/1: {0:?}")]
    BadBitString(String),
}

fn parse_bits(s: &str) -> Result<Vec<bool>, DigitSetError> {
    if s.is_empty() {
        return Err(DigitSetError::BadBitString(s.to_string()));
    }
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(DigitSetError::BadBitString(s.to_string())),
        })
        .collect()
}

/// Tail rule governing positions beyond the explicit prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum TailRule {
    /// `pattern` repeats forever: position `prefix_len + k` (k >= 1) is
    /// allowed iff `pattern[(k-1) % pattern.len()]`.
    Periodic { pattern: Vec<bool> },
    /// Blocks (a_k, b_k] of allowed positions with b_k = ceil(theta a_k)
    /// and a_{k+1} = ceil(rho b_k), or a_{k+1} = b_k^2 when `squared`.
    GeometricBlocks {
        first_start: u64,
        theta: Ratio<u64>,
        rho: Ratio<u64>,
        squared: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitSetSpec {
    /// prefix[i] = is position i+1 allowed; positions 1..=prefix.len()
    prefix: Vec<bool>,
    tail: TailRule,
}

fn ratio_ceil_mul(r: Ratio<u64>, x: u64) -> u64 {
    let num = r.numer() * x;
    num.div_ceil(*r.denom())
}

impl DigitSetSpec {
    pub fn new(prefix: Vec<bool>, tail: TailRule) -> Result<Self, DigitSetError> {
        match &tail {
            TailRule::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(DigitSetError::InvalidSpec("empty period pattern".into()));
                }
            }
            TailRule::GeometricBlocks {
                first_start,
                theta,
                rho,
                ..
            } => {
                if *theta <= Ratio::from_integer(1) {
                    return Err(DigitSetError::InvalidSpec("theta must exceed 1".into()));
                }
                if *rho < Ratio::from_integer(1) {
                    return Err(DigitSetError::InvalidSpec("rho must be at least 1".into()));
                }
                if *first_start < prefix.len() as u64 {
                    return Err(DigitSetError::InvalidSpec(
                        "first block must start past the prefix".into(),
                    ));
                }
                if *first_start == 0 {
                    return Err(DigitSetError::InvalidSpec(
                        "first block start must be positive".into(),
                    ));
                }
            }
        }
        Ok(Self { prefix, tail })
    }

    /// Pure periodic rule from a bit string, empty prefix.
    pub fn periodic(pattern: &str) -> Result<Self, DigitSetError> {
        Self::new(Vec::new(), TailRule::Periodic { pattern: parse_bits(pattern)? })
    }

    pub fn periodic_with_prefix(prefix: &str, pattern: &str) -> Result<Self, DigitSetError> {
        Self::new(
            parse_bits(prefix)?,
            TailRule::Periodic { pattern: parse_bits(pattern)? },
        )
    }

    pub fn geometric_blocks(
        first_start: u64,
        theta: (u64, u64),
        rho: (u64, u64),
        squared: bool,
    ) -> Result<Self, DigitSetError> {
        if theta.1 == 0 || rho.1 == 0 {
            return Err(DigitSetError::InvalidSpec("zero denominator".into()));
        }
        Self::new(
            Vec::new(),
            TailRule::GeometricBlocks {
                first_start,
                theta: Ratio::new(theta.0, theta.1),
                rho: Ratio::new(rho.0, rho.1),
                squared,
            },
        )
    }

    pub fn prefix_len(&self) -> u32 {
        self.prefix.len() as u32
    }

    pub fn tail(&self) -> &TailRule {
        &self.tail
    }

    /// Is digit position `n` (1-based) allowed.
    pub fn contains(&self, n: u64) -> bool {
        if n == 0 {
            return false;
        }
        if n <= self.prefix.len() as u64 {
            return self.prefix[(n - 1) as usize];
        }
        match &self.tail {
            TailRule::Periodic { pattern } => {
                let k = n - self.prefix.len() as u64;
                pattern[((k - 1) % pattern.len() as u64) as usize]
            }
            TailRule::GeometricBlocks {
                first_start,
                theta,
                rho,
                squared,
            } => {
                let mut a = *first_start;
                while a < n {
                    let b = ratio_ceil_mul(*theta, a);
                    if n <= b {
                        return true;
                    }
                    a = if *squared { b.saturating_mul(b) } else { ratio_ceil_mul(*rho, b) };
                }
                false
            }
        }
    }

    /// |S ∩ {1, ..., n}| in O(log n).
    pub fn count_upto(&self, n: u64) -> u64 {
        let np = self.prefix.len() as u64;
        let prefix_part = self
            .prefix
            .iter()
            .take(n.min(np) as usize)
            .filter(|&&b| b)
            .count() as u64;
        if n <= np {
            return prefix_part;
        }
        let tail_part = match &self.tail {
            TailRule::Periodic { pattern } => {
                let k = n - np; // tail positions 1..=k
                let len = pattern.len() as u64;
                let ones = pattern.iter().filter(|&&b| b).count() as u64;
                let partial = pattern
                    .iter()
                    .take((k % len) as usize)
                    .filter(|&&b| b)
                    .count() as u64;
                (k / len) * ones + partial
            }
            TailRule::GeometricBlocks {
                first_start,
                theta,
                rho,
                squared,
            } => {
                let mut total = 0u64;
                let mut a = *first_start;
                while a < n {
                    let b = ratio_ceil_mul(*theta, a);
                    total += b.min(n) - a;
                    a = if *squared { b.saturating_mul(b) } else { ratio_ceil_mul(*rho, b) };
                }
                total
            }
        };
        prefix_part + tail_part
    }

    /// |S ∩ {m+1, ..., n}|.
    pub fn count_window(&self, m: u32, n: u32) -> Result<u64, DigitSetError> {
        if m >= n || n > MAX_DENSITY_ORDER {
            return Err(DigitSetError::BadWindow(m, n));
        }
        Ok(self.count_upto(n as u64) - self.count_upto(m as u64))
    }

    /// Exact window density d_{m,n} = |S ∩ {m+1..n}| / (n - m).
    pub fn density(&self, m: u32, n: u32) -> Result<Ratio<u64>, DigitSetError> {
        Ok(Ratio::new(self.count_window(m, n)?, (n - m) as u64))
    }

    /// The order-n dyadic cover of the digit set: one interval per
    /// admissible digit word, optionally widened by left neighbors so
    /// that right endpoints with terminating expansions stay covered.
    pub fn cover(&self, n: u32, with_left_neighbors: bool) -> Result<IntervalFamily, DigitSetError> {
        let free: Vec<u32> = (1..=n).filter(|&i| self.contains(i as u64)).collect();
        let bits = free.len() as u32;
        if bits > MAX_COVER_BITS {
            return Err(DigitSetError::CoverTooLarge { order: n, bits });
        }
        let mut fam = IntervalFamily::new();
        for mask in 0u64..(1u64 << bits) {
            let mut p = 0u64;
            for (j, &pos) in free.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    p |= 1u64 << (n - pos);
                }
            }
            fam.insert(DyadicInterval::new(n, p).expect("index < 2^n by construction"));
            if with_left_neighbors && p > 0 {
                fam.insert(DyadicInterval::new(n, p - 1).unwrap());
            }
        }
        Ok(fam)
    }

    /// Exact dimension values from the tail rule.
    ///
    /// Periodic tails have density converging to ones/len, which is all
    /// four dimensions. Block tails contain arbitrarily long runs of
    /// full density, so the Assouad-type values are 1; the lower and
    /// upper densities are evaluated by running the block recursion to
    /// convergence.
    pub fn exact_dims(&self) -> DimensionReport {
        match &self.tail {
            TailRule::Periodic { pattern } => {
                let d = pattern.iter().filter(|&&b| b).count() as f64 / pattern.len() as f64;
                DimensionReport::exact(d, d, d, d).expect("constant chain")
            }
            TailRule::GeometricBlocks {
                first_start,
                theta,
                rho,
                squared,
            } => {
                // densities at block ends (local maxima -> packing) and
                // at the next block starts (local minima -> hausdorff)
                let prefix_ones = self.prefix.iter().filter(|&&b| b).count() as u64;
                let mut a = *first_start;
                let mut count = prefix_ones;
                let mut hi = 0.0f64;
                let mut lo = 1.0f64;
                for _ in 0..10_000 {
                    let b = ratio_ceil_mul(*theta, a);
                    count += b - a;
                    hi = count as f64 / b as f64;
                    let next = if *squared {
                        match b.checked_mul(b) {
                            Some(v) => v,
                            None => {
                                lo = 0.0;
                                break;
                            }
                        }
                    } else {
                        ratio_ceil_mul(*rho, b)
                    };
                    lo = count as f64 / next as f64;
                    if b > 1 << 50 {
                        break;
                    }
                    a = next;
                }
                if *squared {
                    lo = 0.0;
                }
                // convergence of the recursion is geometric; snap values
                // that are within numerical resolution of the limit
                let snap = |x: f64| {
                    let r = (x * 1e9).round() / 1e9;
                    if (r - x).abs() < 1e-9 { r } else { x }
                };
                DimensionReport::exact(snap(lo), snap(hi), 1.0, 1.0).expect("lo <= hi <= 1")
            }
        }
    }
}

/// Per-order densities and windowed maxima for a digit set.
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub n_max: u32,
    /// eps values, one column of windowed maxima per entry
    pub eps_grid: Vec<f64>,
    /// d_n = d_{0,n} for n = 1..=n_max
    pub densities: Vec<f64>,
    /// max_windows[j][n-1] = max over m <= (1-eps_j) n of d_{m,n}
    pub max_windows: Vec<Vec<f64>>,
}

impl DensityProfile {
    pub fn compute(
        spec: &DigitSetSpec,
        n_max: u32,
        eps_grid: &[f64],
    ) -> Result<Self, DigitSetError> {
        if n_max == 0 || n_max > MAX_DENSITY_ORDER {
            return Err(DigitSetError::BadWindow(0, n_max));
        }
        // cumulative counts c[i] = |S ∩ {1..i}|
        let mut c = vec![0u64; n_max as usize + 1];
        for i in 1..=n_max as usize {
            c[i] = c[i - 1] + spec.contains(i as u64) as u64;
        }
        let densities: Vec<f64> = (1..=n_max as usize)
            .map(|n| c[n] as f64 / n as f64)
            .collect();
        let mut max_windows = Vec::with_capacity(eps_grid.len());
        for &eps in eps_grid {
            let mut col = Vec::with_capacity(n_max as usize);
            for n in 1..=n_max as usize {
                let m_cap = ((1.0 - eps) * n as f64).floor() as usize;
                let mut best = 0.0f64;
                for m in 0..=m_cap.min(n - 1) {
                    let d = (c[n] - c[m]) as f64 / (n - m) as f64;
                    best = best.max(d);
                }
                col.push(best);
            }
            max_windows.push(col);
        }
        Ok(Self {
            n_max,
            eps_grid: eps_grid.to_vec(),
            densities,
            max_windows,
        })
    }

    /// CSV: header then one row per order n.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,density");
        for eps in &self.eps_grid {
            out.push_str(&format!(",maxwin_eps_{eps}"));
        }
        out.push('\n');
        for i in 0..self.n_max as usize {
            out.push_str(&format!("{},{}", i + 1, self.densities[i]));
            for col in &self.max_windows {
                out.push_str(&format!(",{}", col[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// A digit window certifying density at least alpha + eps, with the
/// base-order cylinder interval the count argument lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseWindow {
    pub m: u32,
    pub n: u32,
    pub interval: DyadicInterval,
}

/// Find a window (m, n] with digit density >= alpha + eps, preferring
/// the largest n, then refine by bisection toward the densest part
/// while the window stays longer than `min_len` and m < (1-eps) n.
pub fn find_dense_window(
    spec: &DigitSetSpec,
    alpha: f64,
    eps: f64,
    n_max: u32,
    min_len: u32,
) -> Option<DenseWindow> {
    find_dense_window_above(spec, alpha, eps, 0, n_max, min_len, false)
}

/// As `find_dense_window`, but restricted to m >= m_min; with
/// `prefer_smallest_n` the scan runs upward (used to stack windows).
pub fn find_dense_window_above(
    spec: &DigitSetSpec,
    alpha: f64,
    eps: f64,
    m_min: u32,
    n_max: u32,
    min_len: u32,
    prefer_smallest_n: bool,
) -> Option<DenseWindow> {
    let min_len = min_len.max(1);
    let target = alpha + eps;
    let qualifies = |m: u32, n: u32| -> bool {
        let cnt = spec.count_window(m, n).expect("m < n <= n_max");
        cnt as f64 >= target * (n - m) as f64
    };
    let lo_n = m_min + min_len;
    if lo_n > n_max {
        return None;
    }
    let ns: Vec<u32> = if prefer_smallest_n {
        (lo_n..=n_max).collect()
    } else {
        (lo_n..=n_max).rev().collect()
    };
    let mut found = None;
    'scan: for n in ns {
        for m in m_min..=(n - min_len) {
            if qualifies(m, n) {
                found = Some((m, n));
                break 'scan;
            }
        }
    }
    let (mut m, mut n) = found?;
    // bisect toward a window with m >= (1-eps) n; the density bound is
    // inherited by at least one half at each step
    while (m as f64) < (1.0 - eps) * n as f64 && n - m >= 2 * min_len {
        let mid = (m + n) / 2;
        if qualifies(mid, n) {
            m = mid;
        } else if qualifies(m, mid) {
            n = mid;
        } else {
            break;
        }
    }
    let interval = DyadicInterval::new(m, 0).expect("order 0 index 0 always valid");
    Some(DenseWindow { m, n, interval })
}
