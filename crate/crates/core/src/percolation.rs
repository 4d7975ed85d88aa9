//! Fractal percolation on the dyadic tree: each child interval of a
//! kept interval survives independently with probability 2^-gamma.
//! Includes Galton-Watson statistics, the windowed-count threshold
//! event, the branching extinction probability, and an empirical tail
//! check of the survivor counts.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::path_counts::{EventReport, EventRow};
use crate::rng::StreamRng;

pub const MAX_PERCOLATION_DEPTH: u32 = 24;

#[derive(Debug, Error, PartialEq)]
pub enum PercolationError {
    #[error("depth {0} exceeds cap {MAX_PERCOLATION_DEPTH}")]
    DepthTooLarge(u32),
    #[error("gamma {0} outside (0,1)")]
    BadGamma(f64),
    #[error("need at least 1000 trials, got {0}")]
    TooFewTrials(u64),
}

/// One sampled percolation tree: sorted kept indices per generation.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationSample {
    gamma: f64,
    depth: u32,
    seed: u64,
    /// levels[k-1] = kept indices at order k, ascending
    levels: Vec<Vec<u64>>,
}

/// Sample with keep probability p per child (test hook: p = 1 keeps
/// everything). Deterministic per seed.
pub fn simulate_with_p(
    gamma: f64,
    p: f64,
    depth: u32,
    seed: u64,
) -> Result<PercolationSample, PercolationError> {
    if depth > MAX_PERCOLATION_DEPTH {
        return Err(PercolationError::DepthTooLarge(depth));
    }
    let mut rng = StreamRng::new(seed, 0);
    let mut levels: Vec<Vec<u64>> = Vec::with_capacity(depth as usize);
    let mut frontier: Vec<u64> = vec![0]; // order-0 root always kept
    for _ in 1..=depth {
        let mut next = Vec::new();
        for &p_idx in &frontier {
            for child in [2 * p_idx, 2 * p_idx + 1] {
                if rng.bernoulli(p) {
                    next.push(child);
                }
            }
        }
        levels.push(next.clone());
        frontier = next;
    }
    Ok(PercolationSample {
        gamma,
        depth,
        seed,
        levels,
    })
}

/// Sample the percolation tree with keep probability 2^-gamma.
pub fn simulate(gamma: f64, depth: u32, seed: u64) -> Result<PercolationSample, PercolationError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(PercolationError::BadGamma(gamma));
    }
    simulate_with_p(gamma, 2f64.powf(-gamma), depth, seed)
}

impl PercolationSample {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Kept indices at order k (1-based), ascending.
    pub fn level(&self, k: u32) -> &[u64] {
        &self.levels[(k - 1) as usize]
    }

    /// Z_1..Z_depth.
    pub fn survivor_counts(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.len() as u64).collect()
    }

    pub fn survives(&self) -> bool {
        !self.levels.last().map(Vec::is_empty).unwrap_or(true)
    }

    /// Structural invariant: every kept interval's parent is kept.
    pub fn parent_closed(&self) -> bool {
        for k in 1..self.levels.len() {
            let parents = &self.levels[k - 1];
            for &idx in &self.levels[k] {
                if parents.binary_search(&(idx >> 1)).is_err() {
                    return false;
                }
            }
        }
        true
    }

    /// Checks N_n(I) <= n^2 2^((1-gamma)(n-m)) for every n <= depth,
    /// m <= (1-eps) n and kept order-m interval I (the root included).
    /// The report row per n records the worst m in the max_q column.
    pub fn window_event(&self, eps: f64) -> EventReport {
        let g = self.gamma;
        let mut rows = Vec::new();
        for n in 1..=self.depth {
            let mut worst = (0.0f64, 0i64, 0u64, f64::INFINITY); // (ratio, m, count, threshold)
            for m in 0..n {
                if m as f64 > (1.0 - eps) * n as f64 {
                    break;
                }
                let threshold =
                    (n as f64 * n as f64) * 2f64.powf((1.0 - g) * (n - m) as f64);
                // level(n) is ascending, so equal-ancestor runs are contiguous
                let mut best = 0u64;
                let (mut cur_anc, mut cur) = (u64::MAX, 0u64);
                for &idx in self.level(n) {
                    let anc = idx >> (n - m);
                    if anc == cur_anc {
                        cur += 1;
                    } else {
                        best = best.max(cur);
                        cur_anc = anc;
                        cur = 1;
                    }
                }
                best = best.max(cur);
                let ratio = best as f64 / threshold;
                if ratio > worst.0 {
                    worst = (ratio, m as i64, best, threshold);
                }
            }
            rows.push(EventRow {
                n,
                max_q: worst.1,
                count: worst.2,
                threshold: worst.3,
                pass: worst.0 <= 1.0,
            });
        }
        EventReport::from_rows("percolation_window", rows)
    }

    /// Per-level hex bitmaps, one line per order.
    pub fn to_hex(&self) -> String {
        let mut out = String::new();
        for (i, level) in self.levels.iter().enumerate() {
            let k = i as u32 + 1;
            let words = ((1usize << k) + 63) / 64;
            let mut bits = vec![0u64; words];
            for &idx in level {
                bits[(idx / 64) as usize] |= 1u64 << (idx % 64);
            }
            out.push_str(&format!("{k}:"));
            for w in bits {
                out.push_str(&format!("{w:016x}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Smallest fixed point in [0,1] of e = (1 - p + p e)^2 with
/// p = 2^-gamma, by bisection to 1e-12 (`p_override` is the test hook
/// for the p = 1 limit).
pub fn extinction_probability_for_p(p: f64) -> f64 {
    let g = |e: f64| (1.0 - p + p * e).powi(2) - e;
    if g(0.0) <= 0.0 {
        return 0.0;
    }
    // g > 0 at 0 and g(1) = 0; the smallest root sits where g first
    // crosses zero, so bisect against the sign of g
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn extinction_probability(gamma: f64) -> Result<f64, PercolationError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(PercolationError::BadGamma(gamma));
    }
    Ok(extinction_probability_for_p(2f64.powf(-gamma)))
}

/// Empirical tail of Z_n against k 2^((1-gamma) n).
#[derive(Debug, Clone, PartialEq)]
pub struct TailTable {
    pub gamma: f64,
    pub n: u32,
    pub trials: u64,
    /// (k, empirical frequency of Z_n >= k 2^((1-gamma)n))
    pub rows: Vec<(f64, f64)>,
    /// fitted slope of ln(frequency) against k over positive rows
    pub decay_rate: f64,
    /// frequencies non-increasing in k with log-linear decay
    pub log_linear: bool,
}

impl TailTable {
    pub const CSV_HEADER: &'static str = "k,frequency";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (k, f) in &self.rows {
            out.push_str(&format!("{k},{f}\n"));
        }
        out
    }
}

pub fn tail_check(
    gamma: f64,
    n: u32,
    k_values: &[f64],
    trials: u64,
    master_seed: u64,
) -> Result<TailTable, PercolationError> {
    if trials < 1000 {
        return Err(PercolationError::TooFewTrials(trials));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(PercolationError::BadGamma(gamma));
    }
    let mean_pow = 2f64.powf((1.0 - gamma) * n as f64);
    let mut hits: BTreeMap<usize, u64> = (0..k_values.len()).map(|i| (i, 0)).collect();
    for t in 0..trials {
        let z = simulate(gamma, n, master_seed ^ t.wrapping_mul(0x9e3779b97f4a7c15))?
            .survivor_counts()[(n - 1) as usize];
        for (i, &k) in k_values.iter().enumerate() {
            if z as f64 >= k * mean_pow {
                *hits.get_mut(&i).unwrap() += 1;
            }
        }
    }
    let rows: Vec<(f64, f64)> = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, hits[&i] as f64 / trials as f64))
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, f)| *f > 0.0)
        .map(|&(k, f)| (k, f.ln()))
        .collect();
    let decay_rate = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        crate::estimators::least_squares_slope(&xs, &ys).0
    } else {
        f64::NEG_INFINITY
    };
    let log_linear = rows.windows(2).all(|w| w[1].1 <= w[0].1) && decay_rate < 0.0;
    Ok(TailTable {
        gamma,
        n,
        trials,
        rows,
        decay_rate,
        log_linear,
    })
}
