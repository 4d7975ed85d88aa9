//! Counting statistics of a sampled path over interval families: range
//! and left-endpoint collision counts per value interval, the
//! corresponding threshold events, level/record sets, preimage covers,
//! and the adversarial witness search for the dimension-doubling gap.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::digit_sets::{find_dense_window_above, DigitSetSpec};
use crate::dyadic::{DyadicInterval, IntervalFamily};
use crate::fbm::FbmPath;
use crate::ValueInterval;

#[derive(Debug, Error, PartialEq)]
pub enum PathCountError {
    #[error("order {0} exceeds path order {1}")]
    OrderTooFine(u32, u32),
}

/// Min/max of the sampled values over the grid points inside `iv`.
fn grid_range(path: &FbmPath, iv: &DyadicInterval) -> (f64, f64) {
    let shift = path.order() - iv.order();
    let k_lo = (iv.index() << shift) as usize;
    let k_hi = ((iv.index() + 1) << shift) as usize;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &path.values()[k_lo..=k_hi] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn check_order(path: &FbmPath, n: u32) -> Result<(), PathCountError> {
    if n > path.order() {
        Err(PathCountError::OrderTooFine(n, path.order()))
    } else {
        Ok(())
    }
}

/// Number of order-n members of U whose sampled range meets the closed
/// value interval J_{n,q}.
pub fn g_count(
    path: &FbmPath,
    u: &IntervalFamily,
    n: u32,
    q: i64,
) -> Result<u64, PathCountError> {
    check_order(path, n)?;
    let j = ValueInterval::new(n, q, path.hurst());
    let (jl, jr) = (j.left(), j.right());
    Ok(u
        .members_at_order(n)
        .filter(|iv| {
            let (lo, hi) = grid_range(path, iv);
            hi >= jl && lo <= jr
        })
        .count() as u64)
}

/// Number of order-n members of U whose left-endpoint value lies in the
/// half-open J_{n,q} = [left, right), so each member lands in exactly
/// one q per order.
pub fn p_count(
    path: &FbmPath,
    u: &IntervalFamily,
    n: u32,
    q: i64,
) -> Result<u64, PathCountError> {
    check_order(path, n)?;
    let shift = path.order() - n;
    Ok(u
        .members_at_order(n)
        .filter(|iv| {
            let v = path.values()[(iv.index() << shift) as usize];
            ValueInterval::index_of(v, n, path.hurst()) == q
        })
        .count() as u64)
}

/// One row of a threshold event report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub n: u32,
    /// argmax q (or worst window base order, depending on the event)
    pub max_q: i64,
    pub count: u64,
    pub threshold: f64,
    pub pass: bool,
}

/// Per-order worst-case counts against exponential thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    pub name: String,
    pub rows: Vec<EventRow>,
    pub pass: bool,
}

impl EventReport {
    pub fn from_rows(name: impl Into<String>, rows: Vec<EventRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        Self {
            name: name.into(),
            rows,
            pass,
        }
    }

    pub const CSV_HEADER: &'static str = "n,max_q,count,threshold,pass";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.max_q, r.count, r.threshold, r.pass
            ));
        }
        out
    }
}

/// Worst-q range-collision counts per order against 2^(eps n).
pub fn gamma_event(
    path: &FbmPath,
    u: &IntervalFamily,
    eps: f64,
    n_lo: u32,
    n_hi: u32,
) -> Result<EventReport, PathCountError> {
    check_order(path, n_hi)?;
    let mut rows = Vec::new();
    for n in n_lo..=n_hi {
        let threshold = 2f64.powf(eps * n as f64);
        let w = ValueInterval::new(n, 0, path.hurst()).width();
        // accumulate, per member, the closed q-range its value range meets
        let mut diff: BTreeMap<i64, i64> = BTreeMap::new();
        let mut any = false;
        for iv in u.members_at_order(n) {
            any = true;
            let (lo, hi) = grid_range(path, iv);
            // J_{n,q} = [qw, (q+1)w] meets [lo, hi] iff q <= hi/w and q+1 >= lo/w
            let mut q0 = (lo / w - 1.0).ceil() as i64;
            while ((q0 + 1) as f64) * w < lo {
                q0 += 1;
            }
            let q1 = (hi / w).floor() as i64;
            if q0 > q1 {
                continue;
            }
            *diff.entry(q0).or_insert(0) += 1;
            *diff.entry(q1 + 1).or_insert(0) -= 1;
        }
        let (mut best, mut best_q, mut running) = (0i64, 0i64, 0i64);
        for (&q, &d) in &diff {
            running += d;
            if running > best {
                best = running;
                best_q = q;
            }
        }
        let count = best as u64;
        rows.push(EventRow {
            n,
            max_q: if any { best_q } else { 0 },
            count,
            threshold,
            pass: count as f64 <= threshold,
        });
    }
    Ok(EventReport::from_rows("gamma", rows))
}

/// Worst-q left-endpoint collision counts per order against 2^(eps n),
/// with q restricted to |q| <= n 2^(alpha n).
pub fn pi_event(
    path: &FbmPath,
    u: &IntervalFamily,
    eps: f64,
    n_lo: u32,
    n_hi: u32,
) -> Result<EventReport, PathCountError> {
    check_order(path, n_hi)?;
    let mut rows = Vec::new();
    for n in n_lo..=n_hi {
        let threshold = 2f64.powf(eps * n as f64);
        let q_cap = (n as f64 * 2f64.powf(path.hurst() * n as f64)).floor() as i64;
        let shift = path.order() - n;
        let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
        for iv in u.members_at_order(n) {
            let v = path.values()[(iv.index() << shift) as usize];
            let q = ValueInterval::index_of(v, n, path.hurst());
            if q.abs() <= q_cap {
                *counts.entry(q).or_insert(0) += 1;
            }
        }
        let (count, max_q) = counts
            .iter()
            .map(|(&q, &c)| (c, q))
            .max()
            .unwrap_or((0, 0));
        rows.push(EventRow {
            n,
            max_q,
            count,
            threshold,
            pass: count as f64 <= threshold,
        });
    }
    Ok(EventReport::from_rows("pi", rows))
}

/// Order-n intervals on whose grid points B - y changes sign or
/// vanishes.
pub fn level_set(path: &FbmPath, y: f64, n: u32) -> Result<IntervalFamily, PathCountError> {
    check_order(path, n)?;
    let shift = path.order() - n;
    let vals = path.values();
    let mut fam = IntervalFamily::new();
    for p in 0..(1u64 << n) {
        let k_lo = (p << shift) as usize;
        let k_hi = ((p + 1) << shift) as usize;
        let cell = &vals[k_lo..=k_hi];
        let hit = cell.iter().any(|&v| v == y)
            || (cell.iter().any(|&v| v > y) && cell.iter().any(|&v| v < y));
        if hit {
            fam.insert(DyadicInterval::new(n, p).unwrap());
        }
    }
    Ok(fam)
}

/// Order-n intervals containing a grid point where the path attains its
/// running maximum (ties count as records).
pub fn record_set(path: &FbmPath, n: u32) -> Result<IntervalFamily, PathCountError> {
    check_order(path, n)?;
    let vals = path.values();
    let mut is_record = vec![false; vals.len()];
    let mut run_max = f64::NEG_INFINITY;
    for (i, &v) in vals.iter().enumerate() {
        if v >= run_max {
            is_record[i] = true;
            run_max = v;
        }
    }
    let shift = path.order() - n;
    let mut fam = IntervalFamily::new();
    for p in 0..(1u64 << n) {
        let k_lo = (p << shift) as usize;
        let k_hi = ((p + 1) << shift) as usize;
        if is_record[k_lo..=k_hi].iter().any(|&b| b) {
            fam.insert(DyadicInterval::new(n, p).unwrap());
        }
    }
    Ok(fam)
}

/// Members of `d_cover` (at order n) whose sampled range meets some
/// member of E (closed intersection).
pub fn preimage_cover(
    path: &FbmPath,
    e: &[ValueInterval],
    d_cover: &IntervalFamily,
    n: u32,
) -> Result<IntervalFamily, PathCountError> {
    check_order(path, n)?;
    let mut fam = IntervalFamily::new();
    for iv in d_cover.members_at_order(n) {
        let (lo, hi) = grid_range(path, iv);
        if e.iter().any(|j| hi >= j.left() && lo <= j.right()) {
            fam.insert(*iv);
        }
    }
    Ok(fam)
}

/// One level of the witness construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessLevel {
    pub m: u32,
    pub n: u32,
    /// members entering the level (descendants of the previous keep)
    pub candidates: u64,
    /// members kept: those whose range meets the chosen value interval
    pub kept: u64,
    /// parents the candidates descend from
    pub parents: u64,
    /// distinct order-n value intervals met by kept members
    pub image_boxes: u64,
    pub chosen_q: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessResult {
    pub levels: Vec<WitnessLevel>,
    pub family: IntervalFamily,
    /// slope of the kept family per time order
    pub witness_slope: f64,
    /// slope of its image per value order (alpha-scaled)
    pub image_slope: f64,
    /// empty when a witness was found
    pub no_witness_reason: Option<String>,
}

impl WitnessResult {
    pub fn found(&self) -> bool {
        self.no_witness_reason.is_none() && self.levels.len() >= 2
    }

    pub const CSV_HEADER: &'static str = "level,m,n,candidates,kept,parents,image_boxes,chosen_q";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, l) in self.levels.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i + 1,
                l.m,
                l.n,
                l.candidates,
                l.kept,
                l.parents,
                l.image_boxes,
                l.chosen_q
            ));
        }
        out
    }
}

fn no_witness(reason: &str) -> WitnessResult {
    WitnessResult {
        levels: Vec::new(),
        family: IntervalFamily::new(),
        witness_slope: 0.0,
        image_slope: 0.0,
        no_witness_reason: Some(reason.to_string()),
    }
}

/// Stack dense digit windows up the scale axis; inside each window keep
/// the members colliding into the most popular value interval (smallest
/// q among ties), then recurse into the kept members. Succeeds when at
/// least two levels are found; the per-level diagnostics expose how the
/// kept family keeps full window density while its image collapses.
pub fn witness_search(
    path: &FbmPath,
    spec: &DigitSetSpec,
    alpha: f64,
    eps: f64,
    depth: u32,
) -> Result<WitnessResult, PathCountError> {
    check_order(path, depth)?;
    let mut levels: Vec<WitnessLevel> = Vec::new();
    // kept family at the current base order; the root is order 0
    let mut kept: Vec<u64> = vec![0];
    let mut cur_order = 0u32;
    loop {
        let window = match find_dense_window_above(spec, alpha, eps, cur_order, depth, 2, true) {
            Some(w) => w,
            None => break,
        };
        let (m, n) = (window.m, window.n);
        // descend kept members from cur_order to n along allowed digits
        let free: Vec<u32> = ((cur_order + 1)..=n)
            .filter(|&i| spec.contains(i as u64))
            .collect();
        let mut candidates: Vec<u64> = Vec::with_capacity(kept.len() << free.len());
        for &base in &kept {
            for mask in 0u64..(1u64 << free.len()) {
                let mut p = base << (n - cur_order);
                for (j, &pos) in free.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        p |= 1u64 << (n - pos);
                    }
                }
                candidates.push(p);
            }
        }
        // level budget: below 8 candidates the counting statistics are
        // vacuous (the opening level is exempt so small first blocks
        // still seed the recursion)
        if candidates.len() < 8 && !levels.is_empty() {
            break;
        }
        let w = ValueInterval::new(n, 0, path.hurst()).width();
        let ranges: Vec<(f64, f64)> = candidates
            .iter()
            .map(|&p| grid_range(path, &DyadicInterval::new(n, p).unwrap()))
            .collect();
        // most popular closed value interval, smallest q among ties
        let mut diff: BTreeMap<i64, i64> = BTreeMap::new();
        for &(lo, hi) in &ranges {
            let mut q0 = (lo / w - 1.0).ceil() as i64;
            while ((q0 + 1) as f64) * w < lo {
                q0 += 1;
            }
            let q1 = (hi / w).floor() as i64;
            if q0 <= q1 {
                *diff.entry(q0).or_insert(0) += 1;
                *diff.entry(q1 + 1).or_insert(0) -= 1;
            }
        }
        let (mut best, mut best_q, mut running) = (0i64, 0i64, 0i64);
        for (&q, &d) in &diff {
            running += d;
            if running > best {
                best = running;
                best_q = q;
            }
        }
        if best == 0 {
            break;
        }
        let (jl, jr) = (best_q as f64 * w, (best_q + 1) as f64 * w);
        let next: Vec<u64> = candidates
            .iter()
            .zip(&ranges)
            .filter(|(_, &(lo, hi))| hi >= jl && lo <= jr)
            .map(|(&p, _)| p)
            .collect();
        let image_boxes = {
            let mut qs = std::collections::BTreeSet::new();
            for (&_, &(lo, hi)) in candidates.iter().zip(&ranges).filter(|(_, &(lo, hi))| {
                hi >= jl && lo <= jr
            }) {
                let mut q0 = (lo / w - 1.0).ceil() as i64;
                while ((q0 + 1) as f64) * w < lo {
                    q0 += 1;
                }
                for q in q0..=(hi / w).floor() as i64 {
                    qs.insert(q);
                }
            }
            qs.len() as u64
        };
        levels.push(WitnessLevel {
            m,
            n,
            candidates: candidates.len() as u64,
            kept: next.len() as u64,
            parents: kept.len() as u64,
            image_boxes,
            chosen_q: best_q,
        });
        kept = next;
        cur_order = n;
    }
    if levels.is_empty() {
        return Ok(no_witness("no dense window up to the requested depth"));
    }
    let total_len: f64 = levels.iter().map(|l| (l.n - l.m) as f64).sum();
    let wit: f64 = levels
        .iter()
        .map(|l| (l.kept.max(1) as f64 / l.parents as f64).log2())
        .sum();
    let img: f64 = levels
        .iter()
        .map(|l| (l.image_boxes.max(1) as f64 / l.parents as f64).max(1.0).log2())
        .sum();
    let family: IntervalFamily = kept
        .into_iter()
        .map(|p| DyadicInterval::new(cur_order, p).unwrap())
        .collect();
    Ok(WitnessResult {
        levels,
        family,
        witness_slope: wit / total_len,
        image_slope: img / (alpha * total_len),
        no_witness_reason: None,
    })
}
