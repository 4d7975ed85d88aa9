//! Iterated function systems of contracting similarities on [0,1]:
//! attractor covers on the dyadic grid and the Moran similarity
//! dimension.

use thiserror::Error;

use crate::dyadic::{DyadicInterval, IntervalFamily};

/// Cover size cap (number of intervals).
pub const MAX_ATTRACTOR_COVER: usize = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum IfsError {
    #[error("need at least one map")]
    Empty,
    #[error("map {0}: ratio {1} not a contraction in (0,1)")]
    BadRatio(usize, f64),
    #[error("map {0} does not send [0,1] into itself")]
    RangeEscape(usize),
    #[error("attractor cover at order {0} exceeds the size cap")]
    CoverTooLarge(u32),
}

/// Finitely many contracting similarities x -> r x + t on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Ifs {
    maps: Vec<(f64, f64)>,
}

impl Ifs {
    pub fn new(maps: Vec<(f64, f64)>) -> Result<Self, IfsError> {
        if maps.is_empty() {
            return Err(IfsError::Empty);
        }
        for (i, &(r, t)) in maps.iter().enumerate() {
            if !(r.abs() > 0.0 && r.abs() < 1.0) || !r.is_finite() {
                return Err(IfsError::BadRatio(i, r));
            }
            let (lo, hi) = image_of_unit(r, t);
            if lo < -1e-12 || hi > 1.0 + 1e-12 {
                return Err(IfsError::RangeEscape(i));
            }
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &[(f64, f64)] {
        &self.maps
    }

    /// Unique s >= 0 with sum |r_i|^s = 1 (0 for a single map), found
    /// by bisection; the map s -> sum |r_i|^s is strictly decreasing.
    pub fn similarity_dimension(&self) -> f64 {
        if self.maps.len() == 1 {
            return 0.0;
        }
        let f = |s: f64| -> f64 {
            self.maps.iter().map(|&(r, _)| r.abs().powf(s)).sum::<f64>() - 1.0
        };
        let mut hi = 1.0;
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Similarity dimension capped at 1 (the ambient line).
    pub fn capped_dimension(&self) -> f64 {
        self.similarity_dimension().min(1.0)
    }

    /// Order-n dyadic intervals meeting the attractor: cylinder images
    /// are expanded breadth-first until narrower than 2^-n, then
    /// rasterized to the grid (overcounting at cylinder boundaries is
    /// at most one extra interval per cylinder).
    pub fn attractor_cover(&self, n: u32) -> Result<IntervalFamily, IfsError> {
        let width = 2f64.powi(-(n as i32));
        // queue of compositions (r, t); image of [0,1] has width |r|
        let mut queue: Vec<(f64, f64)> = vec![(1.0, 0.0)];
        let mut fam = IntervalFamily::new();
        while let Some((r, t)) = queue.pop() {
            if r.abs() >= width {
                for &(ri, ti) in &self.maps {
                    // (r,t) after (ri,ti): x -> r (ri x + ti) + t
                    queue.push((r * ri, r * ti + t));
                }
                if queue.len() > MAX_ATTRACTOR_COVER {
                    return Err(IfsError::CoverTooLarge(n));
                }
                continue;
            }
            let (lo, hi) = image_of_unit(r, t);
            let scale = (1u64 << n) as f64;
            let p_lo = (lo.max(0.0) * scale).floor() as u64;
            let p_hi = ((hi.min(1.0) * scale).floor() as u64).min((1u64 << n) - 1);
            for p in p_lo..=p_hi {
                fam.insert(DyadicInterval::new(n, p).expect("index within grid"));
            }
            if fam.len() > MAX_ATTRACTOR_COVER {
                return Err(IfsError::CoverTooLarge(n));
            }
        }
        Ok(fam)
    }

    /// True iff the open images F_i((0,1)) are pairwise disjoint
    /// (touching endpoints allowed) — a sufficient separation test.
    pub fn check_disjoint_images(&self) -> bool {
        let mut imgs: Vec<(f64, f64)> = self
            .maps
            .iter()
            .map(|&(r, t)| image_of_unit(r, t))
            .collect();
        imgs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        imgs.windows(2).all(|w| w[1].0 >= w[0].1)
    }
}

fn image_of_unit(r: f64, t: f64) -> (f64, f64) {
    let a = t;
    let b = r + t;
    (a.min(b), a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{least_squares_slope, CoverHierarchy};

    #[test]
    fn moran_dimension() {
        let thirds = Ifs::new(vec![(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]).unwrap();
        let s = thirds.similarity_dimension();
        assert!((s - 2f64.ln() / 3f64.ln()).abs() < 1e-9, "{s}");
        let single = Ifs::new(vec![(0.5, 0.0)]).unwrap();
        assert_eq!(single.similarity_dimension(), 0.0);
        let halves = Ifs::new(vec![(0.5, 0.0), (0.5, 0.5)]).unwrap();
        assert!((halves.similarity_dimension() - 1.0).abs() < 1e-9);
        // overfull system has root above 1; capped report stays at 1
        let overfull = Ifs::new(vec![(0.5, 0.0), (0.5, 0.25), (0.5, 0.5)]).unwrap();
        assert!(overfull.similarity_dimension() > 1.0);
        assert_eq!(overfull.capped_dimension(), 1.0);
    }

    #[test]
    fn construction_guards() {
        assert_eq!(Ifs::new(vec![]), Err(IfsError::Empty));
        assert!(matches!(
            Ifs::new(vec![(1.5, 0.0)]),
            Err(IfsError::BadRatio(0, _))
        ));
        assert_eq!(Ifs::new(vec![(0.5, 0.75)]), Err(IfsError::RangeEscape(0)));
        // orientation-reversing map x -> -x/2 + 1/2 sends [0,1] to [0,1/2]
        assert!(Ifs::new(vec![(-0.5, 0.5)]).is_ok());
    }

    #[test]
    fn full_interval_cover() {
        let halves = Ifs::new(vec![(0.5, 0.0), (0.5, 0.5)]).unwrap();
        let c = halves.attractor_cover(5).unwrap();
        assert_eq!(c.len(), 32);
    }

    #[test]
    fn singleton_attractor_cover() {
        let single = Ifs::new(vec![(0.5, 0.0)]).unwrap();
        let c = single.attractor_cover(4).unwrap();
        let idx: Vec<u64> = c.iter().map(|iv| iv.index()).collect();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn cantor_cover_matches_point_sampling() {
        let thirds = Ifs::new(vec![(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]).unwrap();
        let n = 6u32;
        let cover = thirds.attractor_cover(n).unwrap();
        // dense forward-orbit sampling to depth 12
        let mut cells = std::collections::BTreeSet::new();
        for word in 0u64..(1 << 12) {
            let mut x = 0.0f64;
            for j in (0..12).rev() {
                let (r, t) = thirds.maps()[(word >> j & 1) as usize];
                x = r * x + t;
            }
            cells.insert(((x * (1u64 << n) as f64).floor() as u64).min((1 << n) - 1));
        }
        let m = cells.len();
        // every sampled cell is covered; boundary slack only inflates
        for p in &cells {
            assert!(cover.contains(&DyadicInterval::new(n, *p).unwrap()));
        }
        assert!(cover.len() >= m && cover.len() <= m + 16, "{} vs {m}", cover.len());
    }

    #[test]
    fn separation_test() {
        let thirds = Ifs::new(vec![(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]).unwrap();
        assert!(thirds.check_disjoint_images());
        let overlap = Ifs::new(vec![(0.5, 0.0), (0.5, 0.25)]).unwrap();
        assert!(!overlap.check_disjoint_images());
        let touching = Ifs::new(vec![(0.5, 0.0), (0.5, 0.5)]).unwrap();
        assert!(touching.check_disjoint_images());
    }

    #[test]
    fn cover_slope_matches_moran_dimension() {
        let thirds = Ifs::new(vec![(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = (8..=16)
            .map(|n| {
                let c = thirds.attractor_cover(n).unwrap();
                (n as f64, (c.len() as f64).log2())
            })
            .unzip();
        let (slope, _) = least_squares_slope(&xs, &ys);
        let target = thirds.capped_dimension();
        assert!((slope - target).abs() < 0.05, "slope {slope} vs {target}");
    }

    #[test]
    fn cover_is_refinement() {
        let thirds = Ifs::new(vec![(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]).unwrap();
        let covers: Vec<_> = (6..=10).map(|n| thirds.attractor_cover(n).unwrap()).collect();
        assert!(CoverHierarchy::new(6, covers, true).is_ok());
    }
}
