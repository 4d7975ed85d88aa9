//! Numerical dimension estimators over cover hierarchies: box-counting
//! slopes and windowed Assouad-type estimators, plus the merged
//! dimension report shared with the exact calculators.

use thiserror::Error;

use crate::dyadic::IntervalFamily;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("family at order {0} has a member of order {1}")]
    MixedOrder(u32, u32),
    #[error("refinement violated: order-{0} member {1} has no parent in the previous cover")]
    RefinementBroken(u32, u64),
    #[error("cover at order {0} is empty")]
    EmptyCover(u32),
    #[error("window [{0}, {1}] not usable (needs to lie in the hierarchy range, length >= 4)")]
    BadWindow(u32, u32),
    #[error("hierarchy is not refinement-flagged")]
    NotRefined,
    #[error("exact value {exact} conflicts with estimate {estimate} +/- {uncertainty}")]
    ConflictingInputs {
        exact: f64,
        estimate: f64,
        uncertainty: f64,
    },
    #[error("chain inequality violated beyond uncertainty: {0}")]
    ChainViolated(String),
}

/// Per-order covers of a target set over a contiguous order range.
#[derive(Debug, Clone)]
pub struct CoverHierarchy {
    n_lo: u32,
    covers: Vec<IntervalFamily>,
    refined: bool,
}

impl CoverHierarchy {
    /// `covers[i]` must consist of order-`(n_lo + i)` intervals. With
    /// `refined`, every member's parent must be present one order up.
    pub fn new(
        n_lo: u32,
        covers: Vec<IntervalFamily>,
        refined: bool,
    ) -> Result<Self, EstimatorError> {
        for (i, fam) in covers.iter().enumerate() {
            let n = n_lo + i as u32;
            if let Some(bad) = fam.iter().find(|iv| iv.order() != n) {
                return Err(EstimatorError::MixedOrder(n, bad.order()));
            }
        }
        if refined {
            for i in 1..covers.len() {
                for iv in covers[i].iter() {
                    let parent = iv.ancestor(iv.order() - 1);
                    if !covers[i - 1].contains(&parent) {
                        return Err(EstimatorError::RefinementBroken(iv.order(), iv.index()));
                    }
                }
            }
        }
        Ok(Self {
            n_lo,
            covers,
            refined,
        })
    }

    pub fn n_lo(&self) -> u32 {
        self.n_lo
    }

    pub fn n_hi(&self) -> u32 {
        self.n_lo + self.covers.len() as u32 - 1
    }

    pub fn cover(&self, n: u32) -> Option<&IntervalFamily> {
        n.checked_sub(self.n_lo)
            .and_then(|i| self.covers.get(i as usize))
    }

    pub fn is_refined(&self) -> bool {
        self.refined
    }
}

/// Box-counting estimate over an order window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiEstimate {
    /// min over the window of log2 |cover(n)| / n
    pub lower: f64,
    /// max over the window of log2 |cover(n)| / n
    pub upper: f64,
    /// least-squares slope of log2 |cover(n)| against n
    pub slope: f64,
    /// standard error of the fitted slope
    pub uncertainty: f64,
}

/// Minkowski (box-counting) slopes over `window = (n_lo, n_hi)`.
pub fn minkowski_slopes(
    h: &CoverHierarchy,
    window: (u32, u32),
) -> Result<MinkowskiEstimate, EstimatorError> {
    let (lo, hi) = window;
    if lo < h.n_lo() || hi > h.n_hi() || hi - lo < 4 {
        return Err(EstimatorError::BadWindow(lo, hi));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in lo..=hi {
        let fam = h.cover(n).unwrap();
        if fam.is_empty() {
            return Err(EstimatorError::EmptyCover(n));
        }
        xs.push(n as f64);
        ys.push((fam.len() as f64).log2());
    }
    let per_order: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| if *x == 0.0 { 0.0 } else { y / x })
        .collect();
    let lower = per_order.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = per_order.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (slope, uncertainty) = least_squares_slope(&xs, &ys);
    Ok(MinkowskiEstimate {
        lower,
        upper,
        slope,
        uncertainty,
    })
}

/// Slope and its standard error for simple least squares.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    if xs.len() <= 2 {
        return (slope, 0.0);
    }
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let fit = ybar + slope * (x - xbar);
            (y - fit) * (y - fit)
        })
        .sum();
    let se = (ss_res / (k - 2.0)).sqrt() / sxx.sqrt();
    (slope, se)
}

/// Windowed Assouad-type estimator: the worst normalized window count
/// `log2 N_n(cover, I) / (n - m)` over pairs `m <= (1-eps) n` with
/// `n - m >= min_len`.
pub fn window_assouad(
    h: &CoverHierarchy,
    eps: f64,
    min_len: u32,
) -> Result<f64, EstimatorError> {
    if !h.is_refined() {
        return Err(EstimatorError::NotRefined);
    }
    let mut worst: f64 = 0.0;
    for n in h.n_lo()..=h.n_hi() {
        let fam = h.cover(n).unwrap();
        if fam.is_empty() {
            continue;
        }
        for m in h.n_lo()..n {
            if n - m < min_len || (m as f64) > (1.0 - eps) * (n as f64) {
                continue;
            }
            // group order-n members by order-m ancestor
            let mut best = 0u64;
            let mut cur_anc = u64::MAX;
            let mut cur = 0u64;
            for iv in fam.members_at_order(n) {
                let anc = iv.index() >> (n - m);
                if anc == cur_anc {
                    cur += 1;
                } else {
                    best = best.max(cur);
                    cur_anc = anc;
                    cur = 1;
                }
            }
            best = best.max(cur);
            if best > 0 {
                worst = worst.max((best as f64).log2() / (n - m) as f64);
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Estimated,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Estimated => "estimated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimEstimate {
    pub value: f64,
    pub method: Method,
    pub uncertainty: f64,
}

impl DimEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            method: Method::Exact,
            uncertainty: 0.0,
        }
    }

    pub fn estimated(value: f64, uncertainty: f64) -> Self {
        Self {
            value,
            method: Method::Estimated,
            uncertainty,
        }
    }
}

/// The four dimension values with method metadata. The chain
/// hausdorff <= packing <= modified Assouad <= Assouad must hold within
/// the reported uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionReport {
    pub hausdorff: DimEstimate,
    pub packing: DimEstimate,
    pub modified_assouad: DimEstimate,
    pub assouad: DimEstimate,
}

impl DimensionReport {
    pub fn exact(h: f64, p: f64, ma: f64, a: f64) -> Result<Self, EstimatorError> {
        Self::build(
            DimEstimate::exact(h),
            DimEstimate::exact(p),
            DimEstimate::exact(ma),
            DimEstimate::exact(a),
        )
    }

    pub fn build(
        hausdorff: DimEstimate,
        packing: DimEstimate,
        modified_assouad: DimEstimate,
        assouad: DimEstimate,
    ) -> Result<Self, EstimatorError> {
        let rep = Self {
            hausdorff,
            packing,
            modified_assouad,
            assouad,
        };
        rep.check_chain()?;
        Ok(rep)
    }

    fn ordered(&self) -> [(&'static str, DimEstimate); 4] {
        [
            ("hausdorff", self.hausdorff),
            ("packing", self.packing),
            ("modified_assouad", self.modified_assouad),
            ("assouad", self.assouad),
        ]
    }

    fn check_chain(&self) -> Result<(), EstimatorError> {
        let dims = self.ordered();
        for w in dims.windows(2) {
            let (la, a) = w[0];
            let (lb, b) = w[1];
            // consistent when the uncertainty intervals overlap
            if a.value - a.uncertainty > b.value + b.uncertainty {
                return Err(EstimatorError::ChainViolated(format!(
                    "{la}={} > {lb}={}",
                    a.value, b.value
                )));
            }
        }
        Ok(())
    }

    /// Merge exact values with estimates: exact wins field-wise, but a
    /// disagreement beyond the estimate's uncertainty is a data error.
    pub fn merge(
        exact: Option<&DimensionReport>,
        estimates: Option<&DimensionReport>,
    ) -> Result<DimensionReport, EstimatorError> {
        let pick = |e: Option<DimEstimate>, est: Option<DimEstimate>| -> Result<DimEstimate, EstimatorError> {
            match (e, est) {
                (Some(x), Some(y)) => {
                    if (x.value - y.value).abs() > y.uncertainty + x.uncertainty {
                        return Err(EstimatorError::ConflictingInputs {
                            exact: x.value,
                            estimate: y.value,
                            uncertainty: y.uncertainty,
                        });
                    }
                    Ok(x)
                }
                (Some(x), None) => Ok(x),
                (None, Some(y)) => Ok(y),
                (None, None) => Ok(DimEstimate::estimated(f64::NAN, f64::INFINITY)),
            }
        };
        let rep = DimensionReport {
            hausdorff: pick(exact.map(|r| r.hausdorff), estimates.map(|r| r.hausdorff))?,
            packing: pick(exact.map(|r| r.packing), estimates.map(|r| r.packing))?,
            modified_assouad: pick(
                exact.map(|r| r.modified_assouad),
                estimates.map(|r| r.modified_assouad),
            )?,
            assouad: pick(exact.map(|r| r.assouad), estimates.map(|r| r.assouad))?,
        };
        rep.check_chain()?;
        Ok(rep)
    }

    /// Structured text form, one JSON object.
    pub fn to_json(&self) -> String {
        let field = |e: DimEstimate| {
            format!(
                "{{\"value\": {}, \"method\": \"{}\", \"uncertainty\": {}}}",
                e.value,
                e.method.as_str(),
                e.uncertainty
            )
        };
        format!(
            "{{\"hausdorff\": {}, \"packing\": {}, \"modified_assouad\": {}, \"assouad\": {}}}",
            field(self.hausdorff),
            field(self.packing),
            field(self.modified_assouad),
            field(self.assouad)
        )
    }

    pub const CSV_HEADER: &'static str = "dimension,value,method,uncertainty";

    pub fn to_csv_rows(&self) -> String {
        self.ordered()
            .iter()
            .map(|(name, e)| {
                format!("{},{},{},{}\n", name, e.value, e.method.as_str(), e.uncertainty)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::DyadicInterval;

    fn full_cover(n: u32) -> IntervalFamily {
        (0..1u64 << n)
            .map(|p| DyadicInterval::new(n, p).unwrap())
            .collect()
    }

    fn full_hierarchy(lo: u32, hi: u32) -> CoverHierarchy {
        CoverHierarchy::new(lo, (lo..=hi).map(full_cover).collect(), true).unwrap()
    }

    #[test]
    fn full_covers_have_slope_one() {
        let h = full_hierarchy(2, 10);
        let est = minkowski_slopes(&h, (2, 10)).unwrap();
        assert!((est.slope - 1.0).abs() < 1e-12);
        assert!((est.lower - 1.0).abs() < 1e-12);
        assert!((est.upper - 1.0).abs() < 1e-12);
        assert!(est.uncertainty < 1e-12);
        assert!((window_assouad(&h, 0.25, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_covers_have_slope_zero() {
        let covers: Vec<IntervalFamily> = (3..=9)
            .map(|n| [DyadicInterval::new(n, 0).unwrap()].into_iter().collect())
            .collect();
        let h = CoverHierarchy::new(3, covers, true).unwrap();
        let est = minkowski_slopes(&h, (3, 9)).unwrap();
        assert_eq!(est.slope, 0.0);
        assert_eq!(window_assouad(&h, 0.25, 2).unwrap(), 0.0);
    }

    #[test]
    fn window_assouad_monotone_in_eps() {
        let spec = crate::digit_sets::DigitSetSpec::periodic("10").unwrap();
        let covers: Vec<IntervalFamily> =
            (4..=16).map(|n| spec.cover(n, false).unwrap()).collect();
        let h = CoverHierarchy::new(4, covers, true).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = window_assouad(&h, eps, 4).unwrap();
            assert!(v <= prev + 1e-12, "eps={eps}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn hierarchy_validation() {
        let bad = CoverHierarchy::new(2, vec![full_cover(3)], false);
        assert!(matches!(bad, Err(EstimatorError::MixedOrder(2, 3))));
        // order-3 cover missing the parent of an order-4 member
        let partial: IntervalFamily = [DyadicInterval::new(3, 0).unwrap()].into_iter().collect();
        let child: IntervalFamily = [DyadicInterval::new(4, 7).unwrap()].into_iter().collect();
        let bad = CoverHierarchy::new(3, vec![partial, child], true);
        assert!(matches!(bad, Err(EstimatorError::RefinementBroken(4, 7))));
    }

    #[test]
    fn window_requires_length() {
        let h = full_hierarchy(2, 10);
        assert!(minkowski_slopes(&h, (2, 5)).is_err());
        assert!(minkowski_slopes(&h, (1, 10)).is_err());
    }

    #[test]
    fn report_merge_rules() {
        let exact = DimensionReport::exact(0.5, 0.5, 0.5, 0.5).unwrap();
        let merged = DimensionReport::merge(Some(&exact), None).unwrap();
        assert_eq!(merged.hausdorff.method, Method::Exact);

        // overlapping estimate intervals are consistent
        let est = DimensionReport::build(
            DimEstimate::estimated(0.52, 0.03),
            DimEstimate::estimated(0.48, 0.03),
            DimEstimate::estimated(0.5, 0.03),
            DimEstimate::estimated(0.5, 0.03),
        );
        assert!(est.is_ok());

        // conflicting exact vs estimate is a validation error
        let bad_est = DimensionReport::build(
            DimEstimate::estimated(0.9, 0.05),
            DimEstimate::estimated(0.9, 0.05),
            DimEstimate::estimated(0.9, 0.05),
            DimEstimate::estimated(0.9, 0.05),
        )
        .unwrap();
        assert!(matches!(
            DimensionReport::merge(Some(&exact), Some(&bad_est)),
            Err(EstimatorError::ConflictingInputs { .. })
        ));
    }

    #[test]
    fn chain_violation_is_rejected() {
        assert!(DimensionReport::exact(0.9, 0.5, 0.5, 0.5).is_err());
        assert!(DimensionReport::exact(0.0, 0.5, 1.0, 1.0).is_ok());
    }
}
