//! Dyadic time intervals, value intervals, and finite interval families
//! with their counting quantities, beta-content, the balanced-family
//! predicate, and the rebalancing/decomposition algorithms.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

/// Orders above this would overflow the index arithmetic; exceeding it is
/// a hard error rather than a silent truncation.
pub const MAX_ORDER: u32 = 60;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DyadicError {
    #[error("order {0} exceeds the cap {MAX_ORDER}")]
    OrderTooLarge(u32),
    #[error("index {index} out of range [0, 2^{order})")]
    IndexOutOfRange { order: u32, index: u64 },
    #[error("count order n={n} must be >= interval order {order}")]
    CountOrderTooSmall { n: u32, order: u32 },
    #[error("window orders require m={m} < n={n}")]
    BadWindow { m: u32, n: u32 },
    #[error("malformed interval line {line:?}")]
    ParseError { line: String },
}

/// The grid atom `[p*2^-n, (p+1)*2^-n]` with `0 <= p < 2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicInterval {
    order: u32,
    index: u64,
}

impl DyadicInterval {
    pub fn new(order: u32, index: u64) -> Result<Self, DyadicError> {
        if order > MAX_ORDER {
            return Err(DyadicError::OrderTooLarge(order));
        }
        if index >= (1u64 << order) {
            return Err(DyadicError::IndexOutOfRange { order, index });
        }
        Ok(Self { order, index })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn left(&self) -> f64 {
        self.index as f64 * self.diameter()
    }

    pub fn right(&self) -> f64 {
        (self.index + 1) as f64 * self.diameter()
    }

    pub fn diameter(&self) -> f64 {
        (-(self.order as f64)).exp2()
    }

    /// Containment of closed dyadic intervals, decided on indices.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.order >= self.order && (other.index >> (other.order - self.order)) == self.index
    }

    /// The ancestor of this interval at a coarser order `m <= order`.
    pub fn ancestor(&self, m: u32) -> DyadicInterval {
        debug_assert!(m <= self.order);
        DyadicInterval {
            order: m,
            index: self.index >> (self.order - m),
        }
    }

    /// Both order-(n+1) children.
    pub fn children(&self) -> [DyadicInterval; 2] {
        [
            DyadicInterval {
                order: self.order + 1,
                index: self.index << 1,
            },
            DyadicInterval {
                order: self.order + 1,
                index: (self.index << 1) | 1,
            },
        ]
    }
}

/// The value-grid atom `[q*2^(-alpha*n), (q+1)*2^(-alpha*n)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueInterval {
    pub order: u32,
    pub index: i64,
    pub hurst: f64,
}

impl ValueInterval {
    pub fn new(order: u32, index: i64, hurst: f64) -> Self {
        Self {
            order,
            index,
            hurst,
        }
    }

    pub fn width(&self) -> f64 {
        (-(self.hurst * self.order as f64)).exp2()
    }

    pub fn left(&self) -> f64 {
        self.index as f64 * self.width()
    }

    pub fn right(&self) -> f64 {
        (self.index + 1) as f64 * self.width()
    }

    /// Index of the value interval of order `n` containing `x` in the
    /// half-open sense `[q*w, (q+1)*w)`.
    pub fn index_of(x: f64, order: u32, hurst: f64) -> i64 {
        let w = (-(hurst * order as f64)).exp2();
        (x / w).floor() as i64
    }
}

/// A finite set of dyadic intervals, possibly of mixed orders, with the
/// canonical (order, index) enumeration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalFamily {
    intervals: BTreeSet<DyadicInterval>,
}

impl IntervalFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, iv: DyadicInterval) -> bool {
        self.intervals.insert(iv)
    }

    pub fn remove(&mut self, iv: &DyadicInterval) -> bool {
        self.intervals.remove(iv)
    }

    pub fn contains(&self, iv: &DyadicInterval) -> bool {
        self.intervals.contains(iv)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicInterval> {
        self.intervals.iter()
    }

    /// Members of order exactly `n`, in index order.
    pub fn members_at_order(&self, n: u32) -> impl Iterator<Item = &DyadicInterval> {
        self.intervals.iter().filter(move |iv| iv.order() == n)
    }

    pub fn max_order(&self) -> Option<u32> {
        self.intervals.iter().map(|iv| iv.order()).max()
    }

    /// `N_n(U, I)`: the number of order-`n` members contained in `I`.
    pub fn count_in(&self, int: &DyadicInterval, n: u32) -> Result<u64, DyadicError> {
        if n < int.order() {
            return Err(DyadicError::CountOrderTooSmall {
                n,
                order: int.order(),
            });
        }
        Ok(self
            .members_at_order(n)
            .filter(|u| int.contains(u))
            .count() as u64)
    }

    /// `N_{m,n}(U)`: the maximum of `count_in` over all order-`m` intervals.
    pub fn max_count(&self, m: u32, n: u32) -> Result<u64, DyadicError> {
        if m >= n {
            return Err(DyadicError::BadWindow { m, n });
        }
        Ok(self
            .window_counts(m, n)
            .map(|(_, c)| c)
            .max()
            .unwrap_or(0))
    }

    /// Counts of order-`n` members grouped by their order-`m` ancestor,
    /// ascending in ancestor index. Only ancestors with a positive count
    /// appear.
    fn window_counts(&self, m: u32, n: u32) -> impl Iterator<Item = (u64, u64)> + '_ {
        debug_assert!(m < n);
        let mut out: Vec<(u64, u64)> = Vec::new();
        for iv in self.members_at_order(n) {
            let anc = iv.index() >> (n - m);
            match out.last_mut() {
                Some((a, c)) if *a == anc => *c += 1,
                _ => out.push((anc, 1)),
            }
        }
        out.into_iter()
    }

    /// Whether `N_{m,n}(U) <= 2^(beta*(n-m))` for every window pair
    /// `m < n` with `m <= (1-eps)*n` and `n` up to the maximum order
    /// present. Ties at the boundary count as balanced.
    pub fn is_balanced(&self, beta: f64, eps: f64) -> bool {
        self.first_violation(beta, eps).is_none()
    }

    /// The lexicographically first (m, n, I) with
    /// `N_n(U, I) = N_{m,n}(U) > 2^(beta*(n-m))` and `m <= (1-eps)*n`,
    /// ordered by smallest m, then smallest n, then smallest index.
    fn first_violation(&self, beta: f64, eps: f64) -> Option<(u32, u32, u64)> {
        let max_order = self.max_order()?;
        for m in 0..max_order {
            for n in (m + 1)..=max_order {
                if (m as f64) > (1.0 - eps) * (n as f64) {
                    continue;
                }
                let max = self
                    .window_counts(m, n)
                    .map(|(_, c)| c)
                    .max()
                    .unwrap_or(0);
                if exceeds_balance_bound(max, beta, n - m) {
                    let idx = self
                        .window_counts(m, n)
                        .find(|&(_, c)| c == max)
                        .map(|(a, _)| a)
                        .expect("maximum is attained");
                    return Some((m, n, idx));
                }
            }
        }
        None
    }

    /// `H^beta(U) = sum over members of (diam U)^beta`.
    pub fn content(&self, beta: f64) -> f64 {
        self.intervals
            .iter()
            .map(|iv| (-beta * iv.order() as f64).exp2())
            .sum()
    }

    /// Rebalance: repeatedly replace the order-n members under the first
    /// violating ancestor by the ancestor itself. The result is
    /// beta-balanced, covers the union of the input, and has content no
    /// larger than the input's.
    pub fn balance(&self, beta: f64) -> IntervalFamily {
        let mut fam = self.clone();
        while let Some((m, n, idx)) = fam.first_violation(beta, 0.0) {
            let anc = DyadicInterval { order: m, index: idx };
            let doomed: Vec<DyadicInterval> = fam
                .members_at_order(n)
                .filter(|u| anc.contains(u))
                .copied()
                .collect();
            for d in &doomed {
                fam.remove(d);
            }
            fam.insert(anc);
        }
        fam
    }

    /// Split into (members with order >= ell, the rest).
    pub fn split_by_order(&self, ell: u32) -> (IntervalFamily, IntervalFamily) {
        let mut high = IntervalFamily::new();
        let mut low = IntervalFamily::new();
        for iv in &self.intervals {
            if iv.order() >= ell {
                high.insert(*iv);
            } else {
                low.insert(*iv);
            }
        }
        (high, low)
    }

    /// Minimal `ell` with `H^(1/k)` of the order->=ell part below `2^-k`.
    pub fn choose_tail_order(&self, k: u32) -> u32 {
        assert!(k >= 1);
        let beta = 1.0 / k as f64;
        let bound = (-(k as f64)).exp2();
        let max = match self.max_order() {
            Some(m) => m,
            None => return 0,
        };
        (0..=max + 1)
            .find(|&ell| self.split_by_order(ell).0.content(beta) < bound)
            .expect("the tail is eventually empty")
    }

    /// Line-based text format, one "n p" per interval, canonical order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for iv in &self.intervals {
            writeln!(s, "{} {}", iv.order(), iv.index()).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DyadicError> {
        let mut fam = IntervalFamily::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| {
                tok.and_then(|t| t.parse::<u64>().ok())
                    .ok_or(DyadicError::ParseError {
                        line: line.to_string(),
                    })
            };
            let n = parse(it.next())? as u32;
            let p = parse(it.next())?;
            if it.next().is_some() {
                return Err(DyadicError::ParseError {
                    line: line.to_string(),
                });
            }
            fam.insert(DyadicInterval::new(n, p)?);
        }
        Ok(fam)
    }
}

impl FromIterator<DyadicInterval> for IntervalFamily {
    fn from_iter<T: IntoIterator<Item = DyadicInterval>>(iter: T) -> Self {
        Self {
            intervals: iter.into_iter().collect(),
        }
    }
}

/// `count > 2^(beta*d)`, compared in exact integer arithmetic when
/// `beta*d` lands on an integer, else on doubles.
fn exceeds_balance_bound(count: u64, beta: f64, d: u32) -> bool {
    let e = beta * d as f64;
    if e.fract() == 0.0 && e >= 0.0 && e < 63.0 {
        count > (1u64 << e as u32)
    } else {
        count as f64 > e.exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(n: u32, p: u64) -> DyadicInterval {
        DyadicInterval::new(n, p).unwrap()
    }

    fn all_order(n: u32) -> IntervalFamily {
        (0..1u64 << n).map(|p| iv(n, p)).collect()
    }

    #[test]
    fn construction_bounds() {
        assert!(DyadicInterval::new(61, 0).is_err());
        assert_eq!(
            DyadicInterval::new(2, 4),
            Err(DyadicError::IndexOutOfRange { order: 2, index: 4 })
        );
        assert_eq!(iv(3, 5).diameter(), 0.125);
        assert_eq!(iv(3, 5).left(), 0.625);
    }

    #[test]
    fn containment_by_bitshift() {
        let half = iv(1, 0);
        assert!(half.contains(&iv(3, 3)));
        assert!(!half.contains(&iv(3, 4)));
        assert!(half.contains(&half));
        assert!(!iv(3, 0).contains(&half));
    }

    #[test]
    fn count_in_examples() {
        let u2 = all_order(2);
        assert_eq!(u2.count_in(&iv(0, 0), 2).unwrap(), 4);
        assert_eq!(u2.count_in(&iv(1, 0), 2).unwrap(), 2);
        // {I_{3,0}, I_{3,5}, I_{2,1}} inside [1/2,1] at order 3: only I_{3,5}.
        let u: IntervalFamily = [iv(3, 0), iv(3, 5), iv(2, 1)].into_iter().collect();
        assert_eq!(u.count_in(&iv(1, 1), 3).unwrap(), 1);
        assert!(u.count_in(&iv(2, 1), 1).is_err());
    }

    #[test]
    fn max_count_examples() {
        assert_eq!(all_order(3).max_count(1, 3).unwrap(), 4);
        let u: IntervalFamily = [iv(3, 0), iv(3, 1), iv(3, 7)].into_iter().collect();
        assert_eq!(u.max_count(1, 3).unwrap(), 2);
        assert_eq!(IntervalFamily::new().max_count(1, 3).unwrap(), 0);
        assert!(u.max_count(3, 3).is_err());
    }

    #[test]
    fn balanced_examples() {
        let u2 = all_order(2);
        // equality boundary N_{0,2} = 4 = 2^2 counts as balanced
        assert!(u2.is_balanced(1.0, 0.0));
        assert!(!u2.is_balanced(0.5, 0.0));
        let singleton: IntervalFamily = [iv(4, 0)].into_iter().collect();
        assert!(singleton.is_balanced(0.1, 0.0));
    }

    #[test]
    fn content_examples() {
        let u2 = all_order(2);
        assert_eq!(u2.content(1.0), 1.0);
        assert_eq!(u2.content(0.5), 2.0);
        assert_eq!(IntervalFamily::new().content(1.0), 0.0);
    }

    #[test]
    fn balance_collapses_full_order_two() {
        let v = all_order(2).balance(0.5);
        let expected: IntervalFamily = [iv(0, 0)].into_iter().collect();
        assert_eq!(v, expected);
        assert_eq!(v.content(0.5), 1.0);
    }

    #[test]
    fn balance_is_identity_on_balanced_input() {
        let u: IntervalFamily = [iv(2, 0), iv(3, 7)].into_iter().collect();
        assert!(u.is_balanced(0.9, 0.0));
        assert_eq!(u.balance(0.9), u);
    }

    #[test]
    fn balance_eight_under_one_half() {
        // eight order-4 intervals under I_{1,0}: 8 > 2^{0.9*3}
        let u: IntervalFamily = (0..8).map(|p| iv(4, p)).collect();
        let v = u.balance(0.9);
        let expected: IntervalFamily = [iv(1, 0)].into_iter().collect();
        assert_eq!(v, expected);
    }

    #[test]
    fn split_by_order_examples() {
        let u: IntervalFamily = [iv(2, 0), iv(5, 3)].into_iter().collect();
        let (hi, lo) = u.split_by_order(4);
        assert_eq!(hi, [iv(5, 3)].into_iter().collect());
        assert_eq!(lo, [iv(2, 0)].into_iter().collect());
        let (hi, lo) = u.split_by_order(0);
        assert_eq!(hi, u);
        assert!(lo.is_empty());
        let (hi, lo) = u.split_by_order(6);
        assert!(hi.is_empty());
        assert_eq!(lo, u);
    }

    #[test]
    fn choose_tail_order_examples() {
        let u: IntervalFamily = [iv(10, 0)].into_iter().collect();
        assert_eq!(u.choose_tail_order(1), 0);
        assert_eq!(IntervalFamily::new().choose_tail_order(3), 0);
        let u4 = all_order(4);
        // 16 * 2^{-4/2} = 4 >= 1/4 for ell <= 4, empty tail at ell = 5
        assert_eq!(u4.choose_tail_order(2), 5);
    }

    #[test]
    fn text_round_trip() {
        let u: IntervalFamily = [iv(2, 1), iv(5, 3), iv(0, 0)].into_iter().collect();
        let text = u.to_text();
        assert_eq!(text, "0 0\n2 1\n5 3\n");
        assert_eq!(IntervalFamily::from_text(&text).unwrap(), u);
        assert!(IntervalFamily::from_text("1 2 3").is_err());
        assert!(IntervalFamily::from_text("2 9").is_err());
    }

    #[test]
    fn partition_property() {
        let u: IntervalFamily = [iv(3, 0), iv(3, 1), iv(3, 6), iv(2, 2)].into_iter().collect();
        for m in 0..3 {
            let total: u64 = (0..1u64 << m)
                .map(|p| u.count_in(&iv(m, p), 3).unwrap())
                .sum();
            assert_eq!(total, u.members_at_order(3).count() as u64);
        }
    }
}
