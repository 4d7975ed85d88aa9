//! Dyadic counting machinery, exact fractal dimensions for structured
//! subsets of [0,1], an exact fractional Brownian motion sampler, and
//! statistical experiments over path ensembles.

pub use rayon;

pub mod digit_sets;
pub mod dyadic;
pub mod estimators;
pub mod experiments;
pub mod fbm;
pub mod path_counts;
pub mod percolation;
pub mod rng;
pub mod selfsimilar;

pub use digit_sets::{DensityProfile, DigitSetSpec, TailRule};
pub use dyadic::{DyadicInterval, IntervalFamily, ValueInterval};
pub use estimators::{CoverHierarchy, DimEstimate, DimensionReport, Method};
pub use fbm::FbmPath;
pub use path_counts::EventReport;
pub use percolation::PercolationSample;
pub use selfsimilar::Ifs;
