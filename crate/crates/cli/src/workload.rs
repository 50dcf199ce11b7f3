//! Deterministic query workloads: 1-D ranges with both endpoints drawn from
//! the data keys, 2-D rectangles sampled from data-point coordinate pairs.

use crate::rng::SplitMix64;
use polyfit_core::Point2D;

/// A closed 2-D query rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub l1: f64,
    pub u1: f64,
    pub l2: f64,
    pub u2: f64,
}

pub fn generate_workload_1d(keys: &[f64], count: usize, seed: u64) -> Vec<(f64, f64)> {
    assert!(!keys.is_empty());
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let a = keys[rng.below(keys.len())];
            let b = keys[rng.below(keys.len())];
            (a.min(b), a.max(b))
        })
        .collect()
}

pub fn generate_workload_2d(points: &[Point2D], count: usize, seed: u64) -> Vec<Rect> {
    assert!(!points.is_empty());
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let a = &points[rng.below(points.len())];
            let b = &points[rng.below(points.len())];
            Rect {
                l1: a.u.min(b.u),
                u1: a.u.max(b.u),
                l2: a.v.min(b.v),
                u2: a.v.max(b.v),
            }
        })
        .collect()
}
