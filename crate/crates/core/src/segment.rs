//! Greedy segmentation: partition sampled function values into the minimum
//! number of contiguous intervals whose minimax fits stay within a deviation
//! threshold. Left-to-right maximal growth provably yields the optimal
//! interval count; the exponential-search variant reaches the same
//! boundaries with `O(log len)` LP calls per segment. A quadratic DP oracle
//! is provided for verifying optimality on small instances.

use crate::error::SegmentError;
use crate::fit::{fit_minimax_1d, FitResult};
use crate::poly::PolyCoeffs;

/// How a candidate fit is certified against the deviation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitCheck {
    /// Residuals at the sample keys only. Sufficient for cumulative
    /// functions, which are always evaluated at snapped data keys.
    AtKeys,
    /// Residuals at the keys plus the polynomial's overshoot above the
    /// sample staircase between adjacent keys. Required for MAX queries,
    /// which maximize the polynomial over continuous sub-ranges.
    Envelope,
}

/// A fitted interval owning a contiguous run of sample positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub lo_key: f64,
    pub hi_key: f64,
    pub first_idx: usize,
    pub last_idx: usize,
    pub poly: PolyCoeffs,
    pub certified_error: f64,
}

/// The ordered output of segmentation: segments cover positions
/// `0..samples.len()` contiguously without overlap or gap.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSequence {
    pub segments: Vec<Segment>,
    pub deg: usize,
    pub delta: f64,
}

impl SegmentSequence {
    /// Index of the segment owning `key` under floor semantics: the last
    /// segment whose `lo_key <= key`, or `None` below the key domain.
    pub fn locate(&self, key: f64) -> Option<usize> {
        let idx = self.segments.partition_point(|s| s.lo_key <= key);
        idx.checked_sub(1)
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.last_idx).collect()
    }
}

/// Per-segment LP call counts gathered by the exponential-search variant.
#[derive(Debug, Clone, Default)]
pub struct SegmentationStats {
    pub lp_calls: Vec<usize>,
}

fn fit_interval(
    samples: &[(f64, f64)],
    deg: usize,
    check: FitCheck,
) -> Result<(FitResult, f64), SegmentError> {
    let fit = fit_minimax_1d(samples, deg)?;
    let certified = match check {
        FitCheck::AtKeys => fit.error,
        FitCheck::Envelope => {
            let mut worst = fit.error;
            for pair in samples.windows(2) {
                let peak = fit.poly.max_on_range(pair[0].0, pair[1].0)?;
                let allowed = pair[0].1.max(pair[1].1);
                if peak - allowed > worst {
                    worst = peak - allowed;
                }
            }
            worst
        }
    };
    Ok((fit, certified))
}

fn make_segment(
    samples: &[(f64, f64)],
    first: usize,
    last: usize,
    fit: FitResult,
    certified: f64,
) -> Segment {
    Segment {
        lo_key: samples[first].0,
        hi_key: samples[last].0,
        first_idx: first,
        last_idx: last,
        poly: fit.poly,
        certified_error: certified,
    }
}

/// Plain greedy segmentation: grow the current interval one key at a time
/// while the fit stays within `delta`; on failure emit the previous feasible
/// fit and restart at the failing key. A two-sample interval always fits
/// exactly at `deg >= 1`, so growth never stalls.
pub fn greedy_segmentation(
    samples: &[(f64, f64)],
    deg: usize,
    delta: f64,
    check: FitCheck,
) -> Result<SegmentSequence, SegmentError> {
    assert!(!samples.is_empty(), "segmentation on empty sample set");
    assert!(delta > 0.0, "delta must be positive");
    debug_assert!(samples.windows(2).all(|w| w[0].0 < w[1].0));

    let mut segments = Vec::new();
    let mut start = 0usize;
    let (mut prev_fit, mut prev_err) = fit_interval(&samples[start..=start], deg, check)?;
    for u in 1..samples.len() {
        let (fit, err) = fit_interval(&samples[start..=u], deg, check)?;
        if err > delta {
            segments.push(make_segment(samples, start, u - 1, prev_fit, prev_err));
            start = u;
            let (f, e) = fit_interval(&samples[start..=start], deg, check)?;
            prev_fit = f;
            prev_err = e;
        } else {
            prev_fit = fit;
            prev_err = err;
        }
    }
    segments.push(make_segment(
        samples,
        start,
        samples.len() - 1,
        prev_fit,
        prev_err,
    ));
    Ok(SegmentSequence {
        segments,
        deg,
        delta,
    })
}

/// Greedy segmentation accelerated by exponential search: double the
/// candidate right endpoint until the fit breaks `delta`, then binary-search
/// the maximal feasible endpoint. Produces the same boundaries as
/// [`greedy_segmentation`]; the fit-error monotonicity under interval
/// extension is what makes the doubling predicate searchable.
pub fn greedy_segmentation_exp(
    samples: &[(f64, f64)],
    deg: usize,
    delta: f64,
    check: FitCheck,
) -> Result<(SegmentSequence, SegmentationStats), SegmentError> {
    assert!(!samples.is_empty(), "segmentation on empty sample set");
    assert!(delta > 0.0, "delta must be positive");
    debug_assert!(samples.windows(2).all(|w| w[0].0 < w[1].0));

    let len = samples.len();
    let mut segments = Vec::new();
    let mut stats = SegmentationStats::default();
    let mut start = 0usize;

    while start < len {
        let mut calls = 0usize;
        if start == len - 1 {
            let (fit, err) = fit_interval(&samples[start..=start], deg, check)?;
            calls += 1;
            segments.push(make_segment(samples, start, start, fit, err));
            stats.lp_calls.push(calls);
            break;
        }

        // Known feasible end and its fit; the singleton base never fails.
        let (mut best_fit, mut best_err) = fit_interval(&samples[start..=start], deg, check)?;
        calls += 1;
        let mut best_end = start;
        let mut failed_end: Option<usize> = None;

        let mut step = 1usize;
        loop {
            let probe = (start + step).min(len - 1);
            let (fit, err) = fit_interval(&samples[start..=probe], deg, check)?;
            calls += 1;
            if err <= delta {
                best_fit = fit;
                best_err = err;
                best_end = probe;
                if probe == len - 1 {
                    break;
                }
                step *= 2;
            } else {
                failed_end = Some(probe);
                break;
            }
        }

        if let Some(mut hi) = failed_end {
            // Invariant: best_end feasible, hi infeasible.
            while hi - best_end > 1 {
                let mid = best_end + (hi - best_end) / 2;
                let (fit, err) = fit_interval(&samples[start..=mid], deg, check)?;
                calls += 1;
                if err <= delta {
                    best_fit = fit;
                    best_err = err;
                    best_end = mid;
                } else {
                    hi = mid;
                }
            }
        }

        segments.push(make_segment(samples, start, best_end, best_fit, best_err));
        stats.lp_calls.push(calls);
        start = best_end + 1;
    }

    Ok((
        SegmentSequence {
            segments,
            deg,
            delta,
        },
        stats,
    ))
}

/// Cap on the DP oracle's instance size; it exists to verify optimality in
/// tests, not to build real indexes.
pub const DP_ORACLE_CAP: usize = 500;

/// Exact minimum number of intervals with per-interval minimax error within
/// `delta`, by dynamic programming over split points. Each start position
/// extends while feasible; extension stops at the first failure, which the
/// subset-monotonicity of the fit error makes safe.
pub fn dp_oracle(samples: &[(f64, f64)], deg: usize, delta: f64) -> Result<usize, SegmentError> {
    let len = samples.len();
    if len > DP_ORACLE_CAP {
        return Err(SegmentError::InstanceTooLarge {
            len,
            cap: DP_ORACLE_CAP,
        });
    }
    assert!(len > 0, "dp_oracle on empty sample set");

    const UNREACHED: usize = usize::MAX;
    let mut dp = vec![UNREACHED; len + 1];
    dp[0] = 0;
    for i in 0..len {
        if dp[i] == UNREACHED {
            continue;
        }
        for j in i..len {
            let (_, err) = fit_interval(&samples[i..=j], deg, FitCheck::AtKeys)?;
            if err > delta {
                break;
            }
            dp[j + 1] = dp[j + 1].min(dp[i] + 1);
        }
    }
    Ok(dp[len])
}
