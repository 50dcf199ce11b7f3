//! The one-dimensional PolyFit index: an ordered segment index with per-node
//! aggregates, query engines for SUM/COUNT and MAX/MIN under absolute or
//! relative error guarantees, and exact-structure refinement when a relative
//! acceptance test fails.
//!
//! Guarantee coupling: an index built with deviation threshold `delta`
//! answers absolute-mode SUM queries for `eps_abs = 2 * delta` and MAX
//! queries for `eps_abs = delta`; the query path enforces the match rather
//! than silently weakening the bound.

use std::time::Instant;

use crate::error::{BuildError, FitError, QueryError};
use crate::model::{
    build_cum_array, exact_function, exact_sum, AggregateKind, AggregateMaxTree, Dataset,
    ErrorSpec, KeyCumArray,
};
use crate::poly::{PolyCoeffs, MAX_DEG_1D, MAX_DEG_RANGE_MAX};
use crate::segment::{greedy_segmentation_exp, FitCheck, Segment, SegmentSequence};

/// Fan-out of the static aggregate tree layered over the segment array.
const SEGMENT_FANOUT: usize = 16;

/// Stride of the sampled key array that routes floor searches. Two levels
/// keep most of the binary search inside a cache-resident sample instead of
/// walking the full key array.
const ROUTER_STRIDE: usize = 64;

/// Two-level floor lookup over a sorted key array.
#[derive(Debug, Clone, PartialEq)]
struct KeyRouter {
    sampled: Vec<f64>,
}

impl KeyRouter {
    fn build(keys: &[f64]) -> KeyRouter {
        KeyRouter {
            sampled: keys.iter().copied().step_by(ROUTER_STRIDE).collect(),
        }
    }

    /// Index of the largest key `<= q`.
    fn floor_le(&self, keys: &[f64], q: f64) -> Option<usize> {
        let block = self.sampled.partition_point(|&k| k <= q).checked_sub(1)?;
        let start = block * ROUTER_STRIDE;
        let end = (start + ROUTER_STRIDE).min(keys.len());
        let within = keys[start..end].partition_point(|&k| k <= q);
        Some(start + within - 1)
    }

    /// Index of the largest key strictly below `q`.
    fn floor_lt(&self, keys: &[f64], q: f64) -> Option<usize> {
        let block = self.sampled.partition_point(|&k| k < q).checked_sub(1)?;
        let start = block * ROUTER_STRIDE;
        let end = (start + ROUTER_STRIDE).min(keys.len());
        let within = keys[start..end].partition_point(|&k| k < q);
        Some(start + within - 1)
    }
}

/// Which side of a query endpoint to snap to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapSide {
    /// Largest data key strictly below the query value.
    Left,
    /// Largest data key at or below the query value.
    Right,
}

/// Snap a query coordinate onto the data-key staircase. The cumulative
/// function is constant between keys, so evaluating the fitted polynomial at
/// the snapped key inherits the certified per-key error bound. `None` means
/// the coordinate falls below the key domain and contributes zero.
pub fn snap(keys: &[f64], q: f64, side: SnapSide) -> Option<f64> {
    let idx = match side {
        SnapSide::Right => keys.partition_point(|&k| k <= q),
        SnapSide::Left => keys.partition_point(|&k| k < q),
    };
    idx.checked_sub(1).map(|i| keys[i])
}

/// Maximum of a fitted polynomial over a closed key range, from border
/// values and zero-derivative points. Degrees above 3 are rejected; the
/// closed forms stop being cheap there.
pub fn poly_max_on_range(p: &PolyCoeffs, lo: f64, hi: f64) -> Result<f64, FitError> {
    p.max_on_range(lo, hi)
}

/// An approximate answer plus whether exact refinement produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub value: f64,
    /// True when the exact fallback was consulted; the value is then exact.
    pub refined: bool,
    pub guarantee: ErrorSpec,
}

/// Static fan-out-16 aggregate tree over per-segment maxima. Internal
/// entries store the exact max of the dataset measures under their span, so
/// the fully-covered contribution of a MAX query is error-free.
#[derive(Debug, Clone, PartialEq)]
struct SegmentAgg {
    /// `levels[0]` holds one entry per segment; each higher level aggregates
    /// groups of [`SEGMENT_FANOUT`] entries.
    levels: Vec<Vec<f64>>,
}

impl SegmentAgg {
    fn build(leaf: Vec<f64>) -> SegmentAgg {
        let mut levels = vec![leaf];
        while levels.last().unwrap().len() > 1 {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = prev
                .chunks(SEGMENT_FANOUT)
                .map(|c| c.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
                .collect();
            levels.push(next);
        }
        SegmentAgg { levels }
    }

    fn height(&self) -> usize {
        self.levels.len()
    }

    /// Max over segment positions `lo..=hi`, counting the nodes descended
    /// into. At most two nodes per level straddle the range boundary.
    fn range_max(&self, lo: usize, hi: usize, visits: &mut usize) -> f64 {
        if lo > hi {
            return f64::NEG_INFINITY;
        }
        let top = self.levels.len() - 1;
        self.node_max(top, 0, lo, hi, visits)
    }

    fn node_max(&self, level: usize, idx: usize, lo: usize, hi: usize, visits: &mut usize) -> f64 {
        let span = SEGMENT_FANOUT.pow(level as u32);
        let node_lo = idx * span;
        let node_hi = (node_lo + span - 1).min(self.levels[0].len() - 1);
        if lo <= node_lo && node_hi <= hi {
            return self.levels[level][idx];
        }
        *visits += 1;
        debug_assert!(level > 0, "leaf entries are either covered or disjoint");
        let child_span = span / SEGMENT_FANOUT;
        let first = idx * SEGMENT_FANOUT;
        let mut best = f64::NEG_INFINITY;
        for c in first..(first + SEGMENT_FANOUT).min(self.levels[level - 1].len()) {
            let c_lo = c * child_span;
            let c_hi = c_lo + child_span - 1;
            if c_hi < lo || c_lo > hi {
                continue;
            }
            best = best.max(self.node_max(level - 1, c, lo, hi, visits));
        }
        best
    }
}

/// The PolyFit index over one key.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyIndex1D {
    agg: AggregateKind,
    deg: usize,
    delta: f64,
    keys: Vec<f64>,
    router: KeyRouter,
    /// Measures as ingested (MIN keeps its original sign here; the
    /// negation lives in the derived structures).
    measures: Vec<f64>,
    seq: SegmentSequence,
    cum: Option<KeyCumArray>,
    max_tree: Option<AggregateMaxTree>,
    seg_agg: Option<SegmentAgg>,
    has_negative: bool,
}

/// Build the index: segment the exact function, attach the exact fallback
/// structures, and populate internal aggregates from the data itself.
pub fn build_index(
    d: &Dataset,
    agg: AggregateKind,
    deg: usize,
    delta: f64,
) -> Result<PolyIndex1D, BuildError> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(BuildError::NonPositiveDelta(delta));
    }
    let max_deg = if agg.is_cumulative() {
        MAX_DEG_1D
    } else {
        MAX_DEG_RANGE_MAX
    };
    if deg < 1 || deg > max_deg {
        return Err(BuildError::Fit(FitError::DegreeOutOfRange {
            deg,
            min: 1,
            max: max_deg,
        }));
    }

    let samples = exact_function(d, agg);
    // MAX queries maximize the polynomial over continuous sub-ranges, so the
    // certification must bound the inter-key envelope, not just the
    // residuals at the keys.
    let check = if agg.is_cumulative() {
        FitCheck::AtKeys
    } else {
        FitCheck::Envelope
    };
    let (seq, _) = greedy_segmentation_exp(&samples, deg, delta, check)?;

    let keys: Vec<f64> = d.keys().collect();
    let measures: Vec<f64> = d.measures().collect();
    let internal: Vec<f64> = match agg {
        AggregateKind::Min => measures.iter().map(|&m| -m).collect(),
        _ => measures.clone(),
    };
    let has_negative = internal.iter().any(|&m| m < 0.0);

    let (cum, max_tree, seg_agg) = if agg.is_cumulative() {
        (Some(build_cum_array(d)), None, None)
    } else {
        let tree = AggregateMaxTree::from_measures(keys.clone(), &internal);
        let leaf: Vec<f64> = seq
            .segments
            .iter()
            .map(|s| {
                internal[s.first_idx..=s.last_idx]
                    .iter()
                    .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            })
            .collect();
        (None, Some(tree), Some(SegmentAgg::build(leaf)))
    };

    let router = KeyRouter::build(&keys);
    Ok(PolyIndex1D {
        agg,
        deg,
        delta,
        keys,
        router,
        measures,
        seq,
        cum,
        max_tree,
        seg_agg,
        has_negative,
    })
}

impl PolyIndex1D {
    pub fn agg(&self) -> AggregateKind {
        self.agg
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn segments(&self) -> &[Segment] {
        &self.seq.segments
    }

    /// Bytes attributable to the learned model itself: segment bounds,
    /// coefficients, key maps, and certified errors. The exact fallback is
    /// accounted separately since it scales with the data.
    pub fn model_bytes(&self) -> usize {
        let per_segment = (self.deg + 1 + 6) * 8; // coeffs + bounds/indices/map/error
        let agg_bytes: usize = self
            .seg_agg
            .as_ref()
            .map(|a| a.levels.iter().map(|l| l.len() * 8).sum())
            .unwrap_or(0);
        self.seq.segments.len() * per_segment + agg_bytes
    }

    /// Bytes held by the exact fallback structures (keys, measures, and the
    /// trees rebuilt over them).
    pub fn fallback_bytes(&self) -> usize {
        let base = self.keys.len() * 16;
        let tree = self.max_tree.as_ref().map(|t| t.len() * 16).unwrap_or(0);
        let cum = self.cum.as_ref().map(|c| c.len() * 8).unwrap_or(0);
        base + tree + cum
    }

    /// Reassemble an index from serialized parts; derived structures are
    /// rebuilt deterministically from the stored keys and measures.
    pub fn from_parts(
        agg: AggregateKind,
        deg: usize,
        delta: f64,
        keys: Vec<f64>,
        measures: Vec<f64>,
        segments: Vec<Segment>,
    ) -> Result<PolyIndex1D, BuildError> {
        if delta <= 0.0 || !delta.is_finite() {
            return Err(BuildError::NonPositiveDelta(delta));
        }
        let internal: Vec<f64> = match agg {
            AggregateKind::Min => measures.iter().map(|&m| -m).collect(),
            _ => measures.clone(),
        };
        let has_negative = internal.iter().any(|&m| m < 0.0);
        let seq = SegmentSequence {
            segments,
            deg,
            delta,
        };
        let (cum, max_tree, seg_agg) = if agg.is_cumulative() {
            let d = Dataset::from_sorted_parts(&keys, &measures)?;
            (Some(build_cum_array(&d)), None, None)
        } else {
            let tree = AggregateMaxTree::from_measures(keys.clone(), &internal);
            let leaf: Vec<f64> = seq
                .segments
                .iter()
                .map(|s| {
                    internal[s.first_idx..=s.last_idx]
                        .iter()
                        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                })
                .collect();
            (None, Some(tree), Some(SegmentAgg::build(leaf)))
        };
        let router = KeyRouter::build(&keys);
        Ok(PolyIndex1D {
            agg,
            deg,
            delta,
            keys,
            router,
            measures,
            seq,
            cum,
            max_tree,
            seg_agg,
            has_negative,
        })
    }

    /// Exact answer over `[l, u]` through the fallback structures
    /// (cumulative array or max tree, with the MIN sign restored).
    pub fn exact(&self, l: f64, u: f64) -> f64 {
        if let Some(cum) = &self.cum {
            exact_sum(cum, l, u)
        } else {
            let inner = self.max_tree.as_ref().expect("max index").exact_max(l, u);
            if self.agg == AggregateKind::Min {
                -inner
            } else {
                inner
            }
        }
    }

    /// Locate the segment owning a data key.
    pub fn locate(&self, key: f64) -> Option<usize> {
        self.seq.locate(key)
    }

    pub fn snap(&self, q: f64, side: SnapSide) -> Option<f64> {
        let idx = match side {
            SnapSide::Right => self.router.floor_le(&self.keys, q),
            SnapSide::Left => self.router.floor_lt(&self.keys, q),
        };
        idx.map(|i| self.keys[i])
    }

    fn check_abs_coupling(&self, eps: f64, factor: f64) -> Result<(), QueryError> {
        let required = eps / factor;
        let tol = 1e-12 * required.abs().max(self.delta.abs());
        if (required - self.delta).abs() > tol {
            return Err(QueryError::GuaranteeMismatch {
                eps,
                required,
                actual: self.delta,
            });
        }
        Ok(())
    }

    fn eval_at_snapped(&self, snapped: Option<f64>) -> f64 {
        match snapped {
            None => 0.0,
            Some(k) => {
                let seg = &self.seq.segments[self.locate(k).expect("data key owns a segment")];
                seg.poly.eval(k)
            }
        }
    }

    /// Approximate SUM/COUNT over `[l, u]` (Q_abs or Q_rel).
    ///
    /// The answer is the difference of two polynomial evaluations at snapped
    /// endpoints. Absolute mode requires the index to have been built with
    /// `delta = eps_abs / 2` and never refines; relative mode refines through
    /// the cumulative array when the acceptance threshold
    /// `2 delta (1 + 1/eps_rel)` is not met (two-sided when negative
    /// measures are present).
    pub fn query_sum(&self, l: f64, u: f64, spec: ErrorSpec) -> Result<QueryOutcome, QueryError> {
        assert!(
            self.agg.is_cumulative(),
            "query_sum on a {} index",
            self.agg.as_str()
        );
        assert!(spec.epsilon() > 0.0, "epsilon must be positive");
        if l > u {
            return Err(QueryError::InvalidRange { lo: l, hi: u });
        }
        let approx =
            self.eval_at_snapped(self.snap(u, SnapSide::Right)) - self.eval_at_snapped(self.snap(l, SnapSide::Left));
        match spec {
            ErrorSpec::Abs(eps) => {
                self.check_abs_coupling(eps, 2.0)?;
                Ok(QueryOutcome {
                    value: approx,
                    refined: false,
                    guarantee: spec,
                })
            }
            ErrorSpec::Rel(eps) => {
                let threshold = 2.0 * self.delta * (1.0 + 1.0 / eps);
                let accepted = approx >= threshold || (self.has_negative && approx <= -threshold);
                if accepted {
                    Ok(QueryOutcome {
                        value: approx,
                        refined: false,
                        guarantee: spec,
                    })
                } else {
                    let exact = exact_sum(self.cum.as_ref().expect("cumulative index"), l, u);
                    Ok(QueryOutcome {
                        value: exact,
                        refined: true,
                        guarantee: spec,
                    })
                }
            }
        }
    }

    /// Approximate MAX/MIN over `[l, u]` (Q_abs or Q_rel).
    ///
    /// Combines three contributions: polynomial maxima of the two boundary
    /// segments over their intersection with the query range, and the exact
    /// stored aggregates of fully covered nodes. Absolute mode requires
    /// `delta = eps_abs`. An empty key range yields the -inf sentinel
    /// (+inf for MIN), flagged as refined since it is exact.
    pub fn query_max(&self, l: f64, u: f64, spec: ErrorSpec) -> Result<QueryOutcome, QueryError> {
        self.query_max_with_visits(l, u, spec).map(|(o, _)| o)
    }

    /// As [`Self::query_max`], also reporting the number of aggregate-tree
    /// nodes descended into.
    pub fn query_max_with_visits(
        &self,
        l: f64,
        u: f64,
        spec: ErrorSpec,
    ) -> Result<(QueryOutcome, usize), QueryError> {
        assert!(
            !self.agg.is_cumulative(),
            "query_max on a {} index",
            self.agg.as_str()
        );
        assert!(spec.epsilon() > 0.0, "epsilon must be positive");
        if l > u {
            return Err(QueryError::InvalidRange { lo: l, hi: u });
        }
        if let ErrorSpec::Abs(eps) = spec {
            self.check_abs_coupling(eps, 1.0)?;
        }

        let flip = if self.agg == AggregateKind::Min {
            -1.0
        } else {
            1.0
        };

        let lo_pos = self.router.floor_lt(&self.keys, l).map_or(0, |i| i + 1);
        let hi_pos = self.router.floor_le(&self.keys, u).map_or(0, |i| i + 1);
        if lo_pos >= hi_pos {
            return Ok((
                QueryOutcome {
                    value: flip * f64::NEG_INFINITY,
                    refined: true,
                    guarantee: spec,
                },
                0,
            ));
        }

        let segs = &self.seq.segments;
        // First and last segments intersecting [l, u].
        let sa = match self.locate(l) {
            None => 0,
            Some(i) if l <= segs[i].hi_key => i,
            Some(i) => i + 1,
        };
        let sb = self.locate(u).expect("non-empty key range");
        debug_assert!(sa <= sb);

        let mut visits = 0usize;
        let mut approx = f64::NEG_INFINITY;
        let covered = |s: &Segment| l <= s.lo_key && s.hi_key <= u;

        let mut mid_lo = sa;
        let mut mid_hi = sb;
        if !covered(&segs[sa]) {
            let s = &segs[sa];
            let a = l.max(s.lo_key);
            let b = u.min(s.hi_key);
            let m = s.poly.max_on_range(a, b).expect("deg capped at build");
            approx = approx.max(m);
            mid_lo = sa + 1;
        }
        if sb > sa && !covered(&segs[sb]) {
            let s = &segs[sb];
            let a = l.max(s.lo_key);
            let b = u.min(s.hi_key);
            let m = s.poly.max_on_range(a, b).expect("deg capped at build");
            approx = approx.max(m);
            mid_hi = sb - 1;
        }
        if mid_lo <= mid_hi {
            let agg = self.seg_agg.as_ref().expect("max index");
            approx = approx.max(agg.range_max(mid_lo, mid_hi, &mut visits));
        }

        let outcome = match spec {
            ErrorSpec::Abs(_) => QueryOutcome {
                value: flip * approx,
                refined: false,
                guarantee: spec,
            },
            ErrorSpec::Rel(eps) => {
                let threshold = self.delta * (1.0 + 1.0 / eps);
                let accepted =
                    approx >= threshold || (self.has_negative && approx <= -threshold);
                if accepted {
                    QueryOutcome {
                        value: flip * approx,
                        refined: false,
                        guarantee: spec,
                    }
                } else {
                    let exact = self
                        .max_tree
                        .as_ref()
                        .expect("max index")
                        .exact_max(l, u);
                    QueryOutcome {
                        value: flip * exact,
                        refined: true,
                        guarantee: spec,
                    }
                }
            }
        };
        Ok((outcome, visits))
    }

    /// Height of the segment aggregate tree (1 for a single-node index).
    pub fn height(&self) -> usize {
        self.seg_agg
            .as_ref()
            .map(|a| a.height())
            .unwrap_or_else(|| {
                let mut h = 1;
                let mut n = self.seq.segments.len();
                while n > 1 {
                    n = n.div_ceil(SEGMENT_FANOUT);
                    h += 1;
                }
                h
            })
    }
}

/// One measurement row of a deg/delta tuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub deg: usize,
    pub delta: f64,
    pub segment_count: usize,
    pub model_bytes: usize,
    pub build_ms: f64,
    pub mean_query_ns: f64,
    pub median_query_ns: f64,
    pub refinement_rate: f64,
}

/// Measure build cost, query latency, and refinement rate over a parameter
/// grid. Pure measurement; results depend only on the inputs and the clock.
pub fn tune(
    d: &Dataset,
    agg: AggregateKind,
    degrees: &[usize],
    deltas: &[f64],
    eps_rel: f64,
    workload: &[(f64, f64)],
) -> Result<Vec<TuneRow>, BuildError> {
    let mut rows = Vec::with_capacity(degrees.len() * deltas.len());
    for &deg in degrees {
        for &delta in deltas {
            let t0 = Instant::now();
            let idx = build_index(d, agg, deg, delta)?;
            let build_ms = t0.elapsed().as_secs_f64() * 1e3;

            let mut latencies: Vec<f64> = Vec::with_capacity(workload.len());
            let mut refined = 0usize;
            for &(l, u) in workload {
                let t = Instant::now();
                let out = if agg.is_cumulative() {
                    idx.query_sum(l, u, ErrorSpec::Rel(eps_rel))
                } else {
                    idx.query_max(l, u, ErrorSpec::Rel(eps_rel))
                }
                .expect("workload ranges are valid");
                latencies.push(t.elapsed().as_secs_f64() * 1e9);
                if out.refined {
                    refined += 1;
                }
            }
            latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = latencies.iter().sum::<f64>() / latencies.len().max(1) as f64;
            let median = if latencies.is_empty() {
                0.0
            } else {
                latencies[latencies.len() / 2]
            };
            rows.push(TuneRow {
                deg,
                delta,
                segment_count: idx.segments().len(),
                model_bytes: idx.model_bytes(),
                build_ms,
                mean_query_ns: mean,
                median_query_ns: median,
                refinement_rate: refined as f64 / workload.len().max(1) as f64,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ingest;

    fn sum_index(rows: &[(f64, f64)], deg: usize, delta: f64) -> PolyIndex1D {
        let d = ingest(rows, AggregateKind::Sum).unwrap();
        build_index(&d, AggregateKind::Sum, deg, delta).unwrap()
    }

    #[test]
    fn snap_examples() {
        let keys = [1.0, 2.0, 3.0];
        assert_eq!(snap(&keys, 2.5, SnapSide::Right), Some(2.0));
        assert_eq!(snap(&keys, 2.0, SnapSide::Left), Some(1.0));
        assert_eq!(snap(&keys, 0.5, SnapSide::Right), None);
        assert_eq!(snap(&keys, 1.0, SnapSide::Left), None);
    }

    #[test]
    fn router_matches_plain_binary_search() {
        // Sizes straddling the router stride, including exact multiples.
        for n in [1usize, 5, 63, 64, 65, 200, 1024, 1029] {
            let keys: Vec<f64> = (0..n).map(|i| i as f64 * 1.5).collect();
            let router = KeyRouter::build(&keys);
            let mut q = -2.0;
            while q < n as f64 * 1.5 + 2.0 {
                let le = keys.partition_point(|&k| k <= q).checked_sub(1);
                let lt = keys.partition_point(|&k| k < q).checked_sub(1);
                assert_eq!(router.floor_le(&keys, q), le, "n={n} q={q}");
                assert_eq!(router.floor_lt(&keys, q), lt, "n={n} q={q}");
                q += 0.75;
            }
        }
    }

    #[test]
    fn linear_dataset_builds_one_segment() {
        let rows: Vec<(f64, f64)> = (1..=4).map(|i| (i as f64, 2.0)).collect();
        let idx = sum_index(&rows, 1, 1.0);
        assert_eq!(idx.segments().len(), 1);
        assert_eq!(idx.height(), 1);
    }

    #[test]
    fn step_dataset_needs_multiple_segments() {
        let rows = [(1.0, 0.0), (2.0, 0.0), (3.0, 10.0), (4.0, 10.0)];
        let idx = sum_index(&rows, 1, 0.5);
        assert!(idx.segments().len() >= 2, "{}", idx.segments().len());
    }

    #[test]
    fn abs_coupling_enforced() {
        let idx = sum_index(&[(1.0, 1.0), (2.0, 2.0), (3.0, 1.0)], 1, 1.0);
        assert!(matches!(
            idx.query_sum(1.0, 2.0, ErrorSpec::Abs(3.0)),
            Err(QueryError::GuaranteeMismatch { .. })
        ));
        assert!(idx.query_sum(1.0, 2.0, ErrorSpec::Abs(2.0)).is_ok());
    }

    #[test]
    fn invalid_range_rejected() {
        let idx = sum_index(&[(1.0, 1.0), (2.0, 2.0)], 1, 1.0);
        assert!(matches!(
            idx.query_sum(2.0, 1.0, ErrorSpec::Abs(2.0)),
            Err(QueryError::InvalidRange { .. })
        ));
    }

    #[test]
    fn abs_sum_honours_bound_on_small_dataset() {
        let rows: Vec<(f64, f64)> = (0..200)
            .map(|i| (i as f64 * 0.7, ((i * 37) % 11) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let arr = build_cum_array(&d);
        let eps = 8.0;
        let idx = build_index(&d, AggregateKind::Sum, 2, eps / 2.0).unwrap();
        let keys: Vec<f64> = d.keys().collect();
        // Exhaustive over all key pairs.
        for (a, &l) in keys.iter().enumerate() {
            for &u in &keys[a..] {
                let got = idx.query_sum(l, u, ErrorSpec::Abs(eps)).unwrap();
                let exact = exact_sum(&arr, l, u);
                assert!(
                    (got.value - exact).abs() <= eps + 1e-9,
                    "[{l},{u}]: {} vs {exact}",
                    got.value
                );
                assert!(!got.refined);
            }
        }
    }

    #[test]
    fn rel_sum_refines_below_threshold() {
        let rows: Vec<(f64, f64)> = (0..500).map(|i| (i as f64, 10.0)).collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let arr = build_cum_array(&d);
        let idx = build_index(&d, AggregateKind::Sum, 1, 10.0).unwrap();
        let eps = 0.01;
        // Tiny query: the approximate sum falls below 2*10*101 = 2020.
        let out = idx.query_sum(3.0, 6.0, ErrorSpec::Rel(eps)).unwrap();
        assert!(out.refined);
        assert_eq!(out.value, exact_sum(&arr, 3.0, 6.0));
        // Huge query (sum 5000): accepted unrefined and within the bound.
        let out = idx.query_sum(0.0, 499.0, ErrorSpec::Rel(eps)).unwrap();
        assert!(!out.refined);
        let exact = exact_sum(&arr, 0.0, 499.0);
        assert!(((out.value - exact) / exact).abs() <= eps);
    }

    #[test]
    fn max_root_aggregate_is_dataset_max() {
        let rows: Vec<(f64, f64)> = (0..300)
            .map(|i| (i as f64, ((i * 97) % 50) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let idx = build_index(&d, AggregateKind::Max, 2, 2.0).unwrap();
        let out = idx
            .query_max(-1e9, 1e9, ErrorSpec::Abs(2.0))
            .unwrap();
        let exact = d.measures().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.value, exact);
    }

    #[test]
    fn abs_max_honours_bound() {
        let rows: Vec<(f64, f64)> = (0..400)
            .map(|i| {
                let k = i as f64 * 0.3;
                (k, (k * 0.9).sin() * 40.0 + ((i % 13) as f64))
            })
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let eps = 3.0;
        let idx = build_index(&d, AggregateKind::Max, 3, eps).unwrap();
        let tree = build_max_tree_for(&d);
        let keys: Vec<f64> = d.keys().collect();
        let mut s = 0x12345u64;
        for _ in 0..500 {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let a = (s as usize >> 3) % keys.len();
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let b = (s as usize >> 3) % keys.len();
            let (l, u) = (keys[a.min(b)], keys[a.max(b)]);
            let got = idx.query_max(l, u, ErrorSpec::Abs(eps)).unwrap();
            let exact = tree.exact_max(l, u);
            assert!(
                (got.value - exact).abs() <= eps + 1e-9,
                "[{l},{u}]: {} vs {exact}",
                got.value
            );
        }
    }

    fn build_max_tree_for(d: &Dataset) -> AggregateMaxTree {
        crate::model::build_max_tree(d)
    }

    #[test]
    fn abs_max_exhaustive_on_small_dataset() {
        let rows: Vec<(f64, f64)> = (0..60)
            .map(|i| (i as f64 * 1.3, ((i * 29) % 17) as f64 + (i % 3) as f64 * 4.0))
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let eps = 2.0;
        let idx = build_index(&d, AggregateKind::Max, 2, eps).unwrap();
        let keys: Vec<f64> = d.keys().collect();
        for (a, &l) in keys.iter().enumerate() {
            for &u in &keys[a..] {
                let got = idx.query_max(l, u, ErrorSpec::Abs(eps)).unwrap();
                let exact = rows
                    .iter()
                    .filter(|r| r.0 >= l && r.0 <= u)
                    .map(|r| r.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    (got.value - exact).abs() <= eps + 1e-9,
                    "[{l},{u}]: {} vs {exact}",
                    got.value
                );
            }
        }
    }

    #[test]
    fn covered_span_contribution_is_exact() {
        let rows: Vec<(f64, f64)> = (0..1200)
            .map(|i| (i as f64, ((i * 7919) % 211) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let idx = build_index(&d, AggregateKind::Max, 2, 3.0).unwrap();
        let segs = idx.segments();
        assert!(segs.len() >= 4, "want several segments, got {}", segs.len());
        // A query exactly spanning whole segments draws only on stored
        // aggregates, which carry no fitting error at all.
        let (l, u) = (segs[1].lo_key, segs[segs.len() - 2].hi_key);
        let got = idx.query_max(l, u, ErrorSpec::Abs(3.0)).unwrap();
        let exact = rows
            .iter()
            .filter(|r| r.0 >= l && r.0 <= u)
            .map(|r| r.1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(got.value, exact);
    }

    #[test]
    fn negative_sums_accepted_two_sided() {
        // Strongly negative measures: the relative acceptance must also
        // trigger on the negative side instead of refining everything.
        let rows: Vec<(f64, f64)> = (0..5000)
            .map(|i| (i as f64, -10.0 - ((i * 13) % 7) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let idx = build_index(&d, AggregateKind::Sum, 2, 25.0).unwrap();
        let eps = 0.01;
        // Sum over the whole domain is about -66k, far below the negative
        // threshold -2*25*101 = -5050.
        let out = idx.query_sum(0.0, 4999.0, ErrorSpec::Rel(eps)).unwrap();
        assert!(!out.refined, "large negative sum should be accepted");
        let exact: f64 = rows.iter().map(|r| r.1).sum();
        assert!(((out.value - exact) / exact).abs() <= eps);
        // A tiny range still refines.
        let out = idx.query_sum(10.0, 12.0, ErrorSpec::Rel(eps)).unwrap();
        assert!(out.refined);
    }

    #[test]
    fn single_record_index_works() {
        for agg in [AggregateKind::Sum, AggregateKind::Max, AggregateKind::Min] {
            let d = ingest(&[(5.0, 7.0)], agg).unwrap();
            let idx = build_index(&d, agg, 1, 1.0).unwrap();
            assert_eq!(idx.segments().len(), 1);
            let eps = if agg.is_cumulative() { 2.0 } else { 1.0 };
            let out = if agg.is_cumulative() {
                idx.query_sum(5.0, 5.0, ErrorSpec::Abs(eps)).unwrap()
            } else {
                idx.query_max(0.0, 9.0, ErrorSpec::Abs(eps)).unwrap()
            };
            assert!((out.value - 7.0).abs() <= eps + 1e-12, "{agg:?}");
        }
    }

    #[test]
    fn empty_max_range_returns_sentinel() {
        let d = ingest(&[(1.0, 5.0), (10.0, 7.0)], AggregateKind::Max).unwrap();
        let idx = build_index(&d, AggregateKind::Max, 1, 1.0).unwrap();
        let out = idx.query_max(2.0, 9.0, ErrorSpec::Abs(1.0)).unwrap();
        assert_eq!(out.value, f64::NEG_INFINITY);
        let dmin = ingest(&[(1.0, 5.0), (10.0, 7.0)], AggregateKind::Min).unwrap();
        let idx = build_index(&dmin, AggregateKind::Min, 1, 1.0).unwrap();
        let out = idx.query_max(2.0, 9.0, ErrorSpec::Abs(1.0)).unwrap();
        assert_eq!(out.value, f64::INFINITY);
    }

    #[test]
    fn min_is_mirrored_max() {
        let rows: Vec<(f64, f64)> = (0..100)
            .map(|i| (i as f64, ((i * 31) % 23) as f64 - 5.0))
            .collect();
        let d = ingest(&rows, AggregateKind::Min).unwrap();
        let idx = build_index(&d, AggregateKind::Min, 2, 1.0).unwrap();
        for (l, u) in [(0.0, 99.0), (10.0, 20.0), (55.0, 56.0)] {
            let out = idx.query_max(l, u, ErrorSpec::Abs(1.0)).unwrap();
            let exact = rows
                .iter()
                .filter(|r| r.0 >= l && r.0 <= u)
                .map(|r| r.1)
                .fold(f64::INFINITY, f64::min);
            assert!((out.value - exact).abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn rel_max_refines_and_accepts() {
        let rows: Vec<(f64, f64)> = (0..600)
            .map(|i| (i as f64, 3000.0 + ((i * 41) % 700) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let idx = build_index(&d, AggregateKind::Max, 2, 25.0).unwrap();
        let eps = 0.05;
        let out = idx.query_max(0.0, 599.0, ErrorSpec::Rel(eps)).unwrap();
        let exact = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        if out.refined {
            assert_eq!(out.value, exact);
        } else {
            assert!(((out.value - exact) / exact).abs() <= eps);
        }
    }

    #[test]
    fn node_visits_stay_logarithmic() {
        let rows: Vec<(f64, f64)> = (0..5000)
            .map(|i| (i as f64, ((i * 7919) % 997) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Max).unwrap();
        let idx = build_index(&d, AggregateKind::Max, 1, 5.0).unwrap();
        let bound = 2 * idx.height() + 2;
        let keys: Vec<f64> = d.keys().collect();
        for (a, b) in [(0, 4999), (3, 4000), (100, 2000), (42, 43), (77, 77)] {
            let (_, visits) = idx
                .query_max_with_visits(keys[a], keys[b], ErrorSpec::Abs(5.0))
                .unwrap();
            assert!(visits <= bound, "visits {visits} > {bound}");
        }
    }

    #[test]
    fn segment_lookup_owns_every_key() {
        let rows: Vec<(f64, f64)> = (0..800)
            .map(|i| (i as f64 * 1.1, ((i * 13) % 37) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let idx = build_index(&d, AggregateKind::Sum, 2, 4.0).unwrap();
        for (pos, key) in d.keys().enumerate() {
            let s = idx.locate(key).unwrap();
            let seg = &idx.segments()[s];
            assert!(seg.first_idx <= pos && pos <= seg.last_idx);
        }
    }

    #[test]
    fn tune_grid_shape_and_monotonicity() {
        let rows: Vec<(f64, f64)> = (0..1500)
            .map(|i| {
                let k = i as f64 * 0.5;
                (k, (k * 0.11).sin().abs() * 9.0 + 1.0)
            })
            .collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let workload: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, 700.0 - i as f64)).collect();
        let rows = tune(&d, AggregateKind::Sum, &[1, 2], &[5.0, 20.0, 80.0], 0.01, &workload)
            .unwrap();
        assert_eq!(rows.len(), 6);
        // Segment count non-increasing in delta for fixed degree.
        for deg_rows in rows.chunks(3) {
            assert!(deg_rows.windows(2).all(|w| w[1].segment_count <= w[0].segment_count));
        }
        // And non-increasing in degree for fixed delta.
        for i in 0..3 {
            assert!(rows[3 + i].segment_count <= rows[i].segment_count);
        }
        // Degenerate grid point: a huge delta fits one segment but forces
        // every rel query below the acceptance threshold 2*80*101 into
        // refinement.
        let loose = &rows[2];
        assert_eq!((loose.deg, loose.delta), (1, 80.0));
        assert_eq!(loose.refinement_rate, 1.0);
    }

    #[test]
    fn concurrent_readers_agree() {
        let rows: Vec<(f64, f64)> = (0..2000)
            .map(|i| (i as f64, ((i * 31) % 97) as f64))
            .collect();
        let d = ingest(&rows, AggregateKind::Sum).unwrap();
        let idx = build_index(&d, AggregateKind::Sum, 2, 10.0).unwrap();
        let expected = idx.query_sum(50.0, 1500.0, ErrorSpec::Abs(20.0)).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for _ in 0..200 {
                        let got = idx.query_sum(50.0, 1500.0, ErrorSpec::Abs(20.0)).unwrap();
                        assert_eq!(got.value.to_bits(), expected.value.to_bits());
                    }
                });
            }
        });
    }
}
