//! Two-key COUNT support: the cumulative counting surface, quad-tree
//! segmentation into fitted polynomial patches, and inclusion-exclusion
//! query evaluation with absolute/relative guarantees.
//!
//! Queries only ever evaluate a patch at staircase points: per-dimension
//! snapped combinations of data coordinates. Leaf certification therefore
//! validates the fitted surface against the exact cumulative count at every
//! staircase point inside the leaf, not just at the data points the fit was
//! constrained on; a leaf is only accepted once that full check passes.
//! The certification sweep visits each leaf's staircase grid once, so total
//! build work grows with (distinct u keys) x (distinct v keys) across
//! leaves — quadratic at the extreme of one global leaf. Datasets in the
//! tens of thousands of points build in seconds; far larger ones should
//! accept a weaker, sampled certification instead.

use crate::error::{BuildError, FitError, QueryError};
use crate::fit::fit_minimax_2d;
use crate::index1d::{snap, SnapSide};
use crate::model::ErrorSpec;
use crate::poly::{SurfaceCoeffs, MAX_DEG_2D};
use crate::QueryOutcome;

/// Maximum quad-tree depth before the build reports the threshold
/// unachievable rather than looping.
pub const MAX_QUAD_DEPTH: usize = 24;

/// Bucket size of the exact fallback tree's leaves.
const COUNT_BUCKET: usize = 32;

/// Cap on the strided staircase subsample folded into each region's fit
/// constraints (a 16 x 16 lattice at most).
const GRID_CONSTRAINT_STRIDE: usize = 16;

/// Number of pseudo-random staircase probes tried before a full validation
/// sweep; a single miss splits the region without paying for the sweep.
const QUICK_PROBES: usize = 256;

/// A weighted 2D point; the weight is 1 for plain COUNT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl Point2D {
    pub fn new(u: f64, v: f64) -> Point2D {
        Point2D { u, v, w: 1.0 }
    }
}

/// An axis-aligned rectangle. Child regions are half-open at their upper
/// edges except along the root boundary, which stays closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub u_lo: f64,
    pub u_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Region {
    fn mid(&self) -> (f64, f64) {
        ((self.u_lo + self.u_hi) / 2.0, (self.v_lo + self.v_hi) / 2.0)
    }

    /// The four children in NW/NE/SW/SE order by midpoint split.
    fn quarters(&self) -> [Region; 4] {
        let (mu, mv) = self.mid();
        [
            Region { u_lo: self.u_lo, u_hi: mu, v_lo: mv, v_hi: self.v_hi },
            Region { u_lo: mu, u_hi: self.u_hi, v_lo: mv, v_hi: self.v_hi },
            Region { u_lo: self.u_lo, u_hi: mu, v_lo: self.v_lo, v_hi: mv },
            Region { u_lo: mu, u_hi: self.u_hi, v_lo: self.v_lo, v_hi: mv },
        ]
    }
}

/// Exact cumulative count: how many points satisfy `p.u <= u && p.v <= v`.
pub fn cf_count_2d(points: &[Point2D], u: f64, v: f64) -> usize {
    points.iter().filter(|p| p.u <= u && p.v <= v).count()
}

/// A node of the fitted quad tree.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadNode {
    Internal {
        region: Region,
        children: Box<[QuadNode; 4]>,
    },
    Leaf {
        region: Region,
        surface: SurfaceCoeffs,
        certified_error: f64,
    },
}

impl QuadNode {
    pub fn region(&self) -> Region {
        match self {
            QuadNode::Internal { region, .. } | QuadNode::Leaf { region, .. } => *region,
        }
    }

    fn leaf_count(&self) -> usize {
        match self {
            QuadNode::Leaf { .. } => 1,
            QuadNode::Internal { children, .. } => children.iter().map(|c| c.leaf_count()).sum(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            QuadNode::Leaf { .. } => 1,
            QuadNode::Internal { children, .. } => {
                1 + children.iter().map(|c| c.depth()).max().unwrap()
            }
        }
    }

    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a Region, &'a SurfaceCoeffs, f64)) {
        match self {
            QuadNode::Leaf {
                region,
                surface,
                certified_error,
            } => f(region, surface, *certified_error),
            QuadNode::Internal { children, .. } => {
                for c in children.iter() {
                    c.for_each_leaf(f);
                }
            }
        }
    }
}

/// Exact aggregate count quad tree over the raw points; the refinement
/// target and the cumulative-count evaluator used during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CountQuadTree {
    nodes: Vec<CountNode>,
    pts: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
struct CountNode {
    region: Region,
    count: usize,
    kind: CountNodeKind,
}

#[derive(Debug, Clone, PartialEq)]
enum CountNodeKind {
    Leaf { start: usize, end: usize },
    Internal { children: [usize; 4] },
}

impl CountQuadTree {
    pub fn build(points: &[Point2D], root: Region) -> CountQuadTree {
        let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.u, p.v)).collect();
        let mut tree = CountQuadTree {
            nodes: Vec::new(),
            pts: Vec::new(),
        };
        let n = pts.len();
        tree.build_node(&mut pts, 0, n, root, 0);
        tree.pts = pts;
        tree
    }

    fn build_node(
        &mut self,
        pts: &mut [(f64, f64)],
        start: usize,
        end: usize,
        region: Region,
        depth: usize,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(CountNode {
            region,
            count: end - start,
            kind: CountNodeKind::Leaf { start, end },
        });
        if end - start <= COUNT_BUCKET || depth >= 2 * MAX_QUAD_DEPTH {
            return id;
        }
        let (mu, mv) = region.mid();
        // Partition [start, end) into the four quarters in place.
        let slice = &mut pts[start..end];
        let split_v = partition(slice, |p| p.1 >= mv);
        let split_u_hi = partition(&mut slice[..split_v], |p| p.0 < mu);
        let split_u_lo = partition(&mut slice[split_v..], |p| p.0 < mu) + split_v;
        let bounds = [
            (start, start + split_u_hi),
            (start + split_u_hi, start + split_v),
            (start + split_v, start + split_u_lo),
            (start + split_u_lo, end),
        ];
        let quarters = region.quarters();
        let mut children = [0usize; 4];
        for (i, (&(s, e), q)) in bounds.iter().zip(quarters.iter()).enumerate() {
            children[i] = self.build_node(pts, s, e, *q, depth + 1);
        }
        self.nodes[id].kind = CountNodeKind::Internal { children };
        id
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Exact count of points in the closed rectangle.
    pub fn count(&self, l1: f64, u1: f64, l2: f64, u2: f64) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        self.count_node(0, l1, u1, l2, u2)
    }

    fn count_node(&self, id: usize, l1: f64, u1: f64, l2: f64, u2: f64) -> usize {
        let node = &self.nodes[id];
        let r = &node.region;
        if node.count == 0 || r.u_lo > u1 || r.u_hi < l1 || r.v_lo > u2 || r.v_hi < l2 {
            return 0;
        }
        if l1 <= r.u_lo && r.u_hi <= u1 && l2 <= r.v_lo && r.v_hi <= u2 {
            return node.count;
        }
        match node.kind {
            CountNodeKind::Leaf { start, end } => self.pts[start..end]
                .iter()
                .filter(|p| p.0 >= l1 && p.0 <= u1 && p.1 >= l2 && p.1 <= u2)
                .count(),
            CountNodeKind::Internal { children } => children
                .iter()
                .map(|&c| self.count_node(c, l1, u1, l2, u2))
                .sum(),
        }
    }

    /// Cumulative count at `(u, v)`.
    pub fn cf(&self, u: f64, v: f64) -> usize {
        self.count(f64::NEG_INFINITY, u, f64::NEG_INFINITY, v)
    }
}

fn partition(slice: &mut [(f64, f64)], pred: impl Fn(&(f64, f64)) -> bool) -> usize {
    let mut store = 0;
    for i in 0..slice.len() {
        if pred(&slice[i]) {
            slice.swap(store, i);
            store += 1;
        }
    }
    store
}

/// Exact 2D COUNT over a closed rectangle via the aggregate count quad tree.
pub fn exact_count_2d(fallback: &CountQuadTree, l1: f64, u1: f64, l2: f64, u2: f64) -> usize {
    fallback.count(l1, u1, l2, u2)
}

/// The two-key COUNT index: a quad tree of certified polynomial surfaces
/// over the cumulative count, with the exact tree attached for refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadIndex2D {
    root: QuadNode,
    deg: usize,
    delta: f64,
    points: Vec<Point2D>,
    u_keys: Vec<f64>,
    v_keys: Vec<f64>,
    fallback: CountQuadTree,
}

/// Recursively fit cumulative-count surfaces: a region whose fit cannot be
/// certified within `delta` over all of its staircase points is split at its
/// geometric midpoint into four children.
pub fn build_quad_index(
    points: &[Point2D],
    deg: usize,
    delta: f64,
) -> Result<QuadIndex2D, BuildError> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(BuildError::NonPositiveDelta(delta));
    }
    if !(1..=MAX_DEG_2D).contains(&deg) {
        return Err(BuildError::Fit(FitError::DegreeOutOfRange {
            deg,
            min: 1,
            max: MAX_DEG_2D,
        }));
    }
    assert!(!points.is_empty(), "build_quad_index on empty point set");

    let mut u_keys: Vec<f64> = points.iter().map(|p| p.u).collect();
    let mut v_keys: Vec<f64> = points.iter().map(|p| p.v).collect();
    u_keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    u_keys.dedup();
    v_keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v_keys.dedup();

    let mut root_region = Region {
        u_lo: u_keys[0],
        u_hi: *u_keys.last().unwrap(),
        v_lo: v_keys[0],
        v_hi: *v_keys.last().unwrap(),
    };
    // A degenerate axis would make midpoint splits no-ops.
    if root_region.u_hi <= root_region.u_lo {
        root_region.u_hi = root_region.u_lo + 1.0;
    }
    if root_region.v_hi <= root_region.v_lo {
        root_region.v_hi = root_region.v_lo + 1.0;
    }

    let fallback = CountQuadTree::build(points, root_region);
    let mut by_v: Vec<(f64, f64)> = points.iter().map(|p| (p.v, p.u)).collect();
    by_v.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let builder = QuadBuilder {
        deg,
        delta,
        root_region,
        u_keys: &u_keys,
        v_keys: &v_keys,
        fallback: &fallback,
        by_v: &by_v,
    };
    let point_refs: Vec<(f64, f64)> = points.iter().map(|p| (p.u, p.v)).collect();
    let root = builder.build_region(root_region, &point_refs, 0)?;

    Ok(QuadIndex2D {
        root,
        deg,
        delta,
        points: points.to_vec(),
        u_keys,
        v_keys,
        fallback,
    })
}

struct QuadBuilder<'a> {
    deg: usize,
    delta: f64,
    root_region: Region,
    u_keys: &'a [f64],
    v_keys: &'a [f64],
    fallback: &'a CountQuadTree,
    /// All points as `(v, u)`, sorted by `v`, for the validation sweep.
    by_v: &'a [(f64, f64)],
}

impl QuadBuilder<'_> {
    /// Staircase key lines falling inside a region. Upper edges are
    /// half-open except along the root boundary.
    fn keys_in<'k>(&self, keys: &'k [f64], lo: f64, hi: f64, root_hi: f64) -> &'k [f64] {
        let start = keys.partition_point(|&k| k < lo);
        let end = if hi >= root_hi {
            keys.partition_point(|&k| k <= hi)
        } else {
            keys.partition_point(|&k| k < hi)
        };
        &keys[start..end.max(start)]
    }

    fn build_region(
        &self,
        region: Region,
        pts: &[(f64, f64)],
        depth: usize,
    ) -> Result<QuadNode, BuildError> {
        let us = self.keys_in(self.u_keys, region.u_lo, region.u_hi, self.root_region.u_hi);
        let vs = self.keys_in(self.v_keys, region.v_lo, region.v_hi, self.root_region.v_hi);

        if let Some(node) = self.try_leaf(region, pts, us, vs)? {
            return Ok(node);
        }
        if depth >= MAX_QUAD_DEPTH {
            return Err(BuildError::MaxDepthExceeded {
                max_depth: MAX_QUAD_DEPTH,
            });
        }

        let (mu, mv) = region.mid();
        let mut buckets: [Vec<(f64, f64)>; 4] = Default::default();
        for &(u, v) in pts {
            let i = match (u < mu, v < mv) {
                (true, false) => 0,  // NW
                (false, false) => 1, // NE
                (true, true) => 2,   // SW
                (false, true) => 3,  // SE
            };
            buckets[i].push((u, v));
        }
        let quarters = region.quarters();
        let mut children = Vec::with_capacity(4);
        for (q, bucket) in quarters.iter().zip(buckets.iter()) {
            children.push(self.build_region(*q, bucket, depth + 1)?);
        }
        let children: Box<[QuadNode; 4]> = match children.try_into() {
            Ok(array) => Box::new(array),
            Err(_) => unreachable!("exactly four children"),
        };
        Ok(QuadNode::Internal { region, children })
    }

    /// Fit the region and certify it over every staircase point; `None`
    /// means the region must split.
    fn try_leaf(
        &self,
        region: Region,
        pts: &[(f64, f64)],
        us: &[f64],
        vs: &[f64],
    ) -> Result<Option<QuadNode>, BuildError> {
        let mut constraints: Vec<(f64, f64, f64)> = Vec::new();
        for &(u, v) in pts {
            constraints.push((u, v, self.fallback.cf(u, v) as f64));
        }
        // Region corners plus their snapped staircase counterparts anchor
        // patches that hold few or no data points.
        let corner_coords = [
            (region.u_lo, region.v_lo),
            (region.u_lo, region.v_hi),
            (region.u_hi, region.v_lo),
            (region.u_hi, region.v_hi),
        ];
        for &(cu, cv) in &corner_coords {
            constraints.push((cu, cv, self.fallback.cf(cu, cv) as f64));
            if let (Some(su), Some(sv)) = (
                snap(self.u_keys, cu, SnapSide::Right),
                snap(self.v_keys, cv, SnapSide::Right),
            ) {
                constraints.push((su, sv, self.fallback.cf(su, sv) as f64));
            }
        }
        // A strided lattice of the staircase points the fit will be
        // certified against.
        let u_stride = us.len().div_ceil(GRID_CONSTRAINT_STRIDE).max(1);
        let v_stride = vs.len().div_ceil(GRID_CONSTRAINT_STRIDE).max(1);
        for su in us.iter().step_by(u_stride) {
            for sv in vs.iter().step_by(v_stride) {
                constraints.push((*su, *sv, self.fallback.cf(*su, *sv) as f64));
            }
        }
        constraints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        constraints.dedup();

        let fit = fit_minimax_2d(&constraints, self.deg)?;
        if fit.error > self.delta {
            return Ok(None);
        }

        match self.grid_residual(&fit.surface, us, vs)? {
            Some(grid_err) => Ok(Some(QuadNode::Leaf {
                region,
                surface: fit.surface,
                certified_error: fit.error.max(grid_err),
            })),
            None => Ok(None),
        }
    }

    /// Max residual of the surface over the full `us x vs` staircase grid;
    /// `None` as soon as any residual exceeds `delta`.
    fn grid_residual(
        &self,
        surface: &SurfaceCoeffs,
        us: &[f64],
        vs: &[f64],
    ) -> Result<Option<f64>, BuildError> {
        if us.is_empty() || vs.is_empty() {
            return Ok(Some(0.0));
        }

        // Cheap probabilistic reject before the exhaustive sweep.
        let total = us.len() * vs.len();
        let mut state = 0x5851f42d4c957f2du64 ^ (total as u64);
        for _ in 0..QUICK_PROBES.min(total) {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let i = (state >> 33) as usize % us.len();
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % vs.len();
            let exact = self.fallback.cf(us[i], vs[j]) as f64;
            if (exact - surface.eval(us[i], vs[j])).abs() > self.delta {
                return Ok(None);
            }
        }

        // Exhaustive sweep: walk v-lines upward, activating points into
        // u-bins; a prefix sum per line yields the cumulative counts for
        // every u-line at once.
        let width = surface.deg + 1;
        let mut bins = vec![0u32; us.len()];
        let mut next = 0usize;
        let mut worst = 0.0f64;
        let mut row_coeffs = vec![0.0; width];
        for &sv in vs {
            while next < self.by_v.len() && self.by_v[next].0 <= sv {
                let u = self.by_v[next].1;
                let bin = us.partition_point(|&k| k < u);
                if bin < bins.len() {
                    bins[bin] += 1;
                }
                next += 1;
            }
            // Collapse the v dimension once per line.
            let t = surface.v_map.apply(sv);
            for (i, slot) in row_coeffs.iter_mut().enumerate() {
                let row = &surface.coeffs[i * width..(i + 1) * width];
                let mut acc = 0.0;
                for &a in row.iter().rev() {
                    acc = acc * t + a;
                }
                *slot = acc;
            }
            let mut running = 0u32;
            for (j, &su) in us.iter().enumerate() {
                running += bins[j];
                let s = surface.u_map.apply(su);
                let mut approx = 0.0;
                for &c in row_coeffs.iter().rev() {
                    approx = approx * s + c;
                }
                let resid = (running as f64 - approx).abs();
                if resid > self.delta {
                    return Ok(None);
                }
                worst = worst.max(resid);
            }
        }
        Ok(Some(worst))
    }
}

impl QuadIndex2D {
    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn root(&self) -> &QuadNode {
        &self.root
    }

    pub fn fallback(&self) -> &CountQuadTree {
        &self.fallback
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Bytes attributable to the fitted surfaces and quad structure.
    pub fn model_bytes(&self) -> usize {
        let width = self.deg + 1;
        let per_leaf = (width * width + 4 + 4 + 1) * 8;
        self.leaf_count() * per_leaf
    }

    /// Reassemble from serialized parts, rebuilding the exact fallback.
    pub fn from_parts(
        deg: usize,
        delta: f64,
        points: Vec<Point2D>,
        root: QuadNode,
    ) -> Result<QuadIndex2D, BuildError> {
        if delta <= 0.0 || !delta.is_finite() {
            return Err(BuildError::NonPositiveDelta(delta));
        }
        let mut u_keys: Vec<f64> = points.iter().map(|p| p.u).collect();
        let mut v_keys: Vec<f64> = points.iter().map(|p| p.v).collect();
        u_keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        u_keys.dedup();
        v_keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v_keys.dedup();
        let fallback = CountQuadTree::build(&points, root.region());
        Ok(QuadIndex2D {
            root,
            deg,
            delta,
            points,
            u_keys,
            v_keys,
            fallback,
        })
    }

    /// The leaf surface owning `(u, v)`, by midpoint descent. Coordinates on
    /// a split line belong to the upper child; the root's closed boundary
    /// covers every data coordinate.
    fn locate(&self, u: f64, v: f64) -> &QuadNode {
        let mut node = &self.root;
        loop {
            match node {
                QuadNode::Leaf { .. } => return node,
                QuadNode::Internal {
                    region, children, ..
                } => {
                    let (mu, mv) = region.mid();
                    let i = match (u < mu, v < mv) {
                        (true, false) => 0,
                        (false, false) => 1,
                        (true, true) => 2,
                        (false, true) => 3,
                    };
                    node = &children[i];
                }
            }
        }
    }

    fn corner_term(&self, su: Option<f64>, sv: Option<f64>) -> f64 {
        match (su, sv) {
            (Some(u), Some(v)) => match self.locate(u, v) {
                QuadNode::Leaf { surface, .. } => surface.eval(u, v),
                QuadNode::Internal { .. } => unreachable!("locate returns leaves"),
            },
            _ => 0.0, // below the domain in either dimension
        }
    }

    /// Approximate COUNT over the closed rectangle `[l1,u1] x [l2,u2]` by
    /// four-corner inclusion-exclusion over the fitted surfaces.
    ///
    /// Absolute mode requires `delta = eps_abs / 4`. Relative mode accepts
    /// the approximation once it clears `4 delta (1 + 1/eps_rel)` and
    /// otherwise refines through the exact count tree.
    pub fn query_count(
        &self,
        l1: f64,
        u1: f64,
        l2: f64,
        u2: f64,
        spec: ErrorSpec,
    ) -> Result<QueryOutcome, QueryError> {
        assert!(spec.epsilon() > 0.0, "epsilon must be positive");
        if l1 > u1 {
            return Err(QueryError::InvalidRange { lo: l1, hi: u1 });
        }
        if l2 > u2 {
            return Err(QueryError::InvalidRange { lo: l2, hi: u2 });
        }
        if let ErrorSpec::Abs(eps) = spec {
            let required = eps / 4.0;
            let tol = 1e-12 * required.abs().max(self.delta.abs());
            if (required - self.delta).abs() > tol {
                return Err(QueryError::GuaranteeMismatch {
                    eps,
                    required,
                    actual: self.delta,
                });
            }
        }

        let su1 = snap(&self.u_keys, u1, SnapSide::Right);
        let sl1 = snap(&self.u_keys, l1, SnapSide::Left);
        let su2 = snap(&self.v_keys, u2, SnapSide::Right);
        let sl2 = snap(&self.v_keys, l2, SnapSide::Left);

        let approx = self.corner_term(su1, su2) - self.corner_term(sl1, su2)
            - self.corner_term(su1, sl2)
            + self.corner_term(sl1, sl2);

        match spec {
            ErrorSpec::Abs(_) => Ok(QueryOutcome {
                value: approx,
                refined: false,
                guarantee: spec,
            }),
            ErrorSpec::Rel(eps) => {
                let threshold = 4.0 * self.delta * (1.0 + 1.0 / eps);
                if approx >= threshold {
                    Ok(QueryOutcome {
                        value: approx,
                        refined: false,
                        guarantee: spec,
                    })
                } else {
                    Ok(QueryOutcome {
                        value: self.fallback.count(l1, u1, l2, u2) as f64,
                        refined: true,
                        guarantee: spec,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> Vec<Point2D> {
        vec![
            Point2D::new(1.0, 1.0),
            Point2D::new(2.0, 2.0),
            Point2D::new(3.0, 1.0),
        ]
    }

    #[test]
    fn cf_count_examples() {
        let pts = tri();
        assert_eq!(cf_count_2d(&pts, 3.0, 2.0), 3);
        assert_eq!(cf_count_2d(&pts, 2.0, 1.5), 1);
        assert_eq!(cf_count_2d(&pts, 0.5, 5.0), 0);
    }

    fn grid_points(g: usize) -> Vec<Point2D> {
        let mut out = Vec::new();
        for i in 1..=g {
            for j in 1..=g {
                out.push(Point2D::new(i as f64 / g as f64, j as f64 / g as f64));
            }
        }
        out
    }

    #[test]
    fn bilinear_grid_fits_in_one_leaf() {
        // The cumulative count of a regular grid is exactly i*j at every
        // staircase point, which the uv term captures with zero error.
        let idx = build_quad_index(&grid_points(12), 1, 0.5).unwrap();
        assert_eq!(idx.leaf_count(), 1);
    }

    #[test]
    fn clusters_force_a_split() {
        let mut pts = Vec::new();
        let mut s = 99u64;
        let mut r = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..250 {
            pts.push(Point2D::new(0.1 + r() * 0.08, 0.1 + r() * 0.08));
            pts.push(Point2D::new(0.8 + r() * 0.08, 0.8 + r() * 0.08));
        }
        // Measure the root patch error over the data constraints alone,
        // then build with delta below it: the root cannot be a leaf.
        let cons: Vec<(f64, f64, f64)> = pts
            .iter()
            .map(|p| (p.u, p.v, cf_count_2d(&pts, p.u, p.v) as f64))
            .collect();
        let root_err = fit_minimax_2d(&cons, 1).unwrap().error;
        let idx = build_quad_index(&pts, 1, root_err / 2.0).unwrap();
        assert!(idx.leaf_count() >= 4, "{} leaves", idx.leaf_count());
    }

    #[test]
    fn leaves_tile_their_parents() {
        let idx = build_quad_index(&grid_points(9), 1, 0.2).unwrap();
        fn check(node: &QuadNode) {
            if let QuadNode::Internal { region, children } = node {
                let q = region.quarters();
                for (c, expect) in children.iter().zip(q.iter()) {
                    assert_eq!(c.region(), *expect);
                    check(c);
                }
            }
        }
        check(idx.root());
    }

    #[test]
    fn every_leaf_residual_within_delta() {
        let pts: Vec<Point2D> = (0..400)
            .map(|i| {
                let a = (i * 37 % 401) as f64 / 401.0;
                let b = (i * 91 % 409) as f64 / 409.0;
                Point2D::new(a * a, b)
            })
            .collect();
        let delta = 6.0;
        let idx = build_quad_index(&pts, 2, delta).unwrap();
        // Re-validate independently: every staircase combination inside a
        // leaf must be within delta of the true cumulative count.
        let mut checked = 0usize;
        idx.root().for_each_leaf(&mut |region, surface, certified| {
            assert!(certified <= delta + 1e-9);
            for p in &pts {
                if p.u >= region.u_lo
                    && p.u <= region.u_hi
                    && p.v >= region.v_lo
                    && p.v <= region.v_hi
                {
                    let exact = cf_count_2d(&pts, p.u, p.v) as f64;
                    let resid = (exact - surface.eval(p.u, p.v)).abs();
                    assert!(resid <= delta + 1e-9, "residual {resid}");
                    checked += 1;
                }
            }
        });
        assert!(checked > 0);
    }

    #[test]
    fn exact_count_matches_brute_force() {
        let pts: Vec<Point2D> = (0..300)
            .map(|i| Point2D::new((i * 53 % 307) as f64, (i * 29 % 311) as f64))
            .collect();
        let root = Region {
            u_lo: 0.0,
            u_hi: 307.0,
            v_lo: 0.0,
            v_hi: 311.0,
        };
        let tree = CountQuadTree::build(&pts, root);
        assert_eq!(tree.count(f64::NEG_INFINITY, 1e18, f64::NEG_INFINITY, 1e18), 300);
        assert_eq!(tree.count(10.0, 5.0, 0.0, 311.0), 0);
        for (l1, u1, l2, u2) in [(10.0, 100.0, 40.0, 200.0), (0.0, 307.0, 0.0, 311.0), (50.5, 51.5, 0.0, 400.0)] {
            let brute = pts
                .iter()
                .filter(|p| p.u >= l1 && p.u <= u1 && p.v >= l2 && p.v <= u2)
                .count();
            assert_eq!(tree.count(l1, u1, l2, u2), brute);
        }
    }

    #[test]
    fn whole_domain_query_is_near_n() {
        let pts = grid_points(10);
        let delta = 2.0;
        let idx = build_quad_index(&pts, 2, delta).unwrap();
        let out = idx
            .query_count(0.0, 1.0, 0.0, 1.0, ErrorSpec::Abs(4.0 * delta))
            .unwrap();
        assert!((out.value - 100.0).abs() <= 4.0 * delta + 1e-9);
        // n = 100 sits below the acceptance threshold 4*2*101 = 808, so the
        // relative path must refine and return exactly n.
        let rel = idx.query_count(0.0, 1.0, 0.0, 1.0, ErrorSpec::Rel(0.01)).unwrap();
        assert!(rel.refined);
        assert_eq!(rel.value, 100.0);
    }

    #[test]
    fn staircase_query_example() {
        let pts = tri();
        let idx = build_quad_index(&pts, 1, 0.25).unwrap();
        // Only (3, 1) lies in [1.5, 3] x [0.5, 1.5].
        let out = idx
            .query_count(1.5, 3.0, 0.5, 1.5, ErrorSpec::Abs(1.0))
            .unwrap();
        assert!((out.value - 1.0).abs() <= 1.0 + 1e-9);
        assert_eq!(exact_count_2d(idx.fallback(), 1.5, 3.0, 0.5, 1.5), 1);
    }

    #[test]
    fn guarantee_mismatch_detected() {
        let idx = build_quad_index(&tri(), 1, 0.25).unwrap();
        assert!(matches!(
            idx.query_count(0.0, 1.0, 0.0, 1.0, ErrorSpec::Abs(2.0)),
            Err(QueryError::GuaranteeMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_axis_handled() {
        let pts: Vec<Point2D> = (0..40).map(|i| Point2D::new(5.0, i as f64)).collect();
        let idx = build_quad_index(&pts, 1, 1.0).unwrap();
        let out = idx
            .query_count(5.0, 5.0, 0.0, 39.0, ErrorSpec::Rel(0.01))
            .unwrap();
        if out.refined {
            assert_eq!(out.value, 40.0);
        } else {
            assert!((out.value - 40.0).abs() / 40.0 <= 0.01);
        }
    }

    proptest! {
        /// Inclusion-exclusion over the exact cumulative function with
        /// strict-predecessor snapping equals the closed-rectangle count.
        #[test]
        fn inclusion_exclusion_identity(
            pts in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..80),
            a in 0.0f64..100.0,
            b in 0.0f64..100.0,
            c in 0.0f64..100.0,
            d in 0.0f64..100.0,
        ) {
            let points: Vec<Point2D> = pts.iter().map(|&(u, v)| Point2D::new(u, v)).collect();
            let (l1, u1) = if a <= b { (a, b) } else { (b, a) };
            let (l2, u2) = if c <= d { (c, d) } else { (d, c) };
            let brute = points
                .iter()
                .filter(|p| p.u >= l1 && p.u <= u1 && p.v >= l2 && p.v <= u2)
                .count() as i64;
            let ie = cf_count_2d(&points, u1, u2) as i64
                - cf_count_2d(&points, l1.next_down(), u2) as i64
                - cf_count_2d(&points, u1, l2.next_down()) as i64
                + cf_count_2d(&points, l1.next_down(), l2.next_down()) as i64;
            prop_assert_eq!(ie, brute);
        }
    }
}
