//! Piecewise-polynomial learned indexes for range aggregate queries.
//!
//! A dataset of `(key, measure)` records is represented by its exact
//! aggregate function (the cumulative sum for SUM/COUNT, the key-measure
//! staircase for MAX/MIN), which greedy segmentation partitions into the
//! minimum number of intervals each carrying a minimax-fitted polynomial
//! within a deviation threshold `delta`. Queries evaluate a handful of
//! polynomials instead of walking the data and come with deterministic
//! absolute or relative error guarantees; relative-mode queries fall back to
//! compact exact structures when an acceptance test fails. Two-key COUNT
//! queries are served the same way by a quad-tree of fitted polynomial
//! surfaces combined through inclusion-exclusion.

#![forbid(unsafe_code)]

pub mod error;
pub mod fit;
pub mod index1d;
pub mod index2d;
pub mod model;
pub mod poly;
pub mod segment;
mod simplex;

pub use error::{BuildError, FitError, ModelError, QueryError, SegmentError};
pub use fit::{fit_minimax_1d, fit_minimax_2d, FitResult, SurfaceFit};
pub use index1d::{
    build_index, poly_max_on_range, snap, tune, PolyIndex1D, QueryOutcome, SnapSide, TuneRow,
};
pub use index2d::{
    build_quad_index, cf_count_2d, exact_count_2d, CountQuadTree, Point2D, QuadIndex2D, QuadNode,
    Region,
};
pub use model::{
    build_cum_array, build_max_tree, exact_function, exact_max, exact_sum, ingest, AggregateKind,
    AggregateMaxTree, Dataset, ErrorSpec, KeyCumArray, Record,
};
pub use poly::{KeyMap, PolyCoeffs, SurfaceCoeffs};
pub use segment::{
    dp_oracle, greedy_segmentation, greedy_segmentation_exp, FitCheck, Segment, SegmentSequence,
    SegmentationStats,
};
