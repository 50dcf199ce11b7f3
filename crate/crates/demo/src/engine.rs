//! Pure demo logic: synthetic datasets, index construction, and the
//! plot-ready views the page renders. Everything here runs and is tested on
//! the host; the wasm layer only marshals JSON strings.

use serde::Serialize;

use polyfit_core::{
    build_index, build_quad_index, exact_count_2d, ingest, AggregateKind, ErrorSpec, Point2D,
    PolyIndex1D, QuadIndex2D,
};

pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed.wrapping_mul(2685821657736338717).max(1))
    }
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Serialize)]
pub struct SegmentView {
    pub lo: f64,
    pub hi: f64,
    pub error: f64,
    /// Sampled polynomial polyline for drawing.
    pub curve: Vec<[f64; 2]>,
}

#[derive(Serialize)]
pub struct FitView {
    pub agg: String,
    pub n: usize,
    pub deg: usize,
    pub delta: f64,
    pub segment_count: usize,
    pub model_bytes: usize,
    pub build_ms: f64,
    /// The exact function samples `(k, F(k))` the index approximates.
    pub samples: Vec<[f64; 2]>,
    pub segments: Vec<SegmentView>,
}

#[derive(Serialize)]
pub struct QueryView {
    pub value: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub refined: bool,
    pub query_ns: f64,
}

#[derive(Serialize)]
pub struct LeafView {
    pub u_lo: f64,
    pub u_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub error: f64,
}

#[derive(Serialize)]
pub struct QuadView {
    pub n: usize,
    pub deg: usize,
    pub delta: f64,
    pub leaf_count: usize,
    pub depth: usize,
    pub build_ms: f64,
    pub points: Vec<[f64; 2]>,
    pub leaves: Vec<LeafView>,
}

/// Synthetic `(key, measure)` rows over keys in `[0, 1000)`.
pub fn generate_rows(kind: &str, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = Rng::new(seed ^ 0xda7a);
    let n = n.clamp(8, 20_000);
    let mut keys: Vec<f64> = (0..n).map(|_| rng.f64() * 1000.0).collect();
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut level: f64 = 50.0;
    keys.iter()
        .map(|&k| {
            let m = match kind {
                "sine" => 60.0 + 45.0 * (k * 0.021).sin() + 12.0 * (k * 0.11).sin(),
                "steps" => {
                    let plateau = (k / 140.0) as i64 % 4;
                    20.0 + 35.0 * plateau as f64 + rng.f64() * 4.0
                }
                "spikes" => {
                    if rng.f64() < 0.04 {
                        120.0 + rng.f64() * 60.0
                    } else {
                        20.0 + rng.f64() * 10.0
                    }
                }
                // "walk" and anything else: a drifting random walk.
                _ => {
                    level += rng.f64() * 8.0 - 3.6;
                    level = level.clamp(5.0, 400.0);
                    level
                }
            };
            (k, m)
        })
        .collect()
}

/// Gaussian cluster mixture over `[0, 1000)^2`.
pub fn generate_points(n: usize, seed: u64) -> Vec<Point2D> {
    let mut rng = Rng::new(seed ^ 0x2d2d);
    let n = n.clamp(16, 20_000);
    let centers = [(250.0, 300.0), (700.0, 650.0), (550.0, 200.0)];
    (0..n)
        .map(|_| {
            let (cx, cy) = centers[(rng.next_u64() % 3) as usize];
            let gauss = |r: &mut Rng| {
                let u1 = r.f64().max(f64::MIN_POSITIVE);
                let u2 = r.f64();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let u = (cx + gauss(&mut rng) * 110.0).clamp(0.0, 1000.0);
            let v = (cy + gauss(&mut rng) * 110.0).clamp(0.0, 1000.0);
            Point2D::new(u, v)
        })
        .collect()
}

pub struct OneDimState {
    pub index: PolyIndex1D,
}

/// Wall-clock timing; `Instant` is unavailable on bare wasm, where the page
/// measures with `performance.now()` instead.
#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    (f(), 0.0)
}

pub fn build_one_dim(
    kind: &str,
    n: usize,
    seed: u64,
    agg: AggregateKind,
    deg: usize,
    delta: f64,
) -> Result<(OneDimState, FitView), String> {
    let rows = generate_rows(kind, n, seed);
    let dataset = ingest(&rows, agg).map_err(|e| e.to_string())?;
    let (index, build_ms) = timed(|| build_index(&dataset, agg, deg, delta));
    let index = index.map_err(|e| e.to_string())?;

    // The MIN path fits the negated staircase internally; flip it back so
    // the plot shows the user's orientation.
    let flip = if agg == AggregateKind::Min { -1.0 } else { 1.0 };
    let samples = polyfit_core::exact_function(&dataset, agg);
    let segments: Vec<SegmentView> = index
        .segments()
        .iter()
        .map(|s| {
            let steps = 48;
            let curve = (0..=steps)
                .map(|i| {
                    let k = s.lo_key + (s.hi_key - s.lo_key) * i as f64 / steps as f64;
                    [k, flip * s.poly.eval(k)]
                })
                .collect();
            SegmentView {
                lo: s.lo_key,
                hi: s.hi_key,
                error: s.certified_error,
                curve,
            }
        })
        .collect();

    let view = FitView {
        agg: agg.as_str().to_string(),
        n: dataset.len(),
        deg,
        delta,
        segment_count: index.segments().len(),
        model_bytes: index.model_bytes(),
        build_ms,
        samples: samples.iter().map(|&(k, f)| [k, flip * f]).collect(),
        segments,
    };
    Ok((OneDimState { index }, view))
}

pub fn query_one_dim(
    state: &OneDimState,
    l: f64,
    u: f64,
    spec: ErrorSpec,
) -> Result<QueryView, String> {
    let (out, query_ms) = timed(|| {
        if state.index.agg().is_cumulative() {
            state.index.query_sum(l, u, spec)
        } else {
            state.index.query_max(l, u, spec)
        }
    });
    let out = out.map_err(|e| e.to_string())?;
    let query_ns = query_ms * 1e6;
    let exact = state.index.exact(l, u);
    let abs_error = (out.value - exact).abs();
    let rel_error = if exact != 0.0 {
        abs_error / exact.abs()
    } else {
        0.0
    };
    Ok(QueryView {
        value: out.value,
        exact,
        abs_error,
        rel_error,
        refined: out.refined,
        query_ns,
    })
}

pub struct TwoDimState {
    pub index: QuadIndex2D,
}

pub fn build_two_dim(
    n: usize,
    seed: u64,
    deg: usize,
    delta: f64,
) -> Result<(TwoDimState, QuadView), String> {
    let points = generate_points(n, seed);
    let (index, build_ms) = timed(|| build_quad_index(&points, deg, delta));
    let index = index.map_err(|e| e.to_string())?;

    let mut leaves = Vec::new();
    index.root().for_each_leaf(&mut |region, _, error| {
        leaves.push(LeafView {
            u_lo: region.u_lo,
            u_hi: region.u_hi,
            v_lo: region.v_lo,
            v_hi: region.v_hi,
            error,
        });
    });
    let view = QuadView {
        n: points.len(),
        deg,
        delta,
        leaf_count: index.leaf_count(),
        depth: index.depth(),
        build_ms,
        points: points.iter().map(|p| [p.u, p.v]).collect(),
        leaves,
    };
    Ok((TwoDimState { index }, view))
}

pub fn query_two_dim(
    state: &TwoDimState,
    l1: f64,
    u1: f64,
    l2: f64,
    u2: f64,
    spec: ErrorSpec,
) -> Result<QueryView, String> {
    let (out, query_ms) = timed(|| state.index.query_count(l1, u1, l2, u2, spec));
    let out = out.map_err(|e| e.to_string())?;
    let query_ns = query_ms * 1e6;
    let exact = exact_count_2d(state.index.fallback(), l1, u1, l2, u2) as f64;
    let abs_error = (out.value - exact).abs();
    Ok(QueryView {
        value: out.value,
        exact,
        abs_error,
        rel_error: if exact != 0.0 { abs_error / exact } else { 0.0 },
        refined: out.refined,
        query_ns,
    })
}
