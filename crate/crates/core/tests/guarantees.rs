//! End-to-end guarantee checks across randomized datasets, driving the
//! public build/query surface only.

use polyfit_core::{
    build_index, build_quad_index, exact_count_2d, ingest, AggregateKind, Dataset, ErrorSpec,
    Point2D,
};

struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    fn f64(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

fn random_dataset(rng: &mut Rng, n: usize, agg: AggregateKind, signed: bool) -> Dataset {
    let rows: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let m = if signed {
                rng.f64() * 20.0 - 10.0
            } else {
                rng.f64() * 10.0
            };
            (rng.f64() * 1e4, m)
        })
        .collect();
    ingest(&rows, agg).unwrap()
}

#[test]
fn sum_abs_guarantee_across_deltas_and_degrees() {
    let mut rng = Rng(1);
    for &signed in &[false, true] {
        let d = random_dataset(&mut rng, 1500, AggregateKind::Sum, signed);
        let keys: Vec<f64> = d.keys().collect();
        for deg in [1usize, 2, 4] {
            for delta in [2.0, 15.0, 120.0] {
                let idx = build_index(&d, AggregateKind::Sum, deg, delta).unwrap();
                let eps = 2.0 * delta;
                for _ in 0..300 {
                    let a = keys[rng.below(keys.len())];
                    let b = keys[rng.below(keys.len())];
                    let (l, u) = (a.min(b), a.max(b));
                    let got = idx.query_sum(l, u, ErrorSpec::Abs(eps)).unwrap();
                    let exact: f64 = d
                        .records()
                        .iter()
                        .filter(|r| r.key >= l && r.key <= u)
                        .map(|r| r.measure)
                        .sum();
                    assert!(
                        (got.value - exact).abs() <= eps + 1e-7,
                        "signed={signed} deg={deg} delta={delta} [{l},{u}]"
                    );
                }
            }
        }
    }
}

#[test]
fn min_and_max_abs_guarantee() {
    let mut rng = Rng(2);
    for agg in [AggregateKind::Max, AggregateKind::Min] {
        let d = random_dataset(&mut rng, 1500, agg, true);
        let keys: Vec<f64> = d.keys().collect();
        for delta in [1.0, 8.0] {
            let idx = build_index(&d, agg, 3, delta).unwrap();
            for _ in 0..300 {
                let a = keys[rng.below(keys.len())];
                let b = keys[rng.below(keys.len())];
                let (l, u) = (a.min(b), a.max(b));
                let got = idx.query_max(l, u, ErrorSpec::Abs(delta)).unwrap();
                let in_range = d
                    .records()
                    .iter()
                    .filter(|r| r.key >= l && r.key <= u)
                    .map(|r| r.measure);
                let exact = if agg == AggregateKind::Max {
                    in_range.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    in_range.fold(f64::INFINITY, f64::min)
                };
                assert!(
                    (got.value - exact).abs() <= delta + 1e-9,
                    "{agg:?} delta={delta} [{l},{u}]: {} vs {exact}",
                    got.value
                );
            }
        }
    }
}

#[test]
fn rel_answers_are_certified_or_exact() {
    let mut rng = Rng(3);
    let d = random_dataset(&mut rng, 2000, AggregateKind::Sum, true);
    let keys: Vec<f64> = d.keys().collect();
    let idx = build_index(&d, AggregateKind::Sum, 2, 5.0).unwrap();
    for eps in [0.01, 0.1] {
        for _ in 0..400 {
            let a = keys[rng.below(keys.len())];
            let b = keys[rng.below(keys.len())];
            let (l, u) = (a.min(b), a.max(b));
            let got = idx.query_sum(l, u, ErrorSpec::Rel(eps)).unwrap();
            let exact: f64 = d
                .records()
                .iter()
                .filter(|r| r.key >= l && r.key <= u)
                .map(|r| r.measure)
                .sum();
            if got.refined {
                assert!((got.value - exact).abs() <= 1e-9 * exact.abs().max(1.0));
            } else {
                assert!(((got.value - exact) / exact).abs() <= eps);
            }
        }
    }
}

#[test]
fn two_key_count_guarantee_small() {
    let mut rng = Rng(4);
    let points: Vec<Point2D> = (0..2000)
        .map(|_| Point2D::new(rng.f64() * 1e3, rng.f64() * 1e3))
        .collect();
    let delta = 10.0;
    let idx = build_quad_index(&points, 2, delta).unwrap();
    let eps = 4.0 * delta;
    for _ in 0..400 {
        let a = &points[rng.below(points.len())];
        let b = &points[rng.below(points.len())];
        let (l1, u1) = (a.u.min(b.u), a.u.max(b.u));
        let (l2, u2) = (a.v.min(b.v), a.v.max(b.v));
        let got = idx.query_count(l1, u1, l2, u2, ErrorSpec::Abs(eps)).unwrap();
        let brute = points
            .iter()
            .filter(|p| p.u >= l1 && p.u <= u1 && p.v >= l2 && p.v <= u2)
            .count() as f64;
        assert!((got.value - brute).abs() <= eps + 1e-9);
        assert_eq!(
            exact_count_2d(idx.fallback(), l1, u1, l2, u2) as f64,
            brute
        );
    }
}
