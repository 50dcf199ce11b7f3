//! Dataset representation and the exact structures that define ground truth:
//! the key-cumulative array for SUM/COUNT and the aggregate max-tree for
//! MAX/MIN. Both also serve as the refinement fallback at query time.

use crate::error::ModelError;

/// One `(key, measure)` pair. Keys select ranges; measures are aggregated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub key: f64,
    pub measure: f64,
}

/// Supported range aggregates. COUNT is rewritten to SUM over merged
/// cardinalities at ingestion; MIN runs as MAX over negated measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateKind {
    Sum,
    Count,
    Min,
    Max,
}

impl AggregateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregateKind::Sum => "sum",
            AggregateKind::Count => "count",
            AggregateKind::Min => "min",
            AggregateKind::Max => "max",
        }
    }

    /// True for aggregates answered through the cumulative array.
    pub fn is_cumulative(&self) -> bool {
        matches!(self, AggregateKind::Sum | AggregateKind::Count)
    }
}

impl std::str::FromStr for AggregateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(AggregateKind::Sum),
            "count" => Ok(AggregateKind::Count),
            "min" => Ok(AggregateKind::Min),
            "max" => Ok(AggregateKind::Max),
            other => Err(format!("unknown aggregate kind: {other}")),
        }
    }
}

/// The requested guarantee: absolute (`|A~ - A| <= eps`) or relative
/// (`|A~ - A| / |A| <= eps`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorSpec {
    Abs(f64),
    Rel(f64),
}

impl ErrorSpec {
    pub fn epsilon(&self) -> f64 {
        match *self {
            ErrorSpec::Abs(e) | ErrorSpec::Rel(e) => e,
        }
    }
}

/// A sorted dataset with strictly distinct keys, produced by [`ingest`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
}

impl Dataset {
    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.key)
    }

    pub fn measures(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.measure)
    }

    /// Rebuild a dataset from parts already known to be sorted and distinct
    /// (used when loading a serialized index). Validates the invariants.
    pub fn from_sorted_parts(keys: &[f64], measures: &[f64]) -> Result<Dataset, ModelError> {
        if keys.is_empty() || keys.len() != measures.len() {
            return Err(ModelError::EmptyInput);
        }
        for (i, (&k, &m)) in keys.iter().zip(measures).enumerate() {
            if !k.is_finite() || !m.is_finite() {
                return Err(ModelError::NonFiniteValue { row: i });
            }
            if i > 0 && keys[i - 1] >= k {
                return Err(ModelError::UnsortedKeys { row: i });
            }
        }
        Ok(Dataset {
            records: keys
                .iter()
                .zip(measures)
                .map(|(&key, &measure)| Record { key, measure })
                .collect(),
        })
    }
}

/// Validate, sort, and collapse repeated keys.
///
/// For SUM/MIN/MAX a repeated-key group merges into a single record carrying
/// the group aggregate; for COUNT it carries the group cardinality and the
/// query path uses SUM semantics from then on.
pub fn ingest(rows: &[(f64, f64)], agg: AggregateKind) -> Result<Dataset, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    for (i, &(k, m)) in rows.iter().enumerate() {
        if !k.is_finite() || !m.is_finite() {
            return Err(ModelError::NonFiniteValue { row: i });
        }
    }
    let mut sorted: Vec<(f64, f64)> = rows.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys"));

    let mut records: Vec<Record> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let key = sorted[i].0;
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == key {
            j += 1;
        }
        let group = &sorted[i..j];
        let measure = match agg {
            AggregateKind::Sum => group.iter().map(|&(_, m)| m).sum(),
            AggregateKind::Count => group.len() as f64,
            AggregateKind::Min => group.iter().map(|&(_, m)| m).fold(f64::INFINITY, f64::min),
            AggregateKind::Max => group
                .iter()
                .map(|&(_, m)| m)
                .fold(f64::NEG_INFINITY, f64::max),
        };
        records.push(Record { key, measure });
        i = j;
    }
    Ok(Dataset { records })
}

/// The key-cumulative array: entry `i` holds `(k_i, sum of measures up to i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyCumArray {
    keys: Vec<f64>,
    cum: Vec<f64>,
}

pub fn build_cum_array(d: &Dataset) -> KeyCumArray {
    let keys: Vec<f64> = d.keys().collect();
    let mut cum = Vec::with_capacity(keys.len());
    let mut acc = 0.0;
    for m in d.measures() {
        acc += m;
        cum.push(acc);
    }
    KeyCumArray { keys, cum }
}

impl KeyCumArray {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.keys.iter().copied().zip(self.cum.iter().copied())
    }

    pub fn cum_values(&self) -> &[f64] {
        &self.cum
    }

    /// Cumulative value at the largest key `<= q`, or 0 below the domain.
    pub fn cf(&self, q: f64) -> f64 {
        let idx = self.keys.partition_point(|&k| k <= q);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Cumulative value at the largest key strictly below `q`.
    fn cf_before(&self, q: f64) -> f64 {
        let idx = self.keys.partition_point(|&k| k < q);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }
}

/// Exact range SUM over the closed interval `[l, u]` as a two-point
/// difference of cumulative values. The lower endpoint uses the strict
/// predecessor so a record whose key equals `l` is included.
pub fn exact_sum(a: &KeyCumArray, l: f64, u: f64) -> f64 {
    debug_assert!(l <= u);
    a.cf(u) - a.cf_before(l)
}

/// Balanced binary tree over key intervals storing per-node maxima; answers
/// exact range MAX in `O(log n)` expanding at most two root-to-leaf paths.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMaxTree {
    keys: Vec<f64>,
    /// Implicit tree: `tree[size + i]` is leaf `i`; `tree[p]` is the max of
    /// its two children. Padding leaves hold the -inf identity.
    tree: Vec<f64>,
    size: usize,
    n: usize,
}

pub fn build_max_tree(d: &Dataset) -> AggregateMaxTree {
    AggregateMaxTree::from_measures(d.keys().collect(), &d.measures().collect::<Vec<_>>())
}

impl AggregateMaxTree {
    pub fn from_measures(keys: Vec<f64>, measures: &[f64]) -> AggregateMaxTree {
        let n = measures.len();
        let size = n.next_power_of_two().max(1);
        let mut tree = vec![f64::NEG_INFINITY; 2 * size];
        tree[size..size + n].copy_from_slice(measures);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i].max(tree[2 * i + 1]);
        }
        AggregateMaxTree {
            keys,
            tree,
            size,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Maximum measure over positions `[lo, hi)`; -inf identity when empty.
    pub fn max_in_positions(&self, lo: usize, hi: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let (mut l, mut r) = (lo + self.size, hi + self.size);
        while l < r {
            if l & 1 == 1 {
                best = best.max(self.tree[l]);
                l += 1;
            }
            if r & 1 == 1 {
                r -= 1;
                best = best.max(self.tree[r]);
            }
            l >>= 1;
            r >>= 1;
        }
        best
    }

    /// Exact maximum measure among records with `l <= key <= u`;
    /// `f64::NEG_INFINITY` when the range holds no record.
    pub fn exact_max(&self, l: f64, u: f64) -> f64 {
        debug_assert!(l <= u);
        let lo = self.keys.partition_point(|&k| k < l);
        let hi = self.keys.partition_point(|&k| k <= u);
        if lo >= hi {
            return f64::NEG_INFINITY;
        }
        self.max_in_positions(lo, hi)
    }

    /// Walk every internal node and check its stored max against a direct
    /// scan of the leaves below it. Test support.
    #[doc(hidden)]
    pub fn validate_node_aggregates(&self) -> bool {
        for node in 1..self.size {
            let mut span = 1;
            let mut first = node;
            while first < self.size {
                first *= 2;
                span *= 2;
            }
            let start = first - self.size;
            let end = (start + span).min(self.n);
            let expect = if start >= end {
                f64::NEG_INFINITY
            } else {
                self.tree[self.size + start..self.size + end]
                    .iter()
                    .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            };
            if self.tree[node] != expect {
                return false;
            }
        }
        true
    }
}

/// Free-function form of [`AggregateMaxTree::exact_max`].
pub fn exact_max(t: &AggregateMaxTree, l: f64, u: f64) -> f64 {
    t.exact_max(l, u)
}

/// The exact function the index approximates, sampled at the data keys:
/// the cumulative array for SUM/COUNT and the key-measure staircase for
/// MAX (negated for MIN, with the result sign restored downstream).
pub fn exact_function(d: &Dataset, agg: AggregateKind) -> Vec<(f64, f64)> {
    match agg {
        AggregateKind::Sum | AggregateKind::Count => build_cum_array(d).entries().collect(),
        AggregateKind::Max => d.records().iter().map(|r| (r.key, r.measure)).collect(),
        AggregateKind::Min => d.records().iter().map(|r| (r.key, -r.measure)).collect(),
    }
}
