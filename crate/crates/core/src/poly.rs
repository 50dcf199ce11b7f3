//! Polynomial models in one and two variables.
//!
//! Coefficients are always expressed over affinely normalized coordinates:
//! fitted intervals are mapped onto `[-1, 1]` before solving, which keeps the
//! monomial basis well conditioned at the supported degrees. The affine map is
//! stored alongside the coefficients so evaluation is transparent to callers.

use crate::error::FitError;

/// Largest degree accepted by the univariate fitter.
pub const MAX_DEG_1D: usize = 8;
/// Largest degree accepted by the bivariate fitter.
pub const MAX_DEG_2D: usize = 4;
/// Largest degree for which closed-form range maxima are evaluated.
pub const MAX_DEG_RANGE_MAX: usize = 3;

/// Affine map `t = (k - offset) * scale` taking a key interval onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyMap {
    pub scale: f64,
    pub offset: f64,
}

impl KeyMap {
    /// Identity transform; raw keys are used as-is.
    pub const IDENTITY: KeyMap = KeyMap {
        scale: 1.0,
        offset: 0.0,
    };

    /// Map `[lo, hi]` onto `[-1, 1]`. A degenerate interval maps to `t = 0`.
    pub fn normalizing(lo: f64, hi: f64) -> KeyMap {
        let half = (hi - lo) / 2.0;
        if half > 0.0 {
            KeyMap {
                scale: 1.0 / half,
                offset: (lo + hi) / 2.0,
            }
        } else {
            KeyMap {
                scale: 1.0,
                offset: lo,
            }
        }
    }

    #[inline]
    pub fn apply(&self, k: f64) -> f64 {
        (k - self.offset) * self.scale
    }
}

/// A univariate polynomial `P(k) = sum a_j t^j` with `t = key_map(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    /// `a_0 ..= a_deg`, lowest degree first.
    pub coeffs: Vec<f64>,
    pub key_map: KeyMap,
}

impl PolyCoeffs {
    pub fn constant(value: f64) -> PolyCoeffs {
        PolyCoeffs {
            coeffs: vec![value],
            key_map: KeyMap::IDENTITY,
        }
    }

    pub fn deg(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation at a raw key.
    #[inline]
    pub fn eval(&self, k: f64) -> f64 {
        let t = self.key_map.apply(k);
        let mut acc = 0.0;
        for &a in self.coeffs.iter().rev() {
            acc = acc * t + a;
        }
        acc
    }

    /// Maximum of `P` over the closed key interval `[lo, hi]`, from the border
    /// values and the real roots of `P'` inside the interval. `P'` has degree
    /// at most two for the supported degrees, so the roots come from the
    /// linear/quadratic closed forms.
    pub fn max_on_range(&self, lo: f64, hi: f64) -> Result<f64, FitError> {
        if self.deg() > MAX_DEG_RANGE_MAX {
            return Err(FitError::DegreeOutOfRange {
                deg: self.deg(),
                min: 0,
                max: MAX_DEG_RANGE_MAX,
            });
        }
        debug_assert!(lo <= hi);
        let mut best = self.eval(lo).max(self.eval(hi));
        // Work in normalized coordinates; the key map is strictly increasing.
        let (t_lo, t_hi) = (self.key_map.apply(lo), self.key_map.apply(hi));
        for t in derivative_roots(&self.coeffs) {
            if t > t_lo && t < t_hi {
                let mut acc = 0.0;
                for &a in self.coeffs.iter().rev() {
                    acc = acc * t + a;
                }
                best = best.max(acc);
            }
        }
        Ok(best)
    }
}

/// Real roots of `P'` for `P` of degree <= 3, in normalized coordinates.
fn derivative_roots(coeffs: &[f64]) -> Vec<f64> {
    // P' coefficients: d_j = (j+1) * a_{j+1}
    let d: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, &a)| j as f64 * a)
        .collect();
    match d.len() {
        0 => Vec::new(),
        1 => Vec::new(), // constant derivative
        2 => {
            // d0 + d1 t = 0
            if d[1] != 0.0 {
                vec![-d[0] / d[1]]
            } else {
                Vec::new()
            }
        }
        3 => {
            // d0 + d1 t + d2 t^2 = 0
            let (c, b, a) = (d[0], d[1], d[2]);
            if a == 0.0 {
                return if b != 0.0 { vec![-c / b] } else { Vec::new() };
            }
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return Vec::new();
            }
            let sq = disc.sqrt();
            // Citardauq form avoids cancellation when b is large.
            let q = -0.5 * (b + b.signum() * sq);
            let mut roots = Vec::with_capacity(2);
            if a != 0.0 {
                roots.push(q / a);
            }
            if q != 0.0 {
                roots.push(c / q);
            } else {
                roots.push(0.0);
            }
            roots
        }
        _ => unreachable!("degree cap enforced by caller"),
    }
}

/// A bivariate polynomial surface `P(u, v) = sum_{i,j} a_ij s^i t^j` over
/// normalized coordinates `s = u_map(u)`, `t = v_map(v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCoeffs {
    pub deg: usize,
    /// Row-major `(deg+1) x (deg+1)` grid; `coeffs[i * (deg+1) + j]` is `a_ij`.
    pub coeffs: Vec<f64>,
    pub u_map: KeyMap,
    pub v_map: KeyMap,
}

impl SurfaceCoeffs {
    /// Nested Horner evaluation at raw coordinates.
    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let s = self.u_map.apply(u);
        let t = self.v_map.apply(v);
        let width = self.deg + 1;
        let mut acc = 0.0;
        for i in (0..width).rev() {
            let row = &self.coeffs[i * width..(i + 1) * width];
            let mut inner = 0.0;
            for &a in row.iter().rev() {
                inner = inner * t + a;
            }
            acc = acc * s + inner;
        }
        acc
    }
}
