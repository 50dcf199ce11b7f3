//! Discrete minimax (Chebyshev) polynomial fitting via linear programming.
//!
//! The primal program minimizes `t` subject to `|F(k_i) - P(k_i)| <= t` for
//! every constraint point. We solve its dual, which has one row per
//! polynomial coefficient plus one, so the simplex basis stays tiny no matter
//! how many points an interval contains; the fitted coefficients are read off
//! the equality-row multipliers at optimality. Keys and values are affinely
//! normalized before solving: the degree-4 condition-number blowup of raw
//! monomials is what the normalization avoids.

use crate::error::FitError;
use crate::poly::{KeyMap, PolyCoeffs, SurfaceCoeffs, MAX_DEG_1D, MAX_DEG_2D};
use crate::simplex::{self, StandardLp};

/// A fitted univariate polynomial plus its certified error.
///
/// The error is the larger of the LP objective and the directly re-evaluated
/// maximum residual over the constraint points.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub poly: PolyCoeffs,
    pub error: f64,
}

/// A fitted polynomial surface plus its certified error.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFit {
    pub surface: SurfaceCoeffs,
    pub error: f64,
}

/// Best minimax fit of `samples = [(k, F(k))]` at the given degree.
///
/// With `len <= deg + 1` the fit interpolates and the error is zero up to
/// solver tolerance; the effective degree is clamped to `len - 1` so tiny
/// intervals never carry spurious high-order terms.
pub fn fit_minimax_1d(samples: &[(f64, f64)], deg: usize) -> Result<FitResult, FitError> {
    if !(1..=MAX_DEG_1D).contains(&deg) {
        return Err(FitError::DegreeOutOfRange {
            deg,
            min: 1,
            max: MAX_DEG_1D,
        });
    }
    assert!(!samples.is_empty(), "fit_minimax_1d on empty sample set");
    if samples.len() == 1 {
        return Ok(FitResult {
            poly: PolyCoeffs::constant(samples[0].1),
            error: 0.0,
        });
    }

    let deg = deg.min(samples.len() - 1);
    let (mut k_lo, mut k_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(k, _) in samples {
        k_lo = k_lo.min(k);
        k_hi = k_hi.max(k);
    }
    let key_map = KeyMap::normalizing(k_lo, k_hi);

    let values: Vec<f64> = samples.iter().map(|&(_, f)| f).collect();
    let (f_off, f_scale) = value_norm(&values);
    if f_scale == 0.0 {
        // All values identical: the constant fit is exact.
        return Ok(FitResult {
            poly: PolyCoeffs {
                coeffs: once_then_zeros(f_off, deg),
                key_map,
            },
            error: 0.0,
        });
    }

    let width = deg + 1;
    let basis: Vec<f64> = samples
        .iter()
        .flat_map(|&(k, _)| {
            let t = key_map.apply(k);
            (0..width).scan(1.0, move |pow, _| {
                let cur = *pow;
                *pow *= t;
                Some(cur)
            })
        })
        .collect();

    let norm_values: Vec<f64> = values.iter().map(|&f| (f - f_off) / f_scale).collect();
    let (coeffs_norm, t_norm) = solve_dual(&basis, &norm_values, width)?;

    let mut coeffs: Vec<f64> = coeffs_norm.iter().map(|&a| a * f_scale).collect();
    coeffs[0] += f_off;
    let poly = PolyCoeffs { coeffs, key_map };

    let direct = samples
        .iter()
        .map(|&(k, f)| (f - poly.eval(k)).abs())
        .fold(0.0f64, f64::max);
    Ok(FitResult {
        error: direct.max(t_norm * f_scale),
        poly,
    })
}

/// Best minimax fit of `samples = [(u, v, F(u, v))]` by a polynomial surface
/// with all `(deg+1)^2` mixed terms, both coordinates normalized to `[-1, 1]`.
pub fn fit_minimax_2d(samples: &[(f64, f64, f64)], deg: usize) -> Result<SurfaceFit, FitError> {
    if !(1..=MAX_DEG_2D).contains(&deg) {
        return Err(FitError::DegreeOutOfRange {
            deg,
            min: 1,
            max: MAX_DEG_2D,
        });
    }
    assert!(!samples.is_empty(), "fit_minimax_2d on empty sample set");

    let mut u_lo = f64::INFINITY;
    let mut u_hi = f64::NEG_INFINITY;
    let mut v_lo = f64::INFINITY;
    let mut v_hi = f64::NEG_INFINITY;
    for &(u, v, _) in samples {
        u_lo = u_lo.min(u);
        u_hi = u_hi.max(u);
        v_lo = v_lo.min(v);
        v_hi = v_hi.max(v);
    }
    let u_map = KeyMap::normalizing(u_lo, u_hi);
    let v_map = KeyMap::normalizing(v_lo, v_hi);
    let width = deg + 1;
    let terms = width * width;

    let values: Vec<f64> = samples.iter().map(|&(_, _, f)| f).collect();
    let (f_off, f_scale) = value_norm(&values);
    if f_scale == 0.0 {
        let mut coeffs = vec![0.0; terms];
        coeffs[0] = f_off;
        return Ok(SurfaceFit {
            surface: SurfaceCoeffs {
                deg,
                coeffs,
                u_map,
                v_map,
            },
            error: 0.0,
        });
    }

    let mut basis = Vec::with_capacity(samples.len() * terms);
    let mut s_pow = vec![0.0; width];
    let mut t_pow = vec![0.0; width];
    for &(u, v, _) in samples {
        fill_powers(&mut s_pow, u_map.apply(u));
        fill_powers(&mut t_pow, v_map.apply(v));
        for &sp in &s_pow {
            for &tp in &t_pow {
                basis.push(sp * tp);
            }
        }
    }

    let norm_values: Vec<f64> = values.iter().map(|&f| (f - f_off) / f_scale).collect();
    let (coeffs_norm, t_norm) = solve_dual(&basis, &norm_values, terms)?;

    let mut coeffs: Vec<f64> = coeffs_norm.iter().map(|&a| a * f_scale).collect();
    coeffs[0] += f_off;
    let surface = SurfaceCoeffs {
        deg,
        coeffs,
        u_map,
        v_map,
    };
    let direct = samples
        .iter()
        .map(|&(u, v, f)| (f - surface.eval(u, v)).abs())
        .fold(0.0f64, f64::max);
    Ok(SurfaceFit {
        error: direct.max(t_norm * f_scale),
        surface,
    })
}

/// Solve the dual of the minimax LP.
///
/// `basis` holds one row of basis-function values per sample (`terms` each),
/// `values` the normalized targets. Returns the fitted coefficients (the
/// equality-row duals) and the optimal deviation `t`.
fn solve_dual(basis: &[f64], values: &[f64], terms: usize) -> Result<(Vec<f64>, f64), FitError> {
    let len = values.len();
    let rows = terms + 1;
    let cols = 2 * len;

    // Column pair per sample: (+phi, 1) with cost +F and (-phi, 1) with cost -F.
    let mut columns = vec![0.0; rows * cols];
    let mut costs = vec![0.0; cols];
    for i in 0..len {
        let phi = &basis[i * terms..(i + 1) * terms];
        let plus = 2 * i * rows;
        let minus = (2 * i + 1) * rows;
        for (t, &p) in phi.iter().enumerate() {
            columns[plus + t] = p;
            columns[minus + t] = -p;
        }
        columns[plus + terms] = 1.0;
        columns[minus + terms] = 1.0;
        costs[2 * i] = values[i];
        costs[2 * i + 1] = -values[i];
    }
    let mut rhs = vec![0.0; rows];
    rhs[terms] = 1.0;

    let sol = simplex::solve(&StandardLp {
        rows,
        cols,
        columns: &columns,
        costs: &costs,
        rhs: &rhs,
    })?;

    let coeffs = sol.duals[..terms].to_vec();
    // Strong duality gives the deviation both as the negated last multiplier
    // and as the negated objective; take the safer of the two.
    let t = (-sol.duals[terms]).max(-sol.objective).max(0.0);
    Ok((coeffs, t))
}

fn fill_powers(out: &mut [f64], t: f64) {
    let mut pow = 1.0;
    for slot in out.iter_mut() {
        *slot = pow;
        pow *= t;
    }
}

fn value_norm(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    ((lo + hi) / 2.0, (hi - lo) / 2.0)
}

fn once_then_zeros(first: f64, deg: usize) -> Vec<f64> {
    let mut v = vec![0.0; deg + 1];
    v[0] = first;
    v
}
