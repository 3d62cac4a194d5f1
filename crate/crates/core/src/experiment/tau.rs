//! Kendall rank correlation.

use crate::error::{Error, Result};

/// Kendall τ-b, corrected for ties in either list.
///
/// Fails on length mismatch, fewer than two points, non-finite entries, or
/// a list that is constant (τ undefined).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Invalid("kendall tau needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("kendall tau inputs must be finite".into()));
    }
    let n = x.len();
    let (mut s, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = sign(x[i] - x[j]);
            let b = sign(y[i] - y[j]);
            s += a * b;
            ties_x += (a == 0) as i64;
            ties_y += (b == 0) as i64;
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let (dx, dy) = (n0 - ties_x, n0 - ties_y);
    if dx == 0 || dy == 0 {
        return Err(Error::Invalid("kendall tau undefined: all values tied".into()));
    }
    Ok(s as f64 / ((dx as f64) * (dy as f64)).sqrt())
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}
