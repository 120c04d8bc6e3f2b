use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ChungResult {
    /// `b_1 .. b_{k_max}`.
    pub b: Vec<f64>,
    /// `k_max^p b_{k_max}`.
    pub raw_scaled: f64,
    /// Extrapolated limit of `k^p b_k`.
    pub fitted: f64,
    /// `C2 / (C1 - p)` for `q = 1`, `C2 / C1` otherwise.
    pub limit: f64,
    /// `|fitted - limit| / limit`, or the absolute gap when the limit is zero.
    pub rel_error: f64,
}

/// Iterates `b_{k+1} = (1 - C1 / (k + n0)^q) b_k + C2 / (k + n0)^(q + p)`
/// with equality from `b_1` and fits the limit of `k^p b_k`.
///
/// The scaled sequence approaches its limit slowly when `q < 1` (the first
/// correction is of order `k^(q - 1)`), so the limit is the intercept of a
/// quadratic least-squares fit of `k^p b_k` against `k^(q - 1)` (against
/// `1 / k` when `q = 1`) over the last 90% of the sequence.
pub fn chung_recursion(c1: f64, c2: f64, q: f64, p: f64, n0: f64, b1: f64, k_max: usize) -> Result<ChungResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::precondition(format!("q must lie in (0, 1], got {q}")));
    }
    if !(p > 0.0 && c1 > 0.0 && c2 >= 0.0 && n0 >= 0.0) {
        return Err(Error::precondition("need p > 0, C1 > 0, C2 >= 0 and n0 >= 0"));
    }
    if q == 1.0 && c1 <= p {
        return Err(Error::precondition(format!("q = 1 requires C1 > p, got C1 = {c1}, p = {p}")));
    }
    if k_max < 10 {
        return Err(Error::precondition("k_max must be at least 10"));
    }
    let mut b = Vec::with_capacity(k_max);
    b.push(b1);
    for k in 1..k_max {
        let t = k as f64 + n0;
        let prev = b[k - 1];
        b.push((1.0 - c1 / t.powf(q)) * prev + c2 / t.powf(q + p));
    }
    let scaled = |k: usize| (k as f64).powf(p) * b[k - 1];
    let raw_scaled = scaled(k_max);

    let k_lo = k_max / 10;
    let x_of = |k: usize| {
        if q == 1.0 {
            k_max as f64 / k as f64
        } else {
            (k as f64 / k_max as f64).powf(q - 1.0)
        }
    };
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for k in k_lo..=k_max {
        let x = x_of(k);
        let row = Vector3::new(1.0, x, x * x);
        ata += row * row.transpose();
        aty += row * scaled(k);
    }
    let coef = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::precondition("degenerate fit"))?;
    // x is scaled to equal 1 at k_max, so the intercept sits at x = 0.
    let fitted = coef[0];

    let limit = if q == 1.0 { c2 / (c1 - p) } else { c2 / c1 };
    let rel_error = if limit == 0.0 {
        (fitted - limit).abs()
    } else {
        ((fitted - limit) / limit).abs()
    };
    Ok(ChungResult {
        b,
        raw_scaled,
        fitted,
        limit,
        rel_error,
    })
}
