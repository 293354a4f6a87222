//! The two elementary summation-by-parts inequalities
//! `(1/m)(Σλ)^m ≤ Σ_j λ_j (Σ_{k≥j} λ_k)^{m-1}` and, for `λ_j ≤ 1`,
//! `Σ_j λ_j e^{Σ_{k≥j} λ_k} ≤ 2(e^{Σλ} - 1)`.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumPartsReport {
    pub power_lhs: f64,
    pub power_rhs: f64,
    pub power_holds: bool,
    pub exp_lhs: f64,
    pub exp_rhs: f64,
    /// `None` when some `λ_j > 1`, outside the exponential form's range.
    pub exp_holds: Option<bool>,
}

/// Rounding slack: the power form is an equality for `m = 1`.
fn le(a: f64, b: f64, terms: usize) -> bool {
    a <= b + 4.0 * f64::EPSILON * (terms as f64 + 1.0) * b.abs().max(a.abs())
}

pub fn sumparts_checks(lambda: &[f64], m: u32) -> Result<SumPartsReport> {
    if m == 0 {
        return Err(invalid("m", "need m >= 1"));
    }
    if lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(invalid("lambda", "entries must be finite and nonnegative"));
    }
    let mut tail = 0.0;
    let (mut pow_rhs, mut exp_lhs) = (0.0, 0.0);
    for &l in lambda.iter().rev() {
        tail += l;
        pow_rhs += l * tail.powi(m as i32 - 1);
        exp_lhs += l * tail.exp();
    }
    let total = tail;
    let pow_lhs = total.powi(m as i32) / m as f64;
    let exp_rhs = 2.0 * total.exp_m1();
    let k = lambda.len();
    Ok(SumPartsReport {
        power_lhs: pow_lhs,
        power_rhs: pow_rhs,
        power_holds: le(pow_lhs, pow_rhs, k * m as usize),
        exp_lhs,
        exp_rhs,
        exp_holds: lambda.iter().all(|l| *l <= 1.0).then(|| le(exp_lhs, exp_rhs, k)),
    })
}
