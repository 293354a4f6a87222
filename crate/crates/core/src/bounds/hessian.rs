//! k-Hessian presets: the potentials `W_{2k/(k+1), k+1}` and `I_{2k}`
//! take the place of `W_{1,p}` and `I_p`, with radial power `n - 2k`.

use super::engine::{BoundIntegral, InnerWeight, OuterWeight};
use super::BoundOptions;
use crate::error::{invalid, Result};
use crate::measures::Measure;
use crate::potentials::{Kernel, PotValue};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianParams {
    pub k: u32,
    /// Wolff order `2k/(k+1)`.
    pub beta: f64,
    /// Wolff exponent `k + 1`.
    pub s: f64,
    pub riesz_order: f64,
}

impl HessianParams {
    pub fn wolff_kernel(&self, n: usize) -> Result<Kernel> {
        Kernel::wolff(n, self.beta, self.s)
    }

    pub fn riesz_kernel(&self, n: usize) -> Result<Kernel> {
        Kernel::riesz(n, self.riesz_order)
    }
}

pub fn hessian_params(k: u32, n: usize) -> Result<HessianParams> {
    if k == 0 || 2 * k as usize >= n {
        return Err(invalid("k", format!("need 1 <= k < n/2 = {}", n as f64 / 2.0)));
    }
    let kf = k as f64;
    Ok(HessianParams { k, beta: 2.0 * kf / (kf + 1.0), s: kf + 1.0, riesz_order: 2.0 * kf })
}

/// Outer exponent of the upper bound: the printed statement has `1/(2k)`
/// there and `1/k` in the lower bound; both are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HessianExponent {
    #[default]
    InverseTwoK,
    InverseK,
}

fn base(n: usize, hp: &HessianParams, exponent: f64, opts: &BoundOptions) -> BoundIntegral {
    BoundIntegral {
        a: n as f64 - 2.0 * hp.k as f64,
        exponent,
        ..BoundIntegral::quasilinear(n, 2.0, f64::INFINITY)
    }
    .with_resolution(opts.node_resolution)
    .with_dyadic(opts.dyadic)
}

/// `∫_0^∞ (e^{c W^r σ(x)} r^{2k-n} ∫_{B(x,r)} e^{c I^r_{2k} σ} dω)^{1/k} dr/r`.
pub fn hessian_lower(sigma: &Measure, omega: &Measure, x: &[f64], c: f64, k: u32, opts: &BoundOptions) -> Result<PotValue> {
    let n = omega.dim();
    let hp = hessian_params(k, n)?;
    base(n, &hp, 1.0 / k as f64, opts)
        .with_outer(OuterWeight::Truncated(hp.wolff_kernel(n)?), c)
        .with_inner(InnerWeight::Truncated(hp.riesz_kernel(n)?), c)
        .eval(sigma, omega, x, &opts.quad)
}

/// `∫_0^∞ (e^{c W^r σ(x)} r^{2k-n} ∫_{B(x,r)} e^{c W^r σ} dω)^{e} dr/r`.
#[allow(clippy::too_many_arguments)]
pub fn hessian_upper(
    sigma: &Measure,
    omega: &Measure,
    x: &[f64],
    c: f64,
    k: u32,
    exponent: HessianExponent,
    opts: &BoundOptions,
) -> Result<PotValue> {
    let n = omega.dim();
    let hp = hessian_params(k, n)?;
    let e = match exponent {
        HessianExponent::InverseTwoK => 0.5 / k as f64,
        HessianExponent::InverseK => 1.0 / k as f64,
    };
    let w = hp.wolff_kernel(n)?;
    base(n, &hp, e, opts)
        .with_outer(OuterWeight::Truncated(w), c)
        .with_inner(InnerWeight::Truncated(w), c)
        .eval(sigma, omega, x, &opts.quad)
}
