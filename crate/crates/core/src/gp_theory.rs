//! Infinite-width (Gaussian-process) theory of the pre-activations of a
//! He-initialized 1D ReLU network with bias variance `sigma_b^2`.
//!
//! Layer `l` always refers to the pre-activation `s^(l)` entering layer
//! `l`'s ReLU: `l = 1` is the affine first layer, `l = L + 1` the output.
//! In this convention `Var s^(l)(u) = 2u^2 + l sigma_b^2`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Round-off slack accepted on a correlation before it is treated as an error.
pub const CORRELATION_SLACK: f64 = 1e-12;

fn check_layer(layer: usize) -> Result<()> {
    if layer == 0 {
        Err(Error::InvalidLayer(layer))
    } else {
        Ok(())
    }
}

fn check_sigma(sigma_b: f64) -> Result<()> {
    if sigma_b.is_finite() && sigma_b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma_b))
    }
}

/// Clamps a correlation into `[-1, 1]`, rejecting excursions beyond
/// round-off.
pub fn clamp_correlation(rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() > 1.0 + CORRELATION_SLACK {
        return Err(Error::InvalidCorrelation(rho));
    }
    Ok(rho.clamp(-1.0, 1.0))
}

/// Joint second-moment state of `(s^(l)(u), s^(l)(v))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpPairState {
    pub layer: usize,
    pub u: f64,
    pub v: f64,
    pub var_u: f64,
    pub var_v: f64,
    pub cov: f64,
    pub rho: f64,
    pub theta: f64,
}

impl GpPairState {
    fn from_moments(
        layer: usize,
        u: f64,
        v: f64,
        var_u: f64,
        var_v: f64,
        cov: f64,
    ) -> Result<Self> {
        // identical inputs give the same random variable
        let rho = if u == v {
            1.0
        } else {
            clamp_correlation(cov / (var_u * var_v).sqrt())?
        };
        Ok(GpPairState {
            layer,
            u,
            v,
            var_u,
            var_v,
            cov,
            rho,
            theta: rho.acos(),
        })
    }

    /// First-layer state: `V(t) = 2t^2 + sigma_b^2`, `C(u, v) = 2uv + sigma_b^2`.
    pub fn base(u: f64, v: f64, sigma_b: f64) -> Result<Self> {
        check_sigma(sigma_b)?;
        let sb2 = sigma_b * sigma_b;
        Self::from_moments(
            1,
            u,
            v,
            2.0 * u * u + sb2,
            2.0 * v * v + sb2,
            2.0 * u * v + sb2,
        )
    }

    /// Checks the stored correlation, angle and variances against their
    /// closed forms.
    pub fn check_invariants(&self, sigma_b: f64) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        let rho = self.cov / (self.var_u * self.var_v).sqrt();
        let ok = close(rho.clamp(-1.0, 1.0), self.rho)
            && self.theta == self.rho.acos()
            && close(self.var_u, variance(self.layer, self.u, sigma_b)?)
            && close(self.var_v, variance(self.layer, self.v, sigma_b)?);
        if ok {
            Ok(())
        } else {
            Err(Error::Invariant(format!("inconsistent GP state {self:?}")))
        }
    }
}

/// `V^(l)(u) = 2u^2 + l sigma_b^2`.
pub fn variance(layer: usize, u: f64, sigma_b: f64) -> Result<f64> {
    check_layer(layer)?;
    Ok(2.0 * u * u + layer as f64 * sigma_b * sigma_b)
}

/// `E[relu(Z1) relu(Z2)]` for mean-zero jointly Gaussian `Z1, Z2` with the
/// given variances and correlation.
pub fn arccos_kernel(var_u_prev: f64, var_v_prev: f64, rho_prev: f64) -> Result<f64> {
    for v in [var_u_prev, var_v_prev] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidVariance(v));
        }
    }
    let theta = clamp_correlation(rho_prev)?.acos();
    let x = (var_u_prev * var_v_prev).sqrt() / (2.0 * PI);
    Ok(x * (theta.sin() + (PI - theta) * theta.cos()))
}

/// Advances the pair state by one layer:
/// `C' = sigma_b^2 + 2 E[relu(Z1) relu(Z2)]`, `V' = V + sigma_b^2`.
pub fn cov_step(prev: &GpPairState, sigma_b: f64) -> Result<GpPairState> {
    check_sigma(sigma_b)?;
    let sb2 = sigma_b * sigma_b;
    let cov = if prev.u == prev.v {
        prev.var_u + sb2
    } else {
        sb2 + 2.0 * arccos_kernel(prev.var_u, prev.var_v, prev.rho)?
    };
    GpPairState::from_moments(
        prev.layer + 1,
        prev.u,
        prev.v,
        prev.var_u + sb2,
        prev.var_v + sb2,
        cov,
    )
}

/// Pair state at `layer`, iterated from the first-layer closed form.
pub fn rho_pair(layer: usize, u: f64, v: f64, sigma_b: f64) -> Result<GpPairState> {
    check_layer(layer)?;
    let mut state = GpPairState::base(u, v, sigma_b)?;
    for _ in 1..layer {
        state = cov_step(&state, sigma_b)?;
    }
    Ok(state)
}

/// `A_l(x) = l sigma_b^2 / (2x^2 + l sigma_b^2)^2`, the curvature of the
/// correlation: `rho_l(x, x + eps) = 1 - A_l(x) eps^2 + O(eps^3)`.
pub fn expansion_coefficient(layer: usize, x: f64, sigma_b: f64) -> Result<f64> {
    check_layer(layer)?;
    let lsb2 = layer as f64 * sigma_b * sigma_b;
    let d = 2.0 * x * x + lsb2;
    Ok(lsb2 / (d * d))
}

/// Leading term of the angle between `s^(l)(x)` and `s^(l)(x + eps)`:
/// `sqrt(2l) sigma_b eps / (2x^2 + l sigma_b^2)`.
pub fn theta_linearized(layer: usize, x: f64, eps: f64, sigma_b: f64) -> Result<f64> {
    check_layer(layer)?;
    let l = layer as f64;
    Ok((2.0 * l).sqrt() * sigma_b * eps / (2.0 * x * x + l * sigma_b * sigma_b))
}

/// Probability that two mean-zero Gaussians with correlation `rho` have
/// opposite signs: `arccos(rho) / pi`.
pub fn sign_change_prob(rho: f64) -> Result<f64> {
    Ok(clamp_correlation(rho)?.acos() / PI)
}

/// Expected zero crossings per unit length of `s^(l)` near `x`.
pub fn crossing_density(layer: usize, x: f64, sigma_b: f64) -> Result<f64> {
    check_layer(layer)?;
    let l = layer as f64;
    Ok((2.0 * l).sqrt() * sigma_b / (2.0 * x * x + l * sigma_b * sigma_b) / PI)
}

fn scaled_atan(t: f64, scale: f64) -> f64 {
    if t == f64::INFINITY {
        FRAC_PI_2
    } else if t == f64::NEG_INFINITY {
        -FRAC_PI_2
    } else {
        (t * scale).atan()
    }
}

/// Expected number of zero crossings of `s^(l)` on `[a, b]`; either end may
/// be infinite.
pub fn expected_crossings(layer: usize, a: f64, b: f64, sigma_b: f64) -> Result<f64> {
    check_layer(layer)?;
    check_sigma(sigma_b)?;
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::InvalidInterval(a, b));
    }
    let scale = 2f64.sqrt() / ((layer as f64).sqrt() * sigma_b);
    Ok((scaled_atan(b, scale) - scaled_atan(a, scale)) / PI)
}

/// One row of the per-point theory table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryRow {
    pub layer: usize,
    pub x: f64,
    pub variance: f64,
    pub density: f64,
    #[serde(rename = "A_coeff")]
    pub a_coeff: f64,
}

/// One row of the interval table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingRow {
    pub layer: usize,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub expected_crossings: f64,
}

pub fn theory_table(layers: &[usize], xs: &[f64], sigma_b: f64) -> Result<Vec<TheoryRow>> {
    check_sigma(sigma_b)?;
    let mut rows = Vec::with_capacity(layers.len() * xs.len());
    for &layer in layers {
        for &x in xs {
            rows.push(TheoryRow {
                layer,
                x,
                variance: variance(layer, x, sigma_b)?,
                density: crossing_density(layer, x, sigma_b)?,
                a_coeff: expansion_coefficient(layer, x, sigma_b)?,
            });
        }
    }
    Ok(rows)
}

pub fn crossing_table(
    layers: &[usize],
    intervals: &[(f64, f64)],
    sigma_b: f64,
) -> Result<Vec<CrossingRow>> {
    let mut rows = Vec::with_capacity(layers.len() * intervals.len());
    for &layer in layers {
        for &(a, b) in intervals {
            rows.push(CrossingRow {
                layer,
                a,
                b,
                expected_crossings: expected_crossings(layer, a, b, sigma_b)?,
            });
        }
    }
    Ok(rows)
}

/// Truncated small-`eps` series for the quantities above, used to check the
/// recursion against its asymptotics.
pub mod series {
    use super::*;

    /// Exact first-layer correlation between inputs `x` and `x + eps`.
    pub fn rho1_exact(x: f64, eps: f64, sigma_b: f64) -> f64 {
        let sb2 = sigma_b * sigma_b;
        let y = x + eps;
        (2.0 * x * y + sb2) / ((2.0 * x * x + sb2) * (2.0 * y * y + sb2)).sqrt()
    }

    /// `1 - sigma_b^2 eps^2 / (2x^2 + sigma_b^2)^2`.
    pub fn rho1_series(x: f64, eps: f64, sigma_b: f64) -> f64 {
        let sb2 = sigma_b * sigma_b;
        let a = 2.0 * x * x + sb2;
        1.0 - sb2 * eps * eps / (a * a)
    }

    /// `arccos(1 - t) ~ sqrt(2t)`.
    pub fn arccos_one_minus_series(t: f64) -> f64 {
        (2.0 * t).sqrt()
    }

    /// `(sin t + (pi - t) cos t) / pi`.
    pub fn kernel_factor(theta: f64) -> f64 {
        (theta.sin() + (PI - theta) * theta.cos()) / PI
    }

    /// `1 - t^2 / 2`.
    pub fn kernel_factor_series(theta: f64) -> f64 {
        1.0 - 0.5 * theta * theta
    }

    /// `sqrt(V (V + 4x eps + 2 eps^2))`, the exact geometric-mean variance of
    /// a pair at `x`, `x + eps` whose variance at `x` is `v`.
    pub fn sqrt_product_exact(v: f64, x: f64, eps: f64) -> f64 {
        (v * (v + 4.0 * x * eps + 2.0 * eps * eps)).sqrt()
    }

    /// `V + 2x eps + (1 - 2x^2 / V) eps^2`.
    pub fn sqrt_product_series(v: f64, x: f64, eps: f64) -> f64 {
        v + 2.0 * x * eps + (1.0 - 2.0 * x * x / v) * eps * eps
    }

    /// Second-order series of `C^(l)(x, x + eps)` for `l >= 2`:
    /// `sigma_b^2 + V + 2x eps + (1 - 2x^2/V - A_{l-1} V) eps^2` with
    /// `V = V^(l-1)(x)`.
    pub fn cov_series(layer: usize, x: f64, eps: f64, sigma_b: f64) -> Result<f64> {
        if layer < 2 {
            return Err(Error::InvalidLayer(layer));
        }
        let v = variance(layer - 1, x, sigma_b)?;
        let a_prev = expansion_coefficient(layer - 1, x, sigma_b)?;
        Ok(
            sigma_b * sigma_b
                + v
                + 2.0 * x * eps
                + (1.0 - 2.0 * x * x / v - a_prev * v) * eps * eps,
        )
    }

    /// `1 - A_l(x) eps^2`.
    pub fn rho_series(layer: usize, x: f64, eps: f64, sigma_b: f64) -> Result<f64> {
        Ok(1.0 - expansion_coefficient(layer, x, sigma_b)? * eps * eps)
    }

    /// `A_l` rebuilt from `A_{l-1}` by the inductive step:
    /// `A_{l-1} V / (V + sigma_b^2) + 2 sigma_b^2 x^2 / (V (V + sigma_b^2)^2)`.
    pub fn coefficient_step(layer: usize, x: f64, sigma_b: f64) -> Result<f64> {
        if layer < 2 {
            return Err(Error::InvalidLayer(layer));
        }
        let sb2 = sigma_b * sigma_b;
        let v = variance(layer - 1, x, sigma_b)?;
        let w = v + sb2;
        let a_prev = expansion_coefficient(layer - 1, x, sigma_b)?;
        Ok(a_prev * v / w + 2.0 * sb2 * x * x / (v * w * w))
    }
}
