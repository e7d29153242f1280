//! Closed-form probability bounds for selection errors and detection rates.
//!
//! The rate constants `C1` (and `C1'`) appearing in the detection bounds are
//! existence constants with no known numeric value; every evaluator takes
//! them as explicit arguments.

use crate::error::{Error, Result};

/// Contamination of one candidate window relative to a noise-only window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowContamination {
    /// Number of particle pixels inside the window.
    pub s1: usize,
    /// Number of window pixels outside the noise-only window.
    pub excess: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionBoundParams {
    pub b_minus_a: f64,
    pub sigma2: f64,
    /// Almost-sure bound on the noise magnitude.
    pub m: f64,
    pub windows: Vec<WindowContamination>,
}

impl SelectionBoundParams {
    /// `(C1, C2, C3) = (3 (b-a)^2, 12 sigma^2, 4 M (b-a))`.
    pub fn constants(&self) -> (f64, f64, f64) {
        (3.0 * self.b_minus_a * self.b_minus_a, 12.0 * self.sigma2, 4.0 * self.m * self.b_minus_a)
    }

    fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.b_minus_a.is_finite() && self.b_minus_a > 0.0) {
            return Err(Error::invalid("b - a must be positive"));
        }
        if !finite_nonneg(self.sigma2) || !finite_nonneg(self.m) {
            return Err(Error::invalid("sigma^2 and M must be non-negative"));
        }
        Ok(())
    }
}

/// Upper bound on the probability that some candidate window has a smaller
/// sum than the noise-only window:
/// `sum_K exp(-C1 s1^2 / (C2 |K \ K0| + C3 s1))`.
///
/// A window with `s1 = 0` contributes 1. The result may exceed 1.
pub fn selection_error_bound(p: &SelectionBoundParams) -> Result<f64> {
    p.validate()?;
    let (c1, c2, c3) = p.constants();
    Ok(p.windows
        .iter()
        .map(|w| {
            if w.s1 == 0 {
                return 1.0;
            }
            let s1 = w.s1 as f64;
            let denom = c2 * w.excess as f64 + c3 * s1;
            if denom == 0.0 {
                0.0
            } else {
                (-c1 * s1 * s1 / denom).exp()
            }
        })
        .sum())
}

fn check_rate_args(pi: f64, phi1: f64, c1: f64) -> Result<()> {
    if !(pi.is_finite() && pi >= 0.0 && phi1.is_finite() && phi1 >= 0.0) {
        return Err(Error::invalid("particle count and size must be non-negative"));
    }
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(Error::invalid("rate constant must be positive"));
    }
    Ok(())
}

/// Rate at which the probability of missing any of `pi` particles vanishes:
/// `exp(pi ln 2 - C1 phi1)`.
pub fn missed_detection_rate(pi: usize, phi1: f64, c1: f64) -> Result<f64> {
    check_rate_args(pi as f64, phi1, c1)?;
    Ok((pi as f64 * std::f64::consts::LN_2 - c1 * phi1).exp())
}

/// Lower bound on the probability that all `pi` particles are detected:
///
/// `1 - exp(pi ln 2 - C1 phi1) (1 - exp(-C1 phi1 pi)) / (1 - exp(-C1 phi1))`.
///
/// Not clamped to `[0, 1]`.
pub fn joint_detection_lower_bound(pi: usize, phi1: f64, c1: f64) -> Result<f64> {
    if pi == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    check_rate_args(pi as f64, phi1, c1)?;
    let x = c1 * phi1;
    if x == 0.0 {
        return Err(Error::invalid("C1 * phi1 must be positive"));
    }
    // 1 - e^{-y} evaluated as -expm1(-y) to keep precision for small y.
    let geometric = (-(-x * pi as f64).exp_m1()) / (-(-x).exp_m1());
    Ok(1.0 - missed_detection_rate(pi, phi1, c1)? * geometric)
}

/// Single-particle detection bounds `(1 - e^{-C1 phi1}, 1 - (phi1 + 1) e^{-C1' phi1})`.
pub fn single_particle_bound(phi1: f64, c1: f64, c1_prime: f64) -> Result<(f64, f64)> {
    check_rate_args(0.0, phi1, c1)?;
    check_rate_args(0.0, phi1, c1_prime)?;
    Ok((-(-c1 * phi1).exp_m1(), 1.0 - (phi1 + 1.0) * (-c1_prime * phi1).exp()))
}
