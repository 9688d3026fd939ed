//! Behaviour of Weyl functions and solutions far out on a non-real ray:
//! exponential decay of `m₁ - m₂`, growth of `φ(a; z)` and the `O(|z|)`
//! bound of Nevanlinna functions.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{logspace, sqrt_minus};
use crate::sturm_liouville::{fundamental_scaled, SlProblem};
use crate::transfer::fmt17;
use crate::weyl::WeylFunction;

const COMPENSATE_BELOW: f64 = 1e-12;
const FLOOR_LN: f64 = -690.7755278982137; // ln 1e-300

/// Points `z_j = r_j e^{iθ}` on a ray in the upper half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RaySampling {
    angle: f64,
    radii: Vec<f64>,
}

impl RaySampling {
    pub fn new(angle: f64, radii: Vec<f64>) -> Result<Self> {
        if !(angle > 0.0 && angle < std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!("ray angle must lie in (0, π), got {angle}")));
        }
        if radii.len() < 4 {
            return Err(Error::InvalidInput(format!("a ray needs at least 4 radii, got {}", radii.len())));
        }
        if !(radii[0] > 0.0) || radii.iter().any(|r| !r.is_finite()) || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("radii must be positive, finite and strictly increasing".into()));
        }
        Ok(Self { angle, radii })
    }

    /// `n` radii log-spaced between `r0` and `r1`.
    pub fn log_spaced(angle: f64, r0: f64, r1: f64, n: usize) -> Result<Self> {
        if !(r0 > 0.0 && r1 > r0) {
            return Err(Error::InvalidInput(format!("need 0 < r0 < r1, got {r0}, {r1}")));
        }
        Self::new(angle, logspace(r0, r1, n))
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn points(&self) -> Vec<C> {
        self.radii.iter().map(|&r| C::from_polar(r, self.angle)).collect()
    }
}

impl Default for RaySampling {
    /// Imaginary axis, `10²…10⁶`.
    fn default() -> Self {
        Self::log_spaced(FRAC_PI_2, 1e2, 1e6, 33).unwrap()
    }
}

/// One ray point of a decay fit; `log_difference` is `None` when the
/// difference could not be resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub radius: f64,
    /// `Re √(-z)`.
    pub abscissa: f64,
    pub log_difference: Option<f64>,
    pub compensated: bool,
}

/// `log|m₁ - m₂| ≈ log Ĉ - ĉ·Re √(-z)`; `â = ĉ/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub c_hat: f64,
    pub log_c: f64,
    pub a_hat: f64,
    pub r2: f64,
    pub points: Vec<DecayPoint>,
}

impl DecayFit {
    /// Radii dropped from the fit.
    pub fn dropped(&self) -> Vec<f64> {
        self.points.iter().filter(|p| p.log_difference.is_none()).map(|p| p.radius).collect()
    }

    /// `radius,abscissa,log_difference,fitted` rows; unresolved points have an
    /// empty `log_difference`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "radius,abscissa,log_difference,fitted")?;
        for p in &self.points {
            let fitted = self.log_c - self.c_hat * p.abscissa;
            let ld = p.log_difference.map(fmt17).unwrap_or_default();
            writeln!(out, "{},{},{},{}", fmt17(p.radius), fmt17(p.abscissa), ld, fmt17(fitted))?;
        }
        Ok(())
    }
}

fn log_difference(m1: &dyn WeylFunction, m2: &dyn WeylFunction, z: C) -> Result<(Option<f64>, bool)> {
    let (v1, v2) = (m1.eval(z)?, m2.eval(z)?);
    let d = (v1 - v2).norm();
    let scale = v1.norm().max(v2.norm());
    if d > COMPENSATE_BELOW * scale && d > 0.0 {
        return Ok((Some(d.ln()), false));
    }
    if let (Some(w1), Some(w2)) = (m1.sl_weyl(), m2.sl_weyl()) {
        if let Some(diff) = w1.difference(w2, z) {
            let ln = diff?.ln_abs;
            return Ok((ln.is_finite().then_some(ln), true));
        }
    }
    Ok((None, false))
}

/// Least-squares fit of `log|m₁(z_j) - m₂(z_j)|` against `-Re √(-z_j)`.
///
/// Differences below the rounding level of the values are recomputed in
/// compensated form when both handles come from the Sturm-Liouville solver,
/// and dropped otherwise.
pub fn decay_fit(m1: &dyn WeylFunction, m2: &dyn WeylFunction, ray: &RaySampling) -> Result<DecayFit> {
    let zs = ray.points();
    let evals: Vec<Result<(Option<f64>, bool)>> = zs.par_iter().map(|&z| log_difference(m1, m2, z)).collect();
    let mut points = Vec::with_capacity(zs.len());
    for ((&z, &radius), e) in zs.iter().zip(ray.radii()).zip(evals) {
        let (ld, compensated) = e?;
        points.push(DecayPoint {
            radius,
            abscissa: sqrt_minus(z).re,
            log_difference: ld.filter(|&v| compensated || v > FLOOR_LN),
            compensated,
        });
    }
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.log_difference.map(|l| (-p.abscissa, l)))
        .collect();
    if used.is_empty() {
        return Err(Error::Indistinguishable {
            last_resolved_radius: 0.0,
        });
    }
    if used.len() < 4 {
        let last = points
            .iter()
            .filter(|p| p.log_difference.is_some())
            .map(|p| p.radius)
            .fold(0.0, f64::max);
        return Err(Error::Indistinguishable {
            last_resolved_radius: last,
        });
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = used.iter().map(|p| (p.1 - my).powi(2)).sum();
    let c_hat = sxy / sxx;
    let log_c = my - c_hat * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        c_hat,
        log_c,
        a_hat: 0.5 * c_hat,
        r2,
        points,
    })
}

/// `φ(a; z)·2e^{-a√(-z)}/(sin α + cos α/√(-z))` along the ray; tends to `1`.
pub fn phi_growth_check(problem: &SlProblem, a: f64, ray: &RaySampling) -> Result<Vec<C>> {
    let (s, c) = problem.alpha().sin_cos();
    ray.points()
        .par_iter()
        .map(|&z| {
            let (y, ln_scale) = fundamental_scaled(problem, z, a)?;
            let root = sqrt_minus(z);
            let lead = (C::new(ln_scale, 0.0) - root * a).exp();
            Ok(y[0] * lead * 2.0 / (s + c / root))
        })
        .collect()
}

/// `|m(z_j)|/|z_j|` along a ray.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Ratios do not increase beyond the first quartile of radii.
    pub bounded: bool,
}

pub fn nevanlinna_growth_check(m: &dyn WeylFunction, ray: &RaySampling) -> Result<GrowthCheck> {
    let ratios: Vec<f64> = ray
        .points()
        .par_iter()
        .map(|&z| m.eval(z).map(|v| v.norm() / z.norm()))
        .collect::<Result<_>>()?;
    let start = ratios.len() / 4;
    let bounded = ratios[start..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(GrowthCheck {
        ratios,
        max_ratio,
        bounded,
    })
}
