//! Spectral measures: atoms, sampled densities and analytic tails, with
//! Stieltjes transforms, Stieltjes inversion and integration of entire
//! kernels.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_non_real, Error, Result};
use crate::numerics::{adaptive_integrate, adaptive_integrate_c, gauss_legendre, one_minus_cos_tail};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Quadrature rule attached to density samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    GaussLegendre,
}

/// Sampled absolutely continuous part: `∫ f dτ ≈ Σ weights[i] · values[i] · f(grid[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub rule: QuadratureRule,
}

impl Density {
    /// Samples `rho` at Gauss-Legendre nodes on `panels` log-spaced panels
    /// covering `[lo, hi]` (`0 < lo < hi`).
    pub fn log_panels<F: Fn(f64) -> f64>(rho: F, lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidInput(format!("log panels need 0 < lo < hi, got [{lo}, {hi}]")));
        }
        let edges = crate::numerics::logspace(lo, hi, panels.max(1) + 1);
        Self::on_panels(rho, &edges, order)
    }

    /// Samples `rho` at Gauss-Legendre nodes on the given panel edges.
    pub fn on_panels<F: Fn(f64) -> f64>(rho: F, edges: &[f64], order: usize) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            for (x, wt) in gauss_legendre(order, w[0], w[1]) {
                grid.push(x);
                values.push(rho(x));
                weights.push(wt);
            }
        }
        let d = Self {
            grid,
            values,
            weights,
            rule: QuadratureRule::GaussLegendre,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.values.len() != n || self.weights.len() != n {
            return Err(Error::InvalidInput("density grid, values and weights must have equal length".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("density grid must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("density values must be finite and nonnegative".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("density weights must be finite and nonnegative".into()));
        }
        Ok(())
    }

    fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(self.values.iter().zip(&self.weights))
            .map(|(&x, (&v, &w))| (x, v * w))
    }
}

/// Analytic model `dτ ≈ c·|λ|^p dλ` for `λ > start` (and for
/// `λ < -negative_start` when present), standing in for the part of the
/// measure that is not stored explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDescriptor {
    pub p: f64,
    pub c: f64,
    pub start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_start: Option<f64>,
}

impl TailDescriptor {
    pub fn one_sided(p: f64, c: f64, start: f64) -> Self {
        Self {
            p,
            c,
            start,
            negative_start: None,
        }
    }

    pub fn two_sided(p: f64, c: f64, start: f64, negative_start: f64) -> Self {
        Self {
            p,
            c,
            start,
            negative_start: Some(negative_start),
        }
    }

    fn starts(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((self.start, 1.0)).chain(self.negative_start.map(|s| (s, -1.0)))
    }
}

/// A nonnegative measure on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<Density>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail: Option<TailDescriptor>,
}

#[derive(Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    density: Option<Density>,
    tail: Option<TailDescriptor>,
}

impl TryFrom<RawMeasure> for SpectralMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        Self::new(raw.atoms, raw.density, raw.tail)
    }
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, density: Option<Density>, tail: Option<TailDescriptor>) -> Result<Self> {
        if atoms.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidInput("atom locations must be strictly increasing".into()));
        }
        if atoms.iter().any(|&(l, w)| !l.is_finite() || !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidInput("atom weights must be finite and strictly positive".into()));
        }
        if let Some(d) = &density {
            d.validate()?;
        }
        if let Some(t) = &tail {
            if !(t.p < 1.0 && t.c >= 0.0 && t.start > 0.0 && t.c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "tail must satisfy p < 1, c >= 0, start > 0 (got p={}, c={}, start={})",
                    t.p, t.c, t.start
                )));
            }
            if t.negative_start.is_some_and(|s| !(s > 0.0)) {
                return Err(Error::InvalidInput("negative tail start must be positive".into()));
            }
        }
        let m = Self { atoms, density, tail };
        if !m.poisson_mass().is_finite() {
            return Err(Error::InvalidInput("∫ dτ/(1+λ²) is not finite".into()));
        }
        Ok(m)
    }

    /// Finitely many atoms, sorted on construction.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(atoms, None, None)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn tail(&self) -> Option<&TailDescriptor> {
        self.tail.as_ref()
    }

    pub fn with_tail(mut self, tail: Option<TailDescriptor>) -> Result<Self> {
        self.tail = tail;
        Self::new(self.atoms, self.density, self.tail)
    }

    /// Mass carried by atoms and density samples (the tail excluded).
    pub fn stored_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.density_points().map(|p| p.1).sum::<f64>()
    }

    /// `∫ dτ/(1+λ²)` including the tail.
    pub fn poisson_mass(&self) -> f64 {
        let stored: f64 = self.points().map(|(l, w)| w / (1.0 + l * l)).sum();
        let tail: f64 = match &self.tail {
            Some(t) => t.starts().map(|(s, _)| tail_stieltjes(t.p, t.c, s, I).im).sum(),
            None => 0.0,
        };
        stored + tail
    }

    /// Smallest point of the stored support.
    pub fn support_lower_bound(&self) -> Option<f64> {
        let a = self.atoms.first().map(|a| a.0);
        let d = self.density.as_ref().and_then(|d| d.grid.first().copied());
        match (a, d) {
            (Some(a), Some(d)) => Some(a.min(d)),
            (a, d) => a.or(d),
        }
    }

    fn density_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.density.iter().flat_map(|d| d.points())
    }

    /// Atoms and weighted density nodes as `(λ, mass)` pairs.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().chain(self.density_points())
    }

    /// Estimates a tail descriptor from the local density `τ_k/Δλ_k` of the
    /// last atoms (log-log regression, exponent snapped to a half-integer
    /// when close). Needs at least 8 atoms above zero.
    pub fn fit_tail(&self) -> Option<TailDescriptor> {
        let pos: Vec<(f64, f64)> = self.atoms.iter().copied().filter(|a| a.0 > 0.0).collect();
        let n = pos.len();
        if n < 8 {
            return None;
        }
        let window = (n / 2).max(6);
        let k0 = (n - window).max(1);
        // block averages smooth out interleaved families of eigenvalues
        let block = (window / 8).max(1);
        let mid = |k: usize| 0.5 * (pos[k - 1].0 + pos[k].0);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut k = k0;
        while k + block < n {
            let mass: f64 = pos[k..k + block].iter().map(|a| a.1).sum();
            let (lo, hi) = (mid(k), mid(k + block));
            xs.push((0.5 * (lo + hi)).ln());
            ys.push((mass / (hi - lo)).ln());
            k += block;
        }
        if xs.len() < 3 {
            return None;
        }
        let (slope, _) = linear_fit(&xs, &ys);
        let snapped = (2.0 * slope).round() / 2.0;
        let p = if (slope - snapped).abs() < 0.05 { snapped } else { slope };
        if p >= 0.0 {
            return None;
        }
        let c = xs.iter().zip(&ys).map(|(x, y)| (y - p * x).exp()).sum::<f64>() / xs.len() as f64;
        let (l1, l0) = (pos[n - 1].0, pos[n - 2].0);
        Some(TailDescriptor::one_sided(p, c, l1 + 0.5 * (l1 - l0)))
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `∫_start^∞ c λ^p / (λ - z) dλ` for `p < 0` and `z` off `[start, ∞)`.
fn tail_stieltjes(p: f64, c: f64, start: f64, z: Complex64) -> Complex64 {
    if c == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    // expansion in z/λ, valid beyond |z|
    let series = |from: f64| -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut zn = ONE;
        for n in 0..200 {
            // n = 0 diverges for p >= 0; keep the finite part, which cancels
            // between the two sides of a two-sided tail
            let term = if n == 0 && p.abs() < 1e-12 {
                zn * -from.ln()
            } else {
                zn * (from.powf(p - n as f64) / (n as f64 - p))
            };
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
            zn *= z;
        }
        sum * c
    };
    if z.norm() <= 0.25 * start {
        return series(start);
    }
    let far = 4.0 * z.norm();
    let near = adaptive_integrate_c(
        |u| {
            let l = u.exp();
            c * l.powf(p) * l / (l - z)
        },
        start.ln(),
        far.ln(),
        1e-13 * (1.0 + c),
    )
    .unwrap_or_else(|_| Complex64::new(f64::NAN, f64::NAN));
    near + series(far)
}

/// Stieltjes transform `∫ dτ(λ)/(λ - z)`.
pub fn stieltjes_transform(measure: &SpectralMeasure, z: Complex64) -> Result<Complex64> {
    require_non_real(z)?;
    let mut sum: Complex64 = measure.points().map(|(l, w)| w / (l - z)).sum();
    if let Some(t) = &measure.tail {
        sum += tail_stieltjes(t.p, t.c, t.start, z);
        if let Some(s) = t.negative_start {
            sum -= tail_stieltjes(t.p, t.c, s, -z);
        }
    }
    Ok(sum)
}

/// Data `(α, β, σ)` of the Nevanlinna representation
/// `F(z) = α + βz + ∫ (1/(λ-z) - λ/(1+λ²)) dσ(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NevanlinnaData {
    pub alpha: f64,
    pub beta: f64,
    pub measure: SpectralMeasure,
}

impl NevanlinnaData {
    pub fn new(alpha: f64, beta: f64, measure: SpectralMeasure) -> Result<Self> {
        if !(beta >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("need finite alpha and beta >= 0, got beta = {beta}")));
        }
        Ok(Self { alpha, beta, measure })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        require_non_real(z)?;
        let m = &self.measure;
        let mut sum: Complex64 = m.points().map(|(l, w)| w * (1.0 / (l - z) - l / (1.0 + l * l))).sum();
        if let Some(t) = &m.tail {
            // ∫ λ/(1+λ²) c λ^p dλ = Re ∫ c λ^p/(λ - i) dλ
            sum += tail_stieltjes(t.p, t.c, t.start, z) - tail_stieltjes(t.p, t.c, t.start, I).re;
            if let Some(s) = t.negative_start {
                sum -= tail_stieltjes(t.p, t.c, s, -z) - tail_stieltjes(t.p, t.c, s, I).re;
            }
        }
        Ok(sum + self.alpha + self.beta * z)
    }
}

/// Result of a Stieltjes inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult {
    pub mass: f64,
    pub error_estimate: f64,
}

/// `ε` sequence and acceptance tolerance for [`stieltjes_invert`].
#[derive(Debug, Clone, PartialEq)]
pub struct InversionOptions {
    pub epsilons: Vec<f64>,
    /// Accepted spread of the last two extrapolants, relative to `max(1, |mass|)`.
    pub tol: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-1, 1e-2, 1e-3],
            tol: 1e-2,
        }
    }
}

/// Recovers `τ((λ₁, λ₂))` from a Nevanlinna function by integrating
/// `Im m(λ + iε)/π` for a decreasing sequence of `ε` and extrapolating
/// to `ε = 0` (errors are odd in `ε`).
pub fn stieltjes_invert<F>(m: F, lambda1: f64, lambda2: f64, options: &InversionOptions) -> Result<InversionResult>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(lambda1 < lambda2) {
        return Err(Error::InvalidInput(format!("need λ₁ < λ₂, got ({lambda1}, {lambda2})")));
    }
    let eps = &options.epsilons;
    if eps.len() < 2 || eps.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::InvalidInput("epsilon sequence must be positive and decreasing, length >= 2".into()));
    }
    let mut samples = Vec::with_capacity(eps.len());
    for &e in eps {
        let v = adaptive_integrate(|l| m(Complex64::new(l, e)).im, lambda1, lambda2, 1e-11)? / PI;
        if !v.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite Stieltjes integral at ε = {e}")));
        }
        samples.push(v);
    }
    // Richardson table in powers ε, ε³, ε⁵, ...
    let mut table = vec![samples];
    let mut power = 1;
    while table.last().unwrap().len() > 1 {
        let prev = table.last().unwrap();
        let level = table.len() - 1;
        let next: Vec<f64> = (0..prev.len() - 1)
            .map(|j| {
                let r = (eps[j] / eps[j + 1 + level]).powi(power);
                (r * prev[j + 1] - prev[j]) / (r - 1.0)
            })
            .collect();
        table.push(next);
        power += 2;
    }
    let mass = table.last().unwrap()[0];
    let before = &table[table.len() - 2];
    let error_estimate = (before[before.len() - 1] - mass).abs();
    if error_estimate > options.tol * mass.abs().max(1.0) {
        return Err(Error::NonConvergence(format!(
            "Stieltjes inversion on ({lambda1}, {lambda2}) spread {error_estimate:e} across ε sequence"
        )));
    }
    Ok(InversionResult { mass, error_estimate })
}

/// Entire-in-λ kernels integrated against spectral measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntireKernel {
    /// `(1 - cos(√λ t))/λ`
    SlTransfer,
    /// `(e^{iλt} - 1 - iλt/(1+λ²))/λ²`
    Screw,
    /// `cos(√λ t)`
    CosineTransfer,
    /// `e^{iλt}`
    Exponential,
}

const SERIES_SWITCH: f64 = 1e-2;

/// `(1 - cos(√λ t))/λ` continued to all real `λ`.
pub fn sl_transfer_kernel(lambda: f64, t: f64) -> f64 {
    let x = lambda * t * t;
    if x.abs() < SERIES_SWITCH {
        return t * t * sl_transfer_series(x);
    }
    if lambda > 0.0 {
        let s = lambda.sqrt() * t;
        // 1 - cos s = 2 sin²(s/2) avoids cancellation
        2.0 * (0.5 * s).sin().powi(2) / lambda
    } else {
        let s = (-lambda).sqrt() * t;
        2.0 * (0.5 * s).sinh().powi(2) / (-lambda)
    }
}

/// `(1 - cos √x)/x` as a six-term Taylor series.
pub(crate) fn sl_transfer_series(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        1.0 / 2.0,
        -1.0 / 24.0,
        1.0 / 720.0,
        -1.0 / 40320.0,
        1.0 / 3628800.0,
        -1.0 / 479001600.0,
    ];
    COEF.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `(e^{iλt} - 1 - iλt/(1+λ²))/λ²`, equal to `-t²/2` at `λ = 0`.
pub fn screw_kernel(lambda: f64, t: f64) -> Complex64 {
    let x = Complex64::new(0.0, lambda * t);
    let h = if x.norm() < SERIES_SWITCH {
        // (e^x - 1 - x)/x²
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for n in 3..10 {
            term = term * x / n as f64;
            sum += term;
        }
        sum
    } else {
        (x.exp() - 1.0 - x) / (x * x)
    };
    -h * (t * t) + I * (t * lambda / (1.0 + lambda * lambda))
}

pub fn cosine_transfer_kernel(lambda: f64, t: f64) -> f64 {
    if lambda >= 0.0 {
        (lambda.sqrt() * t).cos()
    } else {
        ((-lambda).sqrt() * t).cosh()
    }
}

impl EntireKernel {
    pub fn eval(self, lambda: f64, t: f64) -> Complex64 {
        match self {
            Self::SlTransfer => Complex64::new(sl_transfer_kernel(lambda, t), 0.0),
            Self::Screw => screw_kernel(lambda, t),
            Self::CosineTransfer => Complex64::new(cosine_transfer_kernel(lambda, t), 0.0),
            Self::Exponential => Complex64::new(0.0, lambda * t).exp(),
        }
    }

    /// Contribution of the tail `c|λ|^p dλ` beyond `start` on one side
    /// (`side = ±1`), plus an estimate of what the closed form neglects.
    fn tail(self, tail: &TailDescriptor, start: f64, side: f64, t: f64) -> (Complex64, f64) {
        let TailDescriptor { p, c, .. } = *tail;
        let s = start.sqrt();
        let t = t.abs();
        match self {
            Self::SlTransfer | Self::Screw if t == 0.0 => (Complex64::new(0.0, 0.0), 0.0),
            Self::SlTransfer if side > 0.0 => {
                if p == -0.5 {
                    (Complex64::new(2.0 * c * one_minus_cos_tail(s, t), 0.0), 0.0)
                } else {
                    let mean = c * start.powf(p) / -p;
                    (Complex64::new(mean, 0.0), mean.min(2.0 * c * start.powf(p - 0.5) / t))
                }
            }
            Self::Screw => {
                if p == 0.0 {
                    (Complex64::new(-c * one_minus_cos_tail(start, t), 0.0), 0.0)
                } else if p < 1.0 {
                    let mean = -c * start.powf(p - 1.0) / (1.0 - p);
                    (Complex64::new(mean, 0.0), (-mean).min(c * start.powf(p - 2.0) / t))
                } else {
                    (Complex64::new(0.0, 0.0), f64::INFINITY)
                }
            }
            Self::Exponential if p == -2.0 => {
                let v = c * (1.0 / start - one_minus_cos_tail(start, t));
                (Complex64::new(v, 0.0), 0.0)
            }
            Self::CosineTransfer if side > 0.0 && p == -1.5 => {
                let v = 2.0 * c * (1.0 / s - one_minus_cos_tail(s, t));
                (Complex64::new(v, 0.0), 0.0)
            }
            Self::Exponential | Self::CosineTransfer if p < -1.0 => {
                // no closed form: report the absolute tail mass as the error
                (Complex64::new(0.0, 0.0), c * start.powf(p + 1.0) / -(p + 1.0))
            }
            _ => (Complex64::new(0.0, 0.0), f64::INFINITY),
        }
    }

    /// Kernel modulus bound used for per-term discretization error estimates.
    fn envelope(self, lambda: f64, t: f64) -> f64 {
        match self {
            Self::SlTransfer => 2.0 / lambda.abs().max(1e-300),
            Self::Screw => 2.0 / (lambda * lambda).max(1e-300) + t.abs() / lambda.abs().max(1e-300),
            Self::CosineTransfer | Self::Exponential => 1.0,
        }
    }
}

/// Kernel integral with an estimate of the truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub truncation_error: f64,
}

impl KernelValue {
    /// The value, or [`Error::Truncation`] when the estimate exceeds `tol`.
    pub fn within(self, tol: f64) -> Result<Complex64> {
        if self.truncation_error > tol {
            return Err(Error::Truncation {
                estimate: self.truncation_error,
                tol,
            });
        }
        Ok(self.value)
    }
}

/// `∫ kernel(λ, t) dτ(λ)` over atoms, density samples and tail.
pub fn integrate_entire_kernel(measure: &SpectralMeasure, kernel: EntireKernel, t: f64) -> KernelValue {
    let mut value: Complex64 = match kernel {
        EntireKernel::SlTransfer => Complex64::new(
            measure.points().map(|(l, w)| w * sl_transfer_kernel(l, t)).sum::<f64>(),
            0.0,
        ),
        EntireKernel::CosineTransfer => Complex64::new(
            measure.points().map(|(l, w)| w * cosine_transfer_kernel(l, t)).sum::<f64>(),
            0.0,
        ),
        _ => measure.points().map(|(l, w)| kernel.eval(l, t) * w).sum(),
    };
    let mut truncation_error = 0.0;
    if let Some(tail) = &measure.tail {
        for (start, side) in tail.starts() {
            let (v, neglected) = kernel.tail(tail, start, side, t);
            value += v;
            // one more atom-sized term is the scale of the discretization mismatch
            let edge = side * start;
            let step = tail.c * start.powf(tail.p) * spacing_near(measure, edge);
            truncation_error += neglected + step * kernel.envelope(edge, t);
        }
    }
    KernelValue {
        value,
        truncation_error,
    }
}

fn spacing_near(measure: &SpectralMeasure, edge: f64) -> f64 {
    let a = &measure.atoms;
    if a.len() < 2 {
        return 0.0;
    }
    if edge > 0.0 {
        a[a.len() - 1].0 - a[a.len() - 2].0
    } else {
        a[1].0 - a[0].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_half_line() -> SpectralMeasure {
        let lo = 1e-16;
        let hi = 1e4;
        let rho = |l: f64| 1.0 / (PI * l.sqrt());
        let d = Density::log_panels(rho, lo, hi, 300, 16).unwrap();
        SpectralMeasure::new(vec![], Some(d), Some(TailDescriptor::one_sided(-0.5, 1.0 / PI, hi))).unwrap()
    }

    #[test]
    fn single_atom_transform() {
        let m = SpectralMeasure::from_atoms(vec![(1.0, 2.0)]).unwrap();
        let v = stieltjes_transform(&m, I).unwrap();
        assert!((v - Complex64::new(1.0, 1.0)).norm() < 1e-15);
        assert!(stieltjes_transform(&m, Complex64::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn free_density_transform() {
        let m = free_half_line();
        let v = stieltjes_transform(&m, Complex64::new(-4.0, 1e-300)).unwrap();
        assert!((v.re - 0.5).abs() < 1e-7, "{v}");
    }

    #[test]
    fn tail_series_and_quadrature_agree() {
        for z in [Complex64::new(3.0, 2.0), Complex64::new(-30.0, 0.5), Complex64::new(200.0, 7.0)] {
            let v = tail_stieltjes(-0.5, 0.7, 50.0, z);
            let u = adaptive_integrate_c(|s: f64| 0.7 * 2.0 / (s * s - z), 50f64.sqrt(), 1e9, 1e-13).unwrap()
                + 0.7 * 2.0 / 1e9;
            assert!((v - u).norm() < 1e-9, "{z}: {v} vs {u}");
        }
    }

    #[test]
    fn kernel_branches_agree_near_switch() {
        for &t in &[0.5, 1.0, 3.0] {
            for &f in &[0.9, 0.99, 1.01, 1.1] {
                for sign in [1.0, -1.0] {
                    let lambda = sign * f * SERIES_SWITCH / (t * t);
                    let series = t * t * sl_transfer_series(lambda * t * t);
                    let direct = if lambda > 0.0 {
                        (1.0 - (lambda.sqrt() * t).cos()) / lambda
                    } else {
                        ((-lambda).sqrt() * t).cosh().mul_add(1.0, -1.0) / -lambda
                    };
                    assert!((series - direct).abs() < 1e-12 * series.abs(), "{series} {direct}");
                }
            }
        }
        assert_eq!(sl_transfer_kernel(0.0, 2.0), 2.0);
    }

    #[test]
    fn screw_kernel_limits() {
        assert!((screw_kernel(0.0, 1.5) + Complex64::new(1.125, 0.0)).norm() < 1e-15);
        let l = 3.0;
        let t = 0.7;
        let direct = ((I * l * t).exp() - 1.0 - I * l * t / (1.0 + l * l)) / (l * l);
        assert!((screw_kernel(l, t) - direct).norm() < 1e-14);
        let l = 1e-3;
        let direct = ((I * l * t).exp() - 1.0 - I * l * t / (1.0 + l * l)) / (l * l);
        assert!((screw_kernel(l, t) - direct).norm() < 1e-7);
    }

    #[test]
    fn free_density_transfer_is_linear() {
        let m = free_half_line();
        let v = integrate_entire_kernel(&m, EntireKernel::SlTransfer, 1.3);
        assert!((v.value.re - 1.3).abs() < 1e-7, "{:?}", v);
        assert!(v.within(1e-6).is_ok());
    }

    #[test]
    fn exponential_atom() {
        let m = SpectralMeasure::from_atoms(vec![(PI, 1.0)]).unwrap();
        let v = integrate_entire_kernel(&m, EntireKernel::Exponential, 1.0).value;
        assert!((v + 1.0).norm() < 1e-15);
    }

    #[test]
    fn inversion_recovers_atom() {
        let m = SpectralMeasure::from_atoms(vec![(1.0, 2.0)]).unwrap();
        let f = |z| stieltjes_transform(&m, z).unwrap();
        let opts = InversionOptions::default();
        let r = stieltjes_invert(f, 0.5, 1.5, &opts).unwrap();
        assert!((r.mass - 2.0).abs() < 1e-4, "{r:?}");
        let r = stieltjes_invert(f, 2.0, 3.0, &opts).unwrap();
        assert!(r.mass.abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn inversion_of_free_neumann_function() {
        let m = |z: Complex64| 1.0 / (-z).sqrt();
        let r = stieltjes_invert(m, 1.0, 4.0, &InversionOptions::default()).unwrap();
        assert!((r.mass - 2.0 / PI).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(SpectralMeasure::new(vec![(1.0, 1.0), (0.5, 1.0)], None, None).is_err());
        assert!(SpectralMeasure::new(vec![(1.0, -1.0)], None, None).is_err());
        assert!(SpectralMeasure::new(vec![], None, Some(TailDescriptor::one_sided(1.5, 1.0, 1.0))).is_err());
    }

    #[test]
    fn json_layout() {
        let m = SpectralMeasure::new(
            vec![(0.0, 1.0), (2.0, 0.5)],
            None,
            Some(TailDescriptor::one_sided(-0.5, 0.3, 4.0)),
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"atoms":[[0.0,1.0],[2.0,0.5]],"tail":{"p":-0.5,"c":0.3,"start":4.0}}"#);
        let back: SpectralMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SpectralMeasure>(r#"{"atoms":[[0.0,-1.0]]}"#).is_err());
    }
}
