//! Transfer and screw functions sampled on grids, Krein kernels and local
//! comparison.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{integrate_entire_kernel, EntireKernel, SpectralMeasure};
use crate::numerics::{cubic_interpolate, gauss_legendre, linspace};
use crate::weyl::WeylFunction;

/// Truncation estimate above which measure-based evaluation is refused.
pub const TRUNCATION_TOL: f64 = 1e-2;

/// Relative tolerance of [`psd_verdict`].
pub const PSD_TOL: f64 = 1e-8;

const DOMAIN_SLACK: f64 = 1e-12;

type ClosedForm = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Where the sampled values came from.
#[derive(Clone)]
pub enum Provenance {
    /// `scale · ∫ kernel(λ, t) dτ(λ) + iβt`.
    Measure {
        measure: Arc<SpectralMeasure>,
        kernel: EntireKernel,
        beta: f64,
        scale: f64,
    },
    ClosedForm { tag: String, f: ClosedForm },
    /// Bare samples; evaluation interpolates.
    Samples,
}

impl fmt::Debug for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Measure { kernel, beta, scale, measure } => f
                .debug_struct("Measure")
                .field("kernel", kernel)
                .field("beta", beta)
                .field("scale", scale)
                .field("atoms", &measure.atoms().len())
                .finish(),
            Self::ClosedForm { tag, .. } => write!(f, "ClosedForm({tag:?})"),
            Self::Samples => write!(f, "Samples"),
        }
    }
}

/// A function of `t` sampled on a grid, with the means to re-evaluate it.
///
/// Covers the Sturm-Liouville transfer function (real), screw functions and
/// Fourier-Stieltjes transforms (complex).
#[derive(Debug, Clone)]
pub struct TransferFunction {
    grid: Vec<f64>,
    values: Vec<Complex64>,
    domain_bound: f64,
    truncation_error: f64,
    provenance: Provenance,
}

/// Screw functions share the representation; `β` sits in the provenance.
pub type ScrewFunction = TransferFunction;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty t grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("t grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

impl TransferFunction {
    /// Evaluates `scale · ∫ kernel dτ + iβt` on `grid`.
    pub fn from_measure(
        measure: impl Into<Arc<SpectralMeasure>>,
        kernel: EntireKernel,
        beta: f64,
        scale: f64,
        grid: Vec<f64>,
        domain_bound: f64,
    ) -> Result<Self> {
        check_grid(&grid)?;
        let measure = measure.into();
        let evals: Vec<(Complex64, f64)> = grid
            .par_iter()
            .map(|&t| {
                let v = integrate_entire_kernel(&measure, kernel, t);
                (v.value * scale + Complex64::new(0.0, beta * t), v.truncation_error * scale.abs())
            })
            .collect();
        let truncation_error = evals.iter().map(|e| e.1).fold(0.0, f64::max);
        if truncation_error > TRUNCATION_TOL {
            return Err(Error::Truncation {
                estimate: truncation_error,
                tol: TRUNCATION_TOL,
            });
        }
        Ok(Self {
            values: evals.into_iter().map(|e| e.0).collect(),
            grid,
            domain_bound,
            truncation_error,
            provenance: Provenance::Measure {
                measure,
                kernel,
                beta,
                scale,
            },
        })
    }

    pub fn from_closed_form<F>(tag: &str, f: F, grid: Vec<f64>, domain_bound: f64) -> Result<Self>
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        check_grid(&grid)?;
        let values = grid.iter().map(|&t| f(t)).collect();
        Ok(Self {
            grid,
            values,
            domain_bound,
            truncation_error: 0.0,
            provenance: Provenance::ClosedForm {
                tag: tag.to_string(),
                f: Arc::new(f),
            },
        })
    }

    /// Real closed form, e.g. control functions such as `-t²`.
    pub fn from_real_fn<F>(tag: &str, f: F, grid: Vec<f64>, domain_bound: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_closed_form(tag, move |t| Complex64::new(f(t), 0.0), grid, domain_bound)
    }

    pub fn from_samples(grid: Vec<f64>, values: Vec<Complex64>, domain_bound: f64) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != values.len() {
            return Err(Error::InvalidInput("grid and values differ in length".into()));
        }
        Ok(Self {
            grid,
            values,
            domain_bound,
            truncation_error: 0.0,
            provenance: Provenance::Samples,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn domain_bound(&self) -> f64 {
        self.domain_bound
    }

    /// Largest truncation estimate over the grid.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn measure(&self) -> Option<&Arc<SpectralMeasure>> {
        match &self.provenance {
            Provenance::Measure { measure, .. } => Some(measure),
            _ => None,
        }
    }

    /// Linear coefficient `β` (zero unless built as a screw function).
    pub fn beta(&self) -> f64 {
        match &self.provenance {
            Provenance::Measure { beta, .. } => *beta,
            _ => 0.0,
        }
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Value at `t`, re-evaluated from the provenance where possible and
    /// interpolated otherwise. Measure and closed-form provenances are valid
    /// for every `t`; sample-backed functions only inside their grid.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        match &self.provenance {
            Provenance::Measure {
                measure,
                kernel,
                beta,
                scale,
            } => Ok(integrate_entire_kernel(measure, *kernel, t).value * *scale + Complex64::new(0.0, beta * t)),
            Provenance::ClosedForm { f, .. } => Ok(f(t)),
            Provenance::Samples => self.interpolate(t),
        }
    }

    /// Cubic interpolation of the stored samples.
    pub fn interpolate(&self, t: f64) -> Result<Complex64> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if t < lo - DOMAIN_SLACK || t > hi + DOMAIN_SLACK {
            return Err(Error::Domain {
                requested: t,
                available: hi,
            });
        }
        Ok(cubic_interpolate(&self.grid, &self.values, t))
    }

    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<Complex64>> {
        ts.par_iter().map(|&t| self.eval(t)).collect()
    }

    /// Writes `t,value` rows (`t,re,im` for complex functions) with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let real = self.is_real();
        if real {
            writeln!(out, "t,value")?;
        } else {
            writeln!(out, "t,re,im")?;
        }
        for (t, v) in self.grid.iter().zip(&self.values) {
            if real {
                writeln!(out, "{},{}", fmt17(*t), fmt17(v.re))?;
            } else {
                writeln!(out, "{},{},{}", fmt17(*t), fmt17(v.re), fmt17(v.im))?;
            }
        }
        Ok(())
    }
}

/// Full double precision in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `Φ_τ(t) = ∫ (1 - cos(√λ t))/λ dτ(λ)` on `t_grid`, certified on
/// `[0, domain_bound]`.
pub fn phi_from_measure(
    measure: impl Into<Arc<SpectralMeasure>>,
    t_grid: Vec<f64>,
    domain_bound: f64,
) -> Result<TransferFunction> {
    TransferFunction::from_measure(measure, EntireKernel::SlTransfer, 0.0, 1.0, t_grid, domain_bound)
}

fn check_half_domain(domain_bound: f64, s_grid: &[f64]) -> Result<()> {
    let smax = s_grid.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if 2.0 * smax > domain_bound + DOMAIN_SLACK {
        return Err(Error::Domain {
            requested: 2.0 * smax,
            available: domain_bound,
        });
    }
    Ok(())
}

/// Evaluates `phi` at every distinct argument in `args` once.
fn eval_distinct(phi: &TransferFunction, args: &[f64]) -> Result<Vec<Complex64>> {
    let mut keys: Vec<f64> = args.to_vec();
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    keys.dedup();
    let vals = phi.eval_many(&keys)?;
    Ok(args
        .iter()
        .map(|a| vals[keys.partition_point(|k| k < a)])
        .collect())
}

/// `K(s, t) = Φ(s + t) - Φ(|s - t|)` on `s_grid`.
pub fn krein_kernel_matrix(phi: &TransferFunction, s_grid: &[f64]) -> Result<DMatrix<f64>> {
    check_half_domain(phi.domain_bound, s_grid)?;
    let n = s_grid.len();
    let mut args = Vec::with_capacity(2 * n * n);
    for &si in s_grid {
        for &sj in s_grid {
            args.push(si + sj);
            args.push((si - sj).abs());
        }
    }
    let v = eval_distinct(phi, &args)?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        v[k].re - v[k + 1].re
    }))
}

/// Hermitian kernel `G(s, t) = g(s - t) - g(s) - conj(g(t)) + g(0)`.
pub fn screw_kernel_matrix(g: &ScrewFunction, s_grid: &[f64]) -> Result<DMatrix<Complex64>> {
    check_half_domain(g.domain_bound, s_grid)?;
    let n = s_grid.len();
    let mut args = Vec::with_capacity(n * n + n + 1);
    for &si in s_grid {
        for &sj in s_grid {
            args.push(si - sj);
        }
    }
    args.extend_from_slice(s_grid);
    args.push(0.0);
    let v = eval_distinct(g, &args)?;
    let single = &v[n * n..n * n + n];
    let g0 = v[n * n + n];
    Ok(DMatrix::from_fn(n, n, |i, j| v[i * n + j] - single[i] - single[j].conj() + g0))
}

/// Toeplitz kernel `F(s, t) = f(s - t)`.
pub fn toeplitz_kernel_matrix(f: &TransferFunction, s_grid: &[f64]) -> Result<DMatrix<Complex64>> {
    check_half_domain(f.domain_bound, s_grid)?;
    let n = s_grid.len();
    let args: Vec<f64> = s_grid
        .iter()
        .flat_map(|&si| s_grid.iter().map(move |&sj| si - sj))
        .collect();
    let v = eval_distinct(f, &args)?;
    Ok(DMatrix::from_fn(n, n, |i, j| v[i * n + j]))
}

/// Smallest eigenvalue of a Hermitian matrix and the positivity verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdVerdict {
    pub min_eigenvalue: f64,
    /// Spectral norm.
    pub norm: f64,
    pub is_psd: bool,
}

/// `is_psd ⇔ λ_min ≥ -tol·‖M‖₂`. The matrix is symmetrized first.
pub fn psd_verdict<T>(matrix: &DMatrix<T>, tol: f64) -> PsdVerdict
where
    T: ComplexField<RealField = f64>,
{
    if matrix.is_empty() {
        return PsdVerdict {
            min_eigenvalue: 0.0,
            norm: 0.0,
            is_psd: true,
        };
    }
    let sym = (matrix + matrix.adjoint()) * T::from_real(0.5);
    let eig = sym.symmetric_eigenvalues();
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    PsdVerdict {
        min_eigenvalue,
        norm,
        is_psd: min_eigenvalue >= -tol * norm,
    }
}

/// Outcome of a sup-norm comparison on `[0, 2a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub max_abs_deviation: f64,
    /// Where the maximum is attained.
    pub at: f64,
    pub locally_identical: bool,
}

/// Points of both grids inside `[lo, hi]`, or a uniform grid if there are
/// fewer than two.
pub(crate) fn comparison_points(f1: &TransferFunction, f2: &TransferFunction, lo: f64, hi: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = f1
        .grid
        .iter()
        .chain(&f2.grid)
        .copied()
        .filter(|&t| t >= lo - DOMAIN_SLACK && t <= hi + DOMAIN_SLACK)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 2 {
        pts = linspace(lo, hi, 201);
    }
    pts
}

pub(crate) fn check_domain(f: &TransferFunction, needed: f64) -> Result<()> {
    if f.domain_bound + DOMAIN_SLACK < needed {
        return Err(Error::Domain {
            requested: needed,
            available: f.domain_bound,
        });
    }
    Ok(())
}

/// Sup-norm of `phi1 - phi2` on `[0, 2a]`; locally identical iff `≤ tol`.
pub fn compare_transfer(phi1: &TransferFunction, phi2: &TransferFunction, a: f64, tol: f64) -> Result<Comparison> {
    check_domain(phi1, 2.0 * a)?;
    check_domain(phi2, 2.0 * a)?;
    let (max_abs_deviation, at) = max_deviation(phi1, phi2, 0.0, 2.0 * a)?;
    Ok(Comparison {
        max_abs_deviation,
        at,
        locally_identical: max_abs_deviation <= tol,
    })
}

/// `sup |f1 - f2|` over the comparison points in `[lo, hi]` and its location.
pub fn max_deviation(f1: &TransferFunction, f2: &TransferFunction, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if std::ptr::eq(f1, f2) {
        return Ok((0.0, lo));
    }
    let pts = comparison_points(f1, f2, lo, hi);
    let v1 = f1.eval_many(&pts)?;
    let v2 = f2.eval_many(&pts)?;
    Ok(pts
        .iter()
        .zip(v1.iter().zip(&v2))
        .map(|(&t, (a, b))| ((a - b).norm(), t))
        .fold((0.0, lo), |acc, x| if x.0 > acc.0 { x } else { acc }))
}

/// One row of the Laplace-bridge check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceResidual {
    pub y: f64,
    pub laplace: f64,
    pub weyl: f64,
    pub residual: f64,
    /// `e^{-y T}·max|Φ|/y`, a bound for the neglected part of the integral.
    pub tail_bound: f64,
}

/// `|∫₀^T e^{-yt} Φ(t) dt - m(-y²)/y|` for each `y`.
///
/// `m` is evaluated at `-y² + iε` with `ε = 10⁻⁶y²`; the real part differs
/// from `m(-y²)` by `O(ε²)` below the spectrum.
pub fn laplace_bridge_residual(
    phi: &TransferFunction,
    m: &dyn WeylFunction,
    y_samples: &[f64],
    t_max: f64,
) -> Result<Vec<LaplaceResidual>> {
    if y_samples.iter().any(|y| !(*y > 0.0)) || !(t_max > 0.0) {
        return Err(Error::InvalidInput("Laplace bridge needs positive y and T".into()));
    }
    const PANELS: usize = 200;
    const ORDER: usize = 10;
    let h = t_max / PANELS as f64;
    let nodes: Vec<(f64, f64)> = (0..PANELS)
        .flat_map(|k| gauss_legendre(ORDER, k as f64 * h, (k + 1) as f64 * h))
        .collect();
    let ts: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let vals = phi.eval_many(&ts)?;
    let phi_max = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    y_samples
        .iter()
        .map(|&y| {
            let laplace: f64 = nodes
                .iter()
                .zip(&vals)
                .map(|((t, w), v)| w * (-y * t).exp() * v.re)
                .sum();
            let z = Complex64::new(-y * y, 1e-6 * y * y);
            let weyl = m.eval(z)?.re / y;
            Ok(LaplaceResidual {
                y,
                laplace,
                weyl,
                residual: (laplace - weyl).abs(),
                tail_bound: (-y * t_max).exp() * phi_max / y,
            })
        })
        .collect()
}

/// Writes several functions sharing a grid as CSV columns.
pub fn write_columns_csv<W: Write>(mut out: W, header: &[&str], grid: &[f64], columns: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for (i, t) in grid.iter().enumerate() {
        let mut row = fmt17(*t);
        for c in columns {
            row.push(',');
            row.push_str(&fmt17(c[i]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}
