//! Canonical systems `-J y' = z H y` on `[0, ℓ)` with `J = [[0, -1], [1, 0]]`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::measure::{EntireKernel, SpectralMeasure, TailDescriptor};
use crate::numerics::ode::{segment_points, Dopri5};
use crate::numerics::{adaptive_integrate, gauss_legendre, illinois, linspace};
use crate::transfer::{
    check_domain, comparison_points, psd_verdict, screw_kernel_matrix, toeplitz_kernel_matrix, PsdVerdict,
    ScrewFunction, TransferFunction,
};
use crate::weyl::{Gamma, WeylFunction};

/// `2×2` complex matrix as rows.
pub type Mat2 = [[C; 2]; 2];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Symmetric nonnegative `H(x)` on `[0, ℓ)`; `ℓ` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian", into = "RawHamiltonian")]
pub struct Hamiltonian {
    h11: Coefficient,
    h12: Coefficient,
    h22: Coefficient,
    ell: f64,
    trace_normed: bool,
}

#[derive(Serialize, Deserialize)]
struct Entries {
    h11: Coefficient,
    #[serde(default = "Coefficient::zero")]
    h12: Coefficient,
    h22: Coefficient,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Length {
    Finite(f64),
    Marker(String),
}

#[derive(Serialize, Deserialize)]
struct RawHamiltonian {
    ell: Length,
    entries: Entries,
    #[serde(default)]
    trace_normed: bool,
}

impl TryFrom<RawHamiltonian> for Hamiltonian {
    type Error = Error;

    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        let ell = match raw.ell {
            Length::Finite(l) => l,
            Length::Marker(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => f64::INFINITY,
            Length::Marker(s) => return Err(Error::InvalidInput(format!("bad length {s:?}"))),
        };
        let h = Self::new(raw.entries.h11, raw.entries.h12, raw.entries.h22, ell)?;
        if raw.trace_normed {
            h.into_trace_normed()
        } else {
            Ok(h)
        }
    }
}

impl From<Hamiltonian> for RawHamiltonian {
    fn from(h: Hamiltonian) -> Self {
        Self {
            ell: if h.ell.is_finite() {
                Length::Finite(h.ell)
            } else {
                Length::Marker("inf".into())
            },
            entries: Entries {
                h11: h.h11,
                h12: h.h12,
                h22: h.h22,
            },
            trace_normed: h.trace_normed,
        }
    }
}

const SAMPLES: usize = 257;

impl Hamiltonian {
    /// Checks symmetry-free nonnegativity at sample points inside `[0, ℓ)`.
    pub fn new(h11: Coefficient, h12: Coefficient, h22: Coefficient, ell: f64) -> Result<Self> {
        if !(ell > 0.0) {
            return Err(Error::InvalidInput(format!("length must be positive, got {ell}")));
        }
        let h = Self {
            h11,
            h12,
            h22,
            ell,
            trace_normed: false,
        };
        for x in h.sample_points() {
            let [a, b, d] = h.entries(x);
            let tol = 1e-12 * (a.abs() + d.abs()).max(1e-300);
            if !(a >= -tol && d >= -tol && a * d - b * b >= -tol * (a.abs() + d.abs())) {
                return Err(Error::InvalidInput(format!(
                    "H({x}) = [[{a}, {b}], [{b}, {d}]] is not nonnegative"
                )));
            }
        }
        let head = 1e-3 * ell.min(1.0);
        let start = adaptive_integrate(|x| h.h22.eval(x), 0.0, head, 1e-12)?;
        if !(start > 0.0) {
            return Err(Error::InvalidInput("∫₀ˣ h22 must be positive for x > 0".into()));
        }
        Ok(h)
    }

    pub fn diagonal(h11: Coefficient, h22: Coefficient, ell: f64) -> Result<Self> {
        Self::new(h11, Coefficient::zero(), h22, ell)
    }

    pub fn constant(h11: f64, h12: f64, h22: f64, ell: f64) -> Result<Self> {
        Self::new(
            Coefficient::Constant(h11),
            Coefficient::Constant(h12),
            Coefficient::Constant(h22),
            ell,
        )
    }

    /// Declares the Hamiltonian trace normed after checking `tr H = 1`.
    pub fn into_trace_normed(mut self) -> Result<Self> {
        for x in self.sample_points() {
            let t = self.trace(x);
            if (t - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("tr H({x}) = {t}, expected 1")));
            }
        }
        self.trace_normed = true;
        Ok(self)
    }

    fn sample_points(&self) -> Vec<f64> {
        let hi = if self.ell.is_finite() { self.ell } else { 100.0 };
        // stay off the right end, which may be singular
        linspace(0.0, hi, SAMPLES)[..SAMPLES - 1].to_vec()
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn is_trace_normed(&self) -> bool {
        self.trace_normed
    }

    /// `[h11, h12, h22]` at `x`.
    pub fn entries(&self, x: f64) -> [f64; 3] {
        [self.h11.eval(x), self.h12.eval(x), self.h22.eval(x)]
    }

    pub fn coefficients(&self) -> [&Coefficient; 3] {
        [&self.h11, &self.h12, &self.h22]
    }

    pub fn det(&self, x: f64) -> f64 {
        let [a, b, d] = self.entries(x);
        a * d - b * b
    }

    pub fn trace(&self, x: f64) -> f64 {
        self.h11.eval(x) + self.h22.eval(x)
    }

    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut v: Vec<f64> = [&self.h11, &self.h12, &self.h22]
            .iter()
            .flat_map(|c| c.breakpoints(a, b))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn is_piecewise_constant(&self) -> bool {
        [&self.h11, &self.h12, &self.h22].iter().all(|c| c.is_piecewise_constant())
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= self.ell) {
            return Err(Error::Domain {
                requested: x,
                available: self.ell,
            });
        }
        Ok(())
    }
}

pub fn det2(w: &Mat2) -> C {
    w[0][0] * w[1][1] - w[0][1] * w[1][0]
}

fn solver() -> Dopri5 {
    Dopri5::with_tolerances(1e-13, 1e-15)
}

/// Propagates `W` from `x0` to `x1` by `W' = z W H J⁻¹`.
fn propagate_w(h: &Hamiltonian, w: Mat2, x0: f64, x1: f64, z: C) -> Result<Mat2> {
    let mut y = [w[0][0], w[0][1], w[1][0], w[1][1]];
    for seg in segment_points(x0, x1, &h.breakpoints(x0.min(x1), x0.max(x1))).windows(2) {
        y = solver().integrate(
            |x, y: &[C; 4]| {
                let [a, b, d] = h.entries(x);
                // H J⁻¹ = [[-h12, h11], [-h22, h12]]
                [
                    z * (-y[0] * b - y[1] * d),
                    z * (y[0] * a + y[1] * b),
                    z * (-y[2] * b - y[3] * d),
                    z * (y[2] * a + y[3] * b),
                ]
            },
            seg[0],
            y,
            seg[1],
        )?;
    }
    Ok([[y[0], y[1]], [y[2], y[3]]])
}

/// `W(x; z)` with `W' J = z W H`, `W(0) = I`.
pub fn transfer_matrix_w(h: &Hamiltonian, x: f64, z: C) -> Result<Mat2> {
    h.check_x(x)?;
    propagate_w(h, [[ONE, ZERO], [ZERO, ONE]], 0.0, x, z)
}

fn weyl_from_w(w: &Mat2, gamma: &Gamma, z: C) -> Result<C> {
    let (num, den) = match gamma.at(z) {
        None => (w[0][0], w[1][0]),
        Some(g) => (w[0][0] * g + w[0][1], w[1][0] * g + w[1][1]),
    };
    if den.norm() <= 1e-300 * num.norm().max(1.0) {
        return Err(Error::Degenerate {
            what: "canonical Weyl function",
            magnitude: den.norm(),
        });
    }
    Ok(num / den)
}

/// `(w11 γ + w12)/(w21 γ + w22)` at `x = ell`; `w11/w21` for `γ = ∞`.
pub fn weyl_function_canonical(h: &Hamiltonian, ell: f64, gamma: &Gamma, z: C) -> Result<C> {
    crate::error::require_non_real(z)?;
    let w = transfer_matrix_w(h, ell, z)?;
    weyl_from_w(&w, gamma, z)
}

/// Weyl function at a singular (limit point) right end: values at
/// `x_j → ℓ` (geometric approach for finite `ℓ`, doubling for `ℓ = ∞`),
/// accelerated by Aitken's Δ² for finite `ℓ`, until successive estimates
/// differ by less than `tol`.
pub fn weyl_function_limit(h: &Hamiltonian, z: C, tol: f64) -> Result<C> {
    crate::error::require_non_real(z)?;
    let mut w = [[ONE, ZERO], [ZERO, ONE]];
    let mut x = 0.0;
    let mut raw: Vec<C> = Vec::new();
    let mut last: Option<C> = None;
    for j in 0..60 {
        let next = if h.ell.is_finite() {
            h.ell * (1.0 - 0.5f64.powi(j + 1))
        } else {
            2f64.powi(j)
        };
        w = propagate_w(h, w, x, next, z)?;
        x = next;
        raw.push(weyl_from_w(&w, &Gamma::Infinity, z)?);
        let n = raw.len();
        let estimate = if h.ell.is_finite() && n >= 3 {
            let (a, b, c) = (raw[n - 3], raw[n - 2], raw[n - 1]);
            let d = (c - b) - (b - a);
            if d.norm() > 1e-300 {
                c - (c - b) * (c - b) / d
            } else {
                c
            }
        } else {
            raw[n - 1]
        };
        if let Some(prev) = last {
            if (estimate - prev).norm() < tol {
                return Ok(estimate);
            }
        }
        last = Some(estimate);
    }
    Err(Error::NonConvergence(format!("Weyl function limit at z = {z}")))
}

/// Closure-free handle for a regular or singular canonical Weyl function.
pub struct CanonicalWeyl {
    pub hamiltonian: Hamiltonian,
    /// `None` selects the singular limit.
    pub gamma: Option<Gamma>,
    pub tol: f64,
}

impl WeylFunction for CanonicalWeyl {
    fn eval(&self, z: C) -> Result<C> {
        match &self.gamma {
            Some(g) => weyl_function_canonical(&self.hamiltonian, self.hamiltonian.ell, g, z),
            None => weyl_function_limit(&self.hamiltonian, z, self.tol),
        }
    }
}

// ---------------------------------------------------------------------------
// Spectra of regular systems: exact propagation through constant cells.

#[derive(Debug, Clone, Copy)]
struct HCell {
    len: f64,
    /// h11, h12, h22
    m: [f64; 3],
    omega: f64,
    sqrt: [f64; 3],
    inv_sqrt: [f64; 3],
}

impl HCell {
    fn new(len: f64, m: [f64; 3]) -> Self {
        let [a, b, d] = m;
        let tr = a + d;
        let det = (a * d - b * b).max(0.0);
        let omega = det.sqrt();
        let (sqrt, inv_sqrt) = if omega > 1e-10 * tr {
            let s = (tr + 2.0 * omega).sqrt();
            let r = [(a + omega) / s, b / s, (d + omega) / s];
            // det √H = ω
            (r, [r[2] / omega, -r[1] / omega, r[0] / omega])
        } else {
            ([0.0; 3], [0.0; 3])
        };
        Self {
            len,
            m,
            omega,
            sqrt,
            inv_sqrt,
        }
    }

    fn degenerate(&self) -> bool {
        self.sqrt == [0.0; 3]
    }
}

fn apply_sym(s: &[f64; 3], v: [f64; 2]) -> [f64; 2] {
    [s[0] * v[0] + s[1] * v[1], s[1] * v[0] + s[2] * v[1]]
}

/// Unit vector of angle `θ` in the convention `y = r(-sin θ, cos θ)`.
fn unit(theta: f64) -> [f64; 2] {
    [-theta.sin(), theta.cos()]
}

fn angle_near(v: [f64; 2], near: f64) -> f64 {
    let raw = (-v[0]).atan2(v[1]);
    let d = (raw - near + PI).rem_euclid(2.0 * PI) - PI;
    near + d
}

#[derive(Debug, Clone)]
struct HChain {
    cells: Vec<HCell>,
}

#[derive(Debug, Clone, Copy)]
struct HShot {
    theta: f64,
    r: f64,
    norm: f64,
}

impl HChain {
    fn new(h: &Hamiltonian, ell: f64, min_cells: usize) -> Self {
        let mut pts = vec![0.0];
        pts.extend(h.breakpoints(0.0, ell));
        pts.push(ell);
        let min_cells = if h.is_piecewise_constant() { 1 } else { min_cells };
        let target = ell / min_cells as f64;
        let mut cells = Vec::new();
        for w in pts.windows(2) {
            let n = ((w[1] - w[0]) / target).ceil().max(1.0) as usize;
            let step = (w[1] - w[0]) / n as f64;
            for i in 0..n {
                let (x0, x1) = (w[0] + i as f64 * step, w[0] + (i + 1) as f64 * step);
                let m = if h.is_piecewise_constant() {
                    h.entries(0.5 * (x0 + x1))
                } else {
                    let mut acc = [0.0; 3];
                    for (x, wt) in gauss_legendre(4, x0, x1) {
                        let e = h.entries(x);
                        for k in 0..3 {
                            acc[k] += wt * e[k] / step;
                        }
                    }
                    acc
                };
                cells.push(HCell::new(step, m));
            }
        }
        Self { cells }
    }

    /// Row-two solution from `y(0) = (0, 1)`.
    fn shoot(&self, lambda: f64, with_norm: bool) -> HShot {
        let mut s = HShot {
            theta: 0.0,
            r: 1.0,
            norm: 0.0,
        };
        for c in &self.cells {
            if c.m[0] + c.m[2] <= 0.0 {
                continue;
            }
            if !c.degenerate() {
                let w = apply_sym(&c.sqrt, unit(s.theta));
                let phi = angle_near(w, s.theta);
                let rho = s.r * w[0].hypot(w[1]);
                if with_norm {
                    s.norm += rho * rho * c.len;
                }
                let phi = phi + lambda * c.omega * c.len;
                let u = apply_sym(&c.inv_sqrt, unit(phi));
                s.theta = angle_near(u, phi);
                s.r = rho * u[0].hypot(u[1]);
            } else {
                let [a, b, d] = c.m;
                let y = unit(s.theta).map(|v| v * s.r);
                // y' = λ J H y,  J H = [[-b, -d], [a, b]]
                let dy = [-b * y[0] - d * y[1], a * y[0] + b * y[1]];
                let at = |f: f64| [y[0] + f * lambda * dy[0], y[1] + f * lambda * dy[1]];
                if with_norm {
                    let q = |v: [f64; 2]| a * v[0] * v[0] + 2.0 * b * v[0] * v[1] + d * v[1] * v[1];
                    s.norm += c.len / 6.0 * (q(at(0.0)) + 4.0 * q(at(0.5 * c.len)) + q(at(c.len)));
                }
                let end = at(c.len);
                let raw = (-end[0]).atan2(end[1]);
                // a straight segment turns by less than π, in the direction of λ
                let mut dth = (raw - s.theta).rem_euclid(2.0 * PI);
                if lambda < 0.0 && dth > 0.0 {
                    dth -= 2.0 * PI;
                }
                s.theta += dth;
                s.r = end[0].hypot(end[1]);
            }
        }
        s
    }

    fn a_total(&self) -> f64 {
        self.cells.iter().map(|c| c.omega * c.len).sum()
    }

    fn trace_total(&self) -> f64 {
        self.cells.iter().map(|c| (c.m[0] + c.m[2]) * c.len).sum()
    }
}

/// Eigenvalues `λ` with `θ(ℓ; λ) = target`, solved independently per target.
fn solve_targets<F>(theta: F, targets: &[f64], rate: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    targets
        .par_iter()
        .map(|&target| {
            if target == 0.0 {
                return Ok(0.0);
            }
            let f = |l: f64| theta(l) - target;
            let guess = target / rate;
            let mut width = 0.25 * PI / rate;
            let (mut lo, mut hi) = (guess - width, guess + width);
            // the root has the sign of the target; keep brackets on that side
            if target > 0.0 {
                lo = lo.max(0.0);
            } else {
                hi = hi.min(0.0);
            }
            let mut flo = f(lo);
            let mut guard = 0;
            while flo > 0.0 {
                width *= 2.0;
                hi = lo;
                lo -= width;
                flo = f(lo);
                guard += 1;
                if guard > 200 {
                    return Err(Error::Bracket(format!("no lower bracket for angle {target}")));
                }
            }
            let mut fhi = f(hi);
            while fhi < 0.0 {
                width *= 2.0;
                lo = hi;
                hi += width;
                fhi = f(hi);
                guard += 1;
                if guard > 200 {
                    return Err(Error::Bracket(format!("no upper bracket for angle {target}")));
                }
            }
            illinois(f, lo, hi, 1e-14 * hi.abs().max(lo.abs()).max(1.0), 300)
        })
        .collect()
}

/// Prüfer target for `y(ℓ) ∝ (γ, -1)`-type conditions: `β ∈ (0, π)` with
/// `cot β = γ`, and `0` for `γ = ∞`.
fn canonical_target(gamma: &Gamma) -> Result<f64> {
    match gamma {
        Gamma::Real(g) => Ok(1f64.atan2(*g)),
        Gamma::Infinity => Ok(0.0),
        Gamma::Function(_) => Err(Error::InvalidInput(
            "spectral measure needs a constant boundary parameter".into(),
        )),
    }
}

const CANONICAL_CELLS: usize = 2048;

/// Orthogonal spectral measure of the regular system on `[0, ell]` with the
/// boundary condition selected by `gamma`: `per_side` eigenvalues on each
/// side of zero (plus `λ = 0` for `γ = ∞`), weights `1/∫ yᵀ H y` for the
/// solution with `y(0) = (0, 1)`, and a fitted two-sided tail.
pub fn canonical_measure(h: &Hamiltonian, ell: f64, gamma: &Gamma, per_side: usize) -> Result<SpectralMeasure> {
    h.check_x(ell)?;
    if !ell.is_finite() {
        return Err(Error::InvalidInput("spectral measure needs a finite length".into()));
    }
    let beta = canonical_target(gamma)?;
    let chain = HChain::new(h, ell, CANONICAL_CELLS);
    let rate = chain.a_total().max(1e-3 * chain.trace_total());
    let n = per_side as i64;
    let ks: Vec<i64> = if beta == 0.0 { (-n..=n).collect() } else { (-n..n).collect() };
    let targets: Vec<f64> = ks.iter().map(|&k| beta + k as f64 * PI).collect();
    let ev = solve_targets(|l| chain.shoot(l, false).theta, &targets, rate)?;
    let atoms: Vec<(f64, f64)> = ev
        .par_iter()
        .map(|&l| (l, 1.0 / chain.shoot(l, true).norm))
        .collect();
    let tail = fit_two_sided_tail(&atoms);
    SpectralMeasure::new(atoms, None, tail)
}

/// Spacing, exponent and constant of `τ ≈ c|λ|^p Δ` over the last `m` atoms
/// of one side (atoms ordered outwards).
fn side_law(side: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = side.len();
    if n < 6 {
        return None;
    }
    let m = (n / 3).clamp(5, 50);
    let tail = &side[n - m..];
    let spacing = (tail[m - 1].0 - tail[0].0).abs() / (m - 1) as f64;
    let xs: Vec<f64> = tail.iter().map(|a| a.0.abs().ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|a| (a.1 / spacing).ln()).collect();
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let snapped = (2.0 * slope).round() / 2.0;
    let p = if (slope - snapped).abs() < 0.05 { snapped } else { slope };
    let c = xs.iter().zip(&ys).map(|(x, y)| (y - p * x).exp()).sum::<f64>() / m as f64;
    Some((spacing, p, c))
}

fn split_sides(atoms: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let pos: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.0 > 0.0).collect();
    let mut neg: Vec<(f64, f64)> = atoms.iter().copied().filter(|a| a.0 < 0.0).collect();
    neg.reverse();
    (pos, neg)
}

fn fit_two_sided_tail(atoms: &[(f64, f64)]) -> Option<TailDescriptor> {
    let (pos, neg) = split_sides(atoms);
    let (dp, pp, cp) = side_law(&pos)?;
    let (dn, pn, cn) = side_law(&neg)?;
    if (pp - pn).abs() > 1e-9 {
        return None;
    }
    let start = pos[pos.len() - 1].0 + 0.5 * dp;
    let negative_start = -neg[neg.len() - 1].0 + 0.5 * dn;
    Some(TailDescriptor::two_sided(pp, 0.5 * (cp + cn), start, negative_start))
}

/// Continues both sides of `atoms` to `per_side` atoms with the spacing and
/// density law fitted to the outermost computed atoms, and attaches the
/// matching two-sided tail.
pub fn extend_atoms(atoms: &[(f64, f64)], per_side: usize) -> Result<SpectralMeasure> {
    let (pos, neg) = split_sides(atoms);
    let mut out: Vec<(f64, f64)> = atoms.to_vec();
    for (side, sign) in [(&pos, 1.0), (&neg, -1.0)] {
        let (spacing, p, c) = side_law(side)
            .ok_or_else(|| Error::InvalidInput("too few atoms to fit an asymptotic law".into()))?;
        let mut l = side[side.len() - 1].0.abs();
        for _ in side.len()..per_side {
            l += spacing;
            out.push((sign * l, c * l.powf(p) * spacing));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = fit_two_sided_tail(&out);
    SpectralMeasure::new(out, None, tail)
}

// ---------------------------------------------------------------------------
// Singular right end: truncation, extrapolation, extension.

/// Controls for [`singular_measure`].
#[derive(Debug, Clone, PartialEq)]
pub struct SingularOptions {
    /// Eigenvalues computed from the system on each side of zero.
    pub computed_per_side: usize,
    /// Atoms per side after extension by the fitted asymptotic law.
    pub extended_per_side: usize,
    /// Largest truncation distance; further ones shrink by 4.
    pub first_delta: f64,
    pub levels: usize,
}

impl Default for SingularOptions {
    fn default() -> Self {
        Self {
            computed_per_side: 12,
            extended_per_side: 10_000,
            first_delta: 1e-2,
            levels: 6,
        }
    }
}

/// `y(b; λ)` from `y(0) = (0, 1)` with `∫₀ᵇ yᵀHy` and the continuous angle.
fn truncated_shot(h: &Hamiltonian, b: f64, lambda: f64) -> Result<(f64, f64, f64)> {
    let mut y = [ZERO, ONE, ZERO];
    let mut theta = 0.0;
    let mut track = |y: &mut [C; 3]| {
        theta = angle_near([y[0].re, y[1].re], theta);
    };
    let s = Dopri5::with_tolerances(1e-12, 1e-14);
    for seg in segment_points(0.0, b, &h.breakpoints(0.0, b)).windows(2) {
        y = s.integrate_with_hook(
            |x, y: &[C; 3]| {
                let [a, bb, d] = h.entries(x);
                let (u, v) = (y[0].re, y[1].re);
                [
                    C::new(lambda * (-bb * u - d * v), 0.0),
                    C::new(lambda * (a * u + bb * v), 0.0),
                    C::new(a * u * u + 2.0 * bb * u * v + d * v * v, 0.0),
                ]
            },
            seg[0],
            y,
            seg[1],
            &mut track,
        )?;
    }
    Ok((y[0].re, theta, y[2].re))
}

/// Spectral measure of a system whose right end `ℓ < ∞` is singular (limit
/// point): eigenpairs of the systems truncated at `ℓ - δ` with `y₁ = 0`
/// there, Romberg-extrapolated in `δ → 0`, then extended by the fitted
/// asymptotic law.
pub fn singular_measure(h: &Hamiltonian, opts: &SingularOptions) -> Result<SpectralMeasure> {
    if !h.ell.is_finite() {
        return Err(Error::InvalidInput("singular measure needs a finite endpoint".into()));
    }
    if opts.levels < 2 || opts.computed_per_side < 6 {
        return Err(Error::InvalidInput("need at least 2 levels and 6 eigenvalues per side".into()));
    }
    let n = opts.computed_per_side as i64;
    let ks: Vec<i64> = (-n..=n).filter(|&k| k != 0).collect();
    let mut table: Vec<Vec<(f64, f64)>> = Vec::with_capacity(opts.levels);
    for level in 0..opts.levels {
        let delta = opts.first_delta * 0.25f64.powi(level as i32);
        let b = h.ell - delta;
        let rate = adaptive_integrate(|x| h.det(x).max(0.0).sqrt(), 0.0, b, 1e-10)?.max(1e-6);
        let targets: Vec<f64> = ks.iter().map(|&k| k as f64 * PI).collect();
        let coarse = solve_targets(
            |l| truncated_shot(h, b, l).map(|s| s.1).unwrap_or(f64::NAN),
            &targets,
            rate,
        );
        let coarse = coarse?;
        // polish on the smooth boundary function y₁(b; λ)
        let pairs: Vec<Result<(f64, f64)>> = coarse
            .par_iter()
            .map(|&l| {
                let f = |x: f64| truncated_shot(h, b, x).map(|s| s.0).unwrap_or(f64::NAN);
                let d = 1e-6 * l.abs().max(1.0);
                let (mut lo, mut hi) = (l - d, l + d);
                let mut tries = 0;
                while f(lo).signum() == f(hi).signum() && tries < 20 {
                    lo -= d * 4f64.powi(tries);
                    hi += d * 4f64.powi(tries);
                    tries += 1;
                }
                let root = illinois(f, lo, hi, 1e-15 * l.abs().max(1.0), 300)?;
                let (_, _, norm) = truncated_shot(h, b, root)?;
                Ok((root, 1.0 / norm))
            })
            .collect();
        let row: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
        table.push(row);
    }
    let atoms: Vec<(f64, f64)> = (0..ks.len())
        .map(|i| {
            let lam: Vec<f64> = table.iter().map(|row| row[i].0).collect();
            let tau: Vec<f64> = table.iter().map(|row| row[i].1).collect();
            (romberg(&lam), romberg(&tau))
        })
        .collect();
    extend_atoms(&atoms, opts.extended_per_side.max(opts.computed_per_side))
}

/// Richardson table for errors in powers of `δ` with `δ` shrinking by 4.
fn romberg(v: &[f64]) -> f64 {
    let mut row = v.to_vec();
    let mut factor = 4.0;
    while row.len() > 1 {
        row = row.windows(2).map(|w| w[1] + (w[1] - w[0]) / (factor - 1.0)).collect();
        factor *= 4.0;
    }
    row[0]
}

// ---------------------------------------------------------------------------
// Screw functions, f functions and localization.

/// `g_τ(t) = iβt + ∫ (e^{iλt} - 1 - iλt/(1+λ²)) dτ(λ)/λ²`.
pub fn screw_from_measure(
    measure: impl Into<Arc<SpectralMeasure>>,
    beta: f64,
    t_grid: Vec<f64>,
    domain_bound: f64,
) -> Result<ScrewFunction> {
    TransferFunction::from_measure(measure, EntireKernel::Screw, beta, 1.0, t_grid, domain_bound)
}

/// `f_τ(t) = ∫ e^{iλt} dτ(λ)` for a finite measure.
pub fn f_from_measure(
    measure: impl Into<Arc<SpectralMeasure>>,
    t_grid: Vec<f64>,
    domain_bound: f64,
) -> Result<TransferFunction> {
    let measure = measure.into();
    if let Some(t) = measure.tail() {
        if t.p >= -1.0 {
            return Err(Error::InvalidInput("f_τ needs a finite measure".into()));
        }
    }
    TransferFunction::from_measure(measure, EntireKernel::Exponential, 0.0, 1.0, t_grid, domain_bound)
}

/// `a(l) = ∫₀ˡ √det H`.
pub fn a_of_l(h: &Hamiltonian, l: f64) -> Result<f64> {
    if !(l >= 0.0 && l <= h.ell) || !l.is_finite() {
        return Err(Error::Domain {
            requested: l,
            available: h.ell,
        });
    }
    let mut total = 0.0;
    for seg in segment_points(0.0, l, &h.breakpoints(0.0, l)).windows(2) {
        total += adaptive_integrate(|x| h.det(x).max(0.0).sqrt(), seg[0], seg[1], 1e-13)?;
    }
    Ok(total)
}

/// `l(a) = inf{l : a(l) = a}`.
pub fn l_of_a(h: &Hamiltonian, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::InvalidInput(format!("a must be nonnegative, got {a}")));
    }
    let mut hi = if h.ell.is_finite() { h.ell } else { 1.0 };
    loop {
        let top = a_of_l(h, hi)?;
        if top >= a {
            break;
        }
        if h.ell.is_finite() || hi > 1e12 {
            return Err(Error::Domain {
                requested: a,
                available: top,
            });
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let slack = 1e-13 * a.max(1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if a_of_l(h, mid)? >= a - slack {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Fit of `g₁ - g₂ ≈ iβt` on `[0, 2a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewLocalization {
    pub beta_hat: f64,
    /// Imaginary part of the fitted complex coefficient.
    pub beta_imag: f64,
    /// `sup |g₁ - g₂ - iβ̂t|`.
    pub residual: f64,
    pub locally_identical: bool,
}

pub fn localize_screw(g1: &ScrewFunction, g2: &ScrewFunction, a: f64, tol: f64) -> Result<ScrewLocalization> {
    check_domain(g1, 2.0 * a)?;
    check_domain(g2, 2.0 * a)?;
    let pts = comparison_points(g1, g2, 0.0, 2.0 * a);
    let v1 = g1.eval_many(&pts)?;
    let v2 = g2.eval_many(&pts)?;
    let d: Vec<C> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
    let stt: f64 = pts.iter().map(|t| t * t).sum();
    let coef = if stt > 0.0 {
        pts.iter().zip(&d).map(|(t, d)| d * C::new(0.0, -*t)).sum::<C>() / stt
    } else {
        ZERO
    };
    let beta_hat = coef.re;
    let residual = pts
        .iter()
        .zip(&d)
        .map(|(t, d)| (d - C::new(0.0, beta_hat * t)).norm())
        .fold(0.0, f64::max);
    Ok(ScrewLocalization {
        beta_hat,
        beta_imag: coef.im,
        residual,
        locally_identical: residual <= tol && coef.im.abs() <= tol,
    })
}

/// Positivity of `G_g(s, t) = g(s - t) - g(s) - conj(g(t)) + g(0)`.
pub fn screw_kernel_psd(g: &ScrewFunction, s_grid: &[f64], tol: f64) -> Result<PsdVerdict> {
    Ok(psd_verdict(&screw_kernel_matrix(g, s_grid)?, tol))
}

/// Positivity of `F_f(s, t) = f(s - t)`.
pub fn f_kernel_psd(f: &TransferFunction, s_grid: &[f64], tol: f64) -> Result<PsdVerdict> {
    Ok(psd_verdict(&toeplitz_kernel_matrix(f, s_grid)?, tol))
}

// ---------------------------------------------------------------------------
// Trace normalization.

/// A trace-normed Hamiltonian in the variable `ξ(x) = ∫₀ˣ tr H`, with the
/// change of variables.
#[derive(Debug, Clone)]
pub struct TraceNormalized {
    pub hamiltonian: Hamiltonian,
    map: Arc<XiMap>,
}

#[derive(Debug)]
struct XiMap {
    source: Hamiltonian,
    x: Vec<f64>,
    xi: Vec<f64>,
}

impl XiMap {
    fn xi(&self, x: f64) -> f64 {
        let i = self.x.partition_point(|&g| g <= x).saturating_sub(1).min(self.x.len() - 2);
        self.xi[i] + integrate_trace(&self.source, self.x[i], x)
    }

    fn x_of(&self, xi: f64) -> f64 {
        let n = self.xi.len();
        let i = self.xi.partition_point(|&g| g <= xi).saturating_sub(1).min(n - 2);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let mut x = x0 + (x1 - x0) * (xi - self.xi[i]) / (self.xi[i + 1] - self.xi[i]);
        for _ in 0..6 {
            let f = self.xi[i] + integrate_trace(&self.source, x0, x) - xi;
            let tr = self.source.trace(x);
            if !(tr > 0.0) {
                break;
            }
            let next = (x - f / tr).clamp(x0, x1);
            if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
                x = next;
                break;
            }
            x = next;
        }
        x
    }
}

fn integrate_trace(h: &Hamiltonian, a: f64, b: f64) -> f64 {
    gauss_legendre(12, a, b).map(|(x, w)| w * h.trace(x)).sum()
}

impl TraceNormalized {
    pub fn xi_of_x(&self, x: f64) -> f64 {
        self.map.xi(x)
    }

    pub fn x_of_xi(&self, xi: f64) -> f64 {
        self.map.x_of(xi)
    }
}

/// Rewrites `H` on `[0, x_max]` in the variable `ξ(x) = ∫₀ˣ tr H`, where
/// `H̃(ξ(x)) = H(x)/tr H(x)`. Already trace-normed input is returned as is.
pub fn trace_normalize(h: &Hamiltonian, x_max: f64, samples: usize) -> Result<TraceNormalized> {
    if !(x_max > 0.0 && x_max <= h.ell && x_max.is_finite()) {
        return Err(Error::Domain {
            requested: x_max,
            available: h.ell,
        });
    }
    let x = linspace(0.0, x_max, samples.max(2));
    if x.iter().any(|&v| !(h.trace(v) > 0.0)) {
        return Err(Error::InvalidInput("trace of H vanishes".into()));
    }
    let mut xi = vec![0.0];
    for w in x.windows(2) {
        let mut seg = 0.0;
        for p in segment_points(w[0], w[1], &h.breakpoints(w[0], w[1])).windows(2) {
            seg += integrate_trace(h, p[0], p[1]);
        }
        xi.push(xi[xi.len() - 1] + seg);
    }
    let xi_max = xi[xi.len() - 1];
    let map = Arc::new(XiMap {
        source: h.clone(),
        x,
        xi,
    });
    if h.trace_normed {
        return Ok(TraceNormalized {
            hamiltonian: Hamiltonian { ell: x_max, ..h.clone() },
            map,
        });
    }
    let entry = |k: usize| {
        let m = Arc::clone(&map);
        Coefficient::function(move |s| {
            let x = m.x_of(s);
            let e = m.source.entries(x);
            e[k] / (e[0] + e[2])
        })
    };
    let hamiltonian = Hamiltonian::new(entry(0), entry(1), entry(2), xi_max)?.into_trace_normed()?;
    Ok(TraceNormalized { hamiltonian, map })
}

// ---------------------------------------------------------------------------
// Potential systems.

/// Real symmetric `V(x)` of `-J y' = z y + V y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPotential {
    pub v11: Coefficient,
    pub v12: Coefficient,
    pub v22: Coefficient,
}

impl SymmetricPotential {
    pub fn entries(&self, x: f64) -> [f64; 3] {
        [self.v11.eval(x), self.v12.eval(x), self.v22.eval(x)]
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        [&self.v11, &self.v12, &self.v22]
            .iter()
            .flat_map(|c| c.breakpoints(a, b))
            .collect()
    }
}

/// The Hamiltonian `H = U Uᵀ` of a potential system, with `U` sampled.
#[derive(Debug, Clone)]
pub struct PotentialSystem {
    pub hamiltonian: Hamiltonian,
    pub x: Vec<f64>,
    pub u: Vec<[[f64; 2]; 2]>,
}

/// `U(x)` with `U' J = U V`, `U(0) = I`, on the grid `x` (increasing, from 0).
pub fn potential_u(v: &SymmetricPotential, x: &[f64]) -> Result<Vec<[[f64; 2]; 2]>> {
    let mut y = [ONE, ZERO, ZERO, ONE];
    let mut at = 0.0;
    let mut out = Vec::with_capacity(x.len());
    for &target in x {
        if target < at {
            return Err(Error::InvalidInput("potential grid must increase from 0".into()));
        }
        for seg in segment_points(at, target, &v.breakpoints(at, target)).windows(2) {
            y = solver().integrate(
                |s, y: &[C; 4]| {
                    let [a, b, d] = v.entries(s);
                    // V J⁻¹ = [[-v12, v11], [-v22, v12]]
                    [
                        -y[0] * b - y[1] * d,
                        y[0] * a + y[1] * b,
                        -y[2] * b - y[3] * d,
                        y[2] * a + y[3] * b,
                    ]
                },
                seg[0],
                y,
                seg[1],
            )?;
        }
        at = target;
        out.push([[y[0].re, y[1].re], [y[2].re, y[3].re]]);
    }
    Ok(out)
}

/// Integrates `U` on `samples` points of `[0, ell]` and returns `H = U Uᵀ`
/// as grid coefficients.
pub fn potential_to_hamiltonian(v: &SymmetricPotential, ell: f64, samples: usize) -> Result<PotentialSystem> {
    let x = linspace(0.0, ell, samples.max(2));
    let u = potential_u(v, &x)?;
    let uut = |m: &[[f64; 2]; 2]| {
        [
            m[0][0] * m[0][0] + m[0][1] * m[0][1],
            m[0][0] * m[1][0] + m[0][1] * m[1][1],
            m[1][0] * m[1][0] + m[1][1] * m[1][1],
        ]
    };
    let hs: Vec<[f64; 3]> = u.iter().map(uut).collect();
    let col = |k: usize| Coefficient::grid(x.clone(), hs.iter().map(|h| h[k]).collect());
    let hamiltonian = Hamiltonian::new(col(0)?, col(1)?, col(2)?, ell)?;
    Ok(PotentialSystem { hamiltonian, x, u })
}

/// Largest entry of `U J Uᵀ - J`.
pub fn symplectic_defect(u: &[[f64; 2]; 2]) -> f64 {
    let j = [[0.0, -1.0], [1.0, 0.0]];
    let mut worst = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            let mut acc = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    acc += u[r][k] * j[k][l] * u[c][l];
                }
            }
            worst = worst.max((acc - j[r][c]).abs());
        }
    }
    worst
}
