//! Regular Sturm-Liouville problems `-y'' + q y = z y` on `[0, ℓ]` with
//! `y(0) cos α - y'(0) sin α = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cells::Chain;
use crate::coefficient::Coefficient;
use crate::error::{require_non_real, Error, Result};
use crate::measure::{SpectralMeasure, TailDescriptor};
use crate::numerics::ode::{segment_points, Dopri5};
use crate::numerics::{illinois, LogComplex};
use crate::weyl::{Gamma, WeylFunction};

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };

/// Cells used for eigenvalue search when the potential is not piecewise constant.
const SMOOTH_CELLS: usize = 1024;
/// Eigenvalues re-solved with the adaptive integrator for non-piecewise-constant potentials.
const POLISHED: usize = 64;

/// Problem data `(ℓ, q, α)`, `α ∈ (0, π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem")]
pub struct SlProblem {
    ell: f64,
    alpha: f64,
    q: Coefficient,
}

#[derive(Deserialize)]
struct RawProblem {
    ell: f64,
    alpha: f64,
    q: Coefficient,
}

impl TryFrom<RawProblem> for SlProblem {
    type Error = Error;

    fn try_from(raw: RawProblem) -> Result<Self> {
        Self::new(raw.ell, raw.q, raw.alpha)
    }
}

impl SlProblem {
    pub fn new(ell: f64, q: Coefficient, alpha: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidInput(format!("interval length must be positive and finite, got {ell}")));
        }
        if !(alpha > 0.0 && alpha < PI) {
            return Err(Error::InvalidInput(format!("boundary angle must lie in (0, π), got {alpha}")));
        }
        Ok(Self { ell, alpha, q })
    }

    /// Neumann condition `y'(0) = 0`.
    pub fn neumann(ell: f64, q: Coefficient) -> Result<Self> {
        Self::new(ell, q, 0.5 * PI)
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `h = cot α`.
    pub fn h(&self) -> f64 {
        1.0 / self.alpha.tan()
    }

    pub fn potential(&self) -> &Coefficient {
        &self.q
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if !(0.0..=self.ell * (1.0 + 1e-14)).contains(&x) {
            return Err(Error::InvalidInput(format!("x = {x} outside [0, {}]", self.ell)));
        }
        Ok(())
    }

    fn breaks(&self, b: f64) -> Vec<f64> {
        self.q.breakpoints(0.0, b)
    }
}

/// `φ, φ', ψ, ψ'` at `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalValues {
    pub phi: C,
    pub phi_prime: C,
    pub psi: C,
    pub psi_prime: C,
    pub x: f64,
    pub z: C,
}

impl FundamentalValues {
    pub fn wronskian(&self) -> C {
        self.phi * self.psi_prime - self.phi_prime * self.psi
    }
}

fn rescale<const N: usize>(y: &mut [C; N], ln_scale: &mut f64) {
    let mag = y.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    if mag > 1e50 || (mag < 1e-50 && mag > 0.0) {
        for v in y.iter_mut() {
            *v /= mag;
        }
        *ln_scale += mag.ln();
    }
}

/// Fundamental system scaled by `exp(-ln_scale)`.
pub(crate) fn fundamental_scaled(problem: &SlProblem, z: C, x: f64) -> Result<([C; 4], f64)> {
    problem.check_point(x)?;
    let (s, c) = problem.alpha.sin_cos();
    let mut y = [C::new(s, 0.0), C::new(c, 0.0), C::new(-c, 0.0), C::new(s, 0.0)];
    let mut ln_scale = 0.0;
    let q = &problem.q;
    let pts = segment_points(0.0, x, &problem.breaks(x));
    let solver = Dopri5::default();
    for w in pts.windows(2) {
        y = solver.integrate_with_hook(
            |t, y: &[C; 4]| {
                let k = q.eval(t) - z;
                [y[1], y[0] * k, y[3], y[2] * k]
            },
            w[0],
            y,
            w[1],
            |y| rescale(y, &mut ln_scale),
        )?;
    }
    Ok((y, ln_scale))
}

/// Solutions `φ`, `ψ` with `φ(0) = sin α`, `φ'(0) = cos α`, `ψ(0) = -cos α`,
/// `ψ'(0) = sin α`, evaluated at `x`.
pub fn solve_fundamental(problem: &SlProblem, z: C, x: f64) -> Result<FundamentalValues> {
    let (y, ln_scale) = fundamental_scaled(problem, z, x)?;
    let f = ln_scale.exp();
    Ok(FundamentalValues {
        phi: y[0] * f,
        phi_prime: y[1] * f,
        psi: y[2] * f,
        psi_prime: y[3] * f,
        x,
        z,
    })
}

fn check_right_end(problem: &SlProblem, a: f64) -> Result<()> {
    if !(a > 0.0 && a <= problem.ell * (1.0 + 1e-14)) {
        return Err(Error::InvalidInput(format!("a = {a} outside (0, {}]", problem.ell)));
    }
    Ok(())
}

/// Integrates the solution `χ` with `χ'(a) = γ χ(a)` back to `0` and returns
/// `(χ(0), χ'(0))` up to a common factor.
fn right_solution_at_zero(problem: &SlProblem, a: f64, gamma: &Gamma, z: C) -> Result<[C; 2]> {
    let mut y = match gamma.at(z) {
        Some(g) => [C::new(1.0, 0.0), g],
        None => [ZERO, C::new(1.0, 0.0)],
    };
    let mut ln_scale = 0.0;
    let q = &problem.q;
    let pts = segment_points(a, 0.0, &problem.breaks(a));
    let solver = Dopri5::default();
    for w in pts.windows(2) {
        y = solver.integrate_with_hook(
            |t, y: &[C; 2]| [y[1], y[0] * (q.eval(t) - z)],
            w[0],
            y,
            w[1],
            |y| rescale(y, &mut ln_scale),
        )?;
    }
    Ok(y)
}

/// `m_γ(z) = (ψ'(a) - γψ(a))/(φ'(a) - γφ(a))`, and `ψ(a)/φ(a)` for `γ = ∞`.
///
/// Evaluated as `W(χ, ψ)/W(χ, φ)` at `0`, with `χ` the solution satisfying the
/// boundary condition at `a`, which avoids the exponentially large values of
/// `φ` and `ψ` for large `|z|`.
pub fn weyl_m(problem: &SlProblem, a: f64, gamma: &Gamma, z: C) -> Result<C> {
    require_non_real(z)?;
    check_right_end(problem, a)?;
    let [chi, dchi] = right_solution_at_zero(problem, a, gamma, z)?;
    let (s, c) = problem.alpha.sin_cos();
    let num = -(dchi * c + chi * s);
    let den = dchi * s - chi * c;
    if den.norm() <= 1e-300 * num.norm().max(1.0) {
        return Err(Error::Degenerate {
            what: "Weyl function",
            magnitude: den.norm(),
        });
    }
    Ok(num / den)
}

/// Riccati state for the compensated difference: either `u = χ'/χ` or `v = χ/χ'`.
#[derive(Clone, Copy, PartialEq)]
enum Mode {
    U,
    V,
}

/// `m₁(z) - m₂(z)` for two problems with the same `α` on the same interval
/// `[0, a]`, obtained by integrating the difference of the Riccati variables
/// directly, in scaled form. Accurate when the difference is far below the
/// rounding level of the individual values.
pub fn weyl_m_difference(
    p1: &SlProblem,
    g1: &Gamma,
    p2: &SlProblem,
    g2: &Gamma,
    a: f64,
    z: C,
) -> Result<LogComplex> {
    require_non_real(z)?;
    check_right_end(p1, a)?;
    check_right_end(p2, a)?;
    if p1.alpha != p2.alpha {
        return Err(Error::InvalidInput("compensated difference needs equal boundary angles".into()));
    }
    let one = C::new(1.0, 0.0);
    let (mut mode, mut r1, mut r2) = match (g1.at(z), g2.at(z)) {
        (None, None) => (Mode::V, ZERO, ZERO),
        (Some(a1), Some(a2)) if a1.norm() <= 1.0 && a2.norm() <= 1.0 => (Mode::U, a1, a2),
        (Some(a1), Some(a2)) => (Mode::V, one / a1, one / a2),
        (None, Some(a2)) => (Mode::V, ZERO, one / a2),
        (Some(a1), None) => (Mode::V, one / a1, ZERO),
    };
    // w = r1 - r2 = exp(ln_w) · w_hat
    let mut w_hat = r1 - r2;
    let mut ln_w = 0.0;
    if w_hat.norm() > 0.0 {
        ln_w = w_hat.norm().ln();
        w_hat /= w_hat.norm();
    }
    let rate = (-z).sqrt().re.abs().max(1.0);
    let max_len = (0.01_f64).min(10.0 / rate);
    let mut breaks = p1.breaks(a);
    breaks.extend(p2.breaks(a));
    let coarse = segment_points(a, 0.0, &breaks);
    let mut pts = vec![a];
    for w in coarse.windows(2) {
        let n = ((w[0] - w[1]) / max_len).ceil().max(1.0) as usize;
        for i in 1..=n {
            pts.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    let (q1, q2) = (&p1.q, &p2.q);
    let solver = Dopri5::with_tolerances(1e-12, 1e-300);
    for w in pts.windows(2) {
        let big = r1.norm().max(r2.norm()) > 1.0;
        let want = match (mode, big) {
            (Mode::U, true) => Mode::V,
            (Mode::V, true) if r1.norm().min(r2.norm()) < 1.0 && r1 != ZERO && r2 != ZERO => Mode::U,
            (m, _) => m,
        };
        if want != mode && r1 != ZERO && r2 != ZERO {
            // r ↦ 1/r, w ↦ -w/(r1 r2)
            w_hat = -w_hat / (r1 * r2);
            r1 = one / r1;
            r2 = one / r2;
            mode = want;
        }
        let scale = (-ln_w).exp();
        let y = solver.integrate(
            |x, y: &[C; 3]| {
                let (a1, a2) = (q1.eval(x), q2.eval(x));
                let dq = a1 - a2;
                let src = if dq == 0.0 { 0.0 } else { dq * scale };
                match mode {
                    Mode::U => [
                        (a1 - z) - y[0] * y[0],
                        (a2 - z) - y[1] * y[1],
                        -(y[0] + y[1]) * y[2] + src,
                    ],
                    Mode::V => [
                        one - (a1 - z) * y[0] * y[0],
                        one - (a2 - z) * y[1] * y[1],
                        -(y[0] * y[0]) * src - (a2 - z) * (y[0] + y[1]) * y[2],
                    ],
                }
            },
            w[0],
            [r1, r2, w_hat],
            w[1],
        )?;
        r1 = y[0];
        r2 = y[1];
        w_hat = y[2];
        let mag = w_hat.norm();
        if !mag.is_finite() {
            return Err(Error::Integration {
                x: w[1],
                reason: "Riccati difference left the representable range",
                error_estimate: f64::NAN,
            });
        }
        if mag > 0.0 {
            w_hat /= mag;
            ln_w += mag.ln();
        }
    }
    let (s, c) = p1.alpha.sin_cos();
    let (den, sign) = match mode {
        Mode::U => ((C::new(c, 0.0) - r1 * s) * (C::new(c, 0.0) - r2 * s), 1.0),
        Mode::V => ((r1 * c - s) * (r2 * c - s), -1.0),
    };
    if w_hat == ZERO {
        return Ok(LogComplex {
            ln_abs: f64::NEG_INFINITY,
            phase: one,
        });
    }
    let lw = LogComplex {
        ln_abs: ln_w,
        phase: w_hat * sign,
    };
    Ok(lw.div(LogComplex::from_complex(den)))
}

/// The Weyl function `m_γ` of a problem on `[0, a]`.
#[derive(Debug, Clone)]
pub struct SlWeyl {
    pub problem: SlProblem,
    pub a: f64,
    pub gamma: Gamma,
}

impl SlWeyl {
    pub fn new(problem: SlProblem, a: f64, gamma: Gamma) -> Result<Self> {
        check_right_end(&problem, a)?;
        Ok(Self { problem, a, gamma })
    }

    /// Compensated `self - other`, when both share `α` and `a`.
    pub fn difference(&self, other: &SlWeyl, z: C) -> Option<Result<LogComplex>> {
        if self.problem.alpha != other.problem.alpha || self.a != other.a {
            return None;
        }
        Some(weyl_m_difference(
            &self.problem,
            &self.gamma,
            &other.problem,
            &other.gamma,
            self.a,
            z,
        ))
    }
}

impl WeylFunction for SlWeyl {
    fn eval(&self, z: C) -> Result<C> {
        weyl_m(&self.problem, self.a, &self.gamma, z)
    }

    fn sl_weyl(&self) -> Option<&SlWeyl> {
        Some(self)
    }
}

/// Target Prüfer angle `β ∈ (0, π]` with `cot β = γ` (`β = π` for `γ = ∞`).
fn target_angle(gamma: &Gamma) -> Result<f64> {
    match gamma {
        Gamma::Real(g) => Ok(1f64.atan2(*g)),
        Gamma::Infinity => Ok(PI),
        Gamma::Function(_) => Err(Error::InvalidInput(
            "eigenvalues need a constant boundary parameter".into(),
        )),
    }
}

/// `(φ(a; λ), φ'(a; λ), ∫₀ᵃ φ²)` at real `λ`, by the adaptive integrator.
pub fn phi_and_norm(problem: &SlProblem, a: f64, lambda: f64) -> Result<(f64, f64, f64)> {
    check_right_end(problem, a)?;
    let (s, c) = problem.alpha.sin_cos();
    let q = &problem.q;
    let mut y = [C::new(s, 0.0), C::new(c, 0.0), ZERO];
    let solver = Dopri5::with_tolerances(1e-13, 1e-15);
    for w in segment_points(0.0, a, &problem.breaks(a)).windows(2) {
        y = solver.integrate(
            |x, y: &[C; 3]| [y[1], y[0] * (q.eval(x) - lambda), y[0] * y[0]],
            w[0],
            y,
            w[1],
        )?;
    }
    Ok((y[0].re, y[1].re, y[2].re))
}

/// Boundary function `φ'(a;λ) - γφ(a;λ)` (or `φ(a;λ)`) and `∫₀ᵃ φ²`.
fn boundary_and_norm(problem: &SlProblem, a: f64, gamma: &Gamma, lambda: f64) -> Result<(f64, f64)> {
    let (phi, dphi, norm) = phi_and_norm(problem, a, lambda)?;
    let b = match gamma {
        Gamma::Real(g) => dphi - g * phi,
        _ => phi,
    };
    Ok((b, norm))
}

fn lambda_floor(chain: &Chain, theta0: f64, beta: f64) -> f64 {
    let qmin = chain.cells.iter().map(|c| c.q).fold(f64::INFINITY, f64::min);
    let mut floor = qmin - 1.0;
    let mut step = 10.0;
    while chain.shoot(floor, theta0, false).theta >= beta {
        floor -= step;
        step *= 2.0;
    }
    floor
}

fn spectrum(problem: &SlProblem, a: f64, gamma: &Gamma, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_right_end(problem, a)?;
    let beta = target_angle(gamma)?;
    let chain = Chain::for_potential(&problem.q, a, SMOOTH_CELLS);
    let theta0 = problem.alpha;
    let floor = lambda_floor(&chain, theta0, beta);
    let mut ev = chain.eigenvalues(theta0, |k| beta + k as f64 * PI, count, floor)?;
    let mut norms: Vec<f64> = ev.iter().map(|&l| chain.shoot(l, theta0, true).norm_abs()).collect();
    if !problem.q.is_piecewise_constant() {
        let polished = count.min(POLISHED);
        for k in 0..polished {
            let spacing = if k + 1 < ev.len() {
                ev[k + 1] - ev[k]
            } else if k > 0 {
                ev[k] - ev[k - 1]
            } else {
                1.0
            };
            let b = |l: f64| boundary_and_norm(problem, a, gamma, l).map(|v| v.0).unwrap_or(f64::NAN);
            let mut d = 1e-6 * spacing.max(1e-3);
            let (mut lo, mut hi) = (ev[k] - d, ev[k] + d);
            let mut tries = 0;
            while b(lo).signum() == b(hi).signum() && tries < 12 {
                d *= 4.0;
                lo = ev[k] - d.min(0.45 * spacing);
                hi = ev[k] + d.min(0.45 * spacing);
                tries += 1;
            }
            if let Ok(root) = illinois(b, lo, hi, 1e-14 * ev[k].abs().max(1.0), 200) {
                ev[k] = root;
                norms[k] = boundary_and_norm(problem, a, gamma, root)?.1;
            }
        }
    }
    Ok((ev, norms))
}

/// The `count` smallest eigenvalues of the problem on `[0, a]` with
/// `y'(a) = γ y(a)` (`y(a) = 0` for `γ = ∞`).
pub fn eigenvalues(problem: &SlProblem, a: f64, gamma: &Gamma, count: usize) -> Result<Vec<f64>> {
    spectrum(problem, a, gamma, count).map(|s| s.0)
}

/// Orthogonal spectral measure: atoms at the eigenvalues with weights
/// `1/∫₀ᵃ φ(x;λ_k)² dx`, plus the asymptotic tail `(π sin²α)⁻¹ λ^{-1/2} dλ`.
pub fn orthogonal_measure(problem: &SlProblem, a: f64, gamma: &Gamma, count: usize) -> Result<SpectralMeasure> {
    let (ev, norms) = spectrum(problem, a, gamma, count)?;
    let mut atoms = Vec::with_capacity(ev.len());
    for (l, n) in ev.iter().zip(&norms) {
        if !(n.is_finite() && *n > 0.0) {
            return Err(Error::InvalidInput(format!("non-finite eigenfunction norm at λ = {l}")));
        }
        atoms.push((*l, 1.0 / n));
    }
    let tail = if ev.len() >= 2 {
        let (l1, l0) = (ev[ev.len() - 1], ev[ev.len() - 2]);
        let sa = problem.alpha.sin();
        Some(TailDescriptor::one_sided(-0.5, 1.0 / (PI * sa * sa), l1 + 0.5 * (l1 - l0)))
            .filter(|t| t.start > 0.0)
    } else {
        None
    };
    SpectralMeasure::new(atoms, None, tail)
}

/// Data of the solution `χ` that carries the problem from `a` to its right
/// end: `(χ(a), χ'(a), ∫ χ²)` over the remaining interval, at real `λ`.
pub type Remainder<'a> = dyn Fn(f64) -> (f64, f64, f64) + Sync + 'a;

/// Spectral measure of the problem on `[0, a]` continued by a remainder
/// solution `χ` on the rest of the interval: eigenvalues are the zeros of
/// `W(φ, χ)(a; λ)` above `lambda_min`, weights `1/∫φ²` with `φ = cχ` beyond
/// `a`.
///
/// Zeros are bracketed by scanning `√(λ - λ_min)` in steps of `s_step`, which
/// must be smaller than the gaps between consecutive square roots.
pub fn matched_measure(
    problem: &SlProblem,
    a: f64,
    remainder: &Remainder<'_>,
    count: usize,
    lambda_min: f64,
    s_step: f64,
) -> Result<SpectralMeasure> {
    check_right_end(problem, a)?;
    if !(s_step > 0.0) {
        return Err(Error::InvalidInput(format!("scan step must be positive, got {s_step}")));
    }
    let wronskian = |lambda: f64| -> f64 {
        let Ok((phi, dphi, _)) = phi_and_norm(problem, a, lambda) else {
            return f64::NAN;
        };
        let (chi, dchi, _) = remainder(lambda);
        (phi * dchi - dphi * chi) / (phi.hypot(dphi) * chi.hypot(dchi))
    };
    let mut atoms = Vec::with_capacity(count);
    let mut s = 0.0;
    let mut prev = wronskian(lambda_min);
    let mut guard = 0usize;
    while atoms.len() < count {
        let next_s = s + s_step;
        let (lo, hi) = (lambda_min + s * s, lambda_min + next_s * next_s);
        let cur = wronskian(hi);
        if !cur.is_finite() {
            return Err(Error::Bracket(format!("Wronskian not finite at λ = {hi}")));
        }
        // a degenerate remainder at λ_min itself gives no sign information
        if prev.is_finite() && (prev == 0.0 || prev.signum() != cur.signum()) {
            let root = if prev == 0.0 {
                lo
            } else {
                illinois(wronskian, lo, hi, 1e-15 * hi.abs().max(1.0), 300)?
            };
            let (phi, dphi, inner) = phi_and_norm(problem, a, root)?;
            let (chi, dchi, outer) = remainder(root);
            let c = (phi * chi + dphi * dchi) / (chi * chi + dchi * dchi);
            let norm = inner + c * c * outer;
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite eigenfunction norm at λ = {root}")));
            }
            atoms.push((root, 1.0 / norm));
        }
        prev = cur;
        s = next_s;
        guard += 1;
        if guard > 100_000_000 {
            return Err(Error::Bracket("scan exhausted".into()));
        }
    }
    let tail = if atoms.len() >= 2 {
        let (l1, l0) = (atoms[atoms.len() - 1].0, atoms[atoms.len() - 2].0);
        let sa = problem.alpha.sin();
        Some(TailDescriptor::one_sided(-0.5, 1.0 / (PI * sa * sa), l1 + 0.5 * (l1 - l0))).filter(|t| t.start > 0.0)
    } else {
        None
    };
    SpectralMeasure::new(atoms, None, tail)
}

/// `𝓕(y; λ) = ∫₀ᵃ y(x) φ(x; λ) dx`.
pub fn fourier_transform<F: Fn(f64) -> f64>(problem: &SlProblem, a: f64, y: F, lambda: f64) -> Result<f64> {
    check_right_end(problem, a)?;
    let (s, c) = problem.alpha.sin_cos();
    let q = &problem.q;
    let mut st = [C::new(s, 0.0), C::new(c, 0.0), ZERO];
    let solver = Dopri5::with_tolerances(1e-12, 1e-14);
    for w in segment_points(0.0, a, &problem.breaks(a)).windows(2) {
        st = solver.integrate(
            |x, v: &[C; 3]| [v[1], v[0] * (q.eval(x) - lambda), v[0] * y(x)],
            w[0],
            st,
            w[1],
        )?;
    }
    Ok(st[2].re)
}

/// Resolvent kernel `G(x, ξ; z) = φ(x_<)(m_γ(z) φ(x_>) - ψ(x_>))` of the
/// problem on `[0, a]`.
pub fn greens_function(problem: &SlProblem, a: f64, gamma: &Gamma, z: C, x: f64, xi: f64) -> Result<C> {
    let m = weyl_m(problem, a, gamma, z)?;
    let (lo, hi) = if x <= xi { (x, xi) } else { (xi, x) };
    if !(lo >= 0.0 && hi <= a) {
        return Err(Error::InvalidInput(format!("points ({x}, {xi}) outside [0, {a}]")));
    }
    let f_lo = solve_fundamental(problem, z, lo)?;
    let f_hi = solve_fundamental(problem, z, hi)?;
    Ok(f_lo.phi * (m * f_hi.phi - f_hi.psi))
}
