//! Krein strings `dy' + z y dM = 0` on `[0, ℓ]`: fundamental solutions,
//! Weyl functions with Stieltjes parameters, spectral measures and transfer
//! functions.
//!
//! `M` is an absolutely continuous part with density `ρ` plus point masses.
//! Derivatives are left derivatives; a point mass at `x_j` changes `y'` by
//! `-z m_j y(x_j)` when the solution passes it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cells::Chain;
use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::measure::{EntireKernel, SpectralMeasure};
use crate::numerics::ode::{segment_points, Dopri5};
use crate::numerics::{adaptive_integrate, csqrt, illinois};
use crate::sturm_liouville::FundamentalValues;
use crate::transfer::{compare_transfer, Comparison, TransferFunction};
use crate::weyl::Gamma;

const STRING_CELLS: usize = 2048;
const POLISHED: usize = 64;
const DENSITY_SAMPLES: usize = 256;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Mass distribution of a regular string `S[ℓ, M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMass")]
pub struct MassDistribution {
    ell: f64,
    density: Coefficient,
    atoms: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct RawMass {
    ell: f64,
    #[serde(default = "Coefficient::zero")]
    density: Coefficient,
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawMass> for MassDistribution {
    type Error = Error;

    fn try_from(raw: RawMass) -> Result<Self> {
        Self::new(raw.ell, raw.density, raw.atoms)
    }
}

impl MassDistribution {
    /// Point masses must lie in `[0, ℓ)`; the density must be nonnegative.
    pub fn new(ell: f64, density: Coefficient, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "string length must be positive and finite, got {ell}"
            )));
        }
        for &(x, m) in &atoms {
            if !(x >= 0.0 && x < ell) || !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point mass ({x}, {m}) must sit in [0, {ell}) with a positive finite jump"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        for i in 0..=DENSITY_SAMPLES {
            let x = ell * i as f64 / DENSITY_SAMPLES as f64;
            let v = density.eval(x);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("density must be finite and nonnegative, got {v} at x = {x}")));
            }
        }
        let s = Self { ell, density, atoms };
        if !(s.total_mass() > 0.0) {
            return Err(Error::InvalidInput("string carries no mass".into()));
        }
        Ok(s)
    }

    /// `M(x) = x` on `[0, ℓ]`.
    pub fn homogeneous(ell: f64) -> Result<Self> {
        Self::new(ell, Coefficient::Constant(1.0), Vec::new())
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn density(&self) -> &Coefficient {
        &self.density
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn density_integral<F: Fn(f64) -> f64>(&self, f: F, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for seg in segment_points(0.0, l, &self.density.breakpoints(0.0, l)).windows(2) {
            total += if self.density.is_piecewise_constant() {
                (seg[1] - seg[0]) * f(self.density.eval(0.5 * (seg[0] + seg[1])))
            } else {
                adaptive_integrate(|x| f(self.density.eval(x)), seg[0], seg[1], 1e-13).unwrap_or(f64::NAN)
            };
        }
        total
    }

    /// `M(x)`, point masses at `x` included.
    pub fn mass_at(&self, x: f64) -> f64 {
        let x = x.min(self.ell);
        self.density_integral(|r| r, x) + self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_at(self.ell)
    }

    /// True when the density vanishes at every sample point.
    pub fn is_purely_atomic(&self) -> bool {
        (0..=DENSITY_SAMPLES).all(|i| self.density.eval(self.ell * i as f64 / DENSITY_SAMPLES as f64) == 0.0)
    }

    /// `a(l) = ∫₀ˡ √M'(x) dx` over the absolutely continuous part.
    pub fn a_of_l(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0 && l <= self.ell) {
            return Err(Error::Domain {
                requested: l,
                available: self.ell,
            });
        }
        Ok(self.density_integral(|r| r.max(0.0).sqrt(), l))
    }

    /// `l(a) = inf{l : a(l) = a}`; refused for purely atomic strings, where
    /// `a ≡ 0`.
    pub fn l_of_a(&self, a: f64) -> Result<f64> {
        if self.is_purely_atomic() {
            return Err(Error::InvalidInput(
                "purely atomic string: M' = 0 almost everywhere, so a(l) ≡ 0 and l(a) is undefined".into(),
            ));
        }
        if !(a >= 0.0) {
            return Err(Error::InvalidInput(format!("a must be nonnegative, got {a}")));
        }
        let top = self.a_of_l(self.ell)?;
        if a > top * (1.0 + 1e-14) {
            return Err(Error::Domain {
                requested: a,
                available: top,
            });
        }
        let (mut lo, mut hi) = (0.0, self.ell);
        let slack = 1e-13 * a.max(1.0);
        for _ in 0..200 {
            if hi - lo <= 1e-14 * self.ell {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.a_of_l(mid)? >= a - slack {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `2a(ℓ)`: transfer functions of the string are determined on `[0, 2a(ℓ)]`.
    pub fn transfer_domain(&self) -> f64 {
        2.0 * self.density_integral(|r| r.max(0.0).sqrt(), self.ell)
    }

    /// Segment ends between `0` and `x`, splitting at masses and density breaks.
    fn segments(&self, x: f64) -> Vec<f64> {
        let mut breaks = self.density.breakpoints(0.0, x);
        breaks.extend(self.atoms.iter().map(|a| a.0).filter(|&p| p > 0.0 && p < x));
        segment_points(0.0, x, &breaks)
    }

    fn mass_at_point(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == x).map(|a| a.1).sum()
    }

    fn check_point(&self, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= self.ell) {
            return Err(Error::Domain {
                requested: x,
                available: self.ell,
            });
        }
        Ok(())
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

/// `(cos(kh), sin(kh)/k)` with `k² = u`.
fn trig_c(u: C, h: f64) -> (C, C) {
    let x = u * h * h;
    if x.norm() < 1e-3 {
        // series in x
        let (mut c, mut s) = (ONE, C::new(h, 0.0));
        let (mut tc, mut ts) = (ONE, C::new(h, 0.0));
        for n in 1..10 {
            let nf = n as f64;
            tc *= -x / ((2.0 * nf - 1.0) * (2.0 * nf));
            ts *= -x / ((2.0 * nf) * (2.0 * nf + 1.0));
            c += tc;
            s += ts;
        }
        return (c, s);
    }
    let k = csqrt(u);
    ((k * h).cos(), (k * h).sin() / k)
}

/// `[φ, φ', ψ, ψ']` at `x` scaled by `exp(-ln_scale)`.
fn fundamental_scaled(s: &MassDistribution, z: C, x: f64) -> Result<([C; 4], f64)> {
    s.check_point(x)?;
    let mut y = [ONE, ZERO, ZERO, ONE];
    let mut ln_scale = 0.0;
    if x == 0.0 {
        return Ok((y, ln_scale));
    }
    let pts = s.segments(x);
    let solver = Dopri5::default();
    for w in pts.windows(2) {
        let m = s.mass_at_point(w[0]);
        if m > 0.0 {
            y[1] -= z * m * y[0];
            y[3] -= z * m * y[2];
        }
        if s.density.is_piecewise_constant() {
            let u = z * s.density.eval(0.5 * (w[0] + w[1]));
            let (c, sn) = trig_c(u, w[1] - w[0]);
            for j in [0, 2] {
                let (y0, yp0) = (y[j], y[j + 1]);
                y[j] = c * y0 + sn * yp0;
                y[j + 1] = -u * sn * y0 + c * yp0;
            }
        } else {
            let rho = &s.density;
            y = solver.integrate_with_hook(
                |t, y: &[C; 4]| {
                    let k = -z * rho.eval(t);
                    [y[1], y[0] * k, y[3], y[2] * k]
                },
                w[0],
                y,
                w[1],
                |y| rescale(y, &mut ln_scale),
            )?;
        }
        rescale(&mut y, &mut ln_scale);
    }
    Ok((y, ln_scale))
}

/// `φ, φ', ψ, ψ'` at `x`, with `φ(0) = 1`, `φ'(0-) = 0`, `ψ(0) = 0`,
/// `ψ'(0-) = 1`. Derivatives are taken from the left.
pub fn string_fundamental(s: &MassDistribution, z: C, x: f64) -> Result<FundamentalValues> {
    let (y, ln_scale) = fundamental_scaled(s, z, x)?;
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

/// `(ψ'(ℓ)γ + ψ(ℓ))/(φ'(ℓ)γ + φ(ℓ))`, and `ψ'(ℓ)/φ'(ℓ)` for `γ = ∞`.
///
/// `z` may be anywhere off `[0, ∞)`.
pub fn string_weyl(s: &MassDistribution, gamma: &Gamma, z: C) -> Result<C> {
    if !(z.re.is_finite() && z.im.is_finite()) || (z.im == 0.0 && z.re >= 0.0) {
        return Err(Error::InvalidInput(format!("z = {z} must lie off [0, ∞)")));
    }
    if let Gamma::Real(g) = gamma {
        if *g < 0.0 {
            return Err(Error::InvalidInput(format!("Stieltjes constant must be >= 0, got {g}")));
        }
    }
    let ([phi, dphi, psi, dpsi], _) = fundamental_scaled(s, z, s.ell)?;
    let (num, den) = match gamma.at(z) {
        Some(g) => (dpsi * g + psi, dphi * g + phi),
        None => (dpsi, dphi),
    };
    let scale = phi.norm().max(dphi.norm());
    if den.norm() <= 1e-14 * scale {
        return Err(Error::Degenerate {
            what: "string Weyl function",
            magnitude: den.norm(),
        });
    }
    Ok(num / den)
}

/// `β = π - arctan γ` in `[π/2, π]`: the angle where `γy' + y = 0`.
fn string_target(gamma: &Gamma) -> Result<f64> {
    match gamma {
        Gamma::Real(g) if *g >= 0.0 => Ok(PI - g.atan()),
        Gamma::Real(g) => Err(Error::InvalidInput(format!("Stieltjes constant must be >= 0, got {g}"))),
        Gamma::Infinity => Ok(FRAC_PI_2),
        Gamma::Function(_) => Err(Error::InvalidInput("spectral measures need a constant γ".into())),
    }
}

/// `(boundary value, ∫ φ² dM)` at real `λ`, by the adaptive integrator.
fn boundary_and_norm(s: &MassDistribution, gamma: &Gamma, lambda: f64) -> Result<(f64, f64)> {
    let mut y = [ONE, ZERO, ZERO];
    let solver = Dopri5::with_tolerances(1e-13, 1e-15);
    let rho = &s.density;
    for w in s.segments(s.ell).windows(2) {
        let m = s.mass_at_point(w[0]);
        if m > 0.0 {
            y[2] += m * y[0] * y[0];
            y[1] -= lambda * m * y[0];
        }
        y = solver.integrate(
            |x, y: &[C; 3]| {
                let r = rho.eval(x);
                [y[1], -y[0] * (lambda * r), y[0] * y[0] * r]
            },
            w[0],
            y,
            w[1],
        )?;
    }
    let b = match gamma {
        Gamma::Real(g) => g * y[1].re + y[0].re,
        _ => y[1].re,
    };
    Ok((b, y[2].re))
}

fn polish(s: &MassDistribution, gamma: &Gamma, ev: &mut [f64], norms: &mut [f64]) -> Result<()> {
    let n = ev.len().min(POLISHED);
    let snapshot = ev.to_vec();
    let polished: Vec<Option<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let l = snapshot[k];
            if l == 0.0 {
                return None;
            }
            let spacing = if k + 1 < snapshot.len() {
                snapshot[k + 1] - l
            } else if k > 0 {
                l - snapshot[k - 1]
            } else {
                l
            };
            let b = |x: f64| boundary_and_norm(s, gamma, x).map(|v| v.0).unwrap_or(f64::NAN);
            let mut d = 1e-6 * spacing;
            let (mut lo, mut hi) = (l - d, l + d);
            let mut tries = 0;
            while b(lo).signum() == b(hi).signum() && tries < 12 {
                d *= 4.0;
                lo = l - d.min(0.45 * spacing);
                hi = l + d.min(0.45 * spacing);
                tries += 1;
            }
            let root = illinois(b, lo, hi, 1e-14 * l.abs(), 200).ok()?;
            let norm = boundary_and_norm(s, gamma, root).ok()?.1;
            Some((root, norm))
        })
        .collect();
    for (k, p) in polished.into_iter().enumerate() {
        if let Some((root, norm)) = p {
            ev[k] = root;
            norms[k] = norm;
        }
    }
    Ok(())
}

/// Eigenvalues `λ_k ≥ 0` (zeros of `γφ'(ℓ; λ) + φ(ℓ; λ)`, of `φ'(ℓ; λ)` for
/// `γ = ∞`) and weights `1/∫φ² dM`. A purely atomic string has as many
/// eigenvalues as point masses, and `count` is capped accordingly. When
/// enough atoms are available a fitted power-law tail is attached.
pub fn string_spectral_measure(s: &MassDistribution, gamma: &Gamma, count: usize) -> Result<SpectralMeasure> {
    let beta = string_target(gamma)?;
    let count = if s.is_purely_atomic() { count.min(s.atoms.len()) } else { count };
    let chain = Chain::for_string(&s.density, &s.atoms, s.ell, STRING_CELLS);
    let theta0 = FRAC_PI_2;
    let mut ev = chain.eigenvalues(theta0, |k| beta + k as f64 * PI, count, 0.0)?;
    let mut norms: Vec<f64> = ev.par_iter().map(|&l| chain.shoot(l, theta0, true).norm_abs()).collect();
    if !s.density.is_piecewise_constant() {
        polish(s, gamma, &mut ev, &mut norms)?;
    }
    let mut atoms = Vec::with_capacity(ev.len());
    for (&l, &n) in ev.iter().zip(&norms) {
        if !(n.is_finite() && n > 0.0) || l < 0.0 {
            return Err(Error::InvalidInput(format!("invalid eigenpair at λ = {l} (norm {n})")));
        }
        atoms.push((l, 1.0 / n));
    }
    let m = SpectralMeasure::new(atoms, None, None)?;
    let tail = if s.is_purely_atomic() { None } else { m.fit_tail() };
    m.with_tail(tail)
}

/// `g_τ(t) = ∫ (cos(√λ t) - 1)/λ dτ(λ)`, the negative of the Sturm-Liouville
/// transfer function of the same measure.
pub fn string_transfer(
    measure: impl Into<Arc<SpectralMeasure>>,
    t_grid: Vec<f64>,
    domain_bound: f64,
) -> Result<TransferFunction> {
    let measure = measure.into();
    check_half_line(&measure)?;
    TransferFunction::from_measure(measure, EntireKernel::SlTransfer, 0.0, -1.0, t_grid, domain_bound)
}

/// `f_τ(t) = ∫ cos(√λ t) dτ(λ)` for a finite measure.
pub fn string_f_transfer(
    measure: impl Into<Arc<SpectralMeasure>>,
    t_grid: Vec<f64>,
    domain_bound: f64,
) -> Result<TransferFunction> {
    let measure = measure.into();
    check_half_line(&measure)?;
    if let Some(t) = measure.tail() {
        if t.p >= -1.0 {
            return Err(Error::InvalidInput("f_τ needs a finite measure".into()));
        }
    }
    TransferFunction::from_measure(measure, EntireKernel::CosineTransfer, 0.0, 1.0, t_grid, domain_bound)
}

fn check_half_line(m: &SpectralMeasure) -> Result<()> {
    if m.support_lower_bound().is_some_and(|l| l < 0.0) || m.tail().is_some_and(|t| t.negative_start.is_some()) {
        return Err(Error::InvalidInput("string measures live on [0, ∞)".into()));
    }
    Ok(())
}

/// Measure and `g` of a string on `t_grid`, certified on `[0, 2a(ℓ)]`.
pub fn string_transfer_of(
    s: &MassDistribution,
    gamma: &Gamma,
    count: usize,
    t_grid: Vec<f64>,
) -> Result<TransferFunction> {
    let m = string_spectral_measure(s, gamma, count)?;
    string_transfer(m, t_grid, s.transfer_domain())
}

/// Sup-deviation of `g1 - g2` on `[0, 2a]`.
pub fn localize_string(g1: &TransferFunction, g2: &TransferFunction, a: f64, tol: f64) -> Result<Comparison> {
    compare_transfer(g1, g2, a, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_fundamental_is_trigonometric() {
        let s = MassDistribution::homogeneous(1.0).unwrap();
        let z = C::new(FRAC_PI_2 * FRAC_PI_2, 0.0);
        let f = string_fundamental(&s, z, 1.0).unwrap();
        assert!(f.phi.norm() < 1e-14);
        assert!((f.psi - 1.0 / FRAC_PI_2).norm() < 1e-14);
        assert!((f.wronskian() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn single_atom_hand_computation() {
        let s = MassDistribution::new(1.0, Coefficient::zero(), vec![(0.5, 1.0)]).unwrap();
        let f = string_fundamental(&s, C::new(2.0, 0.0), 1.0).unwrap();
        assert!(f.phi.norm() < 1e-15);
        // z = 0: φ ≡ 1, ψ = x
        let f = string_fundamental(&s, ZERO, 0.7).unwrap();
        assert_eq!((f.phi, f.psi), (ONE, C::new(0.7, 0.0)));
    }

    #[test]
    fn weyl_values_on_negative_axis() {
        let s = MassDistribution::homogeneous(1.0).unwrap();
        let z = C::new(-1.0, 0.0);
        let m0 = string_weyl(&s, &Gamma::Real(0.0), z).unwrap();
        assert!((m0 - 1f64.tanh()).norm() < 1e-14);
        let minf = string_weyl(&s, &Gamma::Infinity, z).unwrap();
        assert!((minf - 1.0 / 1f64.tanh()).norm() < 1e-14);
        assert!(string_weyl(&s, &Gamma::Real(0.0), C::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn homogeneous_measure() {
        let s = MassDistribution::homogeneous(1.0).unwrap();
        let m = string_spectral_measure(&s, &Gamma::Real(0.0), 3).unwrap();
        for (k, &(l, w)) in m.atoms().iter().enumerate() {
            let exact = ((2 * k + 1) as f64 * FRAC_PI_2).powi(2);
            assert!((l - exact).abs() < 1e-12 * exact);
            assert!((w - 2.0).abs() < 1e-12);
        }
        let m = string_spectral_measure(&s, &Gamma::Infinity, 3).unwrap();
        assert_eq!(m.atoms()[0], (0.0, 1.0));
        assert!((m.atoms()[1].0 - PI * PI).abs() < 1e-11);
    }

    #[test]
    fn smooth_density_is_polished() {
        // ρ = 4 on [0, 1] written as an expression: λ_k = ((2k+1)π/4)²
        let s = MassDistribution::new(1.0, Coefficient::expression("4 + 0*x").unwrap(), vec![]).unwrap();
        let m = string_spectral_measure(&s, &Gamma::Real(0.0), 5).unwrap();
        for (k, &(l, w)) in m.atoms().iter().enumerate() {
            let exact = ((2 * k + 1) as f64 * PI / 4.0).powi(2);
            assert!((l - exact).abs() < 1e-11 * exact, "{l} {exact}");
            assert!((w - 0.5).abs() < 1e-10, "{w}");
        }
    }

    #[test]
    fn purely_atomic_strings() {
        let s = MassDistribution::new(1.0, Coefficient::zero(), vec![(0.0, 2.0)]).unwrap();
        let m = string_spectral_measure(&s, &Gamma::Real(0.0), 10).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert!((m.atoms()[0].0 - 0.5).abs() < 1e-14);
        assert!((m.atoms()[0].1 - 0.5).abs() < 1e-14);
        assert!(s.l_of_a(0.1).is_err());
    }

    #[test]
    fn a_and_l_use_the_density_only() {
        let s = MassDistribution::new(1.0, Coefficient::step(0.5, 1.0, 4.0), vec![(0.25, 3.0)]).unwrap();
        assert!((s.a_of_l(1.0).unwrap() - 1.5).abs() < 1e-14);
        assert!((s.l_of_a(0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((s.l_of_a(1.0).unwrap() - 0.75).abs() < 1e-12);
        assert!((s.total_mass() - 5.5).abs() < 1e-14);
        assert!((s.transfer_domain() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn json_roundtrip() {
        let json = r#"{"ell": 1.0, "density": {"type": "constant", "value": 1.0}, "atoms": [[0.5, 2.0]]}"#;
        let s: MassDistribution = serde_json::from_str(json).unwrap();
        assert_eq!(s.atoms(), &[(0.5, 2.0)]);
        let back: MassDistribution = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<MassDistribution>(r#"{"ell": 1.0, "atoms": [[1.5, 1.0]]}"#).is_err());
    }
}
