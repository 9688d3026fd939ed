//! Closed forms for the worked examples, used as oracles and for reporting
//! deviations.
//!
//! Numbering follows the `examples --id` command of the CLI.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C;

use crate::error::Result;
use crate::measure::{SpectralMeasure, TailDescriptor};
use crate::numerics::{adaptive_integrate, csqrt, illinois};
use crate::weyl::Gamma;

/// Periodic extension of `f` from `[lo, lo + period]` (closed on the side
/// `f` is evaluated from).
pub fn periodic<F: Fn(f64) -> f64>(f: F, lo: f64, period: f64, t: f64) -> f64 {
    let r = (t - lo).rem_euclid(period);
    f(lo + r)
}

pub use crate::canonical::Mat2;

/// `q ≡ 0`, `y'(0) = 0`, on `[0, 1]`.
pub mod free_interval {
    use super::*;

    /// `m_γ(z) = (cos s - γ sin s/s)/(-s sin s - γ cos s)` with `s = √z`,
    /// evaluated as `(1 - γ th/r)/(r th - γ)`, `r = √(-z)`, `th = tanh r`.
    pub fn weyl(gamma: &Gamma, z: C) -> C {
        let r = crate::numerics::sqrt_minus(z);
        let e = (-2.0 * r).exp();
        let th = (1.0 - e) / (1.0 + e);
        match gamma.at(z) {
            None => th / r,
            Some(g) => (1.0 - g * th / r) / (r * th - g),
        }
    }

    /// `Φ(t) = t` on `[0, 2]`.
    pub fn transfer(t: f64) -> f64 {
        t
    }

    /// Measure for `γ = ∞`: `((2k-1)π/2)²` with weight `2`.
    pub fn dirichlet_atoms(n: usize) -> Vec<(f64, f64)> {
        (1..=n).map(|k| (((2 * k - 1) as f64 * FRAC_PI_2).powi(2), 2.0)).collect()
    }

    /// Measure for `γ = 0`: `0` with weight `1`, `(kπ)²` with weight `2`.
    pub fn neumann_atoms(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| if k == 0 { (0.0, 1.0) } else { ((k as f64 * PI).powi(2), 2.0) })
            .collect()
    }
}

/// `q(x) = 2/(x-1)²`, `y'(0) = 0`, on `[0, 1)` (limit point at `1`).
pub mod inverse_square {
    use super::*;
    use crate::coefficient::Coefficient;

    pub fn potential() -> Coefficient {
        Coefficient::function(|x| 2.0 / ((x - 1.0) * (x - 1.0)))
    }

    /// `m(z) = (√z - tan √z)/((1 - z) tan √z - √z)`.
    pub fn weyl(z: C) -> C {
        let s = csqrt(z);
        let t = s.tan();
        (s - t) / ((1.0 - z) * t - s)
    }

    /// `χ'(x)/χ(x)` for the solution `χ = sin(sd)/(sd) - cos(sd)`, `d = x - 1`,
    /// which is the one that stays small at `x = 1`.
    pub fn remaining_parameter(x: f64, z: C) -> C {
        let s = csqrt(z);
        let d = x - 1.0;
        let u = s * d;
        let chi = u.sin() / u - u.cos();
        // d/dx = s d/du
        let dchi = s * (u.cos() / u - u.sin() / (u * u) + u.sin());
        dchi / chi
    }

    /// `(χ(x), χ'(x), ∫ₓ¹ χ²)` at real `λ`, the remainder of the problem
    /// beyond `x` (see [`remaining_parameter`]).
    pub fn remainder(x: f64, lambda: f64) -> (f64, f64, f64) {
        let s = csqrt(C::new(lambda, 0.0));
        let chi = |t: f64| {
            let u = s * (t - 1.0);
            if u.norm() < 1e-3 {
                // u²/3 - u⁴/30
                let u2 = u * u;
                return (u2 / 3.0 - u2 * u2 / 30.0).re;
            }
            (u.sin() / u - u.cos()).re
        };
        let u = s * (x - 1.0);
        let dchi = if u.norm() < 1e-3 {
            (s * u * (2.0 / 3.0)).re
        } else {
            (s * (u.cos() / u - u.sin() / (u * u) + u.sin())).re
        };
        let norm = adaptive_integrate(|t| chi(t).powi(2), x, 1.0, 1e-14).unwrap_or(f64::NAN);
        (chi(x), dchi, norm)
    }

    fn denominator(s: f64) -> f64 {
        (1.0 - s * s) * s.sin() - s * s.cos()
    }

    /// Poles `λ_k = s_k²` of [`weyl`], with `s_k ∈ (kπ - π/2, kπ + π/2)` the
    /// roots of `(1 - s²) sin s - s cos s`, and residue weights
    /// `2(s cos s - sin s)/(sin s + s cos s)`.
    pub fn atoms(n: usize) -> Result<Vec<(f64, f64)>> {
        (1..=n)
            .map(|k| {
                let c = k as f64 * PI;
                let s = illinois(denominator, c - FRAC_PI_2, c + FRAC_PI_2, 1e-15 * c, 200)?;
                let (sn, cs) = s.sin_cos();
                Ok((s * s, 2.0 * (s * cs - sn) / (sn + s * cs)))
            })
            .collect()
    }

    /// [`atoms`] with the asymptotic tail `λ^{-1/2}/π`.
    pub fn measure(n: usize) -> Result<SpectralMeasure> {
        let atoms = atoms(n)?;
        let tail = tail_after(&atoms, -0.5, 1.0 / PI);
        SpectralMeasure::new(atoms, None, tail)
    }
}

pub(crate) fn tail_after(atoms: &[(f64, f64)], p: f64, c: f64) -> Option<TailDescriptor> {
    if atoms.len() < 2 {
        return None;
    }
    let (l1, l0) = (atoms[atoms.len() - 1].0, atoms[atoms.len() - 2].0);
    Some(TailDescriptor::one_sided(p, c, l1 + 0.5 * (l1 - l0)))
}

/// `H = I/2` on `[0, 2]`.
pub mod rotation {
    use super::*;

    pub const ELL: f64 = 2.0;

    /// `W(x; z)`: rotation by `xz/2`.
    pub fn transfer_matrix(x: f64, z: C) -> Mat2 {
        let (s, c) = ((0.5 * x * z).sin(), (0.5 * x * z).cos());
        [[c, s], [-s, c]]
    }

    /// `m_γ(z) = (γ cos z + sin z)/(-γ sin z + cos z)`, `-cot z` for `γ = ∞`.
    pub fn weyl(gamma: &Gamma, z: C) -> C {
        let (s, c) = (z.sin(), z.cos());
        match gamma.at(z) {
            None => -c / s,
            Some(g) => (g * c + s) / (-g * s + c),
        }
    }

    /// `λ₀ ∈ (-π/2, π/2]` with `cot λ₀ = γ`.
    pub fn lambda0(gamma: f64) -> f64 {
        if gamma == 0.0 {
            FRAC_PI_2
        } else {
            (1.0 / gamma).atan()
        }
    }

    /// Linear coefficient turning the screw function of the real-`γ` measure
    /// into `-|t|` on `[-2, 2]`.
    pub fn beta(gamma: f64) -> f64 {
        let l0 = lambda0(gamma);
        -(2.0 * l0).sin() / (2f64.cosh() - (2.0 * l0).cos())
    }

    /// Atoms `λ₀ + kπ`, `|k| ≤ n`, unit weights; `λ₀ = 0` for `γ = ∞`.
    pub fn atoms(gamma: &Gamma, n: usize) -> Vec<(f64, f64)> {
        let l0 = match gamma {
            Gamma::Real(g) => lambda0(*g),
            _ => 0.0,
        };
        let n = n as i64;
        (-n..=n).map(|k| (l0 + k as f64 * PI, 1.0)).collect()
    }

    /// `g_∞(t) = [t²/2 - |t|]_{[-2,2]} - t²/2` (bracket: 4-periodic extension).
    pub fn g_infinity(t: f64) -> f64 {
        periodic(|u| 0.5 * u * u - u.abs(), -2.0, 4.0, t) - 0.5 * t * t
    }

    /// `g_γ(t) = -|t|` on `[-2, 2]`.
    pub fn g_gamma(t: f64) -> f64 {
        -t.abs()
    }
}

/// `H = diag((x-1)², (x-1)⁻²)` on `[0, 1)`.
pub mod singular_diagonal {
    use super::*;

    pub const ELL: f64 = 1.0;

    pub fn transfer_matrix(x: f64, z: C) -> Mat2 {
        let d = x - 1.0;
        let (s, c) = ((x * z).sin(), (x * z).cos());
        [
            [(s - z * c) / (z * d), (1.0 / (z * z) - d) * s - x * c / z],
            [s / d, s / z - d * c],
        ]
    }

    /// `m(z) = 1/z - cot z`.
    pub fn weyl(z: C) -> C {
        1.0 / z - z.cos() / z.sin()
    }

    /// `g(t) = [t²/2 - t]_{(0,2]}` (2-periodic).
    pub fn g(t: f64) -> f64 {
        let r = t.rem_euclid(2.0);
        let u = if r == 0.0 && t != 0.0 { 2.0 } else { r };
        0.5 * u * u - u
    }

    /// Atoms `kπ`, `0 < |k| ≤ n`, unit weights.
    pub fn atoms(n: usize) -> Vec<(f64, f64)> {
        let n = n as i64;
        (-n..=n).filter(|&k| k != 0).map(|k| (k as f64 * PI, 1.0)).collect()
    }
}

/// `H = diag(0, 1)` on `[0, 1)`, `diag((x-2)², (x-2)⁻²)` on `[1, 2)`.
pub mod jump_hamiltonian {
    use super::*;

    pub const ELL: f64 = 2.0;

    /// `m(z) = tan z/z² - 1/z`.
    pub fn weyl(z: C) -> C {
        z.tan() / (z * z) - 1.0 / z
    }

    /// `f(t) = [1 - |t|]_{[-2,2]}` (4-periodic).
    pub fn f(t: f64) -> f64 {
        periodic(|u| 1.0 - u.abs(), -2.0, 4.0, t)
    }

    /// Atoms `±(2k-1)π/2`, `1 ≤ k ≤ n`, weights `1/λ²`.
    pub fn atoms(n: usize) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = (1..=n)
            .flat_map(|k| {
                let l = (2 * k - 1) as f64 * FRAC_PI_2;
                [(-l, 1.0 / (l * l)), (l, 1.0 / (l * l))]
            })
            .collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        v
    }
}
