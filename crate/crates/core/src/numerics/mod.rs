//! Numerical building blocks: ODE integration, quadrature, root bracketing,
//! special functions and interpolation.

pub mod ode;

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Principal square root with the branch cut on the negative real axis.
pub fn csqrt(z: Complex64) -> Complex64 {
    z.sqrt()
}

/// `sqrt(-z)` with positive real part for non-real `z`.
pub fn sqrt_minus(z: Complex64) -> Complex64 {
    let r = (-z).sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

/// Complex number stored as `exp(ln_abs) * phase`, `|phase| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub ln_abs: f64,
    pub phase: Complex64,
}

impl LogComplex {
    pub fn from_complex(z: Complex64) -> Self {
        let r = z.norm();
        if r == 0.0 {
            return Self {
                ln_abs: f64::NEG_INFINITY,
                phase: Complex64::new(1.0, 0.0),
            };
        }
        Self {
            ln_abs: r.ln(),
            phase: z / r,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        self.phase * self.ln_abs.exp()
    }

    pub fn mul(self, other: LogComplex) -> LogComplex {
        LogComplex {
            ln_abs: self.ln_abs + other.ln_abs,
            phase: self.phase * other.phase,
        }
    }

    pub fn div(self, other: LogComplex) -> LogComplex {
        LogComplex {
            ln_abs: self.ln_abs - other.ln_abs,
            phase: self.phase / other.phase,
        }
    }
}

fn gauss_rule(order: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        (1..=64)
            .map(|n| GaussLegendre::new(NonZeroUsize::new(n).unwrap()))
            .collect()
    });
    rules[order.clamp(1, 64) - 1].as_node_weight_pairs()
}

/// Gauss-Legendre nodes and weights mapped onto `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_rule(order).iter().map(move |&(x, w)| (mid + half * x, half * w))
}

/// Composite Gauss-Legendre quadrature over `panels` equal panels.
pub fn integrate_panels<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in gauss_legendre(order, lo, lo + h) {
            sum += w * f(x);
        }
    }
    sum
}

/// Complex-valued variant of [`integrate_panels`].
pub fn integrate_panels_c<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> Complex64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in gauss_legendre(order, lo, lo + h) {
            sum += f(x) * w;
        }
    }
    sum
}

/// Adaptive Gauss-Legendre quadrature of a complex integrand: a panel is
/// accepted when the 10-point rule on it agrees with the sum over its two
/// halves to within the panel's share of `tol`.
pub fn adaptive_integrate_c<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    let rule = |f: &mut F, lo: f64, hi: f64| -> Complex64 {
        gauss_legendre(10, lo, hi).map(|(x, w)| f(x) * w).sum()
    };
    let total = (b - a).abs();
    let mut stack = vec![(a, b, rule(&mut f, a, b), 0usize)];
    let mut sum = Complex64::new(0.0, 0.0);
    let mut worst = 0.0_f64;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule(&mut f, lo, mid);
        let right = rule(&mut f, mid, hi);
        let err = (left + right - whole).norm();
        let share = tol * ((hi - lo).abs() / total).max(1e-3);
        if err <= share || depth >= 48 {
            if err > share {
                worst = worst.max(err);
            }
            sum += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    if worst > tol {
        return Err(Error::NonConvergence(format!(
            "adaptive quadrature on [{a}, {b}] reached error {worst:e}"
        )));
    }
    Ok(sum)
}

/// Real-valued variant of [`adaptive_integrate_c`].
pub fn adaptive_integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive_integrate_c(|x| Complex64::new(f(x), 0.0), a, b, tol).map(|v| v.re)
}

/// Returns `pi/2 - Si(x)` for `x >= 0`, accurate also for large `x`.
pub fn si_complement(x: f64) -> f64 {
    let x = x.abs();
    if x <= 4.0 {
        return FRAC_PI_2 - sine_integral_series(x);
    }
    // continued fraction for E1(ix) (modified Lentz)
    let tiny = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for i in 2..200 {
        let a = -((i - 1) as f64).powi(2);
        b += Complex64::new(2.0, 0.0);
        d = Complex64::new(1.0, 0.0) / (d * a + b);
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let h = Complex64::new(x.cos(), -x.sin()) * h;
    -h.im
}

/// Sine integral `Si(x)`.
pub fn sine_integral(x: f64) -> f64 {
    if x.abs() <= 4.0 {
        sine_integral_series(x)
    } else {
        x.signum() * (FRAC_PI_2 - si_complement(x))
    }
}

fn sine_integral_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0usize;
    loop {
        n += 1;
        let k = (2 * n) as f64;
        term *= -x2 / (k * (k + 1.0));
        let add = term / (k + 1.0);
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) || n > 60 {
            break;
        }
    }
    sum
}

/// `∫_s^∞ (1 - cos(u t)) / u² du` for `s > 0`.
pub fn one_minus_cos_tail(s: f64, t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 0.0;
    }
    let st = s * t;
    if st < 1e-4 {
        // small argument: 1/s - cos(st)/s ~ s t²/2
        let head = s * t * t * (0.5 - st * st / 24.0);
        return head + t * si_complement(st);
    }
    (1.0 - st.cos()) / s + t * si_complement(st)
}

/// Illinois (modified regula falsi) root finder on a sign-changing bracket.
pub fn illinois<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket(format!("no sign change on [{a}, {b}]")));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < xtol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() < xtol {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::NonConvergence(format!("root refinement on [{a}, {b}]")))
}

/// Local cubic (four-point Lagrange) interpolation on a sorted grid.
pub fn cubic_interpolate<T>(grid: &[f64], values: &[T], t: f64) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let n = grid.len();
    assert!(n > 0 && n == values.len());
    if n < 4 {
        // linear fallback
        if n == 1 {
            return values[0];
        }
        let i = match grid.iter().position(|&g| g > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
        .min(n - 2);
        let w = (t - grid[i]) / (grid[i + 1] - grid[i]);
        return values[i] * (1.0 - w) + values[i + 1] * w;
    }
    let idx = grid.partition_point(|&g| g <= t);
    let start = idx.saturating_sub(2).min(n - 4);
    let mut acc: Option<T> = None;
    for j in start..start + 4 {
        let mut l = 1.0;
        for m in start..start + 4 {
            if m != j {
                l *= (t - grid[m]) / (grid[j] - grid[m]);
            }
        }
        let term = values[j] * l;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap()
}

/// Evenly spaced grid with `n` points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Logarithmically spaced grid with `n` points on `[a, b]`, `a, b > 0`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}
