//! Adaptive Dormand-Prince 5(4) integrator for small complex linear and
//! Riccati systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size controlled Dormand-Prince 5(4) integrator.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

fn axpy<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let s = h * c;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
    pub fn integrate<const N: usize, F>(&self, f: F, x0: f64, y0: [Complex64; N], x1: f64) -> Result<[Complex64; N]>
    where
        F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
    {
        self.integrate_with_hook(f, x0, y0, x1, |_| {})
    }

    /// Like [`Dopri5::integrate`], calling `hook` on the state after every
    /// accepted step. The hook may rescale the state (log-magnitude tracking).
    pub fn integrate_with_hook<const N: usize, F, H>(
        &self,
        mut rhs: F,
        x0: f64,
        y0: [Complex64; N],
        x1: f64,
        mut hook: H,
    ) -> Result<[Complex64; N]>
    where
        F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
        H: FnMut(&mut [Complex64; N]),
    {
        let span = x1 - x0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        // stages sample strictly inside the segment, so coefficients that
        // jump at its ends are seen from the correct side
        let pad = 1e-13 * span.abs();
        let (lo, hi) = (x0.min(x1) + pad, x0.max(x1) - pad);
        let mut f = |t: f64, y: &[Complex64; N]| rhs(t.clamp(lo, hi), y);
        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        let mut h = self.initial_step(&y, &k1, span.abs()) * dir;
        let h_min = 1e-14 * (x0.abs().max(x1.abs()).max(span.abs()));
        let mut err_prev = 1e-4_f64;

        for _ in 0..self.max_steps {
            if (x + h - x1) * dir > 0.0 {
                h = x1 - x;
            }
            let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                x + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                x + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(x + h, &y_new);

            let mut err = 0.0;
            for i in 0..N {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let scale = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                err += (e.norm() / scale).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                if h.abs() <= h_min {
                    return Err(Error::Integration {
                        x,
                        reason: "non-finite state",
                        error_estimate: f64::INFINITY,
                    });
                }
                h *= 0.1;
                continue;
            }

            if err <= 1.0 {
                x += h;
                y = y_new;
                hook(&mut y);
                if (x - x1) * dir >= 0.0 {
                    return Ok(y);
                }
                k1 = f(x, &y);
                // PI step control
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                h *= fac.clamp(0.2, 5.0);
                err_prev = err.max(1e-4);
            } else {
                if h.abs() <= h_min {
                    return Err(Error::Integration {
                        x,
                        reason: "step size underflow",
                        error_estimate: err,
                    });
                }
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Err(Error::Integration {
            x,
            reason: "maximum number of steps exceeded",
            error_estimate: f64::NAN,
        })
    }

    fn initial_step<const N: usize>(&self, y: &[Complex64; N], dy: &[Complex64; N], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].norm();
            d0 += (y[i].norm() / sc).powi(2);
            d1 += (dy[i].norm() / sc).powi(2);
        }
        let d0 = (d0 / N as f64).sqrt();
        let d1 = (d1 / N as f64).sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).max(span * 1e-12)
    }
}

/// Splits `[x0, x1]` at the given breakpoints (which may be unsorted or lie
/// outside) and returns the ordered list of segment endpoints, in the
/// direction of integration.
pub fn segment_points(x0: f64, x1: f64, breaks: &[f64]) -> Vec<f64> {
    let (lo, hi) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if x0 > x1 {
        pts.reverse();
    }
    pts
}
