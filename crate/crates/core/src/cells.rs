//! Exact propagation of `y'' = (q - λw) y` through cells on which `q` and `w`
//! are constant, with point masses (`y' ↦ y' - λ m y`) at cell starts.
//!
//! Alongside the solution the Prüfer angle `θ` (`y = r sin θ`, `y' = r cos θ`)
//! is tracked continuously, which gives oscillation counts for eigenvalue
//! bracketing.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::numerics::illinois;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub h: f64,
    pub q: f64,
    pub w: f64,
    /// Point mass acting at the left end of the cell.
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Chain {
    pub cells: Vec<Cell>,
}

/// End state of a shot; `y`, `yp` and `norm` are scaled by `exp(ln_scale)`
/// (`norm` by its square).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Shot {
    pub theta: f64,
    pub y: f64,
    pub yp: f64,
    pub ln_scale: f64,
    pub norm: f64,
}

impl Shot {
    /// `∫ y² w dx + Σ m y²` in absolute terms.
    pub fn norm_abs(&self) -> f64 {
        self.norm * (2.0 * self.ln_scale).exp()
    }
}

fn cell_edges(breaks: Vec<f64>, a: f64, min_cells: usize) -> Vec<f64> {
    let mut pts = vec![0.0];
    pts.extend(breaks.into_iter().filter(|&b| b > 0.0 && b < a));
    pts.push(a);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let target = a / min_cells.max(1) as f64;
    let mut edges = vec![0.0];
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) / target).ceil().max(1.0) as usize;
        for i in 1..=n {
            edges.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
    }
    edges
}

impl Chain {
    /// Cells for `-y'' + q y = λ y` on `[0, a]`; piecewise-constant
    /// potentials are represented exactly, others by cell means on at least
    /// `min_cells` cells.
    pub fn for_potential(q: &Coefficient, a: f64, min_cells: usize) -> Self {
        let min_cells = if q.is_piecewise_constant() { 1 } else { min_cells };
        let edges = cell_edges(q.breakpoints(0.0, a), a, min_cells);
        let cells = edges
            .windows(2)
            .map(|e| Cell {
                h: e[1] - e[0],
                q: q.mean(e[0], e[1]),
                w: 1.0,
                jump: 0.0,
            })
            .collect();
        Self { cells }
    }

    /// Cells for the string `dy' + λ y dM = 0` on `[0, ell]` with density
    /// `rho` and point masses `(x, m)`, `0 <= x < ell`.
    pub fn for_string(rho: &Coefficient, atoms: &[(f64, f64)], ell: f64, min_cells: usize) -> Self {
        let mut breaks = rho.breakpoints(0.0, ell);
        breaks.extend(atoms.iter().map(|a| a.0));
        let min_cells = if rho.is_piecewise_constant() { 1 } else { min_cells };
        let edges = cell_edges(breaks, ell, min_cells);
        let mut cells: Vec<Cell> = edges
            .windows(2)
            .map(|e| Cell {
                h: e[1] - e[0],
                q: 0.0,
                w: rho.mean(e[0], e[1]),
                jump: 0.0,
            })
            .collect();
        for &(x, m) in atoms {
            let i = edges.partition_point(|&e| e <= x + 1e-14 * ell).saturating_sub(1);
            let last = cells.len() - 1;
            cells[i.min(last)].jump += m;
        }
        Self { cells }
    }

    pub fn length(&self) -> f64 {
        self.cells.iter().map(|c| c.h).sum()
    }

    /// Propagates from `(y, y') = (sin θ0, cos θ0)`.
    pub fn shoot(&self, lambda: f64, theta0: f64, with_norm: bool) -> Shot {
        let mut s = Shot {
            theta: theta0,
            y: theta0.sin(),
            yp: theta0.cos(),
            ln_scale: 0.0,
            norm: 0.0,
        };
        for cell in &self.cells {
            if cell.jump != 0.0 {
                let m = lambda * cell.jump;
                if with_norm {
                    s.norm += cell.jump * s.y * s.y;
                }
                s.yp -= m * s.y;
                let (base, rem) = split_angle(s.theta);
                s.theta = base + rem.sin().atan2(rem.cos() - m * rem.sin());
            }
            let u = lambda * cell.w - cell.q;
            if u > 0.0 {
                step(&mut s, u, cell.h, cell.w, with_norm);
            } else {
                // non-oscillatory: θ' <= 1, so sub-steps shorter than π leave a unique branch
                let kappa_h = (-u).sqrt() * cell.h;
                let n = (cell.h / 1.5).max(kappa_h / 30.0).ceil().max(1.0) as usize;
                for _ in 0..n {
                    step(&mut s, u, cell.h / n as f64, cell.w, with_norm);
                }
            }
        }
        s
    }

    /// Finds the roots of `θ(end; λ) = target(k)` for `k = 0..count`, where
    /// `target` increases by `π` per index. `lambda_floor` is a value known
    /// to lie below the first root (or at it, when `θ` already matches).
    pub fn eigenvalues<T>(&self, theta0: f64, target: T, count: usize, lambda_floor: f64) -> Result<Vec<f64>>
    where
        T: Fn(usize) -> f64 + Sync,
    {
        if count == 0 {
            return Ok(Vec::new());
        }
        let len = self.length();
        let qbar = self.cells.iter().map(|c| c.q * c.h).sum::<f64>() / len;
        let wroot = self.cells.iter().map(|c| c.w.max(0.0).sqrt() * c.h).sum::<f64>();
        let wroot = if wroot > 0.0 { wroot } else { len };
        let f = |lambda: f64, k: usize| self.shoot(lambda, theta0, false).theta - target(k);

        let at_floor = f(lambda_floor, 0);
        if at_floor > 1e-12 {
            return Err(Error::Bracket(format!(
                "oscillation angle {at_floor:e} above first target at λ = {lambda_floor}"
            )));
        }
        let roots: Vec<Result<f64>> = (0..count)
            .into_par_iter()
            .map(|k| {
                if k == 0 && at_floor.abs() <= 1e-12 {
                    return Ok(lambda_floor);
                }
                // θ grows like π/2 + √(λ - q̄)·∫√w
                let s_guess = ((target(k) - 0.5 * PI) / wroot).max(0.0);
                let guess = (s_guess * s_guess + qbar).max(lambda_floor);
                let spacing = (2.0 * PI * s_guess / wroot).max(1.0);
                let mut lo = (guess - 0.25 * spacing).max(lambda_floor);
                let mut hi = guess + 0.25 * spacing;
                let mut width = 0.25 * spacing;
                let mut flo = f(lo, k);
                while flo > 0.0 {
                    width *= 2.0;
                    hi = lo;
                    lo = (lo - width).max(lambda_floor);
                    flo = f(lo, k);
                    if lo == lambda_floor && flo > 0.0 {
                        return Err(Error::Bracket(format!("index {k} has no root above λ = {lambda_floor}")));
                    }
                }
                let mut fhi = f(hi, k);
                let mut guard = 0;
                while fhi < 0.0 {
                    width *= 2.0;
                    lo = hi;
                    hi += width;
                    fhi = f(hi, k);
                    guard += 1;
                    if guard > 200 {
                        return Err(Error::Bracket(format!("index {k}: no upper bracket")));
                    }
                }
                let xtol = 1e-15 * lo.abs().max(hi.abs()).max(1.0);
                illinois(|l| f(l, k), lo, hi, xtol, 400)
            })
            .collect();
        let roots: Vec<f64> = roots.into_iter().collect::<Result<_>>()?;
        for (k, w) in roots.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::OscillationCount {
                    expected: k + 1,
                    found: k,
                });
            }
        }
        Ok(roots)
    }
}

/// `θ = base + rem` with `base ∈ πℤ`, `rem ∈ [0, π)`.
fn split_angle(theta: f64) -> (f64, f64) {
    let base = (theta / PI).floor() * PI;
    (base, theta - base)
}

/// `(C, S)` with `C = cos(√u h)`, `S = sin(√u h)/√u` (hyperbolic for `u < 0`).
fn trig(u: f64, h: f64) -> (f64, f64) {
    if u > 0.0 {
        let k = u.sqrt();
        ((k * h).cos(), (k * h).sin() / k)
    } else if u < 0.0 {
        let k = (-u).sqrt();
        ((k * h).cosh(), (k * h).sinh() / k)
    } else {
        (1.0, h)
    }
}

/// `∫₀ʰ S(x)² dx` where `S` is the second function of [`trig`].
fn int_ss(u: f64, h: f64, c: f64, s: f64) -> f64 {
    let x = u * h * h;
    if x.abs() < 0.5 {
        let mut term = h * h * h / 3.0;
        let mut sum = term;
        for n in 2..16 {
            let nf = n as f64;
            term *= -4.0 * x / ((2.0 * nf) * (2.0 * nf + 1.0));
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    (h - s * c) / (2.0 * u)
}

fn step(s: &mut Shot, u: f64, h: f64, w: f64, with_norm: bool) {
    let (c, sn) = trig(u, h);
    let (y0, yp0) = (s.y, s.yp);
    if with_norm {
        let icc = 0.5 * (h + sn * c);
        let ics = 0.5 * sn * sn;
        let iss = int_ss(u, h, c, sn);
        s.norm += w * (y0 * y0 * icc + 2.0 * y0 * yp0 * ics + yp0 * yp0 * iss);
    }
    s.y = c * y0 + sn * yp0;
    s.yp = -u * sn * y0 + c * yp0;
    if u > 0.0 {
        let k = u.sqrt();
        let (base, rem) = split_angle(s.theta);
        let phi = base + (k * rem.sin()).atan2(rem.cos()) + k * h;
        let (base, rem) = split_angle(phi);
        s.theta = base + (rem.sin() / k).atan2(rem.cos());
    } else {
        let floor = (s.theta / PI).floor() * PI;
        let raw = s.y.atan2(s.yp);
        let mut t = floor + (raw - floor).rem_euclid(2.0 * PI);
        if t >= floor + 2.0 * PI {
            t -= 2.0 * PI;
        }
        s.theta = t;
    }
    let mag = s.y.abs().max(s.yp.abs());
    if !(1e-100..=1e100).contains(&mag) && mag > 0.0 {
        s.y /= mag;
        s.yp /= mag;
        s.norm /= mag * mag;
        s.ln_scale += mag.ln();
    }
}
