use std::io::Write;

use num_complex::Complex64;
use spectral_transfer::canonical::{
    a_of_l, canonical_measure, f_from_measure, screw_from_measure, singular_measure, Hamiltonian, SingularOptions,
};
use spectral_transfer::closed_form::{free_interval, inverse_square, jump_hamiltonian, rotation, singular_diagonal};
use spectral_transfer::coefficient::Coefficient;
use spectral_transfer::error::Result;
use spectral_transfer::numerics::linspace;
use spectral_transfer::sturm_liouville::{matched_measure, orthogonal_measure, SlProblem};
use spectral_transfer::transfer::{max_deviation, phi_from_measure, write_columns_csv, TransferFunction};
use spectral_transfer::weyl::Gamma;

use crate::{CliError, CliResult};

const EX1_ATOMS: usize = 10_000;
const EX2_ATOMS: usize = 2000;
const EX2_MATCHED: usize = 100;
const EX3_PER_SIDE: usize = 10_000;

pub struct ExampleReport {
    pub header: Vec<String>,
    pub grid: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub summary: Vec<String>,
    pub problem_json: Option<String>,
}

impl ExampleReport {
    pub fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_columns_csv(out, &header, &self.grid, &self.columns)?;
        Ok(())
    }
}

/// `max |f(t) - closed(t)|` over grid points in `[lo, hi]`.
fn deviation_from<F: Fn(f64) -> f64>(f: &TransferFunction, closed: F, lo: f64, hi: f64) -> f64 {
    f.grid()
        .iter()
        .zip(f.values())
        .filter(|(t, _)| (lo..=hi).contains(*t))
        .map(|(&t, v)| (v - Complex64::new(closed(t), 0.0)).norm())
        .fold(0.0, f64::max)
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))
}

pub fn run(id: u32) -> CliResult<ExampleReport> {
    match id {
        1 => example1(),
        2 => example2(),
        3 => example3(),
        4 => example4(),
        5 => example5(),
        _ => Err(CliError::Input(format!("unknown example {id}; choose 1-5"))),
    }
}

fn example1() -> CliResult<ExampleReport> {
    let p = SlProblem::neumann(1.0, Coefficient::zero())?;
    let grid = linspace(0.0, 4.0, 401);
    let gammas = [Gamma::Real(0.0), Gamma::Real(1.0), Gamma::Real(2.0), Gamma::Infinity];
    let phis: Vec<TransferFunction> = gammas
        .iter()
        .map(|g| {
            let m = orthogonal_measure(&p, 1.0, g, EX1_ATOMS)?;
            phi_from_measure(m, grid.clone(), 2.0)
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (g, phi) in gammas.iter().zip(&phis) {
        summary.push(format!(
            "Phi_{}: max deviation from t on [0,2] {:.3e}, Phi(3) = {:.6}",
            g.label(),
            deviation_from(phi, free_interval::transfer, 0.0, 2.0),
            phi.eval(3.0)?.re
        ));
    }
    Ok(ExampleReport {
        header: ["t", "Phi_0", "Phi_1", "Phi_2", "Phi_inf"].map(String::from).to_vec(),
        grid,
        columns: phis.iter().map(TransferFunction::real_values).collect(),
        summary,
        problem_json: Some(to_json(&p)?),
    })
}

fn example2() -> CliResult<ExampleReport> {
    let p = SlProblem::neumann(1.0, inverse_square::potential())?;
    let a = 0.5;
    let grid = linspace(0.0, 2.0, 201);
    let rem = |l: f64| inverse_square::remainder(a, l);
    let ms = matched_measure(&p, a, &rem, EX2_MATCHED, 0.0, 0.25)?;
    let phi_s = phi_from_measure(ms, grid.clone(), 2.0 * a)?;
    let phi_0 = phi_from_measure(orthogonal_measure(&p, a, &Gamma::Real(0.0), EX2_ATOMS)?, grid.clone(), 2.0 * a)?;
    let phi_inf = phi_from_measure(orthogonal_measure(&p, a, &Gamma::Infinity, EX2_ATOMS)?, grid.clone(), 2.0 * a)?;
    let summary = vec![
        format!("|Phi_s - Phi_0| on [0,1]: {:.3e}", max_deviation(&phi_s, &phi_0, 0.0, 1.0)?.0),
        format!("|Phi_s - Phi_inf| on [0,1]: {:.3e}", max_deviation(&phi_s, &phi_inf, 0.0, 1.0)?.0),
        format!("|Phi_0 - Phi_inf| on [0,1]: {:.3e}", max_deviation(&phi_0, &phi_inf, 0.0, 1.0)?.0),
    ];
    let described = SlProblem::neumann(1.0, Coefficient::expression("2/(x-1)^2")?)?;
    Ok(ExampleReport {
        header: ["t", "Phi_s", "Phi_0", "Phi_inf"].map(String::from).to_vec(),
        grid,
        columns: vec![phi_s.real_values(), phi_0.real_values(), phi_inf.real_values()],
        summary,
        problem_json: Some(to_json(&described)?),
    })
}

fn example3() -> CliResult<ExampleReport> {
    let h = Hamiltonian::constant(0.5, 0.0, 0.5, rotation::ELL)?;
    let bound = 2.0 * a_of_l(&h, rotation::ELL)?;
    let grid = linspace(-4.0, 4.0, 401);
    let g_inf = screw_from_measure(
        canonical_measure(&h, rotation::ELL, &Gamma::Infinity, EX3_PER_SIDE)?,
        0.0,
        grid.clone(),
        bound,
    )?;
    let mut summary = vec![format!(
        "g_inf: max deviation from closed form on [-4,4] {:.3e}",
        deviation_from(&g_inf, rotation::g_infinity, -4.0, 4.0)
    )];
    let mut header = vec!["t".to_string(), "g_inf".to_string()];
    let mut columns = vec![g_inf.real_values()];
    for gamma in [0.0, 1.0, -2.0] {
        let m = canonical_measure(&h, rotation::ELL, &Gamma::Real(gamma), EX3_PER_SIDE)?;
        let g = screw_from_measure(m, rotation::beta(gamma), grid.clone(), bound)?;
        summary.push(format!(
            "g_{gamma}: max deviation from -|t| on [-2,2] {:.3e}",
            deviation_from(&g, rotation::g_gamma, -2.0, 2.0)
        ));
        header.push(format!("g_{gamma}"));
        columns.push(g.real_values());
    }
    Ok(ExampleReport {
        header,
        grid,
        columns,
        summary,
        problem_json: Some(to_json(&h)?),
    })
}

fn example4() -> CliResult<ExampleReport> {
    let h = Hamiltonian::diagonal(
        Coefficient::function(|x| (x - 1.0) * (x - 1.0)),
        Coefficient::function(|x| 1.0 / ((x - 1.0) * (x - 1.0))),
        1.0,
    )?;
    let bound = 2.0 * a_of_l(&h, 1.0)?;
    let grid = linspace(0.0, 6.0, 601);
    let g = screw_from_measure(singular_measure(&h, &SingularOptions::default())?, 0.0, grid.clone(), bound)?;
    let summary = vec![format!(
        "g: max deviation from [t^2/2 - t] on [0,6] {:.3e}",
        deviation_from(&g, singular_diagonal::g, 0.0, 6.0)
    )];
    let described = Hamiltonian::diagonal(
        Coefficient::expression("(x-1)^2")?,
        Coefficient::expression("1/(x-1)^2")?,
        1.0,
    )?;
    Ok(ExampleReport {
        header: ["t", "g"].map(String::from).to_vec(),
        grid,
        columns: vec![g.real_values()],
        summary,
        problem_json: Some(to_json(&described)?),
    })
}

fn example5() -> CliResult<ExampleReport> {
    let h = Hamiltonian::diagonal(
        Coefficient::function_with_breaks(|x| if x < 1.0 { 0.0 } else { (x - 2.0) * (x - 2.0) }, vec![1.0]),
        Coefficient::function_with_breaks(
            |x| if x < 1.0 { 1.0 } else { 1.0 / ((x - 2.0) * (x - 2.0)) },
            vec![1.0],
        ),
        2.0,
    )?;
    let bound = 2.0 * a_of_l(&h, 2.0)?;
    let grid = linspace(-4.0, 4.0, 401);
    let f = f_from_measure(singular_measure(&h, &SingularOptions::default())?, grid.clone(), bound)?;
    let summary = vec![
        format!(
            "f: max deviation from [1 - |t|] on [-4,4] {:.3e}",
            deviation_from(&f, jump_hamiltonian::f, -4.0, 4.0)
        ),
        format!("f(0) = {:.15}", f.eval(0.0)?.re),
    ];
    Ok(ExampleReport {
        header: ["t", "f"].map(String::from).to_vec(),
        grid,
        columns: vec![f.real_values()],
        summary,
        problem_json: None,
    })
}
