mod examples;
mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use spectral_transfer::asymptotics::{decay_fit, RaySampling};
use spectral_transfer::canonical::{
    canonical_measure, f_from_measure, screw_from_measure, screw_kernel_psd, singular_measure, SingularOptions,
};
use spectral_transfer::error::Error;
use spectral_transfer::measure::SpectralMeasure;
use spectral_transfer::numerics::linspace;
use spectral_transfer::string::{string_f_transfer, string_spectral_measure, string_transfer};
use spectral_transfer::sturm_liouville::{orthogonal_measure, solve_fundamental, weyl_m, SlProblem, SlWeyl};
use spectral_transfer::transfer::{
    compare_transfer, fmt17, krein_kernel_matrix, phi_from_measure, psd_verdict, screw_kernel_matrix,
    TransferFunction, PSD_TOL, TRUNCATION_TOL,
};
use spectral_transfer::weyl::Gamma;

use crate::input::{load, Input};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::RealSpectralParameter(_)
            | Error::Domain { .. }
            | Error::Expression { .. }
            | Error::Json(_)
            | Error::Io(_) => Self::Input(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "spectral-transfer", version, about = "Spectral measures, Weyl functions and transfer functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Tolerance for verdicts.
    #[arg(long)]
    tol: Option<f64>,
    /// Output grid `t0:t1:n`.
    #[arg(long)]
    grid: Option<String>,
    /// Turn negative verdicts into exit status 1.
    #[arg(long = "assert")]
    assert_mode: bool,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental solutions and the Weyl function at given z.
    SlSolve {
        problem: PathBuf,
        /// Spectral parameter `re,im`; repeatable.
        #[arg(long = "z", required = true, allow_hyphen_values = true)]
        z: Vec<String>,
        /// Evaluation point (default: the right end).
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[command(flatten)]
        common: Common,
    },
    /// Orthogonal spectral measure (CSV, or JSON when --out ends in .json).
    SlMeasure {
        problem: PathBuf,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Krein transfer function of a problem or a measure file.
    Transfer {
        input: PathBuf,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Certified domain for measure inputs (default: end of the grid).
        #[arg(long)]
        domain: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare transfer functions of two problems on [0, 2a].
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        a: f64,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Positive-definiteness check of the kernel built from a function.
    KernelCheck {
        /// Problem, Hamiltonian, string or measure file (omit with --control).
        input: Option<PathBuf>,
        /// Control function: `krein` (Φ = -t²) or `screw` (g = t²).
        #[arg(long)]
        control: Option<String>,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Number of kernel points on [0, domain/2].
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Screw function (or f with --f) of a canonical system.
    CanonicalTransfer {
        hamiltonian: PathBuf,
        /// Boundary parameter at ℓ; omit for a singular (limit point) end.
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<String>,
        #[arg(long, default_value_t = 4000)]
        count: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        f: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Transfer function g (or f with --f) of a string.
    StringTransfer {
        string: PathBuf,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long)]
        f: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Exponential decay fit of m₁ - m₂ along a ray.
    DecayFit {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        gamma: String,
        /// Ray `angle:r0:r1:n`.
        #[arg(long)]
        ray: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Worked examples 1-5, end to end.
    Examples {
        #[arg(long)]
        id: u32,
        /// Also write the example's problem description as JSON.
        #[arg(long)]
        problem_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Parses `t0:t1:n`.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Input(format!("grid must be t0:t1:n, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let t0: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let t1: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(t1 > t0) && n > 1 || !t0.is_finite() || !t1.is_finite() {
        return Err(CliError::Input(format!("grid {spec:?} must be nonempty and increasing")));
    }
    Ok(linspace(t0, t1, n))
}

fn parse_ray(spec: &str) -> CliResult<RaySampling> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Input(format!("ray must be angle:r0:r1:n, got {spec:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let angle: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let r0: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let r1: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[3].trim().parse().map_err(|_| bad())?;
    Ok(RaySampling::log_spaced(angle, r0, r1, n)?)
}

fn parse_gamma(s: &str) -> CliResult<Gamma> {
    Gamma::parse(s).ok_or_else(|| CliError::Input(format!("boundary parameter must be a number or inf, got {s:?}")))
}

fn parse_z(s: &str) -> CliResult<Complex64> {
    let bad = || CliError::Input(format!("z must be re,im, got {s:?}"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    Ok(Complex64::new(
        re.trim().parse().map_err(|_| bad())?,
        im.trim().parse().map_err(|_| bad())?,
    ))
}

fn check_tol(tol: Option<f64>, default: f64) -> CliResult<f64> {
    let tol = tol.unwrap_or(default);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Input(format!("tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

pub fn open_out(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn sl_phi(p: &SlProblem, gamma: &Gamma, count: usize, grid: Vec<f64>) -> CliResult<TransferFunction> {
    let m = orthogonal_measure(p, p.ell(), gamma, count)?;
    Ok(phi_from_measure(m, grid, 2.0 * p.ell())?)
}

fn require_sl(input: Input, what: &str) -> CliResult<SlProblem> {
    match input {
        Input::Sl(p) => Ok(p),
        other => Err(CliError::Input(format!("{what} needs a Sturm-Liouville problem, got a {}", other.kind()))),
    }
}

fn canonical_measure_for(
    h: &spectral_transfer::canonical::Hamiltonian,
    gamma: Option<&str>,
    count: usize,
) -> CliResult<SpectralMeasure> {
    Ok(match gamma {
        Some(g) => canonical_measure(h, h.ell(), &parse_gamma(g)?, count)?,
        None => singular_measure(
            h,
            &SingularOptions {
                extended_per_side: count.max(12),
                ..SingularOptions::default()
            },
        )?,
    })
}

/// Returns `Ok(true)` for a positive verdict.
fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::SlSolve {
            problem,
            z,
            x,
            gamma,
            common,
        } => {
            let p = require_sl(load(&problem)?, "sl-solve")?;
            let gamma = parse_gamma(&gamma)?;
            let x = x.unwrap_or(p.ell());
            let mut out = open_out(&common.out)?;
            writeln!(
                out,
                "z_re,z_im,phi_re,phi_im,dphi_re,dphi_im,psi_re,psi_im,dpsi_re,dpsi_im,m_re,m_im"
            )?;
            for zs in &z {
                let z = parse_z(zs)?;
                let f = solve_fundamental(&p, z, x)?;
                let m = if z.im != 0.0 {
                    let m = weyl_m(&p, p.ell(), &gamma, z)?;
                    format!("{},{}", fmt17(m.re), fmt17(m.im))
                } else {
                    ",".into()
                };
                let vals: Vec<String> = [z, f.phi, f.phi_prime, f.psi, f.psi_prime]
                    .iter()
                    .flat_map(|v| [fmt17(v.re), fmt17(v.im)])
                    .collect();
                writeln!(out, "{},{m}", vals.join(","))?;
            }
            out.flush()?;
            Ok(true)
        }
        Command::SlMeasure {
            problem,
            gamma,
            count,
            common,
        } => {
            let p = require_sl(load(&problem)?, "sl-measure")?;
            let m = orthogonal_measure(&p, p.ell(), &parse_gamma(&gamma)?, count)?;
            let json = common.out.as_ref().is_some_and(|o| o.extension().is_some_and(|e| e == "json"));
            let mut out = open_out(&common.out)?;
            if json {
                serde_json::to_writer_pretty(&mut out, &m).map_err(|e| CliError::Input(e.to_string()))?;
                writeln!(out)?;
            } else {
                writeln!(out, "lambda,weight")?;
                for (l, w) in m.atoms() {
                    writeln!(out, "{},{}", fmt17(*l), fmt17(*w))?;
                }
            }
            out.flush()?;
            if let Some(t) = m.tail() {
                eprintln!("tail: {} λ^{} dλ beyond {}", t.c, t.p, t.start);
            }
            Ok(true)
        }
        Command::Transfer {
            input,
            gamma,
            count,
            domain,
            common,
        } => {
            let grid = parse_grid(common.grid.as_deref().unwrap_or("0:4:401"))?;
            let phi = match load(&input)? {
                Input::Sl(p) => sl_phi(&p, &parse_gamma(&gamma)?, count, grid)?,
                Input::Measure(m) => {
                    let bound = domain.unwrap_or(grid[grid.len() - 1]);
                    phi_from_measure(m, grid, bound)?
                }
                other => {
                    return Err(CliError::Input(format!(
                        "transfer takes a Sturm-Liouville problem or a measure, got a {}; see canonical-transfer and string-transfer",
                        other.kind()
                    )))
                }
            };
            let mut out = open_out(&common.out)?;
            phi.write_csv(&mut out)?;
            out.flush()?;
            eprintln!(
                "certified on [0, {}], truncation estimate {:.1e}",
                phi.domain_bound(),
                phi.truncation_error()
            );
            Ok(true)
        }
        Command::Compare {
            first,
            second,
            a,
            gamma,
            count,
            common,
        } => {
            let tol = check_tol(common.tol, 2.0 * TRUNCATION_TOL)?;
            let gamma = parse_gamma(&gamma)?;
            let grid = parse_grid(common.grid.as_deref().unwrap_or(&format!("0:{}:201", 2.0 * a)))?;
            let (c, lo) = match (load(&first)?, load(&second)?) {
                (Input::Sl(p1), Input::Sl(p2)) => {
                    for p in [&p1, &p2] {
                        if a > p.ell() {
                            return Err(CliError::Input(format!("a = {a} exceeds the interval length {}", p.ell())));
                        }
                    }
                    let f1 = sl_phi(&p1, &gamma, count, grid.clone())?;
                    let f2 = sl_phi(&p2, &gamma, count, grid)?;
                    (compare_transfer(&f1, &f2, a, tol)?, 0.0)
                }
                (Input::String(s1), Input::String(s2)) => {
                    let g1 = string_transfer(string_spectral_measure(&s1, &gamma, count)?, grid.clone(), s1.transfer_domain())?;
                    let g2 = string_transfer(string_spectral_measure(&s2, &gamma, count)?, grid, s2.transfer_domain())?;
                    (compare_transfer(&g1, &g2, a, tol)?, 0.0)
                }
                (x, y) => {
                    return Err(CliError::Input(format!(
                        "compare needs two Sturm-Liouville problems or two strings, got {} and {}",
                        x.kind(),
                        y.kind()
                    )))
                }
            };
            let mut out = open_out(&common.out)?;
            if c.locally_identical {
                writeln!(out, "agree on [{lo},{}] within {:.1e}", 2.0 * a, c.max_abs_deviation)?;
            } else {
                writeln!(
                    out,
                    "differ on [{lo},{}]: max deviation {:.3e} at t = {} exceeds {tol:e}",
                    2.0 * a,
                    c.max_abs_deviation,
                    c.at
                )?;
            }
            out.flush()?;
            Ok(c.locally_identical)
        }
        Command::KernelCheck {
            input,
            control,
            gamma,
            count,
            points,
            common,
        } => {
            let tol = check_tol(common.tol, PSD_TOL)?;
            if points < 2 {
                return Err(CliError::Input("need at least 2 kernel points".into()));
            }
            let verdict = match (control.as_deref(), input) {
                (Some("krein"), None) => {
                    let phi = TransferFunction::from_real_fn("-t^2", |t| -t * t, linspace(0.0, 2.0, 3), 2.0)?;
                    psd_verdict(&krein_kernel_matrix(&phi, &linspace(0.0, 1.0, points))?, tol)
                }
                (Some("screw"), None) => {
                    let g = TransferFunction::from_real_fn("t^2", |t| t * t, linspace(-2.0, 2.0, 3), 2.0)?;
                    psd_verdict(&screw_kernel_matrix(&g, &linspace(0.0, 1.0, points))?, tol)
                }
                (Some(other), None) => {
                    return Err(CliError::Input(format!("unknown control {other:?}; use krein or screw")))
                }
                (Some(_), Some(_)) => return Err(CliError::Input("give either an input file or --control".into())),
                (None, None) => return Err(CliError::Input("missing input file".into())),
                (None, Some(path)) => match load(&path)? {
                    Input::Sl(p) => {
                        let bound = 2.0 * p.ell();
                        let phi = sl_phi(&p, &parse_gamma(&gamma)?, count, linspace(0.0, bound, 3))?;
                        psd_verdict(&krein_kernel_matrix(&phi, &linspace(0.0, 0.5 * bound, points))?, tol)
                    }
                    Input::Measure(m) => {
                        let phi = phi_from_measure(m, linspace(0.0, 2.0, 3), 2.0)?;
                        psd_verdict(&krein_kernel_matrix(&phi, &linspace(0.0, 1.0, points))?, tol)
                    }
                    Input::String(s) => {
                        let bound = s.transfer_domain();
                        let m = string_spectral_measure(&s, &parse_gamma(&gamma)?, count)?;
                        // g = -Φ: the Krein kernel of Φ
                        let phi = phi_from_measure(m, linspace(0.0, bound, 3), bound)?;
                        psd_verdict(&krein_kernel_matrix(&phi, &linspace(0.0, 0.5 * bound, points))?, tol)
                    }
                    Input::Canonical(h) => {
                        let m = canonical_measure_for(&h, Some(&gamma), count)?;
                        let bound = 2.0 * spectral_transfer::canonical::a_of_l(&h, h.ell())?;
                        let g = screw_from_measure(m, 0.0, linspace(0.0, bound, 3), bound)?;
                        screw_kernel_psd(&g, &linspace(0.0, 0.5 * bound, points), tol)?
                    }
                },
            };
            let mut out = open_out(&common.out)?;
            writeln!(
                out,
                "min eigenvalue {:.6e}, norm {:.6e}: {}",
                verdict.min_eigenvalue,
                verdict.norm,
                if verdict.is_psd { "positive semidefinite" } else { "not positive semidefinite" }
            )?;
            out.flush()?;
            Ok(verdict.is_psd)
        }
        Command::CanonicalTransfer {
            hamiltonian,
            gamma,
            count,
            beta,
            f,
            common,
        } => {
            let h = match load(&hamiltonian)? {
                Input::Canonical(h) => h,
                other => {
                    return Err(CliError::Input(format!(
                        "canonical-transfer needs a Hamiltonian, got a {}",
                        other.kind()
                    )))
                }
            };
            let m = canonical_measure_for(&h, gamma.as_deref(), count)?;
            let bound = 2.0 * spectral_transfer::canonical::a_of_l(&h, if h.ell().is_finite() { h.ell() } else { 0.0 })?;
            let grid = parse_grid(common.grid.as_deref().unwrap_or("-4:4:401"))?;
            let func = if f {
                f_from_measure(m, grid, bound)?
            } else {
                screw_from_measure(m, beta, grid, bound)?
            };
            let mut out = open_out(&common.out)?;
            func.write_csv(&mut out)?;
            out.flush()?;
            Ok(true)
        }
        Command::StringTransfer {
            string,
            gamma,
            count,
            f,
            common,
        } => {
            let s = match load(&string)? {
                Input::String(s) => s,
                other => {
                    return Err(CliError::Input(format!("string-transfer needs a string, got a {}", other.kind())))
                }
            };
            let m = string_spectral_measure(&s, &parse_gamma(&gamma)?, count)?;
            let bound = s.transfer_domain();
            let grid = parse_grid(common.grid.as_deref().unwrap_or(&format!("0:{bound}:201")))?;
            let func = if f {
                string_f_transfer(m, grid, bound)?
            } else {
                string_transfer(m, grid, bound)?
            };
            let mut out = open_out(&common.out)?;
            func.write_csv(&mut out)?;
            out.flush()?;
            Ok(true)
        }
        Command::DecayFit {
            first,
            second,
            gamma,
            ray,
            common,
        } => {
            let gamma = parse_gamma(&gamma)?;
            let ray = match ray {
                Some(r) => parse_ray(&r)?,
                None => RaySampling::default(),
            };
            let p1 = require_sl(load(&first)?, "decay-fit")?;
            let p2 = require_sl(load(&second)?, "decay-fit")?;
            let m1 = SlWeyl::new(p1.clone(), p1.ell(), gamma.clone())?;
            let m2 = SlWeyl::new(p2.clone(), p2.ell(), gamma)?;
            match decay_fit(&m1, &m2, &ray) {
                Ok(fit) => {
                    let mut out = open_out(&common.out)?;
                    fit.write_csv(&mut out)?;
                    out.flush()?;
                    eprintln!(
                        "a_hat = {:.6}, c_hat = {:.6}, r2 = {:.6}, dropped radii: {}",
                        fit.a_hat,
                        fit.c_hat,
                        fit.r2,
                        fit.dropped().len()
                    );
                    Ok(true)
                }
                Err(Error::Indistinguishable { last_resolved_radius }) => {
                    let mut out = open_out(&common.out)?;
                    writeln!(
                        out,
                        "indistinguishable to machine precision: a_hat = inf, lower-bounded by the last resolvable radius {last_resolved_radius}"
                    )?;
                    out.flush()?;
                    Ok(true)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Examples {
            id,
            problem_out,
            common,
        } => {
            let report = examples::run(id)?;
            if let Some(path) = problem_out {
                let json = report
                    .problem_json
                    .as_ref()
                    .ok_or_else(|| CliError::Input(format!("example {id} has no serializable problem description")))?;
                std::fs::write(path, json)?;
            }
            let mut out = open_out(&common.out)?;
            report.write_csv(&mut out)?;
            out.flush()?;
            for line in &report.summary {
                eprintln!("{line}");
            }
            Ok(true)
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("SPECTRAL_TRANSFER_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let assert_mode = match &cli.command {
        Command::Compare { common, .. } | Command::KernelCheck { common, .. } => common.assert_mode,
        _ => false,
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(if assert_mode { 1 } else { 0 }),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
