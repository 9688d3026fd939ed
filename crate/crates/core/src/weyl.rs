//! Boundary parameters and Weyl-function handles.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;

pub type ComplexHandle = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Boundary parameter at the right endpoint: a real constant, `∞`, or a
/// function of `z` (Nevanlinna or Stieltjes class, depending on context).
#[derive(Clone)]
pub enum Gamma {
    Real(f64),
    Infinity,
    Function(ComplexHandle),
}

impl fmt::Debug for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Real(g) => write!(f, "Real({g})"),
            Self::Infinity => write!(f, "Infinity"),
            Self::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Gamma {
    pub fn function<F: Fn(Complex64) -> Complex64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Function(Arc::new(f))
    }

    /// Value at `z`; `None` stands for `∞`.
    pub fn at(&self, z: Complex64) -> Option<Complex64> {
        match self {
            Self::Real(g) => Some(Complex64::new(*g, 0.0)),
            Self::Infinity => None,
            Self::Function(f) => Some(f(z)),
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, Self::Function(_))
    }

    /// Parses `"inf"`/`"infinity"`/`"∞"` or a real number.
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" | "Infinity" => Some(Self::Infinity),
            other => other.parse::<f64>().ok().filter(|g| g.is_finite()).map(Self::Real),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Real(g) => format!("{g}"),
            Self::Infinity => "inf".into(),
            Self::Function(_) => "function".into(),
        }
    }
}

/// A Weyl (Nevanlinna) function that can be evaluated off the real axis.
pub trait WeylFunction: Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    /// Sturm-Liouville data, when the function comes from a solver; lets
    /// differences of two such functions be computed without cancellation.
    fn sl_weyl(&self) -> Option<&crate::sturm_liouville::SlWeyl> {
        None
    }
}

/// Closure-backed Weyl function.
pub struct FnWeyl<F>(pub F);

impl<F: Fn(Complex64) -> Complex64 + Sync> WeylFunction for FnWeyl<F> {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok((self.0)(z))
    }
}
