//! Real coefficient functions on an interval (potentials, Hamiltonian
//! entries, string densities).

use std::fmt;
use std::sync::Arc;

use exmex::Express;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

type Handle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function of `x`.
///
/// Grid coefficients are interpolated piecewise linearly; piecewise-constant
/// coefficients are right-continuous at their breaks.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    Grid { x: Vec<f64>, values: Vec<f64> },
    Expression { source: String, compiled: Handle },
    Function { handle: Handle, breaks: Vec<f64> },
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::PiecewiseConstant { breaks, values } => f
                .debug_struct("PiecewiseConstant")
                .field("breaks", breaks)
                .field("values", values)
                .finish(),
            Self::Grid { x, values } => f.debug_struct("Grid").field("x", x).field("values", values).finish(),
            Self::Expression { source, .. } => write!(f, "Expression({source:?})"),
            Self::Function { breaks, .. } => f.debug_struct("Function").field("breaks", breaks).finish(),
        }
    }
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Constant(a), Self::Constant(b)) => a == b,
            (
                Self::PiecewiseConstant { breaks: b1, values: v1 },
                Self::PiecewiseConstant { breaks: b2, values: v2 },
            ) => b1 == b2 && v1 == v2,
            (Self::Grid { x: x1, values: v1 }, Self::Grid { x: x2, values: v2 }) => x1 == x2 && v1 == v2,
            (Self::Expression { source: a, .. }, Self::Expression { source: b, .. }) => a == b,
            (Self::Function { handle: a, .. }, Self::Function { handle: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Coefficient {
    pub fn zero() -> Self {
        Self::Constant(0.0)
    }

    /// `values[i]` holds on `[breaks[i-1], breaks[i])`; `values.len() == breaks.len() + 1`.
    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "piecewise-constant coefficient needs {} values for {} breaks",
                breaks.len() + 1,
                breaks.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("breaks must increase and values be finite".into()));
        }
        Ok(Self::PiecewiseConstant { breaks, values })
    }

    /// Step function equal to `before` on `[0, at)` and `after` beyond.
    pub fn step(at: f64, before: f64, after: f64) -> Self {
        Self::PiecewiseConstant {
            breaks: vec![at],
            values: vec![before, after],
        }
    }

    pub fn grid(x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x.len() != values.len() || x.len() < 2 {
            return Err(Error::InvalidInput("grid coefficient needs matching x/values of length >= 2".into()));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("grid x values must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("grid coefficient values must be finite".into()));
        }
        Ok(Self::Grid { x, values })
    }

    /// Parses an arithmetic expression in the variable `x`
    /// (numbers, `+ - * / ^`, parentheses, `sin cos tan exp log sqrt abs`, `PI`, `E`).
    pub fn expression(source: &str) -> Result<Self> {
        let expr = exmex::parse::<f64>(source).map_err(|e| Error::Expression {
            source_text: source.to_string(),
            message: e.to_string(),
        })?;
        let vars: Vec<String> = expr.var_names().iter().map(|v| v.to_string()).collect();
        let compiled: Handle = match vars.as_slice() {
            [] => {
                let value = expr.eval(&[]).map_err(|e| Error::Expression {
                    source_text: source.to_string(),
                    message: e.to_string(),
                })?;
                Arc::new(move |_| value)
            }
            [v] if v == "x" => Arc::new(move |x| expr.eval(&[x]).unwrap_or(f64::NAN)),
            _ => {
                return Err(Error::Expression {
                    source_text: source.to_string(),
                    message: format!("only the variable `x` is allowed, found {vars:?}"),
                })
            }
        };
        Ok(Self::Expression {
            source: source.to_string(),
            compiled,
        })
    }

    pub fn function<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Function {
            handle: Arc::new(f),
            breaks: Vec::new(),
        }
    }

    /// Function handle with declared points of non-smoothness.
    pub fn function_with_breaks<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, breaks: Vec<f64>) -> Self {
        Self::Function {
            handle: Arc::new(f),
            breaks,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::PiecewiseConstant { breaks, values } => values[breaks.partition_point(|&b| b <= x)],
            Self::Grid { x: xs, values } => {
                let n = xs.len();
                if x <= xs[0] {
                    return values[0];
                }
                if x >= xs[n - 1] {
                    return values[n - 1];
                }
                let i = xs.partition_point(|&g| g <= x) - 1;
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                values[i] * (1.0 - w) + values[i + 1] * w
            }
            Self::Expression { compiled, .. } => compiled(x),
            Self::Function { handle, .. } => handle(x),
        }
    }

    /// Points in `(a, b)` where the coefficient or its derivative may jump.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let pts: &[f64] = match self {
            Self::PiecewiseConstant { breaks, .. } => breaks,
            Self::Grid { x, .. } => x,
            Self::Function { breaks, .. } => breaks,
            _ => &[],
        };
        pts.iter().copied().filter(|&p| p > a && p < b).collect()
    }

    /// True when the coefficient is constant between its breakpoints.
    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self, Self::Constant(_) | Self::PiecewiseConstant { .. })
    }

    /// Mean value over `[a, b]` (two-point Gauss rule, exact for piecewise
    /// linear data inside one smooth piece).
    pub fn mean(&self, a: f64, b: f64) -> f64 {
        if self.is_piecewise_constant() {
            return self.eval(0.5 * (a + b));
        }
        let m = 0.5 * (a + b);
        let r = 0.5 * (b - a) / 3f64.sqrt();
        0.5 * (self.eval(m - r) + self.eval(m + r))
    }

    pub fn is_serializable(&self) -> bool {
        !matches!(self, Self::Function { .. })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CoefficientRepr {
    Constant { value: f64 },
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    Grid { x: Vec<f64>, values: Vec<f64> },
    Expr { expr: String },
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Self::Constant(value) => CoefficientRepr::Constant { value: *value },
            Self::PiecewiseConstant { breaks, values } => CoefficientRepr::Piecewise {
                breaks: breaks.clone(),
                values: values.clone(),
            },
            Self::Grid { x, values } => CoefficientRepr::Grid {
                x: x.clone(),
                values: values.clone(),
            },
            Self::Expression { source, .. } => CoefficientRepr::Expr { expr: source.clone() },
            Self::Function { .. } => {
                return Err(serde::ser::Error::custom("function-handle coefficients cannot be serialized"))
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CoefficientRepr::deserialize(deserializer)?;
        match repr {
            CoefficientRepr::Constant { value } => Ok(Self::Constant(value)),
            CoefficientRepr::Piecewise { breaks, values } => {
                Self::piecewise_constant(breaks, values).map_err(D::Error::custom)
            }
            CoefficientRepr::Grid { x, values } => Self::grid(x, values).map_err(D::Error::custom),
            CoefficientRepr::Expr { expr } => Self::expression(&expr).map_err(D::Error::custom),
        }
    }
}
