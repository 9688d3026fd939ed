use std::path::Path;

use serde_json::Value;
use spectral_transfer::canonical::Hamiltonian;
use spectral_transfer::measure::SpectralMeasure;
use spectral_transfer::string::MassDistribution;
use spectral_transfer::sturm_liouville::SlProblem;

use crate::CliError;

pub enum Input {
    Sl(SlProblem),
    Canonical(Hamiltonian),
    String(MassDistribution),
    Measure(SpectralMeasure),
}

impl Input {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Sl(_) => "Sturm-Liouville problem",
            Self::Canonical(_) => "Hamiltonian",
            Self::String(_) => "string",
            Self::Measure(_) => "measure",
        }
    }
}

fn parse_as<T: serde::de::DeserializeOwned>(v: Value, path: &Path) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads a JSON file and classifies it by its keys: `alpha` for a
/// Sturm-Liouville problem, `entries` for a Hamiltonian, `ell` for a string,
/// anything else is read as a measure.
pub fn load(path: &Path) -> Result<Input, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::Input(format!("{}: expected a JSON object", path.display())))?;
    Ok(if obj.contains_key("alpha") {
        Input::Sl(parse_as(v, path)?)
    } else if obj.contains_key("entries") {
        Input::Canonical(parse_as(v, path)?)
    } else if obj.contains_key("ell") {
        Input::String(parse_as(v, path)?)
    } else {
        Input::Measure(parse_as(v, path)?)
    })
}
