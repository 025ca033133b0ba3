//! Flag parsing and the error type.

use odenorm::chains::ChainError;
use odenorm::expr::ParseError;
use odenorm::invariants::{InvariantError, OdeJet};
use odenorm::normalform::{NormalFormError, NormalizationParams};
use odenorm::pseries::{parse_rational, Rational, SeriesError};
use odenorm::solutions::{recenter, SolutionError};
use thiserror::Error;

/// Polynomials are read up to this weight before any truncation, so that
/// recentering sees the whole of `F`.
const PARSE_WEIGHT: u32 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Math(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Math(_) => 3,
        }
    }
}

macro_rules! math_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Math(e.to_string())
            }
        }
    )*};
}

math_error!(
    SeriesError,
    InvariantError,
    SolutionError,
    NormalFormError,
    ChainError
);

pub fn expression(flag: &str, text: &str, e: ParseError) -> CliError {
    CliError::Usage(format!("--{flag} {text:?}: {e}"))
}

/// Comma-separated rationals, exactly `n` of them.
pub fn rationals(flag: &str, text: &str, n: usize) -> Result<Vec<Rational>, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(CliError::Usage(format!(
            "--{flag} expects {n} comma-separated rationals, got {:?}",
            text
        )));
    }
    parts
        .iter()
        .map(|p| {
            parse_rational(p)
                .ok_or_else(|| CliError::Usage(format!("--{flag}: `{p}` is not a rational")))
        })
        .collect()
}

pub fn check_weight(w: u32) -> Result<(), CliError> {
    if w < 4 {
        return Err(CliError::Usage(format!(
            "--weight must be at least 4, got {w}"
        )));
    }
    Ok(())
}

pub fn check_precision(p: u64) -> Result<(), CliError> {
    if p < 16 {
        return Err(CliError::Usage(format!(
            "--precision must be at least 16, got {p}"
        )));
    }
    Ok(())
}

/// The equation, recentered at `at` when given.
pub fn equation(flag: &str, text: &str, at: Option<&str>) -> Result<OdeJet, CliError> {
    let f = OdeJet::parse(text, PARSE_WEIGHT).map_err(|e| expression(flag, text, e))?;
    match at {
        None => Ok(f),
        Some(a) => {
            let p = rationals("at", a, 3)?;
            let p = [p[0].clone(), p[1].clone(), p[2].clone()];
            Ok(recenter(&f, &p)?.0)
        }
    }
}

pub fn params(text: Option<&str>) -> Result<NormalizationParams, CliError> {
    match text {
        None => Ok(NormalizationParams::identity()),
        Some(t) => {
            let v = rationals("params", t, 5)?;
            let [s, t, a, b, r]: [Rational; 5] = v.try_into().expect("five values");
            NormalizationParams::new(s, t, a, b, r)
                .map_err(|e| CliError::Usage(format!("--params: {e}")))
        }
    }
}
