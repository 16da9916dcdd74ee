use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Median with first and third quartiles.
    Quartiles,
    /// Mean with its standard error.
    #[default]
    StandardError,
}

impl std::str::FromStr for AggregateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quartiles" => Ok(AggregateMode::Quartiles),
            "standard_error" => Ok(AggregateMode::StandardError),
            other => Err(Error::config(format!("unknown aggregate mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregateMode::Quartiles => "quartiles",
            AggregateMode::StandardError => "standard_error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Summary {
    Quartiles { median: f64, q1: f64, q3: f64 },
    StandardError { mean: f64, se: f64 },
}

impl Summary {
    pub fn center(&self) -> f64 {
        match *self {
            Summary::Quartiles { median, .. } => median,
            Summary::StandardError { mean, .. } => mean,
        }
    }

    pub fn low(&self) -> f64 {
        match *self {
            Summary::Quartiles { q1, .. } => q1,
            Summary::StandardError { mean, se } => mean - se,
        }
    }

    pub fn high(&self) -> f64 {
        match *self {
            Summary::Quartiles { q3, .. } => q3,
            Summary::StandardError { mean, se } => mean + se,
        }
    }
}

/// Quantile by linear interpolation between order statistics
/// (position `q·(n-1)` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Standard error of the mean, `s/√n` with the `n-1` sample deviation.
pub fn standard_error(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::domain(format!(
            "standard error needs at least two values, got {n}"
        )));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

pub fn aggregate(values: &[f64], mode: AggregateMode) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::domain("cannot aggregate an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("cannot aggregate non-finite values"));
    }
    match mode {
        AggregateMode::Quartiles => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok(Summary::Quartiles {
                median: quantile_sorted(&sorted, 0.5),
                q1: quantile_sorted(&sorted, 0.25),
                q3: quantile_sorted(&sorted, 0.75),
            })
        }
        AggregateMode::StandardError => Ok(Summary::StandardError {
            mean: mean(values),
            se: standard_error(values)?,
        }),
    }
}

/// Mini-batch size for a training set: 8 up to 800 samples, 16 up to 6400,
/// 32 beyond.
pub fn batch_size_for(train_size: usize) -> usize {
    match train_size {
        0..=800 => 8,
        801..=6400 => 16,
        _ => 32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_example() {
        let s = aggregate(&[4.0, 1.0, 3.0, 2.0], AggregateMode::Quartiles).unwrap();
        assert_eq!(
            s,
            Summary::Quartiles {
                median: 2.5,
                q1: 1.75,
                q3: 3.25
            }
        );
    }

    #[test]
    fn constant_list() {
        let v = [0.7; 5];
        let q = aggregate(&v, AggregateMode::Quartiles).unwrap();
        assert_eq!((q.low(), q.center(), q.high()), (0.7, 0.7, 0.7));
        let s = aggregate(&v, AggregateMode::StandardError).unwrap();
        assert!(matches!(s, Summary::StandardError { se, .. } if se.abs() < 1e-15));
    }

    #[test]
    fn two_point_standard_error() {
        let s = aggregate(&[0.0, 1.0], AggregateMode::StandardError).unwrap();
        match s {
            Summary::StandardError { mean, se } => {
                assert_eq!(mean, 0.5);
                assert!((se - 0.5).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(aggregate(&[], AggregateMode::Quartiles).is_err());
        assert!(aggregate(&[1.0], AggregateMode::StandardError).is_err());
        assert!(aggregate(&[1.0], AggregateMode::Quartiles).is_ok());
    }

    #[test]
    fn batch_sizes() {
        assert_eq!(batch_size_for(400), 8);
        assert_eq!(batch_size_for(800), 8);
        assert_eq!(batch_size_for(3200), 16);
        assert_eq!(batch_size_for(25600), 32);
        let sizes: Vec<usize> = (1..30000).step_by(97).map(batch_size_for).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    }
}
