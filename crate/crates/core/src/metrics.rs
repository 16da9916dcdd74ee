use crate::error::{Error, Result};

/// Fraction of samples whose thresholded coarse prediction equals the coarse
/// label. A prediction of exactly 1/2 counts as class 1.
pub fn coarse_accuracy(predicted: &[f64], labels: &[u8]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::domain("accuracy of an empty batch is undefined"));
    }
    if predicted.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let correct = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| u8::from(p >= 0.5) == y)
        .count();
    Ok(correct as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(coarse_accuracy(&[0.7, 0.2], &[1, 0]).unwrap(), 1.0);
        assert_eq!(coarse_accuracy(&[0.5], &[1]).unwrap(), 1.0);
        assert_eq!(coarse_accuracy(&[0.5], &[0]).unwrap(), 0.0);
        let a = coarse_accuracy(&[0.4, 0.6, 0.9], &[1, 1, 0]).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_domain_error() {
        assert!(matches!(coarse_accuracy(&[], &[]), Err(Error::Domain(_))));
    }
}
