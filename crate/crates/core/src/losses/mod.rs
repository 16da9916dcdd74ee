//! Training objectives for fine- and coarse-grained supervision.
//!
//! With a softmax over K fine classes and a coarse partition `C0 ∪ C1`, the
//! fine cross-entropy splits exactly into the coarse binary cross-entropy of
//! the aggregated prediction plus an intra-class term:
//!
//! ```text
//! L_fine = L_coarse + L_intra
//! L_intra = (1/p) Σ_μ log(1 + Σ_{j∈C(μ)\{t}} ŷ_j / ŷ_t)
//! ```
//!
//! where `t` is the true fine class of sample μ and `C(μ)` its coarse class.
//! The hybrid objective `L_coarse + β·L_intra` interpolates between the two.
//!
//! All logarithms (and the intra-class denominator) use probabilities floored
//! at [`PROB_FLOOR`].

mod hierarchy;
mod objective;

pub use hierarchy::Hierarchy;
pub use objective::{
    CoarseObjective, FineObjective, HybridObjective, IntraObjective, LossKind, Objective,
    ObjectiveFactory, ObjectiveRegistry,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PROB_FLOOR: f64 = 1e-12;

/// Clamps to the floor but lets NaN through, so that a broken forward pass
/// shows up as a non-finite loss instead of a large finite one.
#[inline]
pub(crate) fn floor(p: f64) -> f64 {
    if p < PROB_FLOOR {
        PROB_FLOOR
    } else {
        p
    }
}

#[inline]
pub(crate) fn flog(p: f64) -> f64 {
    floor(p).ln()
}

/// Per-sample binary cross-entropy given the mass on each coarse class.
#[inline]
pub(crate) fn coarse_sample(p0: f64, p1: f64, y: u8) -> f64 {
    if y == 1 {
        -flog(p0)
    } else {
        -flog(p1)
    }
}

/// Per-sample fine cross-entropy.
#[inline]
pub(crate) fn fine_sample(probs: &[f64], target: usize) -> f64 {
    -flog(probs[target])
}

/// Per-sample intra-class term.
#[inline]
pub(crate) fn intra_sample(probs: &[f64], target: usize, h: &Hierarchy) -> f64 {
    let rest: f64 = h
        .siblings(target)
        .iter()
        .filter(|&&j| j != target)
        .map(|&j| probs[j])
        .sum();
    (1.0 + rest / floor(probs[target])).ln()
}

/// Decodes a one-hot label matrix into class indices.
pub fn one_hot_classes(y: &Matrix) -> Result<Vec<usize>> {
    y.iter_rows()
        .enumerate()
        .map(|(mu, row)| {
            let mut hot = None;
            for (i, &v) in row.iter().enumerate() {
                if v == 1.0 {
                    if hot.is_some() {
                        return Err(Error::domain(format!("label row {mu} has several ones")));
                    }
                    hot = Some(i);
                } else if v != 0.0 {
                    return Err(Error::domain(format!(
                        "label row {mu} has non-binary entry {v}"
                    )));
                }
            }
            hot.ok_or_else(|| Error::domain(format!("label row {mu} has no hot entry")))
        })
        .collect()
}

/// Builds a one-hot matrix from class indices.
pub fn one_hot(classes: &[usize], k: usize) -> Matrix {
    let mut m = Matrix::zeros(classes.len(), k);
    for (mu, &c) in classes.iter().enumerate() {
        m.set(mu, c, 1.0);
    }
    m
}

/// Coarse labels `Y^μ = Σ_{i∈C0} y_i^μ` for one-hot fine labels.
pub fn coarse_targets(y: &Matrix, h: &Hierarchy) -> Result<Vec<u8>> {
    Ok(one_hot_classes(y)?
        .into_iter()
        .map(|c| h.coarse_label(c))
        .collect())
}

fn check_fine_inputs(fine_probs: &Matrix, y: &Matrix) -> Result<Vec<usize>> {
    if fine_probs.rows() == 0 {
        return Err(Error::domain("empty batch"));
    }
    if fine_probs.rows() != y.rows() || fine_probs.cols() != y.cols() {
        return Err(Error::shape(format!(
            "probabilities are {}x{} but labels are {}x{}",
            fine_probs.rows(),
            fine_probs.cols(),
            y.rows(),
            y.cols()
        )));
    }
    for (mu, row) in fine_probs.iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
            return Err(Error::domain(format!(
                "probability row {mu} is not a distribution (sum {s})"
            )));
        }
    }
    one_hot_classes(y)
}

fn check_hierarchy(fine_probs: &Matrix, h: &Hierarchy) -> Result<()> {
    if h.k() != fine_probs.cols() {
        return Err(Error::config(format!(
            "hierarchy has K = {} but probabilities have {} columns",
            h.k(),
            fine_probs.cols()
        )));
    }
    Ok(())
}

/// Binary cross-entropy `−(1/p) Σ [Y log Ŷ + (1−Y) log(1−Ŷ)]`.
pub fn loss_coarse(coarse_probs: &[f64], y: &[u8]) -> Result<f64> {
    if coarse_probs.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    if coarse_probs.len() != y.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            coarse_probs.len(),
            y.len()
        )));
    }
    let mut total = 0.0;
    for (&q, &t) in coarse_probs.iter().zip(y) {
        if t > 1 {
            return Err(Error::domain(format!("coarse label {t} is not binary")));
        }
        total += coarse_sample(q, 1.0 - q, t);
    }
    Ok(total / coarse_probs.len() as f64)
}

/// Fine cross-entropy (negative log-likelihood) over K classes.
pub fn loss_fine(fine_probs: &Matrix, y: &Matrix) -> Result<f64> {
    let classes = check_fine_inputs(fine_probs, y)?;
    let total: f64 = classes
        .iter()
        .enumerate()
        .map(|(mu, &t)| fine_sample(fine_probs.row(mu), t))
        .sum();
    Ok(total / classes.len() as f64)
}

pub fn loss_intra(fine_probs: &Matrix, y: &Matrix, h: &Hierarchy) -> Result<f64> {
    let classes = check_fine_inputs(fine_probs, y)?;
    check_hierarchy(fine_probs, h)?;
    let total: f64 = classes
        .iter()
        .enumerate()
        .map(|(mu, &t)| intra_sample(fine_probs.row(mu), t, h))
        .sum();
    Ok(total / classes.len() as f64)
}

/// `L_coarse(aggregate(ŷ)) + β·L_intra(ŷ)`.
pub fn loss_hybrid(fine_probs: &Matrix, y: &Matrix, h: &Hierarchy, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let coarse = loss_coarse(&h.aggregate(fine_probs)?, &coarse_targets(y, h)?)?;
    Ok(coarse + beta * loss_intra(fine_probs, y, h)?)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!(
            "hybrid weight beta must lie in [0, 1], got {beta}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub fine: f64,
    pub coarse: f64,
    pub intra: f64,
    /// `|L_fine − L_coarse − L_intra|`
    pub residual: f64,
}

/// Evaluates all three terms of the fine-loss decomposition on one batch.
pub fn verify_decomposition(
    fine_probs: &Matrix,
    y: &Matrix,
    h: &Hierarchy,
) -> Result<DecompositionReport> {
    let fine = loss_fine(fine_probs, y)?;
    let coarse = loss_coarse(&h.aggregate(fine_probs)?, &coarse_targets(y, h)?)?;
    let intra = loss_intra(fine_probs, y, h)?;
    Ok(DecompositionReport {
        fine,
        coarse,
        intra,
        residual: (fine - coarse - intra).abs(),
    })
}
