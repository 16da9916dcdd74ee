//! Concentric-circles benchmark with tunable boundary redundancy.
//!
//! `K` circles of radius `2j/K` (j = 1..K) alternate between the two coarse
//! classes. Each coarse class owns `K/2` fine subclasses, and circle `j` is
//! dominated by subclass `j-1`: a contiguous arc of angular measure
//! `2π(1-ρ)` carries it, while the remaining `2πρ` is cut into `K/2 - 1`
//! equal arcs given to the other subclasses of the same coarse class. The
//! coarse task is identical for every `ρ`; only the fine partition moves.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::losses::Hierarchy;
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    /// Number of circles and of fine classes; even.
    pub k: usize,
    pub n_points: usize,
    /// Fraction of each circle not held by its dominant subclass.
    pub redundancy: f64,
    /// Half-width of the uniform radial noise. `None` means `0.02 · 2/K`.
    #[serde(default)]
    pub radial_jitter: Option<f64>,
    /// Rotation (radians) of circle `j`'s arc layout is `j` times this.
    #[serde(default)]
    pub sector_offset_per_circle: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CircleSpec {
    pub fn new(k: usize, n_points: usize, redundancy: f64, seed: u64) -> Self {
        CircleSpec {
            k,
            n_points,
            redundancy,
            radial_jitter: None,
            sector_offset_per_circle: 0.0,
            seed,
        }
    }

    /// Largest admissible redundancy, `1 - 2/K`.
    pub fn max_redundancy(k: usize) -> f64 {
        1.0 - 2.0 / k as f64
    }

    pub fn jitter(&self) -> f64 {
        self.radial_jitter.unwrap_or(0.02 * 2.0 / self.k as f64)
    }

    pub fn radius(&self, circle: usize) -> f64 {
        2.0 * circle as f64 / self.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || !self.k.is_multiple_of(2) {
            return Err(Error::config(format!(
                "number of circles K must be even and >= 2, got {}",
                self.k
            )));
        }
        if self.n_points == 0 {
            return Err(Error::config("n_points must be positive"));
        }
        let max = Self::max_redundancy(self.k);
        if !(self.redundancy >= 0.0 && self.redundancy <= max + 1e-12) {
            return Err(Error::config(format!(
                "redundancy {} outside [0, 1 - 2/K] = [0, {max}] for K = {}",
                self.redundancy, self.k
            )));
        }
        let jitter = self.jitter();
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::config(format!(
                "radial jitter must be >= 0, got {jitter}"
            )));
        }
        if !self.sector_offset_per_circle.is_finite() {
            return Err(Error::config("sector offset must be finite"));
        }
        Ok(())
    }

    /// Fine class of a point at angle `theta` on circle `j` (1-based).
    pub fn subclass_at(&self, circle: usize, theta: f64) -> usize {
        let half = self.k / 2;
        let parity = (circle - 1) % 2;
        let position = (circle - 1) / 2;
        let rel = (theta - circle as f64 * self.sector_offset_per_circle).rem_euclid(TAU);
        let dominant_arc = TAU * (1.0 - self.redundancy);
        let slot = if rel < dominant_arc || half == 1 {
            position
        } else {
            let width = TAU * self.redundancy / (half - 1) as f64;
            let s = (((rel - dominant_arc) / width) as usize).min(half - 2);
            (position + 1 + s) % half
        };
        2 * slot + parity
    }

    /// Odd circles (and subclasses `0, 2, 4, …`) form `C0`, i.e. `Y = 1`.
    pub fn hierarchy(&self) -> Result<Hierarchy> {
        Hierarchy::new(
            self.k,
            (0..self.k).step_by(2).collect(),
            (1..self.k).step_by(2).collect(),
        )
    }
}

pub fn generate_circles(spec: &CircleSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let k = spec.k;
    let jitter = spec.jitter();
    let base = spec.n_points / k;
    let extra = spec.n_points % k;
    let mut rng = seed::rng(spec.seed);

    let mut coords = Vec::with_capacity(2 * spec.n_points);
    let mut labels = Vec::with_capacity(spec.n_points);
    let mut circles = Vec::with_capacity(spec.n_points);
    for j in 1..=k {
        let count = base + usize::from(j <= extra);
        let r0 = spec.radius(j);
        for _ in 0..count {
            let theta = rng.gen_range(0.0..TAU);
            let r = r0 + jitter * (2.0 * rng.gen::<f64>() - 1.0);
            coords.push(r * theta.cos());
            coords.push(r * theta.sin());
            labels.push(spec.subclass_at(j, theta));
            circles.push(j);
        }
    }
    let names = (0..k).map(|i| format!("s{i}")).collect();
    LabeledDataset::new(
        "circles",
        Matrix::from_vec(labels.len(), 2, coords)?,
        labels,
        spec.hierarchy()?,
        names,
    )?
    .with_circles(circles)
}

/// Mean over circles of the fraction of points not in the circle's most
/// frequent subclass.
pub fn redundancy_of(data: &LabeledDataset) -> Result<f64> {
    let circles = data
        .circle_index()
        .ok_or_else(|| Error::domain("dataset carries no circle metadata"))?;
    let n_circles = circles.iter().copied().max().unwrap_or(0);
    let mut counts = vec![vec![0usize; data.k()]; n_circles + 1];
    for (&c, &l) in circles.iter().zip(data.fine_labels()) {
        counts[c][l] += 1;
    }
    let fractions: Vec<f64> = counts
        .iter()
        .filter_map(|row| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| 1.0 - *row.iter().max().unwrap() as f64 / total as f64)
        })
        .collect();
    Ok(fractions.iter().sum::<f64>() / fractions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_circle_fractions(d: &LabeledDataset) -> Vec<Vec<f64>> {
        let circles = d.circle_index().unwrap();
        let k = d.k();
        let mut counts = vec![vec![0usize; k]; k + 1];
        for (&c, &l) in circles.iter().zip(d.fine_labels()) {
            counts[c][l] += 1;
        }
        counts[1..]
            .iter()
            .map(|row| {
                let t: usize = row.iter().sum();
                row.iter().map(|&n| n as f64 / t as f64).collect()
            })
            .collect()
    }

    #[test]
    fn rejects_excess_redundancy() {
        let err = generate_circles(&CircleSpec::new(8, 100, 0.8, 0)).unwrap_err();
        assert!(err.to_string().contains("0.75"));
        assert!(generate_circles(&CircleSpec::new(8, 100, 0.75, 0)).is_ok());
        assert!(generate_circles(&CircleSpec::new(5, 100, 0.0, 0)).is_err());
        assert!(generate_circles(&CircleSpec::new(4, 100, -0.1, 0)).is_err());
    }

    #[test]
    fn pure_circles_at_zero_redundancy() {
        let d = generate_circles(&CircleSpec::new(4, 400, 0.0, 1)).unwrap();
        for (&c, &l) in d.circle_index().unwrap().iter().zip(d.fine_labels()) {
            assert_eq!(l, c - 1);
        }
        assert_eq!(redundancy_of(&d).unwrap(), 0.0);
    }

    #[test]
    fn max_redundancy_equalizes_subclasses() {
        let d = generate_circles(&CircleSpec::new(8, 80_000, 0.75, 2)).unwrap();
        for row in per_circle_fractions(&d) {
            let nonzero: Vec<f64> = row.into_iter().filter(|&f| f > 0.0).collect();
            assert_eq!(nonzero.len(), 4);
            for f in nonzero {
                assert!((f - 0.25).abs() < 0.015, "{f}");
            }
        }
    }

    #[test]
    fn dominant_and_minority_fractions() {
        let d = generate_circles(&CircleSpec::new(8, 80_000, 0.3, 3)).unwrap();
        for (j, row) in per_circle_fractions(&d).iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(sorted.iter().position(|&f| f == row[j]), Some(0));
            // About four binomial standard deviations at 10^4 points.
            assert!((sorted[0] - 0.70).abs() < 0.02, "{}", sorted[0]);
            for &f in &sorted[1..4] {
                assert!((f - 0.10).abs() < 0.012, "{f}");
            }
            assert!(sorted[4..].iter().all(|&f| f == 0.0));
        }
        assert!((redundancy_of(&d).unwrap() - 0.3).abs() < 0.01);
    }

    #[test]
    fn coarse_structure() {
        let d = generate_circles(&CircleSpec::new(8, 4000, 0.5, 4)).unwrap();
        let y = d.coarse_labels();
        for (mu, &c) in d.circle_index().unwrap().iter().enumerate() {
            assert_eq!(y[mu] as usize, c % 2);
            let r = d
                .features()
                .row(mu)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!((r - c as f64 / 4.0).abs() <= 0.005 + 1e-12);
        }
    }

    #[test]
    fn remainder_goes_inside_and_geometry_ignores_rho() {
        let a = generate_circles(&CircleSpec::new(4, 10, 0.0, 5)).unwrap();
        let b = generate_circles(&CircleSpec::new(4, 10, 0.5, 5)).unwrap();
        assert_eq!(a.circle_index().unwrap(), &[1, 1, 1, 2, 2, 2, 3, 3, 4, 4]);
        assert_eq!(a.features(), b.features());
        assert_eq!(a.coarse_labels(), b.coarse_labels());
    }

    #[test]
    fn missing_metadata_is_domain_error() {
        let d = generate_circles(&CircleSpec::new(4, 8, 0.0, 0)).unwrap();
        let stripped = LabeledDataset::new(
            "x",
            d.features().clone(),
            d.fine_labels().to_vec(),
            d.hierarchy().clone(),
            d.fine_names().to_vec(),
        )
        .unwrap();
        assert!(matches!(redundancy_of(&stripped), Err(Error::Domain(_))));
    }
}
