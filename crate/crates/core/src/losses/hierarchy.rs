use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Two-level label hierarchy: the K fine classes split into coarse groups
/// `c0` and `c1`. Fine class indices are zero-based.
///
/// The coarse label of a fine class is 1 when it belongs to `c0` and 0 when
/// it belongs to `c1`, so `Y = Σ_{i∈C0} y_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawHierarchy", into = "RawHierarchy")]
pub struct Hierarchy {
    k: usize,
    c0: Vec<usize>,
    c1: Vec<usize>,
    /// `in_c0[i]` caches membership of fine class `i`.
    in_c0: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct RawHierarchy {
    k: usize,
    c0: Vec<usize>,
    c1: Vec<usize>,
}

impl TryFrom<RawHierarchy> for Hierarchy {
    type Error = Error;

    fn try_from(raw: RawHierarchy) -> Result<Self> {
        Hierarchy::new(raw.k, raw.c0, raw.c1)
    }
}

impl From<Hierarchy> for RawHierarchy {
    fn from(h: Hierarchy) -> Self {
        RawHierarchy {
            k: h.k,
            c0: h.c0,
            c1: h.c1,
        }
    }
}

impl Hierarchy {
    pub fn new(k: usize, mut c0: Vec<usize>, mut c1: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::config(format!("hierarchy needs K >= 2, got {k}")));
        }
        if c0.is_empty() || c1.is_empty() {
            return Err(Error::config("both coarse classes must be non-empty"));
        }
        c0.sort_unstable();
        c1.sort_unstable();
        let mut seen = vec![0u8; k];
        for &i in c0.iter().chain(&c1) {
            if i >= k {
                return Err(Error::config(format!(
                    "fine class index {i} out of range for K = {k}"
                )));
            }
            seen[i] += 1;
        }
        if let Some(i) = seen.iter().position(|&n| n != 1) {
            let what = if seen[i] == 0 {
                "missing from"
            } else {
                "repeated in"
            };
            return Err(Error::config(format!(
                "fine class {i} is {what} the coarse partition"
            )));
        }
        let mut in_c0 = vec![false; k];
        for &i in &c0 {
            in_c0[i] = true;
        }
        Ok(Hierarchy { k, c0, c1, in_c0 })
    }

    /// Partition where the first `n0` fine classes form `c0`.
    pub fn split_at(k: usize, n0: usize) -> Result<Self> {
        Hierarchy::new(k, (0..n0).collect(), (n0..k).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c0(&self) -> &[usize] {
        &self.c0
    }

    pub fn c1(&self) -> &[usize] {
        &self.c1
    }

    #[inline]
    pub fn in_c0(&self, fine: usize) -> bool {
        self.in_c0[fine]
    }

    /// Coarse label `Y` of a fine class.
    #[inline]
    pub fn coarse_label(&self, fine: usize) -> u8 {
        u8::from(self.in_c0[fine])
    }

    /// Fine classes sharing a coarse class with `fine` (including itself).
    pub fn siblings(&self, fine: usize) -> &[usize] {
        if self.in_c0[fine] {
            &self.c0
        } else {
            &self.c1
        }
    }

    /// True when every coarse class holds exactly one fine class.
    pub fn is_singleton(&self) -> bool {
        self.c0.len() == 1 && self.c1.len() == 1
    }

    /// Probability mass on `c0` and on `c1` for one softmax row.
    #[inline]
    pub fn split_mass(&self, probs: &[f64]) -> (f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if self.in_c0[i] {
                s0 += p;
            } else {
                s1 += p;
            }
        }
        (s0, s1)
    }

    /// Coarse prediction of a fine model: `Ŷ = Σ_{k∈C0} ŷ_k` for each row.
    pub fn aggregate(&self, fine_probs: &Matrix) -> Result<Vec<f64>> {
        if fine_probs.cols() != self.k {
            return Err(Error::config(format!(
                "hierarchy has K = {} but probabilities have {} columns",
                self.k,
                fine_probs.cols()
            )));
        }
        fine_probs
            .iter_rows()
            .enumerate()
            .map(|(mu, row)| {
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::domain(format!("row {mu} sums to {total}, not 1")));
                }
                Ok(self.c0.iter().map(|&i| row[i]).sum())
            })
            .collect()
    }
}
