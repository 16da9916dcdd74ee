use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_beta, coarse_sample, fine_sample, intra_sample, Hierarchy, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::nn::Head;

/// Which objective a model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossKind {
    Coarse,
    Fine,
    IntraClass,
    Hybrid { beta: f64 },
}

impl LossKind {
    /// Registry key.
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Coarse => "coarse",
            LossKind::Fine => "fine",
            LossKind::IntraClass => "intra",
            LossKind::Hybrid { .. } => "hybrid",
        }
    }

    pub fn param(&self) -> Option<f64> {
        match self {
            LossKind::Hybrid { beta } => Some(*beta),
            _ => None,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(beta) => write!(f, "{}:{beta}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    /// Accepts `coarse`, `fine`, `intra` and `hybrid:<beta>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let kind = match (name, param) {
            ("coarse", None) => LossKind::Coarse,
            ("fine", None) => LossKind::Fine,
            ("intra" | "intra_class", None) => LossKind::IntraClass,
            ("hybrid", Some(p)) => {
                let beta: f64 = p
                    .parse()
                    .map_err(|_| Error::config(format!("bad hybrid weight '{p}'")))?;
                check_beta(beta)?;
                LossKind::Hybrid { beta }
            }
            ("hybrid", None) => {
                return Err(Error::config(
                    "hybrid loss needs a weight, e.g. 'hybrid:0.5'",
                ))
            }
            _ => {
                return Err(Error::config(format!(
                    "unknown loss '{s}' (expected coarse, fine, intra or hybrid:<beta>)"
                )))
            }
        };
        Ok(kind)
    }
}

impl TryFrom<String> for LossKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> Self {
        k.to_string()
    }
}

/// A per-sample training objective over the output of one network head.
///
/// `output` is the head's probability row: K softmax probabilities, or the
/// single sigmoid output. `target` is always the fine class index; coarse
/// objectives derive `Y` through the hierarchy.
pub trait Objective: Send + Sync + fmt::Debug {
    fn kind(&self) -> LossKind;

    fn supports(&self, head: &Head) -> bool;

    fn sample_loss(&self, output: &[f64], target: usize, h: &Hierarchy) -> f64;

    /// Writes `∂ℓ/∂u`, the gradient with respect to the head's
    /// pre-activations, into `grad`.
    fn sample_grad(&self, output: &[f64], target: usize, h: &Hierarchy, grad: &mut [f64]);
}

#[inline]
fn inv_floor(s: f64) -> f64 {
    if s > PROB_FLOOR {
        1.0 / s
    } else {
        0.0
    }
}

/// Maps `∂ℓ/∂ŷ` (in `grad`) to `∂ℓ/∂u` through the softmax Jacobian.
fn softmax_vjp(probs: &[f64], grad: &mut [f64]) {
    let dot: f64 = probs.iter().zip(grad.iter()).map(|(p, g)| p * g).sum();
    for (g, &p) in grad.iter_mut().zip(probs) {
        *g = p * (*g - dot);
    }
}

/// `∂L_coarse/∂ŷ` for a softmax head.
fn coarse_prob_grad(probs: &[f64], target: usize, h: &Hierarchy, scale: f64, grad: &mut [f64]) {
    let (s0, s1) = h.split_mass(probs);
    let y = h.coarse_label(target);
    let (g0, g1) = if y == 1 {
        (-inv_floor(s0), 0.0)
    } else {
        (0.0, -inv_floor(s1))
    };
    for (i, g) in grad.iter_mut().enumerate() {
        *g += scale * if h.in_c0(i) { g0 } else { g1 };
    }
}

/// `∂L_intra/∂ŷ` for one sample.
fn intra_prob_grad(probs: &[f64], target: usize, h: &Hierarchy, scale: f64, grad: &mut [f64]) {
    let siblings = h.siblings(target);
    if siblings.len() == 1 {
        return;
    }
    let pt = probs[target];
    let pt_floored = super::floor(pt);
    let rest: f64 = siblings
        .iter()
        .filter(|&&j| j != target)
        .map(|&j| probs[j])
        .sum();
    let denom = pt_floored + rest;
    for &j in siblings {
        if j == target {
            if pt > PROB_FLOOR {
                grad[j] -= scale * rest / (pt_floored * denom);
            }
        } else {
            grad[j] += scale / denom;
        }
    }
}

/// Binary cross-entropy on the coarse label. On a softmax head the coarse
/// probability is the aggregated mass on `C0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoarseObjective;

impl Objective for CoarseObjective {
    fn kind(&self) -> LossKind {
        LossKind::Coarse
    }

    fn supports(&self, _head: &Head) -> bool {
        true
    }

    fn sample_loss(&self, output: &[f64], target: usize, h: &Hierarchy) -> f64 {
        let y = h.coarse_label(target);
        if output.len() == 1 {
            coarse_sample(output[0], 1.0 - output[0], y)
        } else {
            let (s0, s1) = h.split_mass(output);
            coarse_sample(s0, s1, y)
        }
    }

    fn sample_grad(&self, output: &[f64], target: usize, h: &Hierarchy, grad: &mut [f64]) {
        if output.len() == 1 {
            grad[0] = output[0] - f64::from(h.coarse_label(target));
            return;
        }
        grad.fill(0.0);
        coarse_prob_grad(output, target, h, 1.0, grad);
        softmax_vjp(output, grad);
    }
}

/// Cross-entropy over the K fine classes.
#[derive(Debug, Clone, Copy, Default)]
pub struct FineObjective;

impl Objective for FineObjective {
    fn kind(&self) -> LossKind {
        LossKind::Fine
    }

    fn supports(&self, head: &Head) -> bool {
        matches!(head, Head::FineSoftmax { .. })
    }

    fn sample_loss(&self, output: &[f64], target: usize, _h: &Hierarchy) -> f64 {
        fine_sample(output, target)
    }

    fn sample_grad(&self, output: &[f64], target: usize, _h: &Hierarchy, grad: &mut [f64]) {
        grad.copy_from_slice(output);
        if output[target] > PROB_FLOOR {
            grad[target] -= 1.0;
        } else {
            grad.fill(0.0);
        }
    }
}

/// Only the intra-class part of the fine loss.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntraObjective;

impl Objective for IntraObjective {
    fn kind(&self) -> LossKind {
        LossKind::IntraClass
    }

    fn supports(&self, head: &Head) -> bool {
        matches!(head, Head::FineSoftmax { .. })
    }

    fn sample_loss(&self, output: &[f64], target: usize, h: &Hierarchy) -> f64 {
        intra_sample(output, target, h)
    }

    fn sample_grad(&self, output: &[f64], target: usize, h: &Hierarchy, grad: &mut [f64]) {
        grad.fill(0.0);
        intra_prob_grad(output, target, h, 1.0, grad);
        softmax_vjp(output, grad);
    }
}

/// `L_coarse + β·L_intra`; β = 1 recovers the fine loss.
#[derive(Debug, Clone, Copy)]
pub struct HybridObjective {
    beta: f64,
}

impl HybridObjective {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(HybridObjective { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Objective for HybridObjective {
    fn kind(&self) -> LossKind {
        LossKind::Hybrid { beta: self.beta }
    }

    fn supports(&self, head: &Head) -> bool {
        matches!(head, Head::FineSoftmax { .. })
    }

    fn sample_loss(&self, output: &[f64], target: usize, h: &Hierarchy) -> f64 {
        let (s0, s1) = h.split_mass(output);
        coarse_sample(s0, s1, h.coarse_label(target)) + self.beta * intra_sample(output, target, h)
    }

    fn sample_grad(&self, output: &[f64], target: usize, h: &Hierarchy, grad: &mut [f64]) {
        grad.fill(0.0);
        coarse_prob_grad(output, target, h, 1.0, grad);
        if self.beta != 0.0 {
            intra_prob_grad(output, target, h, self.beta, grad);
        }
        softmax_vjp(output, grad);
    }
}

/// Builds an objective from its optional numeric parameter.
pub type ObjectiveFactory = fn(Option<f64>) -> Result<Box<dyn Objective>>;

/// Objectives registered by name.
#[derive(Clone)]
pub struct ObjectiveRegistry {
    factories: BTreeMap<String, ObjectiveFactory>,
}

fn no_param(name: &str, param: Option<f64>) -> Result<()> {
    match param {
        Some(p) => Err(Error::config(format!(
            "loss '{name}' takes no parameter (got {p})"
        ))),
        None => Ok(()),
    }
}

impl ObjectiveRegistry {
    pub fn empty() -> Self {
        ObjectiveRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with `coarse`, `fine`, `intra` and `hybrid`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("coarse", |p| {
            no_param("coarse", p)?;
            Ok(Box::new(CoarseObjective))
        });
        r.register("fine", |p| {
            no_param("fine", p)?;
            Ok(Box::new(FineObjective))
        });
        r.register("intra", |p| {
            no_param("intra", p)?;
            Ok(Box::new(IntraObjective))
        });
        r.register("hybrid", |p| {
            let beta = p.ok_or_else(|| Error::config("hybrid loss needs a weight"))?;
            Ok(Box::new(HybridObjective::new(beta)?))
        });
        r
    }

    pub fn register(&mut self, name: impl Into<String>, factory: ObjectiveFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build_named(&self, name: &str, param: Option<f64>) -> Result<Box<dyn Objective>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::config(format!(
                "no objective named '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(param)
    }

    pub fn build(&self, kind: &LossKind) -> Result<Box<dyn Objective>> {
        self.build_named(kind.name(), kind.param())
    }
}

impl Default for ObjectiveRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for s in ["coarse", "fine", "intra", "hybrid:0.25"] {
            let k: LossKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("hybrid:1.5".parse::<LossKind>().is_err());
        assert!("hybrid".parse::<LossKind>().is_err());
        assert!("focal".parse::<LossKind>().is_err());
    }

    #[test]
    fn registry_builds_every_kind() {
        let r = ObjectiveRegistry::builtin();
        for k in [
            LossKind::Coarse,
            LossKind::Fine,
            LossKind::IntraClass,
            LossKind::Hybrid { beta: 0.3 },
        ] {
            assert_eq!(r.build(&k).unwrap().kind(), k);
        }
        assert!(r.build_named("fine", Some(1.0)).is_err());
        assert!(r.build_named("nope", None).is_err());
    }

    #[test]
    fn sigmoid_head_only_supports_coarse() {
        let r = ObjectiveRegistry::builtin();
        let head = Head::CoarseSigmoid;
        assert!(r.build(&LossKind::Coarse).unwrap().supports(&head));
        assert!(!r.build(&LossKind::Fine).unwrap().supports(&head));
        assert!(!r
            .build(&LossKind::Hybrid { beta: 0.0 })
            .unwrap()
            .supports(&head));
    }

    #[test]
    fn hybrid_endpoints_match_per_sample() {
        let h = Hierarchy::new(5, vec![0, 3], vec![1, 2, 4]).unwrap();
        let p = [0.1, 0.3, 0.2, 0.15, 0.25];
        for t in 0..5 {
            let fine = FineObjective.sample_loss(&p, t, &h);
            let coarse = CoarseObjective.sample_loss(&p, t, &h);
            let h1 = HybridObjective::new(1.0).unwrap().sample_loss(&p, t, &h);
            let h0 = HybridObjective::new(0.0).unwrap().sample_loss(&p, t, &h);
            assert!((h1 - fine).abs() < 1e-12);
            assert_eq!(h0, coarse);

            let mut g_fine = [0.0; 5];
            let mut g_h1 = [0.0; 5];
            FineObjective.sample_grad(&p, t, &h, &mut g_fine);
            HybridObjective::new(1.0)
                .unwrap()
                .sample_grad(&p, t, &h, &mut g_h1);
            for (a, b) in g_fine.iter().zip(&g_h1) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
