use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Hierarchy;
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Head {
    /// K softmax outputs, one per fine class.
    FineSoftmax { k: usize },
    /// A single sigmoid output predicting the coarse label.
    CoarseSigmoid,
}

impl Head {
    pub fn out_dim(&self) -> usize {
        match self {
            Head::FineSoftmax { k } => *k,
            Head::CoarseSigmoid => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value `a = f(z)`.
    #[inline]
    pub(crate) fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::config(format!(
                "unknown activation '{other}' (expected relu or tanh)"
            ))),
        }
    }
}

/// Parameters of `u = V·f(W·x + b) + β` followed by the head nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub(crate) input_dim: usize,
    pub(crate) head: Head,
    pub(crate) activation: Activation,
    /// `N × d`
    pub(crate) hidden_weights: Matrix,
    pub(crate) hidden_biases: Vec<f64>,
    /// `out_dim × N`
    pub(crate) output_weights: Matrix,
    pub(crate) output_biases: Vec<f64>,
}

/// Intermediate values of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Head pre-activations `u`, `batch × out_dim`.
    pub preactivations: Matrix,
    /// `batch × N`
    pub hidden_activations: Matrix,
    /// Softmax probabilities or sigmoid outputs, `batch × out_dim`.
    pub outputs: Matrix,
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn glorot_fill(m: &mut Matrix, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in m.as_mut_slice() {
        *w = rng.gen_range(-bound..=bound);
    }
}

/// Glorot-uniform weights, zero biases. `out_dim == 1` selects the sigmoid
/// head; anything larger a softmax head with `out_dim` classes.
pub fn glorot_init(d: usize, n: usize, out_dim: usize, seed: u64) -> Result<MlpModel> {
    let head = match out_dim {
        0 => return Err(Error::config("output dimension must be at least 1")),
        1 => Head::CoarseSigmoid,
        k => Head::FineSoftmax { k },
    };
    MlpModel::glorot(d, n, head, Activation::Relu, seed)
}

/// Hidden width for a sigmoid-head model whose parameter count matches a
/// softmax-head model with `n_fine` hidden units, `d` inputs and `k` classes.
///
/// Solves `M·(d+2) + 1 = N·(d+1+K) + K` for `M`, rounded to nearest.
pub fn match_capacity(n_fine: usize, d: usize, k: usize) -> usize {
    let num = n_fine * (d + 1 + k) + k - 1;
    let den = d + 2;
    ((2 * num + den) / (2 * den)).max(1)
}

impl MlpModel {
    pub fn glorot(
        d: usize,
        n: usize,
        head: Head,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::config("input dimension must be at least 1"));
        }
        if n == 0 {
            return Err(Error::config("hidden layer needs at least one neuron"));
        }
        if let Head::FineSoftmax { k } = head {
            if k < 2 {
                return Err(Error::config(format!("softmax head needs K >= 2, got {k}")));
            }
        }
        let out = head.out_dim();
        let mut rng = seed::rng(seed);
        let mut hidden_weights = Matrix::zeros(n, d);
        glorot_fill(&mut hidden_weights, d, n, &mut rng);
        let mut output_weights = Matrix::zeros(out, n);
        glorot_fill(&mut output_weights, n, out, &mut rng);
        Ok(MlpModel {
            input_dim: d,
            head,
            activation,
            hidden_weights,
            hidden_biases: vec![0.0; n],
            output_weights,
            output_biases: vec![0.0; out],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_biases.len()
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_weights(&self) -> &Matrix {
        &self.hidden_weights
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.hidden_biases
    }

    pub fn output_weights(&self) -> &Matrix {
        &self.output_weights
    }

    pub fn output_biases(&self) -> &[f64] {
        &self.output_biases
    }

    /// `N·(d+1) + out·(N+1)`
    pub fn param_count(&self) -> usize {
        let n = self.hidden_count();
        n * (self.input_dim + 1) + self.head.out_dim() * (n + 1)
    }

    /// Mutable views of `[W, b, V, β]`, in the same order as
    /// [`crate::nn::Gradients::slices`].
    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.hidden_weights.as_mut_slice(),
            &mut self.hidden_biases,
            self.output_weights.as_mut_slice(),
            &mut self.output_biases,
        ]
    }

    pub fn param_slices(&self) -> [&[f64]; 4] {
        [
            self.hidden_weights.as_slice(),
            &self.hidden_biases,
            self.output_weights.as_slice(),
            &self.output_biases,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        if x.cols() != self.input_dim {
            return Err(Error::shape(format!(
                "model expects {} input features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let batch = x.rows();
        let n = self.hidden_count();
        let out = self.head.out_dim();
        let mut hidden = Matrix::zeros(batch, n);
        let mut pre = Matrix::zeros(batch, out);
        for mu in 0..batch {
            let xr = x.row(mu);
            let hr = hidden.row_mut(mu);
            for (i, h) in hr.iter_mut().enumerate() {
                let z = dot(self.hidden_weights.row(i), xr) + self.hidden_biases[i];
                *h = self.activation.apply(z);
            }
            let hr = hidden.row(mu);
            for (o, u) in pre.row_mut(mu).iter_mut().enumerate() {
                *u = dot(self.output_weights.row(o), hr) + self.output_biases[o];
            }
        }
        let mut outputs = pre.clone();
        for mu in 0..batch {
            let row = outputs.row_mut(mu);
            match self.head {
                Head::FineSoftmax { .. } => softmax_in_place(row),
                Head::CoarseSigmoid => row[0] = sigmoid(row[0]),
            }
        }
        Ok(ForwardTrace {
            preactivations: pre,
            hidden_activations: hidden,
            outputs,
        })
    }

    /// Coarse probability `Ŷ` for each row: the sigmoid output, or the
    /// softmax mass aggregated over `C0`.
    pub fn predict_coarse(&self, x: &Matrix, h: &Hierarchy) -> Result<Vec<f64>> {
        let trace = self.forward(x)?;
        match self.head {
            Head::CoarseSigmoid => Ok(trace.outputs.as_slice().to_vec()),
            Head::FineSoftmax { .. } => h.aggregate(&trace.outputs),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let m = glorot_init(784, 10, 8, 7).unwrap();
        let hidden_bound = (6.0f64 / 794.0).sqrt();
        assert!((hidden_bound - 0.08693).abs() < 1e-5);
        assert!(m
            .hidden_weights()
            .as_slice()
            .iter()
            .all(|w| w.abs() <= hidden_bound));
        let out_bound = (6.0f64 / 18.0).sqrt();
        assert!(m
            .output_weights()
            .as_slice()
            .iter()
            .all(|w| w.abs() <= out_bound));
        assert!(m.hidden_biases().iter().all(|&b| b == 0.0));
        assert!(m.output_biases().iter().all(|&b| b == 0.0));
        // The draw actually spans the interval.
        let max = m
            .hidden_weights()
            .as_slice()
            .iter()
            .fold(0.0f64, |a, w| a.max(w.abs()));
        assert!(max > 0.9 * hidden_bound);
    }

    #[test]
    fn glorot_is_deterministic() {
        assert_eq!(
            glorot_init(5, 4, 3, 11).unwrap(),
            glorot_init(5, 4, 3, 11).unwrap()
        );
        assert_ne!(
            glorot_init(5, 4, 3, 11).unwrap(),
            glorot_init(5, 4, 3, 12).unwrap()
        );
    }

    #[test]
    fn glorot_rejects_zero_dims() {
        assert!(matches!(glorot_init(0, 4, 3, 0), Err(Error::Config(_))));
        assert!(matches!(glorot_init(3, 4, 0, 0), Err(Error::Config(_))));
        assert!(matches!(glorot_init(3, 0, 2, 0), Err(Error::Config(_))));
    }

    fn zeroed(head: Head) -> MlpModel {
        let mut m = MlpModel::glorot(3, 5, head, Activation::Relu, 0).unwrap();
        for s in m.param_slices_mut() {
            s.fill(0.0);
        }
        m
    }

    #[test]
    fn zero_model_outputs() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let t = zeroed(Head::FineSoftmax { k: 4 }).forward(&x).unwrap();
        assert!(t.outputs.as_slice().iter().all(|&p| p == 0.25));
        let t = zeroed(Head::CoarseSigmoid).forward(&x).unwrap();
        assert!(t.outputs.as_slice().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = glorot_init(3, 2, 2, 0).unwrap();
        assert!(matches!(
            m.forward(&Matrix::zeros(1, 4)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let mut row = [1e308, 1e308, -1e308];
        softmax_in_place(&mut row);
        assert_eq!(row, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn parameter_counts() {
        let m = glorot_init(784, 10, 8, 1).unwrap();
        assert_eq!(m.param_count(), 10 * 785 + 8 * 11);
        assert_eq!(
            m.param_count(),
            m.param_slices().iter().map(|s| s.len()).sum::<usize>()
        );
    }

    #[test]
    fn capacity_matching() {
        // 60·(2+1+8) + 8 = 668 fine parameters; 167·4 + 1 = 669.
        assert_eq!(match_capacity(60, 2, 8), 167);
        // 10·(1+1+2) + 2 = 42 fine parameters; 14·3 + 1 = 43.
        assert_eq!(match_capacity(10, 1, 2), 14);
        // K = 1 reduces to the sigmoid head itself.
        assert_eq!(match_capacity(10, 784, 1), 10);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(seed in any::<u64>(), scale in 0.1f64..50.0) {
            let mut m = glorot_init(4, 6, 5, seed).unwrap();
            for s in m.param_slices_mut() {
                for v in s.iter_mut() { *v *= scale; }
            }
            let mut rng = seed::rng(seed ^ 1);
            let x = Matrix::from_vec(8, 4, (0..32).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap();
            let t = m.forward(&x).unwrap();
            for row in t.outputs.iter_rows() {
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn capacity_match_within_bound(n in 1usize..500, d in 1usize..1000, k in 1usize..20) {
            let m = match_capacity(n, d, k);
            let fine = (n * (d + 1) + k * (n + 1)) as i64;
            let coarse = (m * (d + 1) + m + 1) as i64;
            prop_assert!((fine - coarse).abs() <= (d + 2) as i64);
        }
    }
}
