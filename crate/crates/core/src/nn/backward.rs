use super::model::{ForwardTrace, Head, MlpModel};
use crate::error::{Error, Result};
use crate::losses::{Hierarchy, Objective};
use crate::matrix::Matrix;

/// Gradient of the mean batch loss, laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden_weights: Matrix,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Matrix,
    pub output_biases: Vec<f64>,
}

impl Gradients {
    /// `[W, b, V, β]`, matching [`MlpModel::param_slices_mut`].
    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.hidden_weights.as_slice(),
            &self.hidden_biases,
            self.output_weights.as_slice(),
            &self.output_biases,
        ]
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|g| g.is_finite()))
    }
}

impl MlpModel {
    pub(crate) fn check_objective(&self, objective: &dyn Objective, h: &Hierarchy) -> Result<()> {
        if !objective.supports(&self.head) {
            return Err(Error::config(format!(
                "loss '{}' cannot train a {:?} head",
                objective.kind(),
                self.head
            )));
        }
        if let Head::FineSoftmax { k } = self.head {
            if k != h.k() {
                return Err(Error::config(format!(
                    "softmax head has {k} outputs but the hierarchy has K = {}",
                    h.k()
                )));
            }
        }
        Ok(())
    }

    fn check_targets(&self, rows: usize, targets: &[usize], h: &Hierarchy) -> Result<()> {
        if rows == 0 {
            return Err(Error::domain("empty batch"));
        }
        if targets.len() != rows {
            return Err(Error::shape(format!(
                "{} targets for a batch of {rows}",
                targets.len()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= h.k()) {
            return Err(Error::domain(format!(
                "fine label {t} out of range for K = {}",
                h.k()
            )));
        }
        Ok(())
    }

    /// Mean objective over the rows of a forward trace.
    pub fn batch_loss(
        &self,
        trace: &ForwardTrace,
        targets: &[usize],
        objective: &dyn Objective,
        h: &Hierarchy,
    ) -> Result<f64> {
        self.check_objective(objective, h)?;
        self.check_targets(trace.outputs.rows(), targets, h)?;
        let total: f64 = trace
            .outputs
            .iter_rows()
            .zip(targets)
            .map(|(row, &t)| objective.sample_loss(row, t, h))
            .sum();
        Ok(total / targets.len() as f64)
    }

    /// Forward pass followed by [`MlpModel::batch_loss`].
    pub fn loss(
        &self,
        x: &Matrix,
        targets: &[usize],
        objective: &dyn Objective,
        h: &Hierarchy,
    ) -> Result<f64> {
        let trace = self.forward(x)?;
        self.batch_loss(&trace, targets, objective, h)
    }

    /// Backpropagates the mean objective of the batch `x` whose forward pass
    /// produced `trace`. `targets` holds fine class indices.
    pub fn backward(
        &self,
        x: &Matrix,
        trace: &ForwardTrace,
        targets: &[usize],
        objective: &dyn Objective,
        h: &Hierarchy,
    ) -> Result<Gradients> {
        self.check_objective(objective, h)?;
        let batch = x.rows();
        self.check_targets(batch, targets, h)?;
        if trace.outputs.rows() != batch
            || x.cols() != self.input_dim
            || trace.hidden_activations.cols() != self.hidden_count()
            || trace.outputs.cols() != self.head.out_dim()
        {
            return Err(Error::shape(
                "forward trace does not match the model and batch",
            ));
        }

        let n = self.hidden_count();
        let out = self.head.out_dim();
        let scale = 1.0 / batch as f64;
        let mut g = Gradients {
            hidden_weights: Matrix::zeros(n, self.input_dim),
            hidden_biases: vec![0.0; n],
            output_weights: Matrix::zeros(out, n),
            output_biases: vec![0.0; out],
        };
        let mut du = vec![0.0; out];
        let mut dz = vec![0.0; n];

        for (mu, &target) in targets.iter().enumerate() {
            objective.sample_grad(trace.outputs.row(mu), target, h, &mut du);
            for v in du.iter_mut() {
                *v *= scale;
            }
            let hidden = trace.hidden_activations.row(mu);
            dz.fill(0.0);
            for (o, &d) in du.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.output_biases[o] += d;
                let gv = g.output_weights.row_mut(o);
                for (gvi, &a) in gv.iter_mut().zip(hidden) {
                    *gvi += d * a;
                }
                for (dzi, &v) in dz.iter_mut().zip(self.output_weights.row(o)) {
                    *dzi += d * v;
                }
            }
            let xr = x.row(mu);
            for (i, dzi) in dz.iter_mut().enumerate() {
                *dzi *= self.activation.derivative_from_output(hidden[i]);
                if *dzi == 0.0 {
                    continue;
                }
                g.hidden_biases[i] += *dzi;
                for (gw, &xj) in g.hidden_weights.row_mut(i).iter_mut().zip(xr) {
                    *gw += *dzi * xj;
                }
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{CoarseObjective, FineObjective, HybridObjective, IntraObjective};
    use crate::nn::{Activation, MlpModel};
    use crate::seed;
    use rand::Rng;

    fn setup(
        head: Head,
        activation: Activation,
        seed_: u64,
    ) -> (MlpModel, Matrix, Vec<usize>, Hierarchy) {
        let h = Hierarchy::new(5, vec![0, 2, 4], vec![1, 3]).unwrap();
        let m = MlpModel::glorot(3, 6, head, activation, seed_).unwrap();
        let mut rng = seed::rng(seed_ + 100);
        let x =
            Matrix::from_vec(7, 3, (0..21).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let t = (0..7).map(|_| rng.gen_range(0..5)).collect();
        (m, x, t, h)
    }

    /// Central finite differences of the mean loss over every parameter.
    fn numeric(
        m: &MlpModel,
        x: &Matrix,
        t: &[usize],
        obj: &dyn Objective,
        h: &Hierarchy,
    ) -> Vec<f64> {
        let step = 1e-5;
        let mut out = Vec::new();
        let mut probe = m.clone();
        for s in 0..4 {
            let len = m.param_slices()[s].len();
            for i in 0..len {
                let orig = probe.param_slices()[s][i];
                probe.param_slices_mut()[s][i] = orig + step;
                let up = probe.loss(x, t, obj, h).unwrap();
                probe.param_slices_mut()[s][i] = orig - step;
                let down = probe.loss(x, t, obj, h).unwrap();
                probe.param_slices_mut()[s][i] = orig;
                out.push((up - down) / (2.0 * step));
            }
        }
        out
    }

    fn check(head: Head, obj: &dyn Objective) {
        for s in 0..5 {
            let (m, x, t, h) = setup(head, Activation::Tanh, s);
            let trace = m.forward(&x).unwrap();
            let g = m.backward(&x, &trace, &t, obj, &h).unwrap();
            let analytic: Vec<f64> = g.slices().iter().flat_map(|s| s.iter().copied()).collect();
            let fd = numeric(&m, &x, &t, obj, &h);
            for (a, n) in analytic.iter().zip(&fd) {
                let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-7);
                assert!(rel < 1e-4, "{:?}: analytic {a} vs numeric {n}", obj.kind());
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        check(Head::CoarseSigmoid, &CoarseObjective);
        let fine = Head::FineSoftmax { k: 5 };
        check(fine, &CoarseObjective);
        check(fine, &FineObjective);
        check(fine, &IntraObjective);
        check(fine, &HybridObjective::new(0.5).unwrap());
    }

    #[test]
    fn hybrid_zero_equals_coarse() {
        let (m, x, t, h) = setup(Head::FineSoftmax { k: 5 }, Activation::Relu, 3);
        let trace = m.forward(&x).unwrap();
        let a = m.backward(&x, &trace, &t, &CoarseObjective, &h).unwrap();
        let b = m
            .backward(&x, &trace, &t, &HybridObjective::new(0.0).unwrap(), &h)
            .unwrap();
        for (sa, sb) in a.slices().iter().zip(b.slices()) {
            for (ga, gb) in sa.iter().zip(sb) {
                assert!((ga - gb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn confident_prediction_has_vanishing_gradient() {
        let (mut m, x, _, h) = setup(Head::FineSoftmax { k: 5 }, Activation::Relu, 4);
        // Drive every logit toward class 2 through its output bias.
        m.output_biases[2] = 60.0;
        let t = vec![2; x.rows()];
        let trace = m.forward(&x).unwrap();
        let g = m.backward(&x, &trace, &t, &FineObjective, &h).unwrap();
        assert!(g.norm() < 1e-20);
    }

    #[test]
    fn incompatible_loss_is_config_error() {
        let (m, x, t, h) = setup(Head::CoarseSigmoid, Activation::Relu, 0);
        let trace = m.forward(&x).unwrap();
        let err = m.backward(&x, &trace, &t, &FineObjective, &h).unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let (m, x, t, _) = setup(Head::FineSoftmax { k: 5 }, Activation::Relu, 0);
        let h4 = Hierarchy::split_at(4, 2).unwrap();
        let trace = m.forward(&x).unwrap();
        assert!(m.backward(&x, &trace, &t, &CoarseObjective, &h4).is_err());
    }
}
