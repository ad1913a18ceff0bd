use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{ProbeConfig, ProbeError};
use crate::rng;

/// Weights of `softmax(W2 · relu(W1 · x + b1) + b2)`.
///
/// The same shape is reused for gradients and for both Adam moment
/// accumulators. The flat order used by [`ProbeParams::to_flat`] is
/// `w1` row-major, `b1`, `w2` row-major, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ProbeParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden_dim, input_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((num_classes, hidden_dim)),
            b2: Array1::zeros(num_classes),
        }
    }

    /// Each layer drawn from `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`, filled in flat order.
    pub fn uniform_init(input_dim: usize, hidden_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut params = Self::zeros(input_dim, hidden_dim, num_classes);
        let mut g = rng::generator(seed);
        let mut draw = |bound: f64| bound * (2.0 * rng::uniform_f64(&mut g) - 1.0);
        let first = (1.0 / input_dim as f64).sqrt();
        let second = (1.0 / hidden_dim as f64).sqrt();
        params.w1.iter_mut().for_each(|w| *w = draw(first));
        params.b1.iter_mut().for_each(|w| *w = draw(first));
        params.w2.iter_mut().for_each(|w| *w = draw(second));
        params.b2.iter_mut().for_each(|w| *w = draw(second));
        params
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.w1.dim() == other.w1.dim()
            && self.b1.dim() == other.b1.dim()
            && self.w2.dim() == other.w2.dim()
            && self.b2.dim() == other.b2.dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(self.b1.iter()).chain(self.w2.iter()).chain(self.b2.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()).chain(self.b2.iter_mut())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<(), ProbeError> {
        if values.len() != self.len() {
            return Err(ProbeError::Dimension { expected: self.len(), got: values.len() });
        }
        self.iter_mut().zip(values).for_each(|(dst, src)| *dst = *src);
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Probe parameters together with Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeNetwork {
    pub params: ProbeParams,
    pub first_moment: ProbeParams,
    pub second_moment: ProbeParams,
    /// Number of Adam updates applied so far.
    pub step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

/// Intermediate activations of a batch forward pass.
struct Activations {
    hidden_pre: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array2<f64>,
}

fn softmax_in_place(mut row: ndarray::ArrayViewMut1<f64>) {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    row.mapv_inplace(|v| (v - max).exp());
    let sum = row.sum();
    row.mapv_inplace(|v| v / sum);
}

/// `ln sum exp(row)` with max subtraction.
fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl ProbeNetwork {
    /// Fresh network initialized from `config.seed`.
    pub fn new(config: &ProbeConfig) -> Result<Self, ProbeError> {
        config.validate()?;
        let params = ProbeParams::uniform_init(
            config.input_dim,
            config.hidden_dim,
            config.num_classes,
            rng::derive_seed(config.seed, 0),
        );
        Ok(Self::from_params(params, config))
    }

    pub fn from_params(params: ProbeParams, config: &ProbeConfig) -> Self {
        let (d, h, k) = (params.input_dim(), params.hidden_dim(), params.num_classes());
        Self {
            params,
            first_moment: ProbeParams::zeros(d, h, k),
            second_moment: ProbeParams::zeros(d, h, k),
            step: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.params.num_classes()
    }

    fn check_input(&self, features: &ArrayView2<f64>) -> Result<(), ProbeError> {
        if features.ncols() != self.input_dim() {
            return Err(ProbeError::Dimension { expected: self.input_dim(), got: features.ncols() });
        }
        Ok(())
    }

    fn activations(&self, features: ArrayView2<f64>) -> Activations {
        let p = &self.params;
        let hidden_pre = features.dot(&p.w1.t()) + &p.b1;
        let hidden = hidden_pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&p.w2.t()) + &p.b2;
        Activations { hidden_pre, hidden, logits }
    }

    /// Class probabilities for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ProbeError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector shape");
        Ok(self.predict_proba(view)?.into_raw_vec_and_offset().0)
    }

    /// Row-wise class probabilities for a batch of inputs.
    pub fn predict_proba(&self, features: ArrayView2<f64>) -> Result<Array2<f64>, ProbeError> {
        self.check_input(&features)?;
        let mut probs = self.activations(features).logits;
        probs.axis_iter_mut(Axis(0)).for_each(softmax_in_place);
        Ok(probs)
    }

    /// Per-example cross-entropy `-ln p(label | x)` in nats.
    pub fn example_losses(&self, features: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>, ProbeError> {
        self.check_input(&features)?;
        if features.nrows() != labels.len() {
            return Err(ProbeError::Shape(format!("{} rows but {} labels", features.nrows(), labels.len())));
        }
        let logits = self.activations(features).logits;
        Ok(logits.outer_iter().zip(labels).map(|(row, &y)| log_sum_exp(row) - row[y]).collect())
    }

    /// Mean cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grads(
        &self,
        features: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<(f64, ProbeParams), ProbeError> {
        self.check_input(&features)?;
        let n = labels.len();
        if n == 0 {
            return Err(ProbeError::Empty("batch"));
        }
        if features.nrows() != n {
            return Err(ProbeError::Shape(format!("{} rows but {n} labels", features.nrows())));
        }
        let k = self.num_classes();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(ProbeError::Shape(format!("label {bad} out of range for K={k}")));
        }

        let Activations { hidden_pre, hidden, logits } = self.activations(features);
        let scale = 1.0 / n as f64;
        let mut loss = 0.0;
        // dL/dlogits = (softmax - onehot) / n
        let mut d_logits = logits;
        for (mut row, &y) in d_logits.outer_iter_mut().zip(labels) {
            loss += log_sum_exp(row.view()) - row[y];
            softmax_in_place(row.view_mut());
            row[y] -= 1.0;
            row.mapv_inplace(|v| v * scale);
        }
        loss *= scale;

        let w2 = d_logits.t().dot(&hidden);
        let b2 = d_logits.sum_axis(Axis(0));
        let mut d_hidden = d_logits.dot(&self.params.w2);
        Zip::from(&mut d_hidden).and(&hidden_pre).for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = d_hidden.t().dot(&features);
        let b1 = d_hidden.sum_axis(Axis(0));
        let grads = ProbeParams { w1, b1, w2, b2 };

        if !loss.is_finite() {
            return Err(ProbeError::NonFinite("loss"));
        }
        if !grads.all_finite() {
            return Err(ProbeError::NonFinite("gradients"));
        }
        Ok((loss, grads))
    }

    /// One bias-corrected Adam update with learning rate `lr`.
    pub fn adam_step(&mut self, grads: &ProbeParams, lr: f64) -> Result<(), ProbeError> {
        if !grads.same_shape(&self.params) {
            return Err(ProbeError::Shape("gradient shapes do not match the network".into()));
        }
        if !grads.all_finite() {
            return Err(ProbeError::NonFinite("gradients"));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let correction1 = 1.0 - b1.powi(self.step as i32);
        let correction2 = 1.0 - b2.powi(self.step as i32);
        let params = self.params.iter_mut();
        let m = self.first_moment.iter_mut();
        let v = self.second_moment.iter_mut();
        for (((p, m), v), &g) in params.zip(m).zip(v).zip(grads.iter()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn config(d: usize, h: usize, k: usize) -> ProbeConfig {
        ProbeConfig::new(d, k).with_hidden_dim(h)
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let net = ProbeNetwork::from_params(ProbeParams::zeros(3, 4, 5), &config(3, 4, 5));
        let p = net.forward(&[1.0, -2.0, 7.5]).unwrap();
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_output_bias_is_irrelevant() {
        let mut net = ProbeNetwork::new(&config(3, 5, 3).with_seed(4)).unwrap();
        let x = [0.3, -1.2, 2.0];
        let before = net.forward(&x).unwrap();
        net.params.b2 += 17.0;
        let after = net.forward(&x).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_evaluated_two_two_two_network() {
        let params = ProbeParams {
            w1: array![[1.0, -1.0], [0.5, 2.0]],
            b1: array![0.0, -1.0],
            w2: array![[1.0, 0.0], [-1.0, 2.0]],
            b2: array![0.5, 0.0],
        };
        let net = ProbeNetwork::from_params(params, &config(2, 2, 2));
        // x = (1, 2): hidden pre = (-1, 3.5) -> relu (0, 3.5); logits = (0.5, 7)
        let p = net.forward(&[1.0, 2.0]).unwrap();
        let e = (-6.5f64).exp();
        assert!((p[0] - e / (1.0 + e)).abs() < 1e-9);
        assert!((p[1] - 1.0 / (1.0 + e)).abs() < 1e-9);
        // x = (2, 0): hidden pre = (2, 0) -> (2, 0); logits = (2.5, -2)
        let p = net.forward(&[2.0, 0.0]).unwrap();
        let e = (-4.5f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-9);
    }

    #[test]
    fn uniform_predictor_costs_ln_two() {
        let net = ProbeNetwork::from_params(ProbeParams::zeros(2, 3, 2), &config(2, 3, 2));
        let x = array![[1.0, 2.0], [3.0, 4.0], [0.0, 1.0]];
        let (loss, _) = net.loss_and_grads(x.view(), &[0, 1, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_costs_nothing() {
        let mut params = ProbeParams::zeros(1, 1, 2);
        params.b2[0] = 60.0;
        let net = ProbeNetwork::from_params(params, &config(1, 1, 2));
        let (loss, _) = net.loss_and_grads(array![[1.0]].view(), &[0]).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn input_errors() {
        let net = ProbeNetwork::new(&config(3, 2, 2)).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(ProbeError::Dimension { expected: 3, got: 1 })));
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(matches!(net.loss_and_grads(empty.view(), &[]), Err(ProbeError::Empty(_))));
        assert!(net.loss_and_grads(array![[1.0, 1.0, 1.0]].view(), &[2]).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_a_fixed_point() {
        let mut net = ProbeNetwork::new(&config(3, 4, 2).with_seed(1)).unwrap();
        let before = net.params.clone();
        net.adam_step(&ProbeParams::zeros(3, 4, 2), 1e-3).unwrap();
        assert_eq!(net.params, before);
        assert_eq!(net.step, 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let cfg = config(2, 3, 2);
        let mut net = ProbeNetwork::new(&cfg.clone().with_seed(2)).unwrap();
        let before = net.params.to_flat();
        let mut grads = ProbeParams::zeros(2, 3, 2);
        grads.iter_mut().enumerate().for_each(|(i, g)| *g = (i as f64 - 7.0) * 0.37);
        let lr = 0.01;
        net.adam_step(&grads, lr).unwrap();
        for ((after, before), g) in net.params.to_flat().iter().zip(&before).zip(grads.iter()) {
            let expected = before - lr * g / (g.abs() + cfg.epsilon);
            assert!((after - expected).abs() < 1e-15, "{after} vs {expected}");
        }
    }

    #[test]
    fn adam_two_steps_by_hand() {
        let cfg = config(1, 1, 2);
        let mut net = ProbeNetwork::from_params(ProbeParams::zeros(1, 1, 2), &cfg);
        net.params.w1[[0, 0]] = 0.5;
        let mut g = ProbeParams::zeros(1, 1, 2);
        let lr = 0.1;

        g.w1[[0, 0]] = 2.0;
        net.adam_step(&g, lr).unwrap();
        // m = 0.2, v = 0.004, m_hat = 2, v_hat = 4
        let p1 = 0.5 - lr * 2.0 / (2.0 + 1e-8);
        assert!((net.first_moment.w1[[0, 0]] - 0.2).abs() < 1e-12);
        assert!((net.second_moment.w1[[0, 0]] - 0.004).abs() < 1e-12);
        assert!((net.params.w1[[0, 0]] - p1).abs() < 1e-10);

        g.w1[[0, 0]] = -1.0;
        net.adam_step(&g, lr).unwrap();
        // m = 0.9*0.2 - 0.1 = 0.08; v = 0.999*0.004 + 0.001 = 0.004996
        let m_hat = 0.08 / (1.0 - 0.81);
        let v_hat: f64 = 0.004996 / (1.0 - 0.998001);
        let p2 = p1 - lr * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((net.first_moment.w1[[0, 0]] - 0.08).abs() < 1e-12);
        assert!((net.second_moment.w1[[0, 0]] - 0.004996).abs() < 1e-12);
        assert!((net.params.w1[[0, 0]] - p2).abs() < 1e-10);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut net = ProbeNetwork::new(&config(2, 3, 2)).unwrap();
        assert!(net.adam_step(&ProbeParams::zeros(3, 3, 2), 0.1).is_err());
    }
}
