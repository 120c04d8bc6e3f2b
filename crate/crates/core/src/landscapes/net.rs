//! Fully connected network `phi(x, theta) = s_L(W_L s_{L-1}(... s_1(W_1 x + b_1) ...) + b_L)`
//! with squared-error loss, plus the zero-output initialization that makes
//! `F(theta_0)` equal to the mean squared target.
//!
//! Parameters are flattened layer-major: for each layer `l = 1..L`, the
//! weight matrix `W_l` (`d_l x d_{l-1}`, row-major) followed by the bias
//! `b_l`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector::{check_len, ParamVector};

/// Hidden-layer activation. The output layer is always the identity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `x + tanh(x)/2`: zero at zero, derivative in `(1, 1.5]`.
    #[default]
    SoftTanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::SoftTanh => x + 0.5 * x.tanh(),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::SoftTanh => {
                let t = x.tanh();
                1.0 + 0.5 * (1.0 - t * t)
            }
            Activation::Identity => 1.0,
        }
    }

    /// `inf_x s'(x)`.
    pub fn min_slope(self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    widths: Vec<usize>,
    activation: Activation,
}

impl NetSpec {
    /// `widths = [d_0, d_1, ..., d_L]` with `d_L = 1` and `L >= 2`.
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::precondition("network depth must be at least 2"));
        }
        if widths.contains(&0) {
            return Err(Error::precondition("layer widths must be positive"));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::precondition("output width must be 1"));
        }
        Ok(NetSpec { widths, activation })
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `p = sum_l d_l (d_{l-1} + 1)`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Offset of `W_l` in the flat vector (`layer` is 1-based).
    pub fn weight_offset(&self, layer: usize) -> usize {
        self.widths[..layer]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    /// Offset of `b_l` in the flat vector (`layer` is 1-based).
    pub fn bias_offset(&self, layer: usize) -> usize {
        self.weight_offset(layer) + self.widths[layer] * self.widths[layer - 1]
    }

    /// Product `c_{L-1} ... c_1 d_{L-1} ... d_1` used by the annulus lower bound.
    pub fn slope_width_product(&self) -> f64 {
        let l = self.depth();
        (1..l)
            .map(|i| self.activation.min_slope() * self.widths[i] as f64)
            .product()
    }
}

/// Training inputs (as rows) and scalar targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    lambda_min: f64,
}

impl Dataset {
    /// Requires linearly independent inputs, hence `d >= n`.
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(Error::precondition("dataset must be non-empty"));
        }
        check_len(n, targets.len())?;
        let d = inputs[0].len();
        for x in &inputs {
            check_len(d, x.len())?;
        }
        if d < n {
            return Err(Error::precondition(format!(
                "{n} inputs in dimension {d} cannot be linearly independent"
            )));
        }
        if inputs.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Dataset::new"));
        }
        let x = DMatrix::from_fn(d, n, |r, c| inputs[c][r]);
        let gram = (x.transpose() * &x) / n as f64;
        let lambda_min = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let scale = inputs.iter().flatten().map(|v| v * v).sum::<f64>() / n as f64;
        if !(lambda_min > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::precondition("inputs are not linearly independent"));
        }
        Ok(Dataset {
            inputs,
            targets,
            lambda_min,
        })
    }

    /// `x_i = scale * e_i + perturbation * (1, ..., 1)`.
    pub fn shifted_basis(n: usize, dim: usize, scale: f64, perturbation: f64, targets: Vec<f64>) -> Result<Self> {
        if n > dim {
            return Err(Error::precondition(format!("need dim >= n, got n = {n}, dim = {dim}")));
        }
        let inputs = (0..n)
            .map(|i| {
                (0..dim)
                    .map(|j| perturbation + if i == j { scale } else { 0.0 })
                    .collect()
            })
            .collect();
        Dataset::new(inputs, targets)
    }

    /// Targets drawn uniformly in `[0, scale]`.
    pub fn random_targets(n: usize, scale: f64, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| scale * rng.uniform()).collect()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Smallest eigenvalue of `X^T X / n`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `(1/n) sum y_i^2`.
    pub fn mean_sq_target(&self) -> f64 {
        self.targets.iter().map(|y| y * y).sum::<f64>() / self.len() as f64
    }
}

/// Squared-error loss of a [`NetSpec`] on a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkLoss {
    net: NetSpec,
    data: Dataset,
}

impl NetworkLoss {
    pub fn new(net: NetSpec, data: Dataset) -> Result<Self> {
        check_len(net.input_dim(), data.dim())?;
        Ok(NetworkLoss { net, data })
    }

    pub fn net(&self) -> &NetSpec {
        &self.net
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Network output for a single input.
    pub fn output(&self, x: &[f64], theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        check_len(self.net.input_dim(), x.len())?;
        Ok(self.forward(x, theta.as_slice()).output())
    }

    fn forward(&self, x: &[f64], theta: &[f64]) -> Forward {
        let widths = &self.net.widths;
        let depth = self.net.depth();
        let mut pre = Vec::with_capacity(depth);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        post.push(x.to_vec());
        for l in 1..=depth {
            let (rows, cols) = (widths[l], widths[l - 1]);
            let w = &theta[self.net.weight_offset(l)..][..rows * cols];
            let b = &theta[self.net.bias_offset(l)..][..rows];
            let input = &post[l - 1];
            let z: Vec<f64> = (0..rows)
                .map(|r| {
                    w[r * cols..(r + 1) * cols]
                        .iter()
                        .zip(input)
                        .map(|(wi, xi)| wi * xi)
                        .sum::<f64>()
                        + b[r]
                })
                .collect();
            let a = if l == depth {
                z.clone()
            } else {
                z.iter().map(|&v| self.net.activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(a);
        }
        Forward { pre, post }
    }
}

struct Forward {
    /// Pre-activations `z_1..z_L`.
    pre: Vec<Vec<f64>>,
    /// Activations `a_0 = x, a_1..a_L`.
    post: Vec<Vec<f64>>,
}

impl Forward {
    fn output(&self) -> f64 {
        self.post.last().unwrap()[0]
    }
}

impl Objective for NetworkLoss {
    fn dim(&self) -> usize {
        self.net.param_count()
    }

    fn value(&self, theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        let n = self.data.len() as f64;
        let loss = self
            .data
            .inputs
            .iter()
            .zip(&self.data.targets)
            .map(|(x, y)| {
                let r = y - self.forward(x, theta.as_slice()).output();
                r * r
            })
            .sum::<f64>()
            / n;
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFinite("network loss"))
        }
    }

    fn gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        self.value_and_gradient(theta).map(|(_, g)| g)
    }

    fn value_and_gradient(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        self.check_dim(theta)?;
        let widths = &self.net.widths;
        let depth = self.net.depth();
        let n = self.data.len() as f64;
        let th = theta.as_slice();
        let mut grad = vec![0.0; th.len()];
        let mut loss = 0.0;
        for (x, y) in self.data.inputs.iter().zip(&self.data.targets) {
            let fw = self.forward(x, th);
            let residual = fw.output() - y;
            loss += residual * residual;
            // delta = dF/dz_l, starting from the identity output layer.
            let mut delta = vec![2.0 * residual / n];
            for l in (1..=depth).rev() {
                let (rows, cols) = (widths[l], widths[l - 1]);
                let w_off = self.net.weight_offset(l);
                let b_off = self.net.bias_offset(l);
                let input = &fw.post[l - 1];
                for r in 0..rows {
                    let gw = &mut grad[w_off + r * cols..w_off + (r + 1) * cols];
                    for (g, xi) in gw.iter_mut().zip(input) {
                        *g += delta[r] * xi;
                    }
                    grad[b_off + r] += delta[r];
                }
                if l > 1 {
                    let w = &th[w_off..w_off + rows * cols];
                    let z_prev = &fw.pre[l - 2];
                    delta = (0..cols)
                        .map(|c| {
                            let back: f64 = (0..rows).map(|r| w[r * cols + c] * delta[r]).sum();
                            back * self.net.activation.derivative(z_prev[c])
                        })
                        .collect();
                }
            }
        }
        loss /= n;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("network gradient"));
        }
        Ok((loss, ParamVector::from_finite(grad)))
    }

    fn name(&self) -> &str {
        match self.net.activation {
            Activation::SoftTanh => "chatterjee_net",
            Activation::Identity => "deep_linear",
        }
    }
}

/// Zero-output initialization: `W_1 = 0`, all biases zero, hidden weights
/// `W_2..W_{L-1}` uniform in `[R, 2R]` and output weights uniform in `[A, 2A]`.
pub fn chatterjee_init(net: &NetSpec, weight_min: f64, output_min: f64, rng: &mut RngStream) -> Result<ParamVector> {
    if !(weight_min > 0.0 && weight_min.is_finite()) {
        return Err(Error::precondition(format!("R must be positive, got {weight_min}")));
    }
    if !(output_min > weight_min / 2.0 && output_min.is_finite()) {
        return Err(Error::precondition(format!(
            "need A > R/2, got A = {output_min}, R = {weight_min}"
        )));
    }
    let depth = net.depth();
    let mut theta = vec![0.0; net.param_count()];
    for l in 2..=depth {
        let lo = if l == depth { output_min } else { weight_min };
        let off = net.weight_offset(l);
        let len = net.widths[l] * net.widths[l - 1];
        for w in &mut theta[off..off + len] {
            *w = rng.uniform_range(lo, 2.0 * lo);
        }
    }
    Ok(ParamVector::from_finite(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{fd_gradient, gradient_discrepancy};

    fn fixture(activation: Activation) -> NetworkLoss {
        let net = NetSpec::new(vec![4, 3, 2, 1], activation).unwrap();
        let data = Dataset::shifted_basis(3, 4, 1.0, 0.1, vec![0.2, 0.5, 0.9]).unwrap();
        NetworkLoss::new(net, data).unwrap()
    }

    #[test]
    fn parameter_count_and_layout() {
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        assert_eq!(net.param_count(), 3 * 5 + 2 * 4 + 3);
        assert_eq!(net.weight_offset(1), 0);
        assert_eq!(net.bias_offset(1), 12);
        assert_eq!(net.weight_offset(2), 15);
        assert_eq!(net.bias_offset(2), 21);
        assert_eq!(net.weight_offset(3), 23);
        assert_eq!(net.bias_offset(3), 25);
        assert_eq!(net.slope_width_product(), 6.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NetSpec::new(vec![4, 1], Activation::SoftTanh).is_err());
        assert!(NetSpec::new(vec![4, 3, 2], Activation::SoftTanh).is_err());
        assert!(NetSpec::new(vec![4, 0, 1], Activation::SoftTanh).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![2.0]], vec![0.0, 0.0]).is_err());
        assert!(Dataset::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn activation_slope_bounds() {
        let act = Activation::SoftTanh;
        assert_eq!(act.apply(0.0), 0.0);
        for i in -400..=400 {
            let x = i as f64 * 0.05;
            let d = act.derivative(x);
            assert!((1.0..=1.5).contains(&d), "slope {d} at {x}");
        }
        assert_eq!(act.derivative(0.0), 1.5);
    }

    #[test]
    fn lambda_min_of_scaled_basis() {
        let data = Dataset::shifted_basis(3, 4, 2.0, 0.0, vec![0.0; 3]).unwrap();
        assert!((data.lambda_min() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn init_zeroes_output_and_loss_is_mean_square_target() {
        let loss = fixture(Activation::SoftTanh);
        let mut rng = RngStream::new(5, 0);
        let theta = chatterjee_init(loss.net(), 4.0, 3.0, &mut rng).unwrap();
        for x in loss.data().inputs() {
            assert_eq!(loss.output(x, &theta).unwrap(), 0.0);
        }
        assert_eq!(loss.value(&theta).unwrap(), loss.data().mean_sq_target());
        let hidden = &theta.as_slice()[15..21];
        assert!(hidden.iter().all(|w| (4.0..=8.0).contains(w)));
        let out = &theta.as_slice()[23..25];
        assert!(out.iter().all(|w| (3.0..=6.0).contains(w)));
    }

    #[test]
    fn init_checks_output_weight_bound() {
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert!(chatterjee_init(&net, 4.0, 3.0, &mut rng).is_ok());
        assert!(chatterjee_init(&net, 8.0, 3.0, &mut rng).is_err());
        assert!(chatterjee_init(&net, 4.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn zero_targets_at_zero_output_give_zero_loss() {
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        let data = Dataset::shifted_basis(3, 4, 1.0, 0.1, vec![0.0; 3]).unwrap();
        let loss = NetworkLoss::new(net.clone(), data).unwrap();
        let theta = chatterjee_init(&net, 4.0, 3.0, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(loss.value(&theta).unwrap(), 0.0);
        assert_eq!(loss.gradient(&theta).unwrap(), ParamVector::zeros(net.param_count()));
    }

    #[test]
    fn linear_net_exact_interpolant() {
        // W_1 = I (3x3), W_2 = (1, 1, 1), x_i = e_i, y_i = 1.
        let net = NetSpec::new(vec![3, 3, 1], Activation::Identity).unwrap();
        let inputs = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let data = Dataset::new(inputs, vec![1.0; 3]).unwrap();
        let loss = NetworkLoss::new(net.clone(), data).unwrap();
        let mut theta = vec![0.0; net.param_count()];
        for i in 0..3 {
            theta[i * 3 + i] = 1.0;
        }
        let w2 = net.weight_offset(2);
        theta[w2..w2 + 3].copy_from_slice(&[1.0, 1.0, 1.0]);
        let theta = ParamVector::new(theta).unwrap();
        assert_eq!(loss.value(&theta).unwrap(), 0.0);
        assert_eq!(loss.gradient(&theta).unwrap(), ParamVector::zeros(net.param_count()));
    }

    #[test]
    fn backprop_matches_central_differences() {
        for act in [Activation::SoftTanh, Activation::Identity] {
            let loss = fixture(act);
            let mut rng = RngStream::new(11, 3);
            for _ in 0..20 {
                let theta = ParamVector::new((0..loss.dim()).map(|_| rng.normal()).collect()).unwrap();
                let g = loss.gradient(&theta).unwrap();
                let fd = fd_gradient(&loss, &theta, 1e-5).unwrap();
                let err = gradient_discrepancy(&g, &fd, 1e-10);
                assert!(err <= 1e-6, "{act:?}: discrepancy {err}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let loss = fixture(Activation::SoftTanh);
        assert!(matches!(
            loss.value(&ParamVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
