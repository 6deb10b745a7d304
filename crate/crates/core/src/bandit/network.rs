//! Single-hidden-layer ReLU reward network `f(x) = w2 . relu(W1 x + b1) + b2`.
//!
//! Parameters are flattened as `[W1 (m x D, row-major) | b1 (m) | w2 (m) | b2]`,
//! so `p = (D + 2) m + 1`. The ReLU subgradient at exactly zero is 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient restricted to the coordinates that can be non-zero for a given input:
/// every `W1[i][j]` with `x[j] != 0`, plus all of `b1`, `w2` and `b2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseGrad {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseGrad {
    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut g = vec![0.0; p];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            g[i] = v;
        }
        g
    }

    pub fn norm_sq(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNetwork {
    pub input_dim: usize,
    pub hidden: usize,
    pub theta: Vec<f64>,
}

impl RewardNetwork {
    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        (input_dim + 2) * hidden + 1
    }

    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            theta: vec![0.0; Self::param_count(input_dim, hidden)],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, hidden);
        let a1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let (w1, rest) = net.theta.split_at_mut(hidden * input_dim);
        for w in w1 {
            *w = rng.random_range(-a1..a1);
        }
        for w in &mut rest[hidden..2 * hidden] {
            *w = rng.random_range(-a2..a2);
        }
        net
    }

    pub fn from_theta(input_dim: usize, hidden: usize, theta: Vec<f64>) -> Result<Self> {
        let p = Self::param_count(input_dim, hidden);
        if theta.len() != p {
            return Err(Error::Shape {
                expected: p,
                got: theta.len(),
            });
        }
        Ok(Self {
            input_dim,
            hidden,
            theta,
        })
    }

    pub fn param_len(&self) -> usize {
        self.theta.len()
    }

    #[inline]
    fn b1_offset(&self) -> usize {
        self.hidden * self.input_dim
    }

    #[inline]
    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden
    }

    #[inline]
    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Shape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden pre-activations, skipping zero inputs.
    fn pre_activations(&self, x: &[f64], nz: &[usize]) -> Vec<f64> {
        let d = self.input_dim;
        let b1 = &self.theta[self.b1_offset()..self.w2_offset()];
        (0..self.hidden)
            .map(|i| {
                let row = &self.theta[i * d..(i + 1) * d];
                nz.iter().fold(b1[i], |acc, &j| acc + row[j] * x[j])
            })
            .collect()
    }

    fn output(&self, pre: &[f64]) -> f64 {
        let w2 = &self.theta[self.w2_offset()..self.b2_offset()];
        let b2 = self.theta[self.b2_offset()];
        pre.iter()
            .zip(w2)
            .fold(b2, |acc, (&h, &w)| acc + w * h.max(0.0))
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let nz = nonzeros(x);
        Ok(self.output(&self.pre_activations(x, &nz)))
    }

    /// Output together with the structural-support gradient.
    pub fn forward_grad(&self, x: &[f64]) -> Result<(f64, SparseGrad)> {
        self.check(x)?;
        let nz = nonzeros(x);
        let pre = self.pre_activations(x, &nz);
        let f = self.output(&pre);
        let m = self.hidden;
        let d = self.input_dim;
        let w2 = &self.theta[self.w2_offset()..self.b2_offset()];

        let s = m * nz.len() + 2 * m + 1;
        let mut idx = Vec::with_capacity(s);
        let mut val = Vec::with_capacity(s);
        for i in 0..m {
            let gate = if pre[i] > 0.0 { w2[i] } else { 0.0 };
            for &j in &nz {
                idx.push(i * d + j);
                val.push(gate * x[j]);
            }
        }
        for (i, &h) in pre.iter().enumerate() {
            idx.push(self.b1_offset() + i);
            val.push(if h > 0.0 { w2[i] } else { 0.0 });
        }
        for (i, &h) in pre.iter().enumerate() {
            idx.push(self.w2_offset() + i);
            val.push(h.max(0.0));
        }
        idx.push(self.b2_offset());
        val.push(1.0);
        Ok((f, SparseGrad { idx, val }))
    }

    /// Dense `df/dtheta` in the documented parameter order.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_grad(x)?.1.to_dense(self.param_len()))
    }
}

pub(crate) fn nonzeros(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line dense evaluation, no sparsity tricks.
    fn dense_forward(net: &RewardNetwork, x: &[f64]) -> f64 {
        let (d, m) = (net.input_dim, net.hidden);
        let t = &net.theta;
        let mut out = t[(d + 2) * m];
        for i in 0..m {
            let mut h = t[m * d + i];
            for j in 0..d {
                h += t[i * d + j] * x[j];
            }
            out += t[m * d + m + i] * if h > 0.0 { h } else { 0.0 };
        }
        out
    }

    fn random_case(seed: u64, d: usize, m: usize) -> (RewardNetwork, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = RewardNetwork::glorot(d, m, &mut rng);
        for v in net.theta.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let x = (0..d)
            .map(|j| if j % 3 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        (net, x)
    }

    #[test]
    fn zero_parameters_give_zero() {
        let net = RewardNetwork::zeros(6, 4);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn identity_path() {
        // W1 row 0 picks x[2]; w2 = e0.
        let mut net = RewardNetwork::zeros(4, 3);
        net.theta[2] = 1.0;
        net.theta[4 * 3 + 3] = 1.0;
        assert_eq!(net.forward(&[0.0, 0.0, 0.7, 0.0]).unwrap(), 0.7);
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..20 {
            let (net, x) = random_case(seed, 24, 16);
            let a = net.forward(&x).unwrap();
            let b = dense_forward(&net, &x);
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let net = RewardNetwork::zeros(4, 2);
        assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Shape { expected: 4, got: 3 })));
        assert!(net.gradient(&[1.0; 5]).is_err());
    }

    #[test]
    fn zero_theta_gradient_structure() {
        let net = RewardNetwork::zeros(5, 3);
        let g = net.gradient(&[1.0, 2.0, 0.0, -1.0, 4.0]).unwrap();
        let p = net.param_len();
        assert_eq!(p, (5 + 2) * 3 + 1);
        assert!(g[..p - 1].iter().all(|&v| v == 0.0));
        assert_eq!(g[p - 1], 1.0);
    }

    #[test]
    fn zero_input_kills_w1_block() {
        let (net, _) = random_case(5, 10, 4);
        let g = net.gradient(&[0.0; 10]).unwrap();
        assert!(g[..40].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn central_differences() {
        let h = 1e-5;
        for seed in 0..20 {
            let (net, x) = random_case(100 + seed, 12, 8);
            let g = net.gradient(&x).unwrap();
            for (k, &gk) in g.iter().enumerate() {
                let mut plus = net.clone();
                plus.theta[k] += h;
                let mut minus = net.clone();
                minus.theta[k] -= h;
                let fd = (dense_forward(&plus, &x) - dense_forward(&minus, &x)) / (2.0 * h);
                let scale = gk.abs().max(fd.abs()).max(1e-6);
                assert!((gk - fd).abs() / scale < 1e-4, "seed {seed} coord {k}: {gk} vs {fd}");
            }
        }
    }
}
