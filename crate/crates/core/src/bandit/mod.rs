//! Neural Thompson Sampling over block-embedded contexts.
//!
//! Each round the reward network gives a mean per arm, the gradient-feature
//! kernel gives `sigma^2 = lambda g^T U^{-1} g / m`, and the arm with the
//! largest draw from `N(mean, nu^2 sigma^2)` is played. After the reward is
//! seen, `U^{-1}` absorbs `g g^T / m` (Sherman-Morrison) and the network is
//! refit to the reward history by gradient descent with weight decay
//! `lambda / t`.

mod kernel;
mod network;
mod regret;

pub use kernel::{
    DiagonalKernel, Kernel, KernelInverse, KernelMode, KernelUpdate, FULL_KERNEL_MAX_PARAMS,
    SM_DENOMINATOR_FLOOR,
};
pub use network::{RewardNetwork, SparseGrad};
pub use regret::{RegretEntry, RegretLedger};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::context::EmbeddedContext;
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const CHECKPOINT_VERSION: u32 = 1;
/// Negative variances above this are rounding noise and clamp to zero.
pub const VARIANCE_CLAMP: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDecay {
    /// `lambda / t` after the t-th observation.
    #[default]
    InverseRound,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NtsConfig {
    pub nu: f64,
    pub lambda: f64,
    /// Hidden width `m`.
    pub hidden: usize,
    /// `K * d`.
    pub input_dim: usize,
    pub learning_rate: f64,
    pub sgd_steps_per_round: usize,
    /// History larger than this is subsampled per step.
    pub batch_cap: usize,
    pub weight_decay: WeightDecay,
    pub kernel: KernelMode,
}

impl Default for NtsConfig {
    fn default() -> Self {
        Self {
            nu: 1e-6,
            lambda: 1e-1,
            hidden: 128,
            input_dim: 5 * 55,
            learning_rate: 1e-2,
            sgd_steps_per_round: 100,
            batch_cap: 512,
            weight_decay: WeightDecay::InverseRound,
            kernel: KernelMode::Auto,
        }
    }
}

impl NtsConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.nu) && self.nu != 0.0 {
            return Err(Error::Config(format!("nu must be > 0, got {}", self.nu)));
        }
        if !positive(self.lambda) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.hidden == 0 || self.input_dim == 0 || self.batch_cap == 0 {
            return Err(Error::Config("hidden, input_dim and batch_cap must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        RewardNetwork::param_count(self.input_dim, self.hidden)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub sampled: Vec<f64>,
}

/// Argmax of the sampled rewards; ties go to the lowest arm id.
pub fn select_arm(posterior: &ArmPosterior) -> usize {
    let mut best = 0;
    for (k, &v) in posterior.sampled.iter().enumerate().skip(1) {
        if v > posterior.sampled[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub context: Vec<f64>,
    pub reward: f64,
}

/// Loss trace of one round of refitting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Mean squared error on the step's batch, before each step.
    pub mse: Vec<f64>,
    /// `mse + (decay / 2) |theta|^2`, the quantity each step descends.
    pub objective: Vec<f64>,
}

/// Mutable bandit state: network, kernel inverse, history and RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralThompson {
    config: NtsConfig,
    network: RewardNetwork,
    kernel: Kernel,
    history: Vec<Observation>,
    rng: ChaCha8Rng,
    #[serde(skip)]
    exec: Execution,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    state: NeuralThompson,
}

impl NeuralThompson {
    pub fn new(config: NtsConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = RewardNetwork::glorot(config.input_dim, config.hidden, &mut rng);
        let kernel = Kernel::new(config.kernel, network.param_len(), config.lambda);
        Ok(Self {
            config,
            network,
            kernel,
            history: Vec::new(),
            rng,
            exec: Execution::default(),
        })
    }

    /// Replaces the network parameters (tests, warm starts).
    pub fn with_network(mut self, network: RewardNetwork) -> Result<Self> {
        if network.input_dim != self.config.input_dim || network.hidden != self.config.hidden {
            return Err(Error::Shape {
                expected: self.config.param_count(),
                got: network.param_len(),
            });
        }
        self.network = network;
        Ok(self)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &NtsConfig {
        &self.config
    }

    pub fn network(&self) -> &RewardNetwork {
        &self.network
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.network.forward(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.network.gradient(x)
    }

    /// `lambda g^T U^{-1} g / m` with tiny negative rounding clamped to 0.
    pub fn posterior_variance(&self, g: &SparseGrad) -> Result<f64> {
        let q = self.kernel.quad_form(g);
        let s = self.config.lambda * q / self.config.hidden as f64;
        if !s.is_finite() || s < VARIANCE_CLAMP {
            return Err(Error::Numerical(format!("posterior variance {s:e}")));
        }
        Ok(s.max(0.0))
    }

    pub fn posterior_variance_dense(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.kernel.dim() {
            return Err(Error::Shape {
                expected: self.kernel.dim(),
                got: g.len(),
            });
        }
        self.posterior_variance(&SparseGrad {
            idx: (0..g.len()).collect(),
            val: g.to_vec(),
        })
    }

    /// Posterior mean/variance per arm plus one Gaussian draw each.
    pub fn sample_rewards(&mut self, embedded: &EmbeddedContext) -> Result<ArmPosterior> {
        let moments = self.exec.map(embedded.vectors(), |x| -> Result<(f64, f64)> {
            let (mean, g) = self.network.forward_grad(x)?;
            Ok((mean, self.posterior_variance(&g)?))
        });
        let moments = moments.into_iter().collect::<Result<Vec<_>>>()?;
        let mut post = ArmPosterior {
            mean: Vec::with_capacity(moments.len()),
            variance: Vec::with_capacity(moments.len()),
            sampled: Vec::with_capacity(moments.len()),
        };
        for (mean, var) in moments {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            post.sampled.push(mean + self.config.nu * var.sqrt() * z);
            post.mean.push(mean);
            post.variance.push(var);
        }
        Ok(post)
    }

    /// Sample and pick in one call.
    pub fn choose(&mut self, embedded: &EmbeddedContext) -> Result<(usize, ArmPosterior)> {
        let post = self.sample_rewards(embedded)?;
        Ok((select_arm(&post), post))
    }

    /// Absorbs one observation. On error the state is left untouched.
    pub fn update(&mut self, chosen: &[f64], reward: f64) -> Result<FitTrace> {
        if !reward.is_finite() {
            return Err(Error::Numerical(format!("reward {reward}")));
        }
        let (_, g) = self.network.forward_grad(chosen)?;
        let pending = self
            .kernel
            .prepare_update(&g, self.config.hidden as f64, self.exec)?;

        let rng_backup = self.rng.clone();
        self.history.push(Observation {
            context: chosen.to_vec(),
            reward,
        });
        let fitted = self.fit();
        match fitted {
            Ok((theta, trace)) => {
                self.network.theta = theta;
                self.kernel.commit(pending, self.exec);
                Ok(trace)
            }
            Err(e) => {
                self.history.pop();
                self.rng = rng_backup;
                Err(e)
            }
        }
    }

    /// Gradient descent on the history's mean squared error; returns new parameters.
    fn fit(&mut self) -> Result<(Vec<f64>, FitTrace)> {
        let t = self.history.len();
        let decay = match self.config.weight_decay {
            WeightDecay::InverseRound => self.config.lambda / t as f64,
            WeightDecay::None => 0.0,
        };
        let lr = self.config.learning_rate;
        let mut net = self.network.clone();
        let p = net.param_len();
        let mut grad = vec![0.0; p];
        let mut trace = FitTrace::default();

        for step in 0..self.config.sgd_steps_per_round {
            let batch: Vec<usize> = if t <= self.config.batch_cap {
                (0..t).collect()
            } else {
                let mut b = index::sample(&mut self.rng, t, self.config.batch_cap).into_vec();
                b.sort_unstable();
                b
            };
            grad.iter_mut().for_each(|v| *v = 0.0);
            let mut sq = 0.0;
            let scale = 2.0 / batch.len() as f64;
            for &i in &batch {
                let obs = &self.history[i];
                let (f, g) = net.forward_grad(&obs.context)?;
                let err = f - obs.reward;
                sq += err * err;
                for (&k, &v) in g.idx.iter().zip(&g.val) {
                    grad[k] += scale * err * v;
                }
            }
            let mse = sq / batch.len() as f64;
            let norm_sq: f64 = net.theta.iter().map(|v| v * v).sum();
            trace.mse.push(mse);
            trace.objective.push(mse + 0.5 * decay * norm_sq);
            for (w, gk) in net.theta.iter_mut().zip(&grad) {
                *w -= lr * (gk + decay * *w);
            }
            if net.theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("network diverged at step {step}")));
            }
        }
        Ok((net.theta, trace))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            state: self.clone(),
        };
        let text = serde_json::to_string(&ck).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: format!("unsupported checkpoint version {}", ck.version),
            });
        }
        let s = ck.state;
        s.config.validate()?;
        if s.network.param_len() != s.config.param_count() || s.kernel.dim() != s.network.param_len()
            || (s.config.kernel != KernelMode::Auto && s.kernel.mode() != s.config.kernel) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: "checkpoint dimensions disagree with its config".into(),
            });
        }
        Ok(s)
    }
}
