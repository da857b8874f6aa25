use rand_distr::{Distribution, StandardNormal};

use crate::environment::ACTION_DIM;
use crate::rng::{self, RunRng, Stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuConfig {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            theta: 0.01,
            mu: 0.0,
            sigma: 0.01,
            dt: 1.0,
        }
    }
}

impl OuConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta.is_finite()
            && self.theta >= 0.0
            && self.mu.is_finite()
            && self.sigma.is_finite()
            && self.sigma >= 0.0
            && self.dt.is_finite()
            && self.dt > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid Ornstein-Uhlenbeck parameters {self:?}")))
        }
    }
}

/// Ornstein-Uhlenbeck process, one independent coordinate per action dimension:
/// `x ← x + θ(μ - x)dt + σ√dt · N(0, 1)`.
#[derive(Clone, Debug)]
pub struct OuNoise {
    config: OuConfig,
    state: [f64; ACTION_DIM],
    rng: RunRng,
}

impl OuNoise {
    pub fn new(config: OuConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: [config.mu; ACTION_DIM],
            rng: rng::stream(seed, Stream::Noise),
        })
    }

    pub fn config(&self) -> &OuConfig {
        &self.config
    }

    pub fn state(&self) -> [f64; ACTION_DIM] {
        self.state
    }

    /// Returns the process to its mean; called at every episode start.
    pub fn reset(&mut self) {
        self.state = [self.config.mu; ACTION_DIM];
    }

    pub fn sample(&mut self) -> [f64; ACTION_DIM] {
        let OuConfig { theta, mu, sigma, dt } = self.config;
        let diffusion = sigma * dt.sqrt();
        for x in &mut self.state {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *x += theta * (mu - *x) * dt + diffusion * z;
        }
        self.state
    }
}
