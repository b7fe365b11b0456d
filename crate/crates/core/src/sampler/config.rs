use serde::{Deserialize, Serialize};

use crate::error::SamplerError;
use crate::mixture::{builtin_table, GaussianMixture};
use crate::model::Link;

/// How β is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// β ~ N(0, 1).
    #[default]
    Random,
    /// β near -1 for the first party label in sorted order, near +1 for the
    /// others, near 0 for unlabelled legislators.
    PartySigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Gaussian mixture standing in for the Gumbel shock; a single standard
    /// normal component gives the probit model.
    pub mixture: GaussianMixture,
    /// Response function used for the flip acceptance and the recorded
    /// log-likelihood.
    pub link: Link,
    pub burn_in: u64,
    pub n_keep: u64,
    pub thin: u64,
    pub flip_every: u64,
    pub flip_sign_prob: f64,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Fraction of items whose initial (α, δ, z) is reflected into the other
    /// orthant.
    pub mirror_fraction: f64,
}

impl SamplerConfig {
    /// Logit model with the published six-component mixture and the desk
    /// schedule.
    pub fn logit() -> Self {
        Self {
            mixture: builtin_table(6).expect("published table"),
            link: Link::Logit,
            ..Self::probit()
        }
    }

    /// Probit model (single N(0, 1) component) with the desk schedule.
    pub fn probit() -> Self {
        Self {
            mixture: GaussianMixture::standard_normal(),
            link: Link::Probit,
            burn_in: 5_000,
            n_keep: 2_000,
            thin: 5,
            flip_every: 5,
            flip_sign_prob: 0.1,
            seed: 1,
            init_mode: InitMode::Random,
            mirror_fraction: 0.0,
        }
    }

    pub fn for_link(link: Link) -> Self {
        match link {
            Link::Logit => Self::logit(),
            Link::Probit => Self::probit(),
        }
    }

    /// Burn-in 500,000 then 1,000,000 iterations thinned every 50.
    pub fn long_schedule(mut self) -> Self {
        self.burn_in = 500_000;
        self.thin = 50;
        self.n_keep = 20_000;
        self
    }

    pub fn total_iterations(&self) -> u64 {
        self.burn_in + self.n_keep * self.thin
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Config(m.to_string()));
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.flip_every == 0 {
            return bad("flip_every must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.flip_sign_prob) {
            return bad("flip_sign_prob must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mirror_fraction) {
            return bad("mirror_fraction must lie in [0, 1]");
        }
        if self.mixture.k() > u8::MAX as usize {
            return bad("mixture has more than 255 components");
        }
        if self
            .n_keep
            .checked_mul(self.thin)
            .and_then(|n| n.checked_add(self.burn_in))
            .is_none()
        {
            return bad("schedule overflows");
        }
        Ok(())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::logit()
    }
}
