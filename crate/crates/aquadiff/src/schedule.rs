//! Noise schedules and closed-form diffusion algebra.
//!
//! The forward process corrupts a clean signal `x_0` over `T` steps with
//! variances `beta_t`. Writing `alpha_t = 1 - beta_t` and
//! `gamma_t = prod_{s<=t} alpha_s`, the marginal at any step collapses to
//!
//! ```text
//! x_t = sqrt(gamma_t) x_0 + sqrt(1 - gamma_t) eps,    eps ~ N(0, I)
//! ```
//!
//! so sampling a training example needs one Gaussian draw, not `t` of them.
//! The reverse-time posterior `q(x_{t-1} | x_t, x_0)` is Gaussian with mean
//!
//! ```text
//! mu_t = [sqrt(gamma_{t-1}) beta_t x_0 + sqrt(alpha_t)(1 - gamma_{t-1}) x_t] / (1 - gamma_t)
//! ```
//!
//! and variance `sigma_t^2 = (1 - gamma_{t-1})(1 - alpha_t) / (1 - gamma_t)`.
//! Substituting the noise estimate `x_0 = (x_t - sqrt(1 - gamma_t) eps) / sqrt(gamma_t)`
//! gives the equivalent noise parameterization
//!
//! ```text
//! mu_t = (x_t - beta_t / sqrt(1 - gamma_t) eps) / sqrt(alpha_t)
//! ```
//!
//! and the two must agree to floating-point accuracy — a property the tests
//! enforce. The convention `gamma_0 = 1` makes `sigma_1 = 0`, so the final
//! reverse step is deterministic.
//!
//! Timestep indices are 1-based throughout: `t` ranges over `1..=T`.

use ndarray::Array3;

use crate::error::{Error, Result};

/// Precomputed per-step schedule quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    posterior_var: Vec<f64>,
}

/// Linearly spaced `beta` from `beta_start` to `beta_end` over `t_steps`
/// steps. Requires `0 < beta_start <= beta_end < 1` and `t_steps >= 1`.
pub fn linear_schedule(t_steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if t_steps < 1 {
        return Err(Error::param("schedule needs at least one step".to_string()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::param(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    let beta: Vec<f64> = (0..t_steps)
        .map(|i| {
            if t_steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (t_steps - 1) as f64
            }
        })
        .collect();
    NoiseSchedule::from_betas(beta)
}

impl NoiseSchedule {
    /// Builds a schedule from explicit per-step variances.
    pub fn from_betas(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::param("schedule needs at least one step".to_string()));
        }
        if beta.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::param("every beta must lie in (0, 1)".to_string()));
        }
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut gamma = Vec::with_capacity(beta.len());
        let mut acc = 1.0;
        for &a in &alpha {
            acc *= a;
            gamma.push(acc);
        }
        let t_steps = beta.len();
        let mut posterior_var = Vec::with_capacity(t_steps);
        for t in 1..=t_steps {
            let gamma_prev = if t == 1 { 1.0 } else { gamma[t - 2] };
            posterior_var.push((1.0 - gamma_prev) * beta[t - 1] / (1.0 - gamma[t - 1]));
        }
        Ok(Self {
            beta,
            alpha,
            gamma,
            posterior_var,
        })
    }

    /// Number of diffusion steps `T`.
    pub fn t_steps(&self) -> usize {
        self.beta.len()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_steps() {
            return Err(Error::param(format!(
                "timestep {t} outside 1..={}",
                self.t_steps()
            )));
        }
        Ok(())
    }

    /// Forward variance `beta_t`, `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    /// `alpha_t = 1 - beta_t`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// Cumulative product `gamma_t`; `gamma(0)` is defined as 1.
    pub fn gamma(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.gamma[t - 1]
        }
    }

    /// Reverse-posterior variance `sigma_t^2`; zero at `t = 1`.
    pub fn posterior_var(&self, t: usize) -> f64 {
        self.posterior_var[t - 1]
    }

    /// Fraction of signal variance destroyed by the full forward pass,
    /// `1 - gamma_T`. Paper-scale schedules should push this above 0.99 so
    /// `x_T` is indistinguishable from pure noise; short test schedules may
    /// legitimately keep it lower.
    pub fn terminal_noise_fraction(&self) -> f64 {
        1.0 - self.gamma[self.t_steps() - 1]
    }

    /// Draws `x_t` from the closed-form forward marginal given `x_0` and a
    /// unit Gaussian sample `eps`.
    pub fn q_sample(&self, x0: &Array3<f64>, t: usize, eps: &Array3<f64>) -> Result<Array3<f64>> {
        self.check_t(t)?;
        if x0.dim() != eps.dim() {
            return Err(Error::dim(format!(
                "x0 {:?} and eps {:?} shapes differ",
                x0.dim(),
                eps.dim()
            )));
        }
        let g = self.gamma(t);
        Ok(x0 * g.sqrt() + eps * (1.0 - g).sqrt())
    }

    /// Inverts the forward marginal: recovers the `x_0` consistent with
    /// `x_t` and a noise estimate `eps_hat`.
    pub fn predict_x0(
        &self,
        x_t: &Array3<f64>,
        eps_hat: &Array3<f64>,
        t: usize,
    ) -> Result<Array3<f64>> {
        self.check_t(t)?;
        if x_t.dim() != eps_hat.dim() {
            return Err(Error::dim(format!(
                "x_t {:?} and eps_hat {:?} shapes differ",
                x_t.dim(),
                eps_hat.dim()
            )));
        }
        let g = self.gamma(t);
        Ok((x_t - &(eps_hat * (1.0 - g).sqrt())) / g.sqrt())
    }

    /// Posterior mean from an explicit clean estimate.
    pub fn posterior_mean_from_x0(
        &self,
        x_t: &Array3<f64>,
        x0: &Array3<f64>,
        t: usize,
    ) -> Result<Array3<f64>> {
        self.check_t(t)?;
        if x_t.dim() != x0.dim() {
            return Err(Error::dim("x_t and x0 shapes differ".to_string()));
        }
        let g = self.gamma(t);
        let g_prev = self.gamma(t - 1);
        let c0 = g_prev.sqrt() * self.beta(t) / (1.0 - g);
        let ct = self.alpha(t).sqrt() * (1.0 - g_prev) / (1.0 - g);
        Ok(x0 * c0 + x_t * ct)
    }

    /// Posterior mean from a noise estimate; algebraically identical to
    /// routing the estimate through [`Self::predict_x0`].
    pub fn posterior_mean_from_eps(
        &self,
        x_t: &Array3<f64>,
        eps_hat: &Array3<f64>,
        t: usize,
    ) -> Result<Array3<f64>> {
        self.check_t(t)?;
        if x_t.dim() != eps_hat.dim() {
            return Err(Error::dim("x_t and eps_hat shapes differ".to_string()));
        }
        let g = self.gamma(t);
        let scale = self.beta(t) / (1.0 - g).sqrt();
        Ok((x_t - &(eps_hat * scale)) / self.alpha(t).sqrt())
    }

    /// One ancestral sampling step: `x_{t-1} = mu_t + sigma_t z`. The noise
    /// `z` is required for `t > 1` and ignored at `t = 1`, where the
    /// posterior collapses to its mean.
    pub fn reverse_step(
        &self,
        x_t: &Array3<f64>,
        eps_hat: &Array3<f64>,
        t: usize,
        z: Option<&Array3<f64>>,
    ) -> Result<Array3<f64>> {
        self.check_t(t)?;
        let mean = self.posterior_mean_from_eps(x_t, eps_hat, t)?;
        if t == 1 {
            return Ok(mean);
        }
        let z = z.ok_or_else(|| {
            Error::param(format!("reverse_step at t={t} > 1 needs a noise sample"))
        })?;
        if z.dim() != x_t.dim() {
            return Err(Error::dim("z and x_t shapes differ".to_string()));
        }
        Ok(mean + &(z * self.posterior_var(t).sqrt()))
    }
}

/// Maps `[0, 1]` image data to the `[-1, 1]` space the diffusion operates in.
pub fn to_model_space(x: &Array3<f64>) -> Array3<f64> {
    x * 2.0 - 1.0
}

/// Maps model-space data back to `[0, 1]`, clamping overshoot.
pub fn from_model_space(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
}
