//! Finite-difference verification of reverse-mode gradients.
//!
//! [`grad_check`] is the differentiation contract used across the test
//! suite: any scalar loss built on a [`Tape`] from a [`ParamSet`] must
//! produce gradients that match central finite differences. The checker
//! re-evaluates the loss with single elements perturbed by ±step and
//! compares `(f⁺ − f⁻) / 2·step` against the recorded gradient, sampling
//! a bounded number of elements per parameter so large networks stay
//! checkable in seconds.
//!
//! Inputs must be chosen away from non-differentiable points (L1 kinks,
//! magnitude zeros); the loss tests construct such inputs explicitly.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{ParamSet, Tape, Var};
use crate::error::{Error, Result};

/// Step size, tolerance, and probe budget for one check.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step (f64 default 1e-5).
    pub step: f64,
    /// Maximum allowed relative error.
    pub tol: f64,
    /// Elements probed per parameter tensor; larger tensors are sampled.
    pub max_probes_per_param: usize,
    /// Seed for probe-index sampling.
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-3,
            max_probes_per_param: 8,
            seed: 0,
        }
    }
}

/// One probe whose relative error exceeded the tolerance.
#[derive(Debug, Clone)]
pub struct GradCheckFailure {
    pub param: String,
    pub flat_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a [`grad_check`] run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Total probes evaluated.
    pub probes: usize,
    /// Largest relative error seen.
    pub worst_rel_err: f64,
    /// Parameter and flat element index of the worst probe.
    pub worst_param: String,
    pub worst_index: usize,
    /// Probes exceeding the tolerance.
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} probes, worst rel err {:.3e} at {}[{}], {} failures",
            if self.passed() { "PASS" } else { "FAIL" },
            self.probes,
            self.worst_rel_err,
            self.worst_param,
            self.worst_index,
            self.failures.len()
        )
    }
}

/// The loss under test: binds whatever it needs on the tape and returns
/// the scalar loss together with the bound leaf for every parameter that
/// should receive a gradient, as `(name, var)` pairs.
pub type LossBuilder<'a> =
    dyn Fn(&mut Tape, &ParamSet) -> Result<(Var, Vec<(String, Var)>)> + 'a;

fn eval_scalar(build: &LossBuilder, params: &ParamSet) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = build(&mut tape, params)?;
    let v = tape.scalar_value(loss);
    if !v.is_finite() {
        return Err(Error::param(format!("non-finite loss value {v}")));
    }
    Ok(v)
}

/// Verifies reverse-mode gradients of `build` against central finite
/// differences at `params`.
///
/// Errors (rather than failing) when the loss or any gradient is
/// non-finite, or when a declared parameter receives no gradient at all —
/// those indicate broken wiring, not a numeric mismatch.
pub fn grad_check(
    params: &ParamSet,
    config: &GradCheckConfig,
    build: &LossBuilder,
) -> Result<GradCheckReport> {
    if !(config.step > 0.0) {
        return Err(Error::param(format!("step must be > 0, got {}", config.step)));
    }
    if !(config.tol > 0.0) {
        return Err(Error::param(format!("tol must be > 0, got {}", config.tol)));
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let (loss, bound) = build(&mut tape, params)?;
    let value = tape.scalar_value(loss);
    if !value.is_finite() {
        return Err(Error::param(format!("non-finite loss value {value}")));
    }
    let grads = tape.backward(loss);
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::with_capacity(bound.len());
    for (name, var) in &bound {
        let g = grads.get(*var).ok_or_else(|| {
            Error::param(format!("no gradient recorded for parameter {name:?}"))
        })?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite gradient for parameter {name:?}"
            )));
        }
        analytic.push((name.clone(), g.iter().copied().collect()));
    }

    // Finite-difference probes.
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        probes: 0,
        worst_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        failures: Vec::new(),
    };
    for (name, grad) in &analytic {
        let n = grad.len();
        let indices: Vec<usize> = if n <= config.max_probes_per_param {
            (0..n).collect()
        } else {
            let mut picked = Vec::with_capacity(config.max_probes_per_param);
            while picked.len() < config.max_probes_per_param {
                let i = rng.gen_range(0..n);
                if !picked.contains(&i) {
                    picked.push(i);
                }
            }
            picked
        };
        for idx in indices {
            let numeric = {
                let mut plus = params.clone();
                bump(&mut plus, name, idx, config.step)?;
                let fp = eval_scalar(build, &plus)?;
                let mut minus = params.clone();
                bump(&mut minus, name, idx, -config.step)?;
                let fm = eval_scalar(build, &minus)?;
                (fp - fm) / (2.0 * config.step)
            };
            let a = grad[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.probes += 1;
            if rel > report.worst_rel_err {
                report.worst_rel_err = rel;
                report.worst_param = name.clone();
                report.worst_index = idx;
            }
            if rel >= config.tol {
                report.failures.push(GradCheckFailure {
                    param: name.clone(),
                    flat_index: idx,
                    analytic: a,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

fn bump(params: &mut ParamSet, name: &str, idx: usize, delta: f64) -> Result<()> {
    let arr = params.get_mut(name)?;
    let slice = arr
        .as_slice_mut()
        .expect("parameters are stored contiguously");
    slice[idx] += delta;
    Ok(())
}
