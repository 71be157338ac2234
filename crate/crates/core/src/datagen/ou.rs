use serde::{Deserialize, Serialize};

use super::uniform_in;
use crate::dataset::{Dataset, Record};
use crate::dist::{discretize_log_pdf, DiscreteDistribution, Support};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::seed::rng_for_item;

/// Times below this are raised to it so the variance stays positive.
pub const OU_MIN_TIME: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuConfig<T> {
    pub n_data: usize,
    #[serde(rename = "D")]
    pub diffusion: T,
    pub theta: T,
    pub dt: T,
    pub y_range: (T, T),
    pub t_init_range: (T, T),
    pub support: Support<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for OuConfig<T> {
    fn default() -> Self {
        OuConfig {
            n_data: 100,
            diffusion: T::lit(0.003),
            theta: T::lit(0.1),
            dt: T::one(),
            y_range: (T::lit(0.3), T::lit(0.9)),
            t_init_range: (T::lit(0.01), T::lit(2.0)),
            support: Support { lower: T::zero(), upper: T::one(), q: 100 },
            seed: 0,
        }
    }
}

impl<T: Scalar> OuConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        if !(self.diffusion > T::zero() && self.theta > T::zero()) {
            return Err(invalid("D and theta must be positive"));
        }
        if !(self.dt >= T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt must be finite and nonnegative"));
        }
        let (ylo, yhi) = self.y_range;
        if !(ylo <= yhi && self.support.contains(ylo) && self.support.contains(yhi)) {
            return Err(invalid("y_range must be an ordered pair inside the support"));
        }
        let (tlo, thi) = self.t_init_range;
        if !(T::zero() <= tlo && tlo <= thi && thi.is_finite()) {
            return Err(invalid("t_init_range must be an ordered nonnegative pair"));
        }
        Ok(())
    }
}

pub fn ou_mean<T: Scalar>(y: T, t: T, cfg: &OuConfig<T>) -> T {
    y * (-cfg.theta * t).exp()
}

pub fn ou_variance<T: Scalar>(t: T, cfg: &OuConfig<T>) -> T {
    let t = t.max(T::lit(OU_MIN_TIME));
    cfg.diffusion * (-(-T::lit(2.0) * cfg.theta * t).exp_m1()) / cfg.theta
}

/// Gaussian with the OU mean and variance at time `t` from start `y`, truncated to
/// the support and evaluated at bin centers.
pub fn ou_pdf<T: Scalar>(y: T, t: T, cfg: &OuConfig<T>) -> Result<DiscreteDistribution<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(invalid(format!("OU time must be finite and nonnegative, got {t}")));
    }
    let t = t.max(T::lit(OU_MIN_TIME));
    let mu = ou_mean(y, t, cfg);
    let var = ou_variance(t, cfg);
    let two_var = T::lit(2.0) * var;
    discretize_log_pdf(|s| -(s - mu) * (s - mu) / two_var, cfg.support)
}

pub fn gen_ou<T: Scalar>(cfg: &OuConfig<T>) -> Result<Dataset<T>> {
    cfg.validate()?;
    let records = (0..cfg.n_data)
        .map(|i| {
            let mut rng = rng_for_item(cfg.seed, "ou-data", i as u64);
            let y = uniform_in(&mut rng, cfg.y_range);
            let t_init = uniform_in(&mut rng, cfg.t_init_range);
            let input = ou_pdf(y, t_init, cfg)?;
            let label = if cfg.dt == T::zero() { input.clone() } else { ou_pdf(y, t_init + cfg.dt, cfg)? };
            let mut r = Record::new(vec![input], label);
            r.meta.insert("y".into(), y.to_f64_lossy());
            r.meta.insert("t_init".into(), t_init.to_f64_lossy());
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(cfg.support, records)
}
