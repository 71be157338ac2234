use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::uniform_in;
use crate::dataset::{Dataset, Record};
use crate::dist::{kde, DiscreteDistribution, Support};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::seed::rng_for_item;

/// Tilted sinusoidal potential `V(s) = -A cos(k s) - tilt·s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential<T> {
    pub amplitude: T,
    pub wavenumber: T,
    pub tilt: T,
}

impl<T: Scalar> Default for Potential<T> {
    fn default() -> Self {
        Potential { amplitude: T::lit(0.4), wavenumber: T::lit(0.2), tilt: T::lit(0.002) }
    }
}

impl<T: Scalar> Potential<T> {
    pub fn flat() -> Self {
        Potential { amplitude: T::zero(), wavenumber: T::zero(), tilt: T::zero() }
    }

    pub fn value(&self, s: T) -> T {
        -self.amplitude * (self.wavenumber * s).cos() - self.tilt * s
    }

    pub fn derivative(&self, s: T) -> T {
        self.amplitude * self.wavenumber * (self.wavenumber * s).sin() - self.tilt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpConfig<T> {
    pub n_data: usize,
    pub sigma: T,
    pub potential: Potential<T>,
    pub support: Support<T>,
    pub t_init_range: (T, T),
    pub dt: T,
    /// Draws per distribution before KDE; 0 stores the solver pmfs directly.
    pub samples_per_dist: usize,
    /// KDE bandwidth as a fraction of the support length.
    pub kde_bandwidth: T,
    pub seed: u64,
}

impl<T: Scalar> Default for FpConfig<T> {
    fn default() -> Self {
        let half = T::lit(11.0) * T::PI();
        FpConfig {
            n_data: 1000,
            sigma: T::lit(3.0),
            potential: Potential::default(),
            support: Support { lower: -half, upper: half, q: 100 },
            t_init_range: (T::one(), T::lit(5.0)),
            dt: T::lit(10.0),
            samples_per_dist: 1000,
            kde_bandwidth: T::lit(0.02),
            seed: 0,
        }
    }
}

impl<T: Scalar> FpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(invalid("sigma must be positive"));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        let (lo, hi) = self.t_init_range;
        if !(T::zero() <= lo && lo <= hi && hi.is_finite()) {
            return Err(invalid("t_init_range must be an ordered nonnegative pair"));
        }
        if self.samples_per_dist > 0 && !(self.kde_bandwidth > T::zero()) {
            return Err(invalid("kde_bandwidth must be positive"));
        }
        let p = self.potential;
        if ![p.amplitude, p.wavenumber, p.tilt].iter().all(|v| v.is_finite()) {
            return Err(invalid("potential parameters must be finite"));
        }
        Ok(())
    }

    pub fn solver(&self) -> FokkerPlanck<T> {
        FokkerPlanck::new(self.support, self.potential, self.sigma)
    }
}

/// Explicit finite-volume scheme for `∂P/∂t = -∂(V'P)/∂s + ½σ² ∂²P/∂s²` on the bin
/// grid with zero flux through both ends of the support.
#[derive(Debug, Clone)]
pub struct FokkerPlanck<T> {
    support: Support<T>,
    drift: Vec<T>,
    half_sigma2: T,
    h: T,
    max_step: T,
}

impl<T: Scalar> FokkerPlanck<T> {
    pub fn new(support: Support<T>, potential: Potential<T>, sigma: T) -> Self {
        let h = support.bin_width();
        let drift = support.centers().into_iter().map(|s| potential.derivative(s)).collect();
        FokkerPlanck {
            support,
            drift,
            half_sigma2: T::lit(0.5) * sigma * sigma,
            h,
            max_step: T::lit(0.4) * h * h / (sigma * sigma),
        }
    }

    pub fn max_step(&self) -> T {
        self.max_step
    }

    /// One Euler step of size `dt`, without clamping or renormalization.
    pub fn step(&self, p: &[T], dt: T) -> Vec<T> {
        let q = p.len();
        let r = dt / self.h;
        let mut next = p.to_vec();
        for j in 0..q.saturating_sub(1) {
            let advect = T::lit(0.5) * (self.drift[j] * p[j] + self.drift[j + 1] * p[j + 1]);
            let diffuse = self.half_sigma2 * (p[j + 1] - p[j]) / self.h;
            let flux = r * (advect - diffuse);
            next[j] -= flux;
            next[j + 1] += flux;
        }
        next
    }

    /// Evolves `p0` for time `t` in equal sub-steps no longer than [`Self::max_step`].
    pub fn solve(&self, p0: &DiscreteDistribution<T>, t: T) -> Result<DiscreteDistribution<T>> {
        if !(t >= T::zero()) || !t.is_finite() {
            return Err(invalid(format!("evolution time must be finite and nonnegative, got {t}")));
        }
        self.support.ensure_same(p0.support())?;
        if t == T::zero() {
            return Ok(p0.clone());
        }
        let n = (t / self.max_step).ceil().to_usize().unwrap_or(usize::MAX).max(1);
        let dt = t / T::from_usize_lossy(n);
        let mut p = p0.masses().to_vec();
        for _ in 0..n {
            p = self.step(&p, dt);
            let mut total = T::zero();
            for m in p.iter_mut() {
                *m = m.max(T::zero());
                total += *m;
            }
            for m in p.iter_mut() {
                *m /= total;
            }
        }
        DiscreteDistribution::from_weights(self.support, p)
    }
}

pub fn solve_fokker_planck<T: Scalar>(
    p0: &DiscreteDistribution<T>,
    t: T,
    cfg: &FpConfig<T>,
) -> Result<DiscreteDistribution<T>> {
    cfg.validate()?;
    cfg.solver().solve(p0, t)
}

fn start_distribution<T: Scalar, R: Rng + ?Sized>(support: Support<T>, rng: &mut R) -> (Vec<usize>, DiscreteDistribution<T>) {
    let n_starts = if rng.gen_bool(0.5) { 1 } else { 2 }.min(support.q);
    let bins = index::sample(rng, support.q, n_starts).into_vec();
    let share = T::one() / T::from_usize_lossy(n_starts);
    let mut masses = vec![T::zero(); support.q];
    for &b in &bins {
        masses[b] = share;
    }
    (bins, DiscreteDistribution::from_normalized_unchecked(support, masses))
}

pub fn gen_fp<T: Scalar>(cfg: &FpConfig<T>) -> Result<Dataset<T>> {
    cfg.validate()?;
    let solver = cfg.solver();
    let bandwidth = cfg.kde_bandwidth * (cfg.support.upper - cfg.support.lower);
    let records = (0..cfg.n_data)
        .map(|i| {
            let mut rng = rng_for_item(cfg.seed, "fp-data", i as u64);
            let (starts, p0) = start_distribution(cfg.support, &mut rng);
            let t_init = uniform_in(&mut rng, cfg.t_init_range);
            let input = solver.solve(&p0, t_init)?;
            let label = solver.solve(&p0, t_init + cfg.dt)?;
            let mut r = if cfg.samples_per_dist == 0 {
                Record::new(vec![input], label)
            } else {
                let input_samples = input.sample(cfg.samples_per_dist, &mut rng);
                let label_samples = label.sample(cfg.samples_per_dist, &mut rng);
                let mut r = Record::new(
                    vec![kde(&input_samples, bandwidth, cfg.support)?],
                    kde(&label_samples, bandwidth, cfg.support)?,
                );
                r.label_samples = Some(label_samples);
                r
            };
            r.meta.insert("t_init".into(), t_init.to_f64_lossy());
            for (k, b) in starts.iter().enumerate() {
                r.meta.insert(format!("start{k}"), *b as f64);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(cfg.support, records)
}
