//! Parameter initialization, gradient-descent training and evaluation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, Record};
use crate::dist::{js_divergence, l2_loss, nll, DiscreteDistribution, Support};
use crate::error::{invalid, numerical, DrnError, Result};
use crate::grad::{backprop, mean_cost, Gradients};
use crate::net::{DrnModel, ModelParams, NodeParams, Topology};
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// Whole training set per step, or shuffled mini-batches of a fixed size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    Size(usize),
}

impl Serialize for BatchMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchMode::Full => s.serialize_str("full"),
            BatchMode::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Size(usize),
        }
        match Repr::deserialize(d)? {
            Repr::Name(s) if s == "full" => Ok(BatchMode::Full),
            Repr::Size(n) if n >= 1 => Ok(BatchMode::Size(n)),
            _ => Err(serde::de::Error::custom("batch must be \"full\" or a positive integer")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer<T> {
    /// Plain gradient descent, `θ ← θ - lr·∇C`.
    Gd,
    /// Adam with bias-corrected moment estimates.
    Adam { beta1: T, beta2: T, epsilon: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop<T> {
    /// Share of the data held out for validation; 0 monitors the training cost.
    pub validation_fraction: T,
    /// Epochs without improvement of the monitored cost before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned + Scalar"))]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub max_epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
    pub init_weight_range: (T, T),
    pub init_bias_mag_range: (T, T),
    pub early_stop: EarlyStop<T>,
    /// Bound on `|w|`, `|b_q|` and `|b_a|` after every step.
    pub clamp: T,
    pub optimizer: Optimizer<T>,
    /// Stop once the Euclidean norm of a full-batch update falls below this (0 disables).
    pub step_tolerance: T,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            learning_rate: T::lit(0.1),
            max_epochs: 1000,
            batch: BatchMode::Full,
            seed: 0,
            init_weight_range: (T::lit(-1.0), T::lit(1.0)),
            init_bias_mag_range: (T::lit(-1.0), T::lit(1.0)),
            early_stop: EarlyStop { validation_fraction: T::lit(0.2), patience: 50 },
            clamp: T::lit(50.0),
            optimizer: Optimizer::Gd,
            step_tolerance: T::zero(),
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return Err(invalid("learning_rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(invalid("max_epochs must be at least 1"));
        }
        if let BatchMode::Size(0) = self.batch {
            return Err(invalid("batch size must be positive"));
        }
        for (name, (lo, hi)) in [
            ("init_weight_range", self.init_weight_range),
            ("init_bias_mag_range", self.init_bias_mag_range),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("{name} must be an ordered finite pair")));
            }
        }
        let f = self.early_stop.validation_fraction;
        if !(f >= T::zero() && f < T::one()) {
            return Err(invalid("validation_fraction must lie in [0, 1)"));
        }
        if self.early_stop.patience == 0 {
            return Err(invalid("patience must be at least 1"));
        }
        if !(self.clamp > T::zero()) {
            return Err(invalid("clamp must be positive"));
        }
        if !(self.step_tolerance >= T::zero()) {
            return Err(invalid("step_tolerance must be nonnegative"));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            let unit = |b: T| b >= T::zero() && b < T::one();
            if !(unit(beta1) && unit(beta2) && epsilon > T::zero()) {
                return Err(invalid("adam needs beta1, beta2 in [0, 1) and epsilon > 0"));
            }
        }
        Ok(())
    }
}

/// Random parameters: weights and bias magnitudes uniform over the configured
/// ranges, bias positions uniform over the support.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(
    topology: &Topology,
    support: &Support<T>,
    config: &TrainConfig<T>,
    rng: &mut R,
) -> ModelParams<T> {
    let uniform = |rng: &mut R, (lo, hi): (T, T)| {
        let u: f64 = rng.gen();
        lo + (hi - lo) * T::lit(u)
    };
    topology
        .layer_sizes()
        .windows(2)
        .map(|w| {
            (0..w[1])
                .map(|_| {
                    let weights = (0..w[0]).map(|_| uniform(rng, config.init_weight_range)).collect();
                    let b_q = uniform(rng, config.init_bias_mag_range);
                    let b_a = uniform(rng, config.init_bias_mag_range);
                    let lambda_q = uniform(rng, (support.lower, support.upper));
                    let lambda_a = uniform(rng, (support.lower, support.upper));
                    NodeParams { weights, b_q, b_a, lambda_q, lambda_a }
                })
                .collect()
        })
        .collect()
}

/// Mean cost and mean gradient over `records`. Per-datum work may run in parallel;
/// the reduction always runs in record order, so the result is thread-count independent.
pub fn batch_gradient<T: Scalar>(
    model: &DrnModel<T>,
    records: &[Record<T>],
) -> Result<(T, Gradients<T>)> {
    if records.is_empty() {
        return Err(invalid("gradient over an empty batch"));
    }
    let kernels = model.kernels();
    let per_datum: Vec<Result<(T, Gradients<T>)>> = records
        .par_iter()
        .map(|r| {
            let inputs = r.input_refs();
            let (pred, cache) = model.forward_with(&kernels, &inputs)?;
            let c = js_divergence(&r.label, &pred)?;
            let g = backprop(model, &inputs, &r.label, &cache)?;
            Ok((c, g))
        })
        .collect();
    let mut total = T::zero();
    let mut grad = Gradients::zeros_like(model);
    for item in per_datum {
        let (c, g) = item?;
        total += c;
        grad.accumulate(&g);
    }
    let inv = T::one() / T::from_usize_lossy(records.len());
    grad.scale(inv);
    Ok((total * inv, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub train_cost: T,
    pub val_cost: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Serialize"))]
pub struct TrainReport<T> {
    pub topology: String,
    pub param_count: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Epoch 0 is the initial model; epoch `e` follows `e` parameter updates.
    pub history: Vec<EpochRecord<T>>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// Training cost of the returned model.
    pub final_train_cost: T,
    pub final_val_cost: Option<T>,
    #[serde(skip)]
    pub model: DrnModel<T>,
}

impl<T: Scalar> TrainReport<T> {
    /// `epoch,train_cost,val_cost` rows with a header; empty field when no validation set.
    pub fn cost_curve_csv(&self) -> String {
        let mut out = String::from("epoch,train_cost,val_cost\n");
        for r in &self.history {
            let val = r.val_cost.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_cost, val));
        }
        out
    }
}

struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

struct Stepper<T> {
    config: TrainConfig<T>,
    adam: Option<AdamState<T>>,
}

impl<T: Scalar> Stepper<T> {
    fn new(config: &TrainConfig<T>, n: usize) -> Self {
        let adam = matches!(config.optimizer, Optimizer::Adam { .. })
            .then(|| AdamState { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 });
        Stepper { config: config.clone(), adam }
    }

    /// Applies one update in place; returns the norm of the parameter change.
    fn step(&mut self, model: &mut DrnModel<T>, grad: &Gradients<T>) -> T {
        let lr = self.config.learning_rate;
        let g = grad.flat();
        let mut theta = model.flat_params();
        let update: Vec<T> = match (&mut self.adam, self.config.optimizer) {
            (Some(state), Optimizer::Adam { beta1, beta2, epsilon }) => {
                state.t += 1;
                let c1 = T::one() - beta1.powi(state.t);
                let c2 = T::one() - beta2.powi(state.t);
                g.iter()
                    .enumerate()
                    .map(|(i, &gi)| {
                        state.m[i] = beta1 * state.m[i] + (T::one() - beta1) * gi;
                        state.v[i] = beta2 * state.v[i] + (T::one() - beta2) * gi * gi;
                        let mhat = state.m[i] / c1;
                        let vhat = state.v[i] / c2;
                        lr * mhat / (vhat.sqrt() + epsilon)
                    })
                    .collect()
            }
            _ => g.iter().map(|&gi| lr * gi).collect(),
        };
        for (t, u) in theta.iter_mut().zip(&update) {
            *t -= *u;
        }
        let before = model.flat_params();
        model.set_flat_params(&theta).expect("same parameter count");
        project(model, self.config.clamp);
        model
            .flat_params()
            .iter()
            .zip(&before)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }
}

/// Clamps weights and bias magnitudes to `±clamp` and bias positions into the support.
pub fn project<T: Scalar>(model: &mut DrnModel<T>, clamp: T) {
    let (lo, hi) = (model.support.lower, model.support.upper);
    for node in model.params.iter_mut().flatten() {
        for w in node.weights.iter_mut().chain([&mut node.b_q, &mut node.b_a]) {
            *w = w.max(-clamp).min(clamp);
        }
        node.lambda_q = node.lambda_q.max(lo).min(hi);
        node.lambda_a = node.lambda_a.max(lo).min(hi);
    }
}

fn split_indices<T: Scalar>(n: usize, config: &TrainConfig<T>) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let frac = config.early_stop.validation_fraction.to_f64_lossy();
    let n_val = ((frac * n as f64).floor() as usize).min(n.saturating_sub(1));
    if n_val == 0 {
        return (idx, Vec::new());
    }
    idx.shuffle(&mut rng_for(config.seed, "validation-split"));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

fn abort(epoch: usize, e: DrnError) -> DrnError {
    DrnError::TrainingAborted { epoch, source: Box::new(e) }
}

fn finite_or_abort<T: Scalar>(epoch: usize, what: &str, v: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(abort(epoch, numerical(format!("{what} is not finite ({v})"))))
    }
}

/// Trains a freshly initialized model on `dataset`.
pub fn train<T: Scalar>(
    dataset: &Dataset<T>,
    topology: &Topology,
    config: &TrainConfig<T>,
) -> Result<TrainReport<T>> {
    let support = dataset.support;
    let params = init_params(topology, &support, config, &mut rng_for(config.seed, "init"));
    let model = DrnModel::new(topology.clone(), support, params)?;
    train_from(dataset, model, config)
}

/// Trains starting from the given parameters.
pub fn train_from<T: Scalar>(
    dataset: &Dataset<T>,
    mut model: DrnModel<T>,
    config: &TrainConfig<T>,
) -> Result<TrainReport<T>> {
    config.validate()?;
    model.validate()?;
    if dataset.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    model.support.ensure_same(&dataset.support)?;
    if dataset.input_count() != model.topology.inputs() {
        return Err(invalid(format!(
            "dataset has {} inputs per record, topology {} expects {}",
            dataset.input_count(),
            model.topology,
            model.topology.inputs()
        )));
    }
    if model.topology.outputs() != 1 {
        return Err(invalid("training needs a single output node"));
    }

    let (train_idx, val_idx) = split_indices(dataset.len(), config);
    let train_set = dataset.subset(&train_idx);
    let val_set = dataset.subset(&val_idx);
    let mut batch_rng = rng_for(config.seed, "mini-batches");
    let mut stepper = Stepper::new(config, model.param_count());

    let mut history = Vec::new();
    let mut best: Option<(T, usize, DrnModel<T>)> = None;
    let mut since_best = 0;
    let mut epoch = 0;
    let stop_reason = loop {
        let full = match config.batch {
            BatchMode::Full => Some(batch_gradient(&model, &train_set.records).map_err(|e| abort(epoch, e))?),
            BatchMode::Size(_) => None,
        };
        let train_cost = match &full {
            Some((c, _)) => *c,
            None => mean_cost(&model, &train_set.records).map_err(|e| abort(epoch, e))?,
        };
        finite_or_abort(epoch, "training cost", train_cost)?;
        let val_cost = if val_set.is_empty() {
            None
        } else {
            let v = mean_cost(&model, &val_set.records).map_err(|e| abort(epoch, e))?;
            Some(finite_or_abort(epoch, "validation cost", v)?)
        };
        history.push(EpochRecord { epoch, train_cost, val_cost });

        let monitored = val_cost.unwrap_or(train_cost);
        if best.as_ref().is_none_or(|(b, _, _)| monitored < *b) {
            best = Some((monitored, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.early_stop.patience {
                break StopReason::EarlyStopped;
            }
        }
        if epoch == config.max_epochs {
            break StopReason::MaxEpochs;
        }

        epoch += 1;
        match (full, config.batch) {
            (Some((_, grad)), _) => {
                let moved = stepper.step(&mut model, &grad);
                if config.step_tolerance > T::zero() && moved < config.step_tolerance {
                    let (c, _) = batch_gradient(&model, &train_set.records).map_err(|e| abort(epoch, e))?;
                    let v = if val_set.is_empty() {
                        None
                    } else {
                        Some(mean_cost(&model, &val_set.records).map_err(|e| abort(epoch, e))?)
                    };
                    history.push(EpochRecord { epoch, train_cost: c, val_cost: v });
                    best = Some((v.unwrap_or(c), epoch, model.clone()));
                    break StopReason::Converged;
                }
            }
            (None, BatchMode::Size(size)) => {
                let mut order: Vec<usize> = (0..train_set.len()).collect();
                order.shuffle(&mut batch_rng);
                for chunk in order.chunks(size) {
                    let batch: Vec<Record<T>> = chunk.iter().map(|&i| train_set.records[i].clone()).collect();
                    let (_, grad) = batch_gradient(&model, &batch).map_err(|e| abort(epoch, e))?;
                    stepper.step(&mut model, &grad);
                }
            }
            (None, BatchMode::Full) => unreachable!("full batch always computes a gradient"),
        }
    };

    let (_, best_epoch, best_model) = best.expect("at least one epoch recorded");
    let final_train_cost = mean_cost(&best_model, &train_set.records)?;
    let final_val_cost = if val_set.is_empty() {
        None
    } else {
        Some(mean_cost(&best_model, &val_set.records)?)
    };
    Ok(TrainReport {
        topology: best_model.topology.to_string(),
        param_count: best_model.param_count(),
        train_size: train_set.len(),
        val_size: val_set.len(),
        history,
        best_epoch,
        stop_reason,
        final_train_cost,
        final_val_cost,
        model: best_model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Js,
    L2,
    Nll,
}

impl FromStr for Metric {
    type Err = DrnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "js" => Ok(Metric::Js),
            "l2" => Ok(Metric::L2),
            "nll" => Ok(Metric::Nll),
            other => Err(invalid(format!("unknown metric `{other}` (js, l2, nll)"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Js => "js",
            Metric::L2 => "l2",
            Metric::Nll => "nll",
        })
    }
}

/// Model predictions for every record, in order.
pub fn predict<T: Scalar>(model: &DrnModel<T>, dataset: &Dataset<T>) -> Result<Vec<DiscreteDistribution<T>>> {
    model.support.ensure_same(&dataset.support)?;
    let kernels = model.kernels();
    dataset
        .records
        .iter()
        .map(|r| model.forward_with(&kernels, &r.input_refs()).map(|(p, _)| p))
        .collect()
}

/// Metric value of every record: `D_JS(label ‖ pred)`, L2 of the density difference,
/// or the summed NLL of the label samples.
pub fn evaluate_per_datum<T: Scalar>(
    model: &DrnModel<T>,
    dataset: &Dataset<T>,
    metric: Metric,
) -> Result<Vec<T>> {
    if metric == Metric::Nll && !dataset.has_label_samples() {
        return Err(invalid("nll needs label_samples on every record"));
    }
    let preds = predict(model, dataset)?;
    preds
        .iter()
        .zip(&dataset.records)
        .map(|(pred, r)| score(pred, r, metric))
        .collect()
}

/// Scores a prediction against one record.
pub fn score<T: Scalar>(pred: &DiscreteDistribution<T>, record: &Record<T>, metric: Metric) -> Result<T> {
    match metric {
        Metric::Js => js_divergence(&record.label, pred),
        Metric::L2 => l2_loss(pred, &record.label),
        Metric::Nll => {
            let samples = record
                .label_samples
                .as_deref()
                .ok_or_else(|| invalid("nll needs label_samples"))?;
            nll(pred, samples)
        }
    }
}

/// Mean of [`evaluate_per_datum`].
pub fn evaluate<T: Scalar>(model: &DrnModel<T>, dataset: &Dataset<T>, metric: Metric) -> Result<T> {
    if dataset.is_empty() {
        return Err(invalid("cannot evaluate on an empty dataset"));
    }
    let values = evaluate_per_datum(model, dataset, metric)?;
    Ok(values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len()))
}
