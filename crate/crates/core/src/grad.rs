//! Cost function and its gradient with respect to every network parameter.
//!
//! The per-datum cost is `D_JS(label ‖ prediction)`. Its derivative with respect to
//! the predicted masses is `½ ln(Ŷ_j / M_j)` with `M = (Y + Ŷ)/2`. That signal is
//! pulled back through each node's normalization `P = P~/Z` and its factorized
//! propagation `P~ = exp(-B) Π Γ_i`:
//!
//! ```text
//! ∂C/∂log P~(s) = P(s) (δ(s) - <δ, P>)                 δ = ∂C/∂P at the node
//! ∂log P~(s)/∂w_i      = -Σ_j K_i[s,j] d²(s,j) P_i[j] / Γ_i(s)
//! ∂log P~(s)/∂P_i[j]   = K_i[s,j] / Γ_i(s)
//! ∂log P~(s)/∂b_q      = -((s - λ_q)/Δ)²
//! ∂log P~(s)/∂b_a      = -|s - λ_a|/Δ
//! ∂log P~(s)/∂λ_q      = 2 b_q (s - λ_q)/Δ²
//! ∂log P~(s)/∂λ_a      = b_a sgn(s - λ_a)/Δ
//! ```
//!
//! [`backprop`] propagates `δ` backwards as vectors. [`node_jacobians`] materializes
//! the `q×q` Jacobian of the output with respect to every node, composed layer by
//! layer, and [`backprop_materialized`] derives the same gradient from those.
//! [`finite_diff_grad`] is the independent central-difference oracle.

use serde::Serialize;

use crate::dataset::Record;
use crate::dist::{js_divergence, DiscreteDistribution};
use crate::error::{invalid, Result};
use crate::net::{DrnModel, ForwardCache, ModelParams, NodeKernels, NodeParams, NodeState};
use crate::scalar::Scalar;

/// Floor applied to predicted masses inside the logarithm of the cost gradient.
pub const PRED_LOG_FLOOR: f64 = 1e-12;

/// Cost derivatives, laid out exactly like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: ModelParams<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &DrnModel<T>) -> Self {
        let layers = model
            .params
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|p| NodeParams {
                        weights: vec![T::zero(); p.weights.len()],
                        b_q: T::zero(),
                        b_a: T::zero(),
                        lambda_q: T::zero(),
                        lambda_a: T::zero(),
                    })
                    .collect()
            })
            .collect();
        Gradients { layers }
    }

    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flatten().flat_map(|n| n.values()).collect()
    }

    pub fn from_flat(model: &DrnModel<T>, flat: &[T]) -> Result<Self> {
        let mut g = Self::zeros_like(model);
        let mut slots: Vec<&mut T> = g.layers.iter_mut().flatten().flat_map(|n| n.values_mut()).collect();
        if slots.len() != flat.len() {
            return Err(invalid(format!("expected {} gradient entries, got {}", slots.len(), flat.len())));
        }
        for (slot, &v) in slots.iter_mut().zip(flat) {
            **slot = v;
        }
        Ok(g)
    }

    /// `self += other`, entry by entry in canonical order.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().flatten().zip(other.layers.iter().flatten()) {
            for (x, y) in a.values_mut().zip(b.values()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for v in self.layers.iter_mut().flatten().flat_map(|n| n.values_mut()) {
            *v *= factor;
        }
    }

    pub fn norm(&self) -> T {
        self.flat().iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

fn check_label<T: Scalar>(model: &DrnModel<T>, label: &DiscreteDistribution<T>) -> Result<()> {
    if model.topology.outputs() != 1 {
        return Err(invalid(format!(
            "the cost needs a single output node, topology {} has {}",
            model.topology,
            model.topology.outputs()
        )));
    }
    model.support.ensure_same(label.support())
}

/// Per-datum cost `D_JS(label ‖ forward(model, inputs))`.
pub fn cost<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    label: &DiscreteDistribution<T>,
) -> Result<T> {
    check_label(model, label)?;
    let (pred, _) = model.forward(inputs)?;
    js_divergence(label, &pred)
}

/// Mean per-datum cost over `records`, summed in record order.
pub fn mean_cost<T: Scalar>(model: &DrnModel<T>, records: &[Record<T>]) -> Result<T> {
    if records.is_empty() {
        return Err(invalid("mean cost over an empty set of records"));
    }
    let kernels = model.kernels();
    let mut total = T::zero();
    for r in records {
        check_label(model, &r.label)?;
        let (pred, _) = model.forward_with(&kernels, &r.input_refs())?;
        total += js_divergence(&r.label, &pred)?;
    }
    Ok(total / T::from_usize_lossy(records.len()))
}

/// `∂D_JS(label ‖ pred) / ∂pred_j = ½ ln(pred_j / M_j)`.
pub fn js_output_gradient<T: Scalar>(pred: &[T], label: &[T]) -> Vec<T> {
    let half = T::lit(0.5);
    let floor = T::lit(PRED_LOG_FLOOR);
    pred.iter()
        .zip(label)
        .map(|(&p, &y)| {
            if y > T::zero() {
                let m = (y + p) * half;
                half * (p.max(floor) / m).ln()
            } else {
                // Y = 0 makes M = Ŷ/2, so the ratio is exactly 2
                half * T::LN_2()
            }
        })
        .collect()
}

fn check_cache<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    cache: &ForwardCache<T>,
) -> Result<()> {
    let layers = cache.layers();
    let shape_ok = cache.kernels().support() == &model.support
        && layers.len() == model.topology.depth()
        && layers
            .iter()
            .zip(model.topology.layer_sizes())
            .all(|(l, &n)| l.len() == n);
    if !shape_ok {
        return Err(invalid("forward cache does not match the model"));
    }
    let inputs_ok = inputs.len() == layers[0].len()
        && inputs.iter().zip(&layers[0]).all(|(d, s)| d.masses() == s.dist.masses());
    if !inputs_ok {
        return Err(invalid("forward cache was produced from different inputs"));
    }
    Ok(())
}

/// Gradients of one node's parameters given `delta = ∂C/∂P` at that node. When
/// `upstream` is provided, `∂C/∂P_i` of each input node is added into it.
fn node_backward<T: Scalar>(
    delta: &[T],
    state: &NodeState<T>,
    params: &NodeParams<T>,
    kernels: &NodeKernels<T>,
    sq_dist: &crate::net::KernelMatrix<T>,
    prev: &[NodeState<T>],
    mut upstream: Option<&mut [Vec<T>]>,
) -> NodeParams<T> {
    let support = state.dist.support();
    let q = support.q;
    let p = state.dist.masses();
    let mean_delta = crate::net::propagate_dot(delta, p);
    let r: Vec<T> = (0..q).map(|a| p[a] * (delta[a] - mean_delta)).collect();

    let mut weights = Vec::with_capacity(prev.len());
    for (i, input) in prev.iter().enumerate() {
        let kernel = &kernels.incoming[i];
        let gamma = &state.gamma[i];
        let pin = input.dist.masses();
        let coeff: Vec<T> = (0..q)
            .map(|a| if gamma[a] > T::zero() { r[a] / gamma[a] } else { T::zero() })
            .collect();
        let mut gw = T::zero();
        for a in 0..q {
            if coeff[a] == T::zero() {
                continue;
            }
            let (krow, drow) = (kernel.row(a), sq_dist.row(a));
            let mut inner = T::zero();
            for j in 0..q {
                inner += krow[j] * drow[j] * pin[j];
            }
            gw -= coeff[a] * inner;
        }
        weights.push(gw);
        if let Some(up) = upstream.as_deref_mut() {
            let acc = &mut up[i];
            for a in 0..q {
                let c = coeff[a];
                if c == T::zero() {
                    continue;
                }
                for (slot, &k) in acc.iter_mut().zip(kernel.row(a)) {
                    *slot += c * k;
                }
            }
        }
    }

    let delta_len = support.delta();
    let (mut g_bq, mut g_ba, mut g_lq, mut g_la) = (T::zero(), T::zero(), T::zero(), T::zero());
    let two = T::lit(2.0);
    for a in 0..q {
        let s = support.center(a);
        let xq = (s - params.lambda_q) / delta_len;
        let xa = (s - params.lambda_a) / delta_len;
        g_bq -= r[a] * xq * xq;
        g_ba -= r[a] * xa.abs();
        g_lq += r[a] * two * params.b_q * xq / delta_len;
        let sign = if xa > T::zero() {
            T::one()
        } else if xa < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        g_la += r[a] * params.b_a * sign / delta_len;
    }
    NodeParams { weights, b_q: g_bq, b_a: g_ba, lambda_q: g_lq, lambda_a: g_la }
}

/// Analytic gradient of the per-datum cost by reverse accumulation of `∂C/∂P`.
pub fn backprop<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    label: &DiscreteDistribution<T>,
    cache: &ForwardCache<T>,
) -> Result<Gradients<T>> {
    check_label(model, label)?;
    check_cache(model, inputs, cache)?;
    let sizes = model.topology.layer_sizes();
    let q = model.support.q;
    let kernels = cache.kernels();
    let mut grads = Gradients::zeros_like(model);

    let mut deltas: Vec<Vec<T>> =
        vec![js_output_gradient(cache.output().masses(), label.masses())];
    for l in (1..sizes.len()).rev() {
        let prev = &cache.layers()[l - 1];
        let mut upstream = vec![vec![T::zero(); q]; sizes[l - 1]];
        for (k, delta) in deltas.iter().enumerate() {
            let up = (l > 1).then_some(upstream.as_mut_slice());
            grads.layers[l - 1][k] = node_backward(
                delta,
                cache.node(l, k),
                model.node(l, k),
                kernels.node(l, k),
                kernels.sq_dist(),
                prev,
                up,
            );
        }
        deltas = upstream;
    }
    Ok(grads)
}

/// `∂P_out(s) / ∂P_node(s')` as a dense `q×q` matrix; row `s`, column `s'`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeJacobian<T> {
    q: usize,
    data: Vec<T>,
}

impl<T: Scalar> NodeJacobian<T> {
    fn identity(q: usize) -> Self {
        let mut data = vec![T::zero(); q * q];
        for a in 0..q {
            data[a * q + a] = T::one();
        }
        NodeJacobian { q, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.q + col]
    }

    /// `J · v`: first-order change of the output for a node perturbation `v`.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.q)
            .map(|s| crate::net::propagate_dot(&self.data[s * self.q..(s + 1) * self.q], v))
            .collect()
    }

    /// `Jᵀ · v`.
    pub fn apply_transpose(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.q];
        for (s, &vs) in v.iter().enumerate() {
            for (o, &j) in out.iter_mut().zip(&self.data[s * self.q..(s + 1) * self.q]) {
                *o += vs * j;
            }
        }
        out
    }
}

/// Local Jacobian `∂P_node(a) / ∂P_input_i(b)` of one connection.
fn connection_jacobian<T: Scalar>(state: &NodeState<T>, kernels: &NodeKernels<T>, i: usize) -> Vec<T> {
    let q = state.dist.support().q;
    let p = state.dist.masses();
    let gamma = &state.gamma[i];
    let kernel = &kernels.incoming[i];
    let ratio = |a: usize, b: usize| {
        if gamma[a] > T::zero() {
            kernel.get(a, b) / gamma[a]
        } else {
            T::zero()
        }
    };
    let column_mean: Vec<T> = (0..q)
        .map(|b| (0..q).map(|c| p[c] * ratio(c, b)).sum())
        .collect();
    let mut out = Vec::with_capacity(q * q);
    for a in 0..q {
        for b in 0..q {
            out.push(p[a] * (ratio(a, b) - column_mean[b]));
        }
    }
    out
}

/// Jacobians of the single output node with respect to every node, inputs included:
/// `result[l][k]` belongs to node `k` of layer `l`. Composed top-down as
/// `J_{l,k} = Σ_j J_{l+1,j} · ∂P_{l+1,j}/∂P_{l,k}`.
pub fn node_jacobians<T: Scalar>(
    model: &DrnModel<T>,
    cache: &ForwardCache<T>,
) -> Result<Vec<Vec<NodeJacobian<T>>>> {
    if model.topology.outputs() != 1 {
        return Err(invalid("node Jacobians are defined for a single output node"));
    }
    let sizes = model.topology.layer_sizes();
    let q = model.support.q;
    let depth = sizes.len();
    let mut result: Vec<Vec<NodeJacobian<T>>> = vec![Vec::new(); depth];
    result[depth - 1] = vec![NodeJacobian::identity(q)];
    for l in (0..depth - 1).rev() {
        let mut layer = Vec::with_capacity(sizes[l]);
        for k in 0..sizes[l] {
            let mut acc = vec![T::zero(); q * q];
            for j in 0..sizes[l + 1] {
                let upper = &result[l + 1][j];
                let local = connection_jacobian(cache.node(l + 1, j), cache.kernels().node(l + 1, j), k);
                for s in 0..q {
                    for c in 0..q {
                        let u = upper.get(s, c);
                        if u == T::zero() {
                            continue;
                        }
                        let row = &local[c * q..(c + 1) * q];
                        for (slot, &v) in acc[s * q..(s + 1) * q].iter_mut().zip(row) {
                            *slot += u * v;
                        }
                    }
                }
            }
            layer.push(NodeJacobian { q, data: acc });
        }
        result[l] = layer;
    }
    Ok(result)
}

/// Same gradient as [`backprop`], derived from materialized node Jacobians:
/// `∂C/∂θ = Σ_s ∂C/∂P_out(s) Σ_a J(s, a) ∂P_node(a)/∂θ`.
pub fn backprop_materialized<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    label: &DiscreteDistribution<T>,
    cache: &ForwardCache<T>,
) -> Result<Gradients<T>> {
    check_label(model, label)?;
    check_cache(model, inputs, cache)?;
    let jacobians = node_jacobians(model, cache)?;
    let out_grad = js_output_gradient(cache.output().masses(), label.masses());
    let kernels = cache.kernels();
    let mut grads = Gradients::zeros_like(model);
    for l in 1..model.topology.depth() {
        for k in 0..model.topology.layer_sizes()[l] {
            let delta = jacobians[l][k].apply_transpose(&out_grad);
            grads.layers[l - 1][k] = node_backward(
                &delta,
                cache.node(l, k),
                model.node(l, k),
                kernels.node(l, k),
                kernels.sq_dist(),
                &cache.layers()[l - 1],
                None,
            );
        }
    }
    Ok(grads)
}

/// Central-difference gradient, one full re-forward per perturbed parameter.
pub fn finite_diff_grad<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    label: &DiscreteDistribution<T>,
    eps: T,
) -> Result<Gradients<T>> {
    if !(eps >= T::lit(1e-8) && eps <= T::lit(1e-4)) {
        return Err(invalid(format!("finite-difference step {eps} outside [1e-8, 1e-4]")));
    }
    check_label(model, label)?;
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut flat = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        flat[i] = base[i] + eps;
        probe.set_flat_params(&flat)?;
        let up = cost(&probe, inputs, label)?;
        flat[i] = base[i] - eps;
        probe.set_flat_params(&flat)?;
        let down = cost(&probe, inputs, label)?;
        flat[i] = base[i];
        out.push((up - down) / (T::lit(2.0) * eps));
    }
    Gradients::from_flat(model, &out)
}

/// Relative disagreement `|a - b| / (|a| + |b| + 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + 1e-8)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckEntry {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Side-by-side analytic and finite-difference gradients.
#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub eps: f64,
    pub threshold: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub entries: Vec<GradcheckEntry>,
}

impl GradcheckReport {
    pub fn compare<T: Scalar>(
        model: &DrnModel<T>,
        analytic: &Gradients<T>,
        numeric: &Gradients<T>,
        eps: f64,
        threshold: f64,
    ) -> Self {
        let entries: Vec<GradcheckEntry> = model
            .param_names()
            .into_iter()
            .zip(analytic.flat().into_iter().zip(numeric.flat()))
            .map(|(name, (a, n))| {
                let (a, n) = (a.to_f64_lossy(), n.to_f64_lossy());
                GradcheckEntry { name, analytic: a, numeric: n, rel_error: relative_error(a, n) }
            })
            .collect();
        let max_rel_error = entries.iter().map(|e| e.rel_error).fold(0.0, f64::max);
        let passed = entries.iter().all(|e| e.rel_error < threshold);
        GradcheckReport { eps, threshold, max_rel_error, passed, entries }
    }

    /// Tab-free plain-text table, one parameter per line.
    pub fn to_table(&self) -> String {
        let mut out = String::from("parameter,analytic,numeric,rel_error\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:.12e},{:.12e},{:.3e}\n", e.name, e.analytic, e.numeric, e.rel_error));
        }
        out
    }
}

/// Runs [`backprop`] against [`finite_diff_grad`] on one datum.
pub fn gradcheck<T: Scalar>(
    model: &DrnModel<T>,
    inputs: &[&DiscreteDistribution<T>],
    label: &DiscreteDistribution<T>,
    eps: T,
    threshold: f64,
) -> Result<GradcheckReport> {
    let (_, cache) = model.forward(inputs)?;
    let analytic = backprop(model, inputs, label, &cache)?;
    let numeric = finite_diff_grad(model, inputs, label, eps)?;
    Ok(GradcheckReport::compare(model, &analytic, &numeric, eps.to_f64_lossy(), threshold))
}
