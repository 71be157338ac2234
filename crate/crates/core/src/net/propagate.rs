//! Energy-based forward propagation.
//!
//! For a node with inputs `P_1..P_n` the unnormalized output at bin center `s` is
//!
//! ```text
//! P~(s) = exp(-B(s)) * prod_i sum_j P_i[j] * exp(-w_i * ((s - s_j) / Δ)^2)
//! B(s)  = b_q * ((s - λ_q) / Δ)^2 + b_a * |s - λ_a| / Δ
//! ```
//!
//! and the node distribution is `P~ / Z` with `Z = sum_s P~(s)`. Each inner sum is a
//! `q×q` kernel-matrix/vector product `Γ_i = K_i · P_i`.

use std::sync::Arc;

use crate::dist::{DiscreteDistribution, Support};
use crate::error::{invalid, numerical, Result};
use crate::scalar::Scalar;

use super::{DrnModel, NodeParams};

/// Largest joint state count `q^n` [`propagate_brute`] will enumerate.
pub const BRUTE_FORCE_MAX_STATES: usize = 20 * 20 * 20;

/// Energy of an output position given input positions, in support-normalized units.
pub fn energy<T: Scalar>(s_k: T, s_in: &[T], p: &NodeParams<T>, support: &Support<T>) -> T {
    let delta = support.delta();
    let coupling: T = p
        .weights
        .iter()
        .zip(s_in)
        .map(|(&w, &s_i)| {
            let x = (s_k - s_i) / delta;
            w * x * x
        })
        .sum();
    let xq = (s_k - p.lambda_q) / delta;
    let xa = (s_k - p.lambda_a) / delta;
    coupling + p.b_q * xq * xq + p.b_a * xa.abs()
}

/// Dense row-major `q×q` matrix; row = output bin, column = input bin.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    q: usize,
    data: Vec<T>,
}

impl<T: Scalar> KernelMatrix<T> {
    fn from_fn(q: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(q * q);
        for a in 0..q {
            for j in 0..q {
                data.push(f(a, j));
            }
        }
        KernelMatrix { q, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.q + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.q..(row + 1) * self.q]
    }

    /// `self · v`
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.q).map(|a| dot(self.row(a), v)).collect()
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Precomputed propagation factors for one node.
#[derive(Debug, Clone)]
pub struct NodeKernels<T> {
    /// One Gaussian kernel `exp(-w_i d²)` per incoming connection.
    pub incoming: Vec<KernelMatrix<T>>,
    /// `exp(-B(s))` at every bin center.
    pub bias_factor: Vec<T>,
}

impl<T: Scalar> NodeKernels<T> {
    fn new(p: &NodeParams<T>, support: &Support<T>, sq_dist: &KernelMatrix<T>) -> Self {
        let q = support.q;
        let incoming = p
            .weights
            .iter()
            .map(|&w| KernelMatrix::from_fn(q, |a, j| (-w * sq_dist.get(a, j)).exp()))
            .collect();
        let bias_factor = (0..q).map(|a| (-bias_energy(support.center(a), p, support)).exp()).collect();
        NodeKernels { incoming, bias_factor }
    }
}

/// The bias part of the energy, `B(s)`.
#[inline]
pub(crate) fn bias_energy<T: Scalar>(s: T, p: &NodeParams<T>, support: &Support<T>) -> T {
    let delta = support.delta();
    let xq = (s - p.lambda_q) / delta;
    let xa = (s - p.lambda_a) / delta;
    p.b_q * xq * xq + p.b_a * xa.abs()
}

/// Kernels for every connection of a model. Rebuilt whenever parameters change.
#[derive(Debug, Clone)]
pub struct ModelKernels<T> {
    support: Support<T>,
    /// `((s_a - s_j) / Δ)²` between bin centers; depends only on `q`.
    sq_dist: KernelMatrix<T>,
    nodes: Vec<Vec<NodeKernels<T>>>,
}

impl<T: Scalar> ModelKernels<T> {
    pub fn new(model: &DrnModel<T>) -> Self {
        let support = model.support;
        let sq_dist = squared_distances(support.q);
        let nodes = model
            .params
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|p| NodeKernels::new(p, &support, &sq_dist))
                    .collect()
            })
            .collect();
        ModelKernels { support, sq_dist, nodes }
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn sq_dist(&self) -> &KernelMatrix<T> {
        &self.sq_dist
    }

    /// Kernels of node `k` in layer `layer >= 1`.
    pub fn node(&self, layer: usize, k: usize) -> &NodeKernels<T> {
        &self.nodes[layer - 1][k]
    }
}

fn squared_distances<T: Scalar>(q: usize) -> KernelMatrix<T> {
    let qf = T::from_usize_lossy(q);
    KernelMatrix::from_fn(q, |a, j| {
        let x = (T::from_usize_lossy(a) - T::from_usize_lossy(j)) / qf;
        x * x
    })
}

/// Everything backpropagation needs about one node after a forward pass.
#[derive(Debug, Clone)]
pub struct NodeState<T> {
    pub dist: DiscreteDistribution<T>,
    /// `P~` before normalization.
    pub unnormalized: Vec<T>,
    /// `Z = sum P~`.
    pub normalizer: T,
    /// `Γ_i = K_i · P_i` per incoming connection; empty for input nodes.
    pub gamma: Vec<Vec<T>>,
}

fn propagate_masses<T: Scalar>(
    inputs: &[&[T]],
    kernels: &NodeKernels<T>,
    support: &Support<T>,
) -> Result<(Vec<T>, T, Vec<Vec<T>>)> {
    let gamma: Vec<Vec<T>> = inputs
        .iter()
        .zip(&kernels.incoming)
        .map(|(p, k)| k.apply(p))
        .collect();
    let unnormalized: Vec<T> = (0..support.q)
        .map(|a| {
            let mut v = kernels.bias_factor[a];
            for g in &gamma {
                v *= g[a];
            }
            v
        })
        .collect();
    let z: T = unnormalized.iter().copied().sum();
    if !z.is_finite() || z < T::normalizer_floor() {
        return Err(numerical(format!("degenerate propagation: normalizer Z = {z}")));
    }
    Ok((unnormalized, z, gamma))
}

fn node_state<T: Scalar>(
    inputs: &[&[T]],
    kernels: &NodeKernels<T>,
    support: &Support<T>,
) -> Result<NodeState<T>> {
    let (unnormalized, z, gamma) = propagate_masses(inputs, kernels, support)?;
    let masses = unnormalized.iter().map(|&u| u / z).collect();
    Ok(NodeState {
        dist: DiscreteDistribution::from_normalized_unchecked(*support, masses),
        unnormalized,
        normalizer: z,
        gamma,
    })
}

fn check_inputs<T: Scalar>(
    inputs: &[&DiscreteDistribution<T>],
    expected: usize,
    support: &Support<T>,
) -> Result<()> {
    if inputs.len() != expected {
        return Err(invalid(format!("expected {expected} input distributions, got {}", inputs.len())));
    }
    for d in inputs {
        support.ensure_same(d.support())?;
    }
    Ok(())
}

/// Propagates one node through the factorized form.
pub fn propagate_node<T: Scalar>(
    inputs: &[&DiscreteDistribution<T>],
    p: &NodeParams<T>,
) -> Result<(DiscreteDistribution<T>, NodeState<T>)> {
    let support = *inputs
        .first()
        .ok_or_else(|| invalid("a node needs at least one input"))?
        .support();
    check_inputs(inputs, p.weights.len(), &support)?;
    let kernels = NodeKernels::new(p, &support, &squared_distances(support.q));
    let masses: Vec<&[T]> = inputs.iter().map(|d| d.masses()).collect();
    let state = node_state(&masses, &kernels, &support)?;
    Ok((state.dist.clone(), state))
}

/// Propagates one node by summing `exp(-E) · prod P_i` over every joint input state.
///
/// Exponential in the number of inputs; intended as an oracle for [`propagate_node`].
pub fn propagate_brute<T: Scalar>(
    inputs: &[&DiscreteDistribution<T>],
    p: &NodeParams<T>,
) -> Result<DiscreteDistribution<T>> {
    let support = *inputs
        .first()
        .ok_or_else(|| invalid("a node needs at least one input"))?
        .support();
    check_inputs(inputs, p.weights.len(), &support)?;
    let (n, q) = (inputs.len(), support.q);
    let states = u32::try_from(n)
        .ok()
        .and_then(|n| q.checked_pow(n))
        .filter(|&s| s <= BRUTE_FORCE_MAX_STATES)
        .ok_or_else(|| {
            invalid(format!(
                "brute-force propagation over {q}^{n} joint states exceeds {BRUTE_FORCE_MAX_STATES}"
            ))
        })?;

    let centers = support.centers();
    let mut positions = vec![T::zero(); n];
    let mut weights = Vec::with_capacity(q);
    for a in 0..q {
        let s_k = centers[a];
        let mut total = T::zero();
        for state in 0..states {
            let mut rest = state;
            let mut prob = T::one();
            for (i, input) in inputs.iter().enumerate() {
                let j = rest % q;
                rest /= q;
                positions[i] = centers[j];
                prob *= input.masses()[j];
            }
            if prob > T::zero() {
                total += (-energy(s_k, &positions, p, &support)).exp() * prob;
            }
        }
        weights.push(total);
    }
    DiscreteDistribution::from_weights(support, weights)
}

/// Per-node state of a full forward pass plus the kernels used to produce it.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    kernels: Arc<ModelKernels<T>>,
    /// `layers[0]` holds the inputs, `layers[l]` the nodes of layer `l`.
    layers: Vec<Vec<NodeState<T>>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn kernels(&self) -> &ModelKernels<T> {
        &self.kernels
    }

    pub fn layers(&self) -> &[Vec<NodeState<T>>] {
        &self.layers
    }

    pub fn node(&self, layer: usize, k: usize) -> &NodeState<T> {
        &self.layers[layer][k]
    }

    /// Final-layer distributions.
    pub fn outputs(&self) -> Vec<&DiscreteDistribution<T>> {
        self.layers.last().expect("at least two layers").iter().map(|s| &s.dist).collect()
    }

    pub fn output(&self) -> &DiscreteDistribution<T> {
        &self.layers.last().expect("at least two layers")[0].dist
    }
}

impl<T: Scalar> DrnModel<T> {
    pub fn kernels(&self) -> Arc<ModelKernels<T>> {
        Arc::new(ModelKernels::new(self))
    }

    /// Layer-wise forward pass; returns the first output node and the full cache.
    pub fn forward(
        &self,
        inputs: &[&DiscreteDistribution<T>],
    ) -> Result<(DiscreteDistribution<T>, ForwardCache<T>)> {
        self.forward_with(&self.kernels(), inputs)
    }

    /// Forward pass reusing kernels built by [`DrnModel::kernels`] for these parameters.
    pub fn forward_with(
        &self,
        kernels: &Arc<ModelKernels<T>>,
        inputs: &[&DiscreteDistribution<T>],
    ) -> Result<(DiscreteDistribution<T>, ForwardCache<T>)> {
        check_inputs(inputs, self.topology.inputs(), &self.support)?;
        if kernels.support != self.support || kernels.nodes.len() != self.params.len() {
            return Err(invalid("kernels were built for a different model"));
        }
        let mut layers: Vec<Vec<NodeState<T>>> = Vec::with_capacity(self.topology.depth());
        layers.push(
            inputs
                .iter()
                .map(|d| NodeState {
                    dist: (*d).clone(),
                    unnormalized: d.masses().to_vec(),
                    normalizer: T::one(),
                    gamma: Vec::new(),
                })
                .collect(),
        );
        for l in 1..self.topology.depth() {
            let prev = &layers[l - 1];
            let masses: Vec<&[T]> = prev.iter().map(|s| s.dist.masses()).collect();
            let layer = (0..self.topology.layer_sizes()[l])
                .map(|k| node_state(&masses, kernels.node(l, k), &self.support))
                .collect::<Result<Vec<_>>>()?;
            layers.push(layer);
        }
        let cache = ForwardCache { kernels: Arc::clone(kernels), layers };
        Ok((cache.output().clone(), cache))
    }

    /// Final output masses when node `k` of `layer` is replaced by arbitrary `masses`
    /// (not necessarily normalized). Probes the node-to-output Jacobian directly.
    pub fn output_with_override(
        &self,
        inputs: &[&DiscreteDistribution<T>],
        layer: usize,
        k: usize,
        masses: &[T],
    ) -> Result<Vec<T>> {
        check_inputs(inputs, self.topology.inputs(), &self.support)?;
        let sizes = self.topology.layer_sizes();
        if layer >= sizes.len() || k >= sizes[layer] || masses.len() != self.support.q {
            return Err(invalid("override target outside the model"));
        }
        let kernels = ModelKernels::new(self);
        let mut current: Vec<Vec<T>> = inputs.iter().map(|d| d.masses().to_vec()).collect();
        if layer == 0 {
            current[k] = masses.to_vec();
        }
        for l in 1..sizes.len() {
            let refs: Vec<&[T]> = current.iter().map(Vec::as_slice).collect();
            let mut next = (0..sizes[l])
                .map(|j| {
                    let (u, z, _) = propagate_masses(&refs, kernels.node(l, j), &self.support)?;
                    Ok(u.into_iter().map(|v| v / z).collect())
                })
                .collect::<Result<Vec<Vec<T>>>>()?;
            if l == layer {
                next[k] = masses.to_vec();
            }
            current = next;
        }
        Ok(current.swap_remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{discretize_pdf, js_divergence};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(q: usize) -> Support<f64> {
        Support::new(0.0, 1.0, q).unwrap()
    }

    fn gaussian(mu: f64, sigma: f64, s: Support<f64>) -> DiscreteDistribution<f64> {
        discretize_pdf(|x: f64| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp(), s).unwrap()
    }

    fn random_dist(s: Support<f64>, rng: &mut impl Rng) -> DiscreteDistribution<f64> {
        let w = (0..s.q).map(|_| rng.gen::<f64>() + 1e-3).collect();
        DiscreteDistribution::from_weights(s, w).unwrap()
    }

    fn random_params(n: usize, s: &Support<f64>, rng: &mut impl Rng) -> NodeParams<f64> {
        NodeParams {
            weights: (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            b_q: rng.gen_range(-5.0..5.0),
            b_a: rng.gen_range(-5.0..5.0),
            lambda_q: rng.gen_range(s.lower..s.upper),
            lambda_a: rng.gen_range(s.lower..s.upper),
        }
    }

    #[test]
    fn energy_zero_params() {
        let s = unit(10);
        let p = NodeParams::zeros(2, 0.3);
        assert_eq!(energy(0.7, &[0.1, 0.9], &p, &s), 0.0);
        let p = NodeParams::connection(1.0, 0.5);
        assert_eq!(energy(0.42, &[0.42], &p, &s), 0.0);
    }

    #[test]
    fn energy_term_by_term() {
        let s = Support::new(-2.0, 3.0, 10).unwrap();
        let p = NodeParams {
            weights: vec![1.0, 2.0],
            b_q: 0.5,
            b_a: -0.3,
            lambda_q: 0.25,
            lambda_a: -1.5,
        };
        let (sk, s1, s2): (f64, f64, f64) = (1.3, -0.7, 2.9);
        let delta: f64 = 5.0;
        let expected = 1.0 * ((sk - s1) / delta).powi(2)
            + 2.0 * ((sk - s2) / delta).powi(2)
            + 0.5 * ((sk - 0.25) / delta).powi(2)
            - 0.3 * ((sk + 1.5) / delta).abs();
        assert!((energy(sk, &[s1, s2], &p, &s) - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_gives_flat_output() {
        let s = unit(50);
        let input = gaussian(0.3, 0.05, s);
        let (out, _) = propagate_node(&[&input], &NodeParams::zeros(1, 0.5)).unwrap();
        for &m in out.masses() {
            assert!((m - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn large_weight_tends_to_identity() {
        let s = unit(100);
        // the w=100 kernel has width ~0.07, so the input peak must be wider than that
        let input = gaussian(0.405, 0.1, s);
        let (out, _) = propagate_node(&[&input], &NodeParams::connection(100.0, 0.5)).unwrap();
        assert_eq!(out.argmax(), input.argmax());
        assert!(js_divergence(&out, &input).unwrap() < 0.05);
    }

    #[test]
    fn factorized_matches_brute_force_two_inputs() {
        let s = unit(10);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let a = random_dist(s, &mut rng);
            let b = random_dist(s, &mut rng);
            let p = random_params(2, &s, &mut rng);
            let (fast, _) = propagate_node(&[&a, &b], &p).unwrap();
            let slow = propagate_brute(&[&a, &b], &p).unwrap();
            for (x, y) in fast.masses().iter().zip(slow.masses()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn brute_single_input_agrees_with_factorized() {
        let s = unit(20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_dist(s, &mut rng);
        let p = random_params(1, &s, &mut rng);
        let (fast, _) = propagate_node(&[&a], &p).unwrap();
        let slow = propagate_brute(&[&a], &p).unwrap();
        for (x, y) in fast.masses().iter().zip(slow.masses()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn brute_uniform_zero_params_is_uniform() {
        let s = unit(8);
        let u = DiscreteDistribution::uniform(s);
        let out = propagate_brute(&[&u, &u], &NodeParams::zeros(2, 0.5)).unwrap();
        for &m in out.masses() {
            assert!((m - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn brute_scale_guard() {
        let s = unit(21);
        let u = DiscreteDistribution::uniform(s);
        let err = propagate_brute(&[&u, &u, &u], &NodeParams::zeros(3, 0.5)).unwrap_err();
        assert!(matches!(err, crate::DrnError::InvalidInput(_)));
    }

    #[test]
    fn degenerate_normalizer_is_reported() {
        let s = unit(10);
        let d = DiscreteDistribution::point_mass(s, 0).unwrap();
        let p = NodeParams { b_q: 1e6, ..NodeParams::connection(1e6, 0.0) };
        let mut p = p;
        p.lambda_q = 1.0;
        let err = propagate_node(&[&d], &p).unwrap_err();
        assert!(matches!(err, crate::DrnError::Numerical(_)));
    }

    #[test]
    fn input_count_mismatch_rejected() {
        let s = unit(10);
        let m = DrnModel::zeros("2-[]-1".parse().unwrap(), s);
        let u = DiscreteDistribution::uniform(s);
        assert!(m.forward(&[&u]).is_err());
        let other = DiscreteDistribution::uniform(Support::new(0.0, 2.0, 10).unwrap());
        assert!(m.forward(&[&u, &other]).is_err());
    }

    #[test]
    fn depth_one_model_is_single_node() {
        let s = unit(30);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = DrnModel::zeros("2-[]-1".parse().unwrap(), s);
        m.params[0][0] = random_params(2, &s, &mut rng);
        let a = random_dist(s, &mut rng);
        let b = random_dist(s, &mut rng);
        let (out, cache) = m.forward(&[&a, &b]).unwrap();
        let (direct, _) = propagate_node(&[&a, &b], &m.params[0][0]).unwrap();
        assert_eq!(out, direct);
        let st = cache.node(1, 0);
        for (u, p) in st.unnormalized.iter().zip(out.masses()) {
            assert!((u / st.normalizer - p).abs() < 1e-15);
        }
        assert_eq!(cache.kernels().node(1, 0).incoming.len(), 2);
    }

    #[test]
    fn stacked_near_identity() {
        let s = unit(100);
        let mut m = DrnModel::zeros("1-[1]-1".parse().unwrap(), s);
        m.node_mut(1, 0).weights[0] = 100.0;
        m.node_mut(2, 0).weights[0] = 100.0;
        let input = gaussian(0.6, 0.06, s);
        let (out, _) = m.forward(&[&input]).unwrap();
        assert!(js_divergence(&out, &input).unwrap() < 0.1);
    }

    #[test]
    fn override_with_own_value_reproduces_output() {
        let s = unit(12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = DrnModel::zeros("1-[2]-1".parse().unwrap(), s);
        for l in 1..3 {
            for k in 0..m.topology.layer_sizes()[l] {
                let n = m.topology.layer_sizes()[l - 1];
                *m.node_mut(l, k) = random_params(n, &s, &mut rng);
            }
        }
        let x = random_dist(s, &mut rng);
        let (out, cache) = m.forward(&[&x]).unwrap();
        let own = cache.node(1, 1).dist.masses().to_vec();
        let got = m.output_with_override(&[&x], 1, 1, &own).unwrap();
        for (a, b) in got.iter().zip(out.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn f32_forward_tracks_f64() {
        let s = unit(40);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = DrnModel::zeros("1-[2]-1".parse().unwrap(), s);
        for l in 1..3 {
            for k in 0..m.topology.layer_sizes()[l] {
                let n = m.topology.layer_sizes()[l - 1];
                *m.node_mut(l, k) = random_params(n, &s, &mut rng);
            }
        }
        let x = gaussian(0.5, 0.1, s);
        let (out64, _) = m.forward(&[&x]).unwrap();
        let m32: DrnModel<f32> = m.cast();
        let (out32, _) = m32.forward(&[&x.cast()]).unwrap();
        for (a, b) in out64.masses().iter().zip(out32.masses()) {
            assert!((a - *b as f64).abs() < 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn factorization_equivalence(seed in any::<u64>(), n in 1usize..=3, q in 2usize..=20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = unit(q);
            let inputs: Vec<_> = (0..n).map(|_| random_dist(s, &mut rng)).collect();
            let refs: Vec<_> = inputs.iter().collect();
            let p = random_params(n, &s, &mut rng);
            let (fast, _) = propagate_node(&refs, &p).unwrap();
            let slow = propagate_brute(&refs, &p).unwrap();
            for (x, y) in fast.masses().iter().zip(slow.masses()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn forward_output_is_a_pmf(seed in any::<u64>(), width in 1usize..=3, depth in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = unit(16);
            let mut sizes = vec![width; depth];
            *sizes.last_mut().unwrap() = 1;
            let mut m = DrnModel::zeros(crate::Topology::new(sizes.clone()).unwrap(), s);
            for l in 1..depth {
                for k in 0..sizes[l] {
                    *m.node_mut(l, k) = random_params(sizes[l - 1], &s, &mut rng);
                }
            }
            let inputs: Vec<_> = (0..width).map(|_| random_dist(s, &mut rng)).collect();
            let refs: Vec<_> = inputs.iter().collect();
            let (out, _) = m.forward(&refs).unwrap();
            prop_assert!(DiscreteDistribution::new(s, out.masses().to_vec()).is_ok());
        }
    }
}
