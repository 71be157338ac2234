//! Network topology, per-node parameters and the model file format.

mod propagate;

pub use propagate::{
    energy, propagate_brute, propagate_node, ForwardCache, KernelMatrix, ModelKernels,
    NodeKernels, NodeState, BRUTE_FORCE_MAX_STATES,
};
pub(crate) use propagate::dot as propagate_dot;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dist::Support;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Layer sizes; layer 0 holds the input distributions, the last layer the outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(invalid(format!(
                "topology needs at least an input and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(invalid(format!("layer sizes must be positive, got {layer_sizes:?}")));
        }
        Ok(Topology { layer_sizes })
    }

    #[inline]
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of layers including the input layer.
    #[inline]
    pub fn depth(&self) -> usize {
        self.layer_sizes.len()
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn hidden(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    /// Weights plus four bias parameters per non-input node.
    pub fn param_count(&self) -> usize {
        let weights: usize = self.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum();
        let nodes: usize = self.layer_sizes[1..].iter().sum();
        weights + 4 * nodes
    }
}

pub fn param_count(topology: &Topology) -> usize {
    topology.param_count()
}

impl TryFrom<Vec<usize>> for Topology {
    type Error = crate::DrnError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Topology::new(v)
    }
}

impl From<Topology> for Vec<usize> {
    fn from(t: Topology) -> Self {
        t.layer_sizes
    }
}

/// Renders as `K-[h1,h2,...]-O`.
impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hidden: Vec<String> = self.hidden().iter().map(|h| h.to_string()).collect();
        write!(f, "{}-[{}]-{}", self.inputs(), hidden.join(","), self.outputs())
    }
}

/// Parses `K-[h1,h2,...]-O`; `K-[]-O` and `K-O` mean no hidden layer. Whitespace is ignored.
impl FromStr for Topology {
    type Err = crate::DrnError;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || invalid(format!("topology `{s}` is not of the form K-[h1,h2,...]-O"));
        let parse = |t: &str| t.parse::<usize>().map_err(|_| bad());
        if !compact.contains('[') {
            let (k, o) = compact.split_once('-').ok_or_else(bad)?;
            return Topology::new(vec![parse(k)?, parse(o)?]);
        }
        let open = compact.find("-[").ok_or_else(bad)?;
        let close = compact.rfind("]-").ok_or_else(bad)?;
        if close < open + 1 {
            return Err(bad());
        }
        let mut sizes = vec![parse(&compact[..open])?];
        let inner = &compact[open + 2..close];
        if !inner.is_empty() {
            for h in inner.split(',') {
                sizes.push(parse(h)?);
            }
        }
        sizes.push(parse(&compact[close + 2..])?);
        Topology::new(sizes)
    }
}

/// Parameters of one non-input node: incoming weights and the two bias terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeParams<T> {
    pub weights: Vec<T>,
    pub b_q: T,
    pub b_a: T,
    pub lambda_q: T,
    pub lambda_a: T,
}

/// Parameter block of a whole network: `params[l - 1][k]` is node `k` of layer `l`.
pub type ModelParams<T> = Vec<Vec<NodeParams<T>>>;

impl<T: Scalar> NodeParams<T> {
    /// All-zero node with biases positioned at `lambda`.
    pub fn zeros(fan_in: usize, lambda: T) -> Self {
        NodeParams {
            weights: vec![T::zero(); fan_in],
            b_q: T::zero(),
            b_a: T::zero(),
            lambda_q: lambda,
            lambda_a: lambda,
        }
    }

    /// Single-input node with zero biases.
    pub fn connection(weight: T, lambda: T) -> Self {
        NodeParams { weights: vec![weight], ..Self::zeros(1, lambda) }
    }

    pub fn validate(&self, fan_in: usize, support: &Support<T>) -> Result<()> {
        if self.weights.len() != fan_in {
            return Err(invalid(format!(
                "node has {} weights, previous layer has {fan_in} nodes",
                self.weights.len()
            )));
        }
        let finite = self.weights.iter().all(|w| w.is_finite())
            && self.b_q.is_finite()
            && self.b_a.is_finite();
        if !finite {
            return Err(invalid("weights and bias magnitudes must be finite"));
        }
        for (name, lambda) in [("lambda_q", self.lambda_q), ("lambda_a", self.lambda_a)] {
            if !support.contains(lambda) {
                return Err(invalid(format!("{name} = {lambda} outside support {support}")));
            }
        }
        Ok(())
    }

    /// Number of scalar parameters in this node.
    pub fn len(&self) -> usize {
        self.weights.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Scalars in canonical order: weights, `b_q`, `b_a`, `lambda_q`, `lambda_a`.
    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        self.weights
            .iter()
            .copied()
            .chain([self.b_q, self.b_a, self.lambda_q, self.lambda_a])
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().chain([
            &mut self.b_q,
            &mut self.b_a,
            &mut self.lambda_q,
            &mut self.lambda_a,
        ])
    }

    pub fn cast<U: Scalar>(&self) -> NodeParams<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        NodeParams {
            weights: self.weights.iter().map(|&w| c(w)).collect(),
            b_q: c(self.b_q),
            b_a: c(self.b_a),
            lambda_q: c(self.lambda_q),
            lambda_a: c(self.lambda_a),
        }
    }
}

/// A distribution regression network: topology, shared support and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize",
    deserialize = "T: DeserializeOwned"
))]
pub struct DrnModel<T> {
    pub support: Support<T>,
    #[serde(rename = "layer_sizes")]
    pub topology: Topology,
    pub params: ModelParams<T>,
}

impl<T: Scalar> DrnModel<T> {
    pub fn new(topology: Topology, support: Support<T>, params: ModelParams<T>) -> Result<Self> {
        let model = DrnModel { support, topology, params };
        model.validate()?;
        Ok(model)
    }

    /// Model whose every parameter is zero (biases positioned mid-support).
    pub fn zeros(topology: Topology, support: Support<T>) -> Self {
        let mid = (support.lower + support.upper) * T::lit(0.5);
        let params = topology
            .layer_sizes()
            .windows(2)
            .map(|w| (0..w[1]).map(|_| NodeParams::zeros(w[0], mid)).collect())
            .collect();
        DrnModel { support, topology, params }
    }

    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        let sizes = self.topology.layer_sizes();
        if self.params.len() != sizes.len() - 1 {
            return Err(invalid(format!(
                "model has {} parameter layers, topology {} needs {}",
                self.params.len(),
                self.topology,
                sizes.len() - 1
            )));
        }
        for (l, layer) in self.params.iter().enumerate() {
            if layer.len() != sizes[l + 1] {
                return Err(invalid(format!(
                    "layer {} has {} nodes, topology says {}",
                    l + 1,
                    layer.len(),
                    sizes[l + 1]
                )));
            }
            for node in layer {
                node.validate(sizes[l], &self.support)?;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.topology.param_count()
    }

    /// Parameters of node `k` in layer `layer` (1-based layer index; layer 0 is the input).
    pub fn node(&self, layer: usize, k: usize) -> &NodeParams<T> {
        &self.params[layer - 1][k]
    }

    pub fn node_mut(&mut self, layer: usize, k: usize) -> &mut NodeParams<T> {
        &mut self.params[layer - 1][k]
    }

    /// All parameters flattened in layer, node, canonical order.
    pub fn flat_params(&self) -> Vec<T> {
        self.params.iter().flatten().flat_map(|n| n.values()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        for (slot, &v) in self
            .params
            .iter_mut()
            .flatten()
            .flat_map(|n| n.values_mut())
            .zip(flat)
        {
            *slot = v;
        }
        Ok(())
    }

    /// Human-readable names matching [`DrnModel::flat_params`] order.
    pub fn param_names(&self) -> Vec<String> {
        param_names(&self.topology)
    }

    pub fn cast<U: Scalar>(&self) -> DrnModel<U> {
        DrnModel {
            support: self.support.cast(),
            topology: self.topology.clone(),
            params: self
                .params
                .iter()
                .map(|layer| layer.iter().map(NodeParams::cast).collect())
                .collect(),
        }
    }
}

/// Parameter names like `l1.n0.w0` or `l2.n0.lambda_a`, in flat order.
pub fn param_names(topology: &Topology) -> Vec<String> {
    let sizes = topology.layer_sizes();
    let mut names = Vec::with_capacity(topology.param_count());
    for l in 1..sizes.len() {
        for k in 0..sizes[l] {
            for i in 0..sizes[l - 1] {
                names.push(format!("l{l}.n{k}.w{i}"));
            }
            for b in ["b_q", "b_a", "lambda_q", "lambda_a"] {
                names.push(format!("l{l}.n{k}.{b}"));
            }
        }
    }
    names
}

impl<T: Scalar + Serialize + DeserializeOwned> DrnModel<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DrnModel<T> = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
