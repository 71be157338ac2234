#![allow(dead_code)]

use drn_core::dist::{discretize_pdf, DiscreteDistribution, Support};
use drn_core::net::{DrnModel, NodeParams, Topology};
use rand::Rng;

pub fn unit(q: usize) -> Support<f64> {
    Support::new(0.0, 1.0, q).unwrap()
}

pub fn gaussian(mu: f64, sd: f64, s: Support<f64>) -> DiscreteDistribution<f64> {
    discretize_pdf(|x| (-(x - mu) * (x - mu) / (2.0 * sd * sd)).exp(), s).unwrap()
}

/// Strictly positive, moderately rough pmf.
pub fn random_dist<R: Rng>(s: Support<f64>, rng: &mut R) -> DiscreteDistribution<f64> {
    let w = (0..s.q).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscreteDistribution::from_weights(s, w).unwrap()
}

/// Bias positions are drawn between the first and last bin center: outside that hull
/// the absolute bias is linear over the grid, normalization cancels it, and its
/// position gradient is identically zero.
pub fn random_model<R: Rng>(topology: Topology, s: Support<f64>, rng: &mut R) -> DrnModel<f64> {
    let (lo, hi) = (s.center(0), s.center(s.q - 1));
    let params = topology
        .layer_sizes()
        .windows(2)
        .map(|w| {
            (0..w[1])
                .map(|_| NodeParams {
                    weights: (0..w[0]).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    b_q: rng.gen_range(-2.0..2.0),
                    b_a: rng.gen_range(-2.0..2.0),
                    lambda_q: rng.gen_range(lo..hi),
                    lambda_a: rng.gen_range(lo..hi),
                })
                .collect()
        })
        .collect();
    DrnModel::new(topology, s, params).unwrap()
}

pub fn random_topology<R: Rng>(rng: &mut R, max_hidden_layers: usize, max_width: usize) -> Topology {
    let mut sizes = vec![rng.gen_range(1..=max_width)];
    for _ in 0..rng.gen_range(0..=max_hidden_layers) {
        sizes.push(rng.gen_range(1..=max_width));
    }
    sizes.push(1);
    Topology::new(sizes).unwrap()
}
