//! Feature fusion on a pairwise Markov network over superpixels.
//!
//! Every superpixel is a binary node (drivable / non-drivable). Its
//! likelihood is the product of the available feature probabilities and of
//! their complements; neighbouring superpixels are tied by a Potts-style
//! table driven by how similar their normals are. Sum-product belief
//! propagation runs on a synchronous schedule.

use crate::features::{Feature, FeatureTable, ModelParams, ProbabilityTable};
use crate::par;
use crate::preprocess::SuperpixelMap;
use crate::raster::{Mask, ProbabilityMap};

pub const DRIVABLE: usize = 0;
pub const NON_DRIVABLE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Floor on both likelihood entries.
    pub eps_likelihood: f64,
    /// Floor on compatibility entries.
    pub eps_compat: f64,
    /// Similarity used when either side has no normal.
    pub psi_default: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            eps_likelihood: 1e-6,
            eps_compat: 0.05,
            psi_default: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovNetwork {
    /// `[drivable, non-drivable]` per node.
    pub likelihood: Vec<[f64; 2]>,
    /// Undirected edges `(a, b)`.
    pub edges: Vec<(usize, usize)>,
    /// `compat[e][x_a][x_b]`.
    pub compat: Vec<[[f64; 2]; 2]>,
}

impl MarkovNetwork {
    pub fn node_count(&self) -> usize {
        self.likelihood.len()
    }

    /// Adds an edge and returns its id.
    pub fn add_edge(&mut self, a: usize, b: usize, table: [[f64; 2]; 2]) -> usize {
        assert!(a != b && a < self.node_count() && b < self.node_count());
        self.edges.push((a, b));
        self.compat.push(table);
        self.edges.len() - 1
    }
}

/// Potts completion of a similarity `psi`: same state `psi`, different
/// state `1 - psi`, both floored.
pub fn potts_table(psi: f64, eps: f64) -> [[f64; 2]; 2] {
    let same = psi.max(eps);
    let diff = (1.0 - psi).max(eps);
    [[same, diff], [diff, same]]
}

/// Likelihood of one node from whichever probabilities are present.
pub fn node_likelihood(probs: &[Option<f64>], eps: f64) -> [f64; 2] {
    let (mut d, mut nd) = (1.0, 1.0);
    for p in probs.iter().flatten() {
        d *= p;
        nd *= 1.0 - p;
    }
    [d.max(eps), nd.max(eps)]
}

pub fn build_network(
    sp: &SuperpixelMap,
    probs: &ProbabilityTable,
    table: &FeatureTable,
    params: &ModelParams,
    net: &NetworkParams,
    features: &[Feature],
) -> MarkovNetwork {
    let likelihood = par::map_range(sp.len(), |s| {
        let p: Vec<Option<f64>> = features.iter().map(|&f| probs.get(s, f)).collect();
        node_likelihood(&p, net.eps_likelihood)
    });
    let mut edges = Vec::new();
    let mut compat = Vec::new();
    for (a, adj) in sp.adjacency.iter().enumerate() {
        for &b in adj.iter().filter(|&&b| b > a) {
            let psi = match (table.rows[a].normal, table.rows[b].normal) {
                (Some(na), Some(nb)) => (-(na - nb).powi(2) / (2.0 * params.normal.var)).exp(),
                _ => net.psi_default,
            };
            edges.push((a, b));
            compat.push(potts_table(psi, net.eps_compat));
        }
    }
    MarkovNetwork {
        likelihood,
        edges,
        compat,
    }
}

/// Synchronous sum-product state. Message `2e` flows `a -> b` along edge `e`,
/// message `2e + 1` flows `b -> a`.
#[derive(Debug, Clone)]
pub struct LoopyBp<'a> {
    net: &'a MarkovNetwork,
    messages: Vec<[f64; 2]>,
    /// Per node: `(incoming message id, outgoing message id)` per neighbour.
    ports: Vec<Vec<(usize, usize)>>,
    iterations: usize,
}

impl<'a> LoopyBp<'a> {
    pub fn new(net: &'a MarkovNetwork) -> Self {
        let mut ports = vec![Vec::new(); net.node_count()];
        for (e, &(a, b)) in net.edges.iter().enumerate() {
            ports[a].push((2 * e + 1, 2 * e));
            ports[b].push((2 * e, 2 * e + 1));
        }
        Self {
            net,
            messages: vec![[0.5, 0.5]; 2 * net.edges.len()],
            ports,
            iterations: 0,
        }
    }

    pub fn messages(&self) -> &[[f64; 2]] {
        &self.messages
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn sender(&self, m: usize) -> usize {
        let (a, b) = self.net.edges[m / 2];
        if m.is_multiple_of(2) {
            a
        } else {
            b
        }
    }

    /// Runs one flood update and returns the largest change of any entry.
    pub fn step(&mut self) -> f64 {
        let old = &self.messages;
        let new: Vec<[f64; 2]> = par::map_range(old.len(), |m| {
            let e = m / 2;
            let forward = m % 2 == 0;
            let i = self.sender(m);
            let like = self.net.likelihood[i];
            let mut pre = like;
            for &(incoming, outgoing) in &self.ports[i] {
                if outgoing == m {
                    continue;
                }
                pre[0] *= old[incoming][0];
                pre[1] *= old[incoming][1];
            }
            let t = &self.net.compat[e];
            let psi = |xi: usize, xj: usize| if forward { t[xi][xj] } else { t[xj][xi] };
            let mut out = [0.0; 2];
            for (xj, o) in out.iter_mut().enumerate() {
                *o = pre[0] * psi(0, xj) + pre[1] * psi(1, xj);
            }
            let z = out[0] + out[1];
            [out[0] / z, out[1] / z]
        });
        let delta = new
            .iter()
            .zip(old)
            .map(|(n, o)| (n[0] - o[0]).abs().max((n[1] - o[1]).abs()))
            .fold(0.0, f64::max);
        self.messages = new;
        self.iterations += 1;
        delta
    }

    /// Normalized node beliefs.
    pub fn beliefs(&self) -> Vec<[f64; 2]> {
        par::map_range(self.net.node_count(), |i| {
            let mut b = self.net.likelihood[i];
            for &(incoming, _) in &self.ports[i] {
                b[0] *= self.messages[incoming][0];
                b[1] *= self.messages[incoming][1];
            }
            let z = b[0] + b[1];
            [b[0] / z, b[1] / z]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub beliefs: Vec<[f64; 2]>,
    pub converged: bool,
    pub iterations: usize,
}

impl BpResult {
    pub fn drivable(&self) -> Vec<f64> {
        self.beliefs.iter().map(|b| b[DRIVABLE]).collect()
    }
}

pub fn run_bp(net: &MarkovNetwork, max_iters: usize, tol: f64) -> BpResult {
    let mut bp = LoopyBp::new(net);
    let mut converged = net.edges.is_empty();
    while !converged && bp.iterations() < max_iters {
        converged = bp.step() < tol;
    }
    BpResult {
        beliefs: bp.beliefs(),
        converged,
        iterations: bp.iterations(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMap {
    /// P(drivable) per superpixel.
    pub superpixel: Vec<f64>,
    /// Superpixel value broadcast to its pixels.
    pub pixels: ProbabilityMap,
    pub converged: bool,
    pub iterations: usize,
}

impl PosteriorMap {
    pub fn from_superpixels(
        sp: &SuperpixelMap,
        superpixel: Vec<f64>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let data = sp.labels.iter().map(|&l| superpixel[l as usize]).collect();
        Self {
            pixels: ProbabilityMap::from_vec(sp.width, sp.height, data),
            superpixel,
            converged,
            iterations,
        }
    }

    pub fn from_bp(sp: &SuperpixelMap, bp: &BpResult) -> Self {
        Self::from_superpixels(sp, bp.drivable(), bp.converged, bp.iterations)
    }
}

/// Pixels whose superpixel posterior exceeds `theta`.
pub fn threshold_posterior(post: &PosteriorMap, theta: f64) -> Mask {
    assert!((0.0..=1.0).contains(&theta), "threshold must lie in [0, 1]");
    let p = &post.pixels;
    Mask::from_vec(
        p.width,
        p.height,
        p.data.iter().map(|&x| x > theta).collect(),
    )
}
