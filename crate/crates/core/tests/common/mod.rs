//! Oracles shared by several test targets.
#![allow(dead_code)]

use drivable::eval::GroundTruth;
use drivable::fusion::{potts_table, MarkovNetwork};
use drivable::raster::{Mask, ProbabilityMap};
use rand::Rng;

pub fn random_likelihood(rng: &mut impl Rng) -> [f64; 2] {
    [rng.random_range(0.01..1.0), rng.random_range(0.01..1.0)]
}

pub fn random_table(rng: &mut impl Rng) -> [[f64; 2]; 2] {
    if rng.random_bool(0.5) {
        potts_table(rng.random_range(0.0..1.0), 0.05)
    } else {
        // Arbitrary positive, possibly asymmetric table.
        [
            [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)],
            [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)],
        ]
    }
}

/// Random tree: node `i > 0` hangs off a uniformly chosen earlier node, with
/// edge endpoints randomly swapped.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> MarkovNetwork {
    let mut net = MarkovNetwork {
        likelihood: (0..n).map(|_| random_likelihood(rng)).collect(),
        edges: vec![],
        compat: vec![],
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        let t = random_table(rng);
        if rng.random_bool(0.5) {
            net.add_edge(i, j, t);
        } else {
            net.add_edge(j, i, t);
        }
    }
    net
}

/// Grid-like loopy graph with Potts tables, the shape the detector builds.
pub fn random_loopy(rng: &mut impl Rng, rows: usize, cols: usize) -> MarkovNetwork {
    let n = rows * cols;
    let mut net = MarkovNetwork {
        likelihood: (0..n).map(|_| random_likelihood(rng)).collect(),
        edges: vec![],
        compat: vec![],
    };
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            if c + 1 < cols {
                net.add_edge(a, a + 1, potts_table(rng.random_range(0.0..1.0), 0.05));
            }
            if r + 1 < rows {
                net.add_edge(a, a + cols, potts_table(rng.random_range(0.0..1.0), 0.05));
            }
            if r + 1 < rows && c + 1 < cols && rng.random_bool(0.3) {
                net.add_edge(
                    a,
                    a + cols + 1,
                    potts_table(rng.random_range(0.0..1.0), 0.05),
                );
            }
        }
    }
    net
}

/// Grid with random diagonals whose couplings satisfy the row-sum contraction
/// bound `(deg_max - 1) * tanh|J| < 1`, under which synchronous BP provably
/// converges. A Potts table `[[s, d], [d, s]]` has `J = ln(s / d) / 4`.
pub fn random_contractive(rng: &mut impl Rng, rows: usize, cols: usize) -> MarkovNetwork {
    let n = rows * cols;
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let a = r * cols + c;
            if c + 1 < cols {
                pairs.push((a, a + 1));
            }
            if r + 1 < rows {
                pairs.push((a, a + cols));
            }
            if r + 1 < rows && c + 1 < cols && rng.random_bool(0.3) {
                pairs.push((a, a + cols + 1));
            }
        }
    }
    let mut degree = vec![0usize; n];
    for &(a, b) in &pairs {
        degree[a] += 1;
        degree[b] += 1;
    }
    let bound = 1.0 / (degree.iter().max().copied().unwrap_or(2).max(2) - 1) as f64;
    let mut net = MarkovNetwork {
        likelihood: (0..n).map(|_| random_likelihood(rng)).collect(),
        edges: vec![],
        compat: vec![],
    };
    for (a, b) in pairs {
        let t: f64 = rng.random_range(-bound..bound);
        let ratio = (4.0 * t.atanh()).exp();
        net.add_edge(a, b, potts_table(ratio / (1.0 + ratio), 0.05));
    }
    net
}

/// Exact marginals by summing over all `2^n` joint states.
pub fn enumerate_marginals(net: &MarkovNetwork) -> Vec<[f64; 2]> {
    let n = net.node_count();
    assert!(n <= 20);
    let mut marg = vec![[0.0; 2]; n];
    for state in 0u32..(1 << n) {
        let x = |i: usize| ((state >> i) & 1) as usize;
        let mut p: f64 = (0..n).map(|i| net.likelihood[i][x(i)]).product();
        for (e, &(a, b)) in net.edges.iter().enumerate() {
            p *= net.compat[e][x(a)][x(b)];
        }
        for (i, m) in marg.iter_mut().enumerate() {
            m[x(i)] += p;
        }
    }
    for m in &mut marg {
        let z = m[0] + m[1];
        m[0] /= z;
        m[1] /= z;
    }
    marg
}

/// Metrics recomputed the slow way: every threshold is swept separately over
/// all samples.
#[derive(Debug, Clone, Copy)]
pub struct OracleMetrics {
    pub max_f: f64,
    pub ap: f64,
    pub pre: f64,
    pub rec: f64,
    pub fpr: f64,
    pub fnr: f64,
}

pub fn oracle_metrics(samples: &[(f64, bool)]) -> OracleMetrics {
    let mut ts: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ts.push(0.0);
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    // (threshold, tp, fp, fn, tn) per threshold, ascending.
    let rows: Vec<(f64, f64, f64, f64, f64)> = ts
        .iter()
        .map(|&t| {
            let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
            for &(p, road) in samples {
                match (p >= t, road) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    (false, false) => tn += 1.0,
                }
            }
            (t, tp, fp, fn_, tn)
        })
        .collect();
    let prec = |r: &(f64, f64, f64, f64, f64)| (r.1 + r.2 > 0.0).then(|| r.1 / (r.1 + r.2));
    let recall = |r: &(f64, f64, f64, f64, f64)| (r.1 + r.3 > 0.0).then(|| r.1 / (r.1 + r.3));
    let f = |r: &(f64, f64, f64, f64, f64)| match (prec(r), recall(r)) {
        (Some(p), Some(q)) if p + q > 0.0 => 2.0 * p * q / (p + q),
        _ => 0.0,
    };

    let mut best = 0;
    for k in 1..rows.len() {
        if f(&rows[k]) > f(&rows[best]) {
            best = k;
        }
    }
    let mut ap = 0.0;
    for level in 0..=10 {
        let r = level as f64 / 10.0;
        let mut top: f64 = 0.0;
        for row in &rows {
            if let (Some(p), Some(q)) = (prec(row), recall(row)) {
                if q >= r {
                    top = top.max(p);
                }
            }
        }
        ap += top;
    }
    let b = rows[best];
    let rec = recall(&b).unwrap_or(0.0);
    OracleMetrics {
        max_f: f(&b),
        ap: ap / 11.0,
        pre: prec(&b).unwrap_or(0.0),
        rec,
        fpr: if b.2 + b.4 > 0.0 {
            b.2 / (b.2 + b.4)
        } else {
            0.0
        },
        fnr: 1.0 - rec,
    }
}

/// Random probability map with coarse levels (so ties occur) and a mask
/// with at least one road pixel.
pub fn random_pair(rng: &mut impl Rng, w: usize, h: usize) -> (ProbabilityMap, GroundTruth) {
    let levels = rng.random_range(2..40);
    let prob: Vec<f64> = (0..w * h)
        .map(|_| rng.random_range(0..=levels) as f64 / levels as f64)
        .collect();
    let bias = rng.random_range(0.0..0.6);
    let mut road: Vec<bool> = prob
        .iter()
        .map(|&p| rng.random_bool((0.2 + bias * p).min(1.0)))
        .collect();
    road[0] = true;
    let mut valid: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.9)).collect();
    valid[0] = true;
    (
        ProbabilityMap::from_vec(w, h, prob),
        GroundTruth {
            road: Mask::from_vec(w, h, road),
            valid: Mask::from_vec(w, h, valid),
        },
    )
}

pub fn valid_samples(prob: &ProbabilityMap, gt: &GroundTruth) -> Vec<(f64, bool)> {
    (0..prob.data.len())
        .filter(|&i| gt.valid.data[i])
        .map(|i| (prob.data[i], gt.road.data[i]))
        .collect()
}
