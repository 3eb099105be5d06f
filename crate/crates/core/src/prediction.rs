//! Network reconstruction from noisy or missing pair measurements.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::sampler::{Chain, ChainCollectors, ChainConfig};
use crate::state::{measurement_terms, MeasurementState, Support};

/// Measurements on every pair of an N-node network. Pairs listed in
/// `certain_edges` are known edges, pairs in `finite` carry `(n, x)`
/// counts, and every other pair is a known non-edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementData {
    pub nodes: usize,
    pub certain_edges: Vec<(u32, u32)>,
    pub finite: BTreeMap<(u32, u32), (u64, u64)>,
}

impl MeasurementData {
    pub fn validate(&self) -> Result<()> {
        let mut seen = FxHashSet::default();
        for &(i, j) in self.certain_edges.iter().chain(self.finite.keys()) {
            if i >= j || j as usize >= self.nodes {
                return Err(Error::Argument(format!("pair ({i}, {j}) is not i < j < N")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Argument(format!("pair ({i}, {j}) listed twice")));
            }
        }
        if let Some((p, _)) = self.finite.iter().find(|(_, &(n, x))| x > n) {
            return Err(Error::Argument(format!("pair {p:?} has more positives than measurements")));
        }
        Ok(())
    }

    /// (M, X): total measurements and positives over finite pairs.
    pub fn totals(&self) -> (u64, u64) {
        self.finite.values().fold((0, 0), |(m, x), &(n, k)| (m + n, x + k))
    }
}

/// ln P(x | G, n), or negative infinity when `g` contradicts a certain
/// pair.
pub fn measurement_log_likelihood(d: &MeasurementData, g: &SimpleGraph) -> f64 {
    if g.node_count() != d.nodes || d.certain_edges.iter().any(|&(i, j)| !g.has_edge(i, j)) {
        return f64::NEG_INFINITY;
    }
    let certain: FxHashSet<(u32, u32)> = d.certain_edges.iter().copied().collect();
    let (mut e, mut t) = (0, 0);
    for p in g.edges() {
        match d.finite.get(p) {
            Some(&(n, x)) => {
                e += n;
                t += x;
            }
            None if certain.contains(p) => {}
            None => return f64::NEG_INFINITY,
        }
    }
    let (m, x) = d.totals();
    measurement_terms(m, x, e, t)
}

/// Held-out true edges and non-edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSpec {
    pub f: f64,
    pub seed: u64,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
}

/// Hides ceil(f E) edges and as many non-edges of `g`, chosen uniformly
/// without replacement. Held-out pairs get n = x = 0; everything else is
/// certain.
pub fn make_holdout<R: Rng + ?Sized>(
    g: &SimpleGraph,
    f: f64,
    seed: u64,
    rng: &mut R,
) -> Result<(MeasurementData, HoldoutSpec)> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Argument(format!("holdout fraction {f} must lie in (0, 1]")));
    }
    let m = g.edge_count();
    let k = (f * m as f64).ceil() as usize;
    let n = g.node_count();
    let pairs = n * n.saturating_sub(1) / 2;
    if k == 0 || k > m || pairs - m < k {
        return Err(Error::Infeasible(format!(
            "cannot hold out {k} edges and {k} non-edges of a graph with {m} edges on {n} nodes"
        )));
    }
    let mut positives: Vec<(u32, u32)> = sample(rng, m, k).into_iter().map(|e| g.edges()[e]).collect();
    positives.sort_unstable();
    let mut negatives = Vec::with_capacity(k);
    if pairs - m < 4 * k {
        let all: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|i| (i + 1..n as u32).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        negatives.extend(sample(rng, all.len(), k).into_iter().map(|x| all[x]));
    } else {
        let mut seen = FxHashSet::default();
        while negatives.len() < k {
            let i = rng.gen_range(0..n as u32);
            let j = rng.gen_range(0..n as u32);
            let p = (i.min(j), i.max(j));
            if i != j && !g.has_edge(p.0, p.1) && seen.insert(p) {
                negatives.push(p);
            }
        }
    }
    negatives.sort_unstable();
    let held: FxHashSet<(u32, u32)> = positives.iter().copied().collect();
    let data = MeasurementData {
        nodes: n,
        certain_edges: g.edges().iter().copied().filter(|p| !held.contains(p)).collect(),
        finite: positives.iter().chain(&negatives).map(|&p| (p, (0, 0))).collect(),
    };
    Ok((data, HoldoutSpec { f, seed, positives, negatives }))
}

/// Which prior the reconstruction uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    Sbm,
    Sbmtc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    /// Posterior probability of an edge on each finite pair.
    pub marginals: BTreeMap<(u32, u32), f64>,
    pub collectors: ChainCollectors,
}

/// Samples the joint posterior of the network, its decomposition and
/// partition given the measurements. `config.layers` is forced to zero
/// under the SBM prior.
pub fn run_reconstruction_chain(d: &MeasurementData, config: &ChainConfig, prior: Prior) -> Result<Reconstruction> {
    d.validate()?;
    let optional: Vec<(u32, u32)> = d.finite.keys().copied().collect();
    let support = Arc::new(Support::with_optional(d.nodes, &d.certain_edges, &optional)?);
    let g = support.graph();
    let meas = MeasurementState::new(
        g.edges()
            .iter()
            .map(|p| if support.is_required(g.edge_id(p.0, p.1).unwrap()) { None } else { d.finite.get(p).copied() })
            .collect(),
    );
    let mut cfg = config.clone();
    if prior == Prior::Sbm {
        cfg.layers = 0;
    }
    let mut chain = Chain::new(Arc::clone(&support), cfg, None, Some(meas))?;
    chain.run()?;
    let collectors = chain.into_collectors();
    let p = collectors.presence_marginals();
    let marginals = optional.iter().map(|&(i, j)| ((i, j), p[g.edge_id(i, j).unwrap() as usize])).collect();
    Ok(Reconstruction { marginals, collectors })
}

/// (precision, recall) of the edge marginals on the held-out pairs.
pub fn precision_recall(p: &BTreeMap<(u32, u32), f64>, spec: &HoldoutSpec) -> Result<(f64, f64)> {
    let get = |q: &(u32, u32)| {
        p.get(q).copied().ok_or_else(|| Error::Argument(format!("no marginal for held-out pair {q:?}")))
    };
    let tp: f64 = spec.positives.iter().map(get).sum::<Result<f64>>()?;
    let fp: f64 = spec.negatives.iter().map(get).sum::<Result<f64>>()?;
    if tp + fp == 0.0 || spec.positives.is_empty() {
        return Err(Error::Numerical("precision undefined: all marginals are zero".into()));
    }
    Ok((tp / (tp + fp), tp / spec.positives.len() as f64))
}
