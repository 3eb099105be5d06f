//! Posterior summaries and the comparison metrics.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{apply_triadic_closure, ClosureProbability};
use crate::graph::{global_clustering, SimpleGraph};
use crate::partition::Partition;
use crate::sampler::{ChainCollectors, Snapshot};
use crate::sbm::{sample_stub_pairs, BlockMatrix};
use crate::state::DecompositionState;

/// exp of the group-size entropy.
pub fn effective_groups(b: &Partition) -> f64 {
    let n = b.len() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let h: f64 = b
        .group_sizes()
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.exp()
}

/// Sigma = -ln P of the current state, in nats.
pub fn description_length(st: &DecompositionState) -> Result<f64> {
    let lp = st.log_prob();
    if lp.is_finite() {
        Ok(-lp)
    } else {
        Err(Error::Numerical("state has zero probability".into()))
    }
}

/// ln of the posterior odds of SBM/TC against the SBM.
pub fn log_posterior_odds(sigma_tc: f64, sigma_sbm: f64) -> f64 {
    sigma_sbm - sigma_tc
}

/// exp(-(Sigma_TC - Sigma_SBM)); overflows to infinity for large gaps,
/// see [`log_posterior_odds`].
pub fn posterior_odds(sigma_tc: f64, sigma_sbm: f64) -> f64 {
    log_posterior_odds(sigma_tc, sigma_sbm).exp()
}

/// Fraction of nodes on which the partitions agree under the best
/// bijection of labels.
pub fn max_overlap(truth: &Partition, inferred: &Partition) -> Result<f64> {
    let n = truth.len();
    inferred.check_len(n)?;
    if n == 0 {
        return Ok(1.0);
    }
    let (t, f) = (truth.canonical(), inferred.canonical());
    let size = t.num_groups().max(f.num_groups());
    let mut m = Matrix::new_square(size, 0i64);
    for (&a, &b) in f.labels().iter().zip(t.labels()) {
        m[(a as usize, b as usize)] += 1;
    }
    let (matched, _) = kuhn_munkres(&m);
    Ok(matched as f64 / n as f64)
}

/// (C(G) - mean) / sd of the predictive samples.
pub fn predictive_zscore(samples: &[f64], observed: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Numerical("at least two predictive samples are needed".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var.is_nan() || var <= 0.0 {
        return Err(Error::Numerical(format!("predictive samples have zero variance (all equal to {mean})")));
    }
    Ok((observed - mean) / var.sqrt())
}

/// Probability that a random seminal edge outscores a random closure
/// edge, ties counting one half.
pub fn auc_seminal(truth: &[bool], scores: &[f64]) -> Result<f64> {
    if truth.len() != scores.len() {
        return Err(Error::Argument("labels and scores differ in length".into()));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument("both seminal and closure edges are required".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // mid-ranks over tied groups
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[k]] {
            end += 1;
        }
        let mid = (k + end) as f64 / 2.0 + 1.0;
        for &idx in &order[k..=end] {
            if truth[idx] {
                rank_sum += mid;
            }
        }
        k = end + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Draws p from the Beta(x + 1, y + 1) posterior of a closure propensity
/// with `x` closed and `y` unclosed open triads.
pub fn draw_closure_propensity<R: Rng + ?Sized>(x: u64, y: u64, rng: &mut R) -> f64 {
    Beta::new(x as f64 + 1.0, y as f64 + 1.0).expect("positive parameters").sample(rng)
}

/// Maximum stub-matching attempts per predictive draw.
pub const PREDICTIVE_RETRIES: usize = 100;

/// Regenerates one network from a retained sample: a fresh substrate
/// with the sample's degrees, block counts and partition (self-loops
/// dropped), then `layers` closure generations with propensities drawn
/// from their posteriors. `zero_closure` forces every propensity to zero.
pub fn predictive_network<R: Rng + ?Sized>(
    snap: &Snapshot,
    layers: u8,
    zero_closure: bool,
    rng: &mut R,
) -> Result<SimpleGraph> {
    let n = snap.labels.len();
    let b = Partition::new(snap.labels.clone());
    let mut degrees = vec![0u64; n];
    let mut counts: FxHashMap<(u32, u32), u64> = FxHashMap::default();
    for &(i, j, m) in &snap.seminal {
        let m = m as u64;
        degrees[i as usize] += m;
        degrees[j as usize] += m;
        let (r, s) = (snap.labels[i as usize], snap.labels[j as usize]);
        let key = if r <= s { (r, s) } else { (s, r) };
        *counts.entry(key).or_insert(0) += if r == s { 2 * m } else { m };
    }
    let mut blocks = BlockMatrix::new();
    for (&(r, s), &c) in &counts {
        blocks.set(r, s, c);
    }
    let mut last = None;
    let mut pairs = None;
    for _ in 0..PREDICTIVE_RETRIES {
        match sample_stub_pairs(&degrees, &blocks, &b, rng) {
            Ok(p) => {
                pairs = Some(p);
                break;
            }
            Err(e) => last = Some(e),
        }
    }
    let pairs = pairs.ok_or_else(|| last.unwrap_or_else(|| Error::Constraint("no predictive draw".into())))?;
    let a = SimpleGraph::from_edges(n, pairs.into_iter().filter(|(i, j)| i != j))?;
    if layers == 0 {
        return Ok(a);
    }
    let mut cells: FxHashMap<(u32, u8), (u64, u64)> = FxHashMap::default();
    for &(u, l, m, e) in &snap.cells {
        cells.insert((u, l), (m, e));
    }
    let p: Vec<Vec<f64>> = (1..=layers)
        .map(|l| {
            (0..n as u32)
                .map(|u| {
                    if zero_closure {
                        return 0.0;
                    }
                    let (m, e) = cells.get(&(u, l)).copied().unwrap_or((0, 0));
                    draw_closure_propensity(e, m - e, rng)
                })
                .collect()
        })
        .collect();
    let (g, _) = apply_triadic_closure(&a, &ClosureProbability::PerGeneration(p), layers, rng)?;
    Ok(g)
}

/// Global clustering of `draws` predictive networks, cycling through the
/// stored snapshots.
pub fn posterior_predictive_clustering<R: Rng + ?Sized>(
    snapshots: &[Snapshot],
    layers: u8,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if snapshots.is_empty() {
        return Err(Error::Argument("no retained snapshots to draw from".into()));
    }
    (0..draws)
        .map(|d| {
            let g = predictive_network(&snapshots[d % snapshots.len()], layers, false, rng)?;
            Ok(global_clustering(&g).value)
        })
        .collect()
}

/// Posterior mean clustering of the seminal graph.
pub fn seminal_clustering(c: &ChainCollectors) -> Result<f64> {
    if c.seminal_clustering.is_empty() {
        return Err(Error::Argument("chain has no retained samples".into()));
    }
    Ok(ChainCollectors::mean(&c.seminal_clustering))
}

/// Summary of a finished inference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub layers: u8,
    pub samples: u64,
    /// (i, j, pi_ij) per observed edge.
    pub seminal_marginals: Vec<(u32, u32, f64)>,
    pub description_length_mean: f64,
    pub description_length_min: f64,
    pub description_length_trace: Vec<f64>,
    pub effective_groups_trace: Vec<f64>,
    pub effective_groups_mean: f64,
    pub groups_trace: Vec<u32>,
    pub closure_fraction_mean: f64,
    pub seminal_clustering: f64,
    pub observed_clustering: f64,
    pub modal_partition: Option<Partition>,
    pub modal_groups: Option<usize>,
}

impl PosteriorSummary {
    pub fn new(g: &SimpleGraph, layers: u8, c: &ChainCollectors) -> Self {
        let pi = c.seminal_marginals();
        let modal = c.modal_partition();
        PosteriorSummary {
            layers,
            samples: c.samples,
            seminal_marginals: g.edges().iter().zip(pi).map(|(&(i, j), p)| (i, j, p)).collect(),
            description_length_mean: ChainCollectors::mean(&c.description_length),
            description_length_min: c.min_description_length,
            description_length_trace: c.description_length.clone(),
            effective_groups_mean: ChainCollectors::mean(&c.effective_groups),
            effective_groups_trace: c.effective_groups.clone(),
            groups_trace: c.groups.clone(),
            closure_fraction_mean: ChainCollectors::mean(&c.closure_fraction),
            seminal_clustering: ChainCollectors::mean(&c.seminal_clustering),
            observed_clustering: global_clustering(g).value,
            modal_groups: modal.as_ref().map(|b| b.num_groups()),
            modal_partition: modal,
        }
    }
}
