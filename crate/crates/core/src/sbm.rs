//! Degree-corrected block model: marginal likelihood, partition prior,
//! planted-partition parameters and microcanonical sampling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::partition::Partition;
use crate::special::{ln_binomial, ln_double_factorial_even, ln_factorial as lnf, ln_restricted_partitions as lnq};

/// Block counts of a multigraph under a partition, computed from scratch.
#[derive(Clone, Debug)]
pub struct BlockCounts {
    pub sizes: BTreeMap<u32, u64>,
    /// `e_rs` for `r <= s`; diagonal entries count internal edges twice.
    pub block_edges: BTreeMap<(u32, u32), u64>,
    pub group_degrees: BTreeMap<u32, u64>,
    /// `eta[(r, k)]` nodes of degree `k` in group `r`.
    pub degree_histogram: BTreeMap<(u32, u64), u64>,
    pub degrees: Vec<u64>,
    pub total_edges: u64,
}

impl BlockCounts {
    pub fn new(a: &MultiGraph, b: &Partition) -> Self {
        assert_eq!(a.node_count(), b.len(), "partition and graph sizes differ");
        let degrees = a.degrees();
        let mut sizes = BTreeMap::new();
        let mut group_degrees = BTreeMap::new();
        let mut degree_histogram = BTreeMap::new();
        for (v, &r) in b.labels().iter().enumerate() {
            *sizes.entry(r).or_insert(0) += 1;
            *group_degrees.entry(r).or_insert(0) += degrees[v];
            *degree_histogram.entry((r, degrees[v])).or_insert(0) += 1;
        }
        let mut block_edges = BTreeMap::new();
        for ((i, j), m) in a.iter() {
            let (r, s) = (b.label(i), b.label(j));
            let key = (r.min(s), r.max(s));
            *block_edges.entry(key).or_insert(0) += if r == s { 2 * m } else { m };
        }
        BlockCounts { sizes, block_edges, group_degrees, degree_histogram, degrees, total_edges: a.total_edges() }
    }

    pub fn num_groups(&self) -> u64 {
        self.sizes.len() as u64
    }
}

/// The three factors of the marginal likelihood, in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrocanonicalTerms {
    /// ln P(A' | k, e, b)
    pub edges_given_degrees: f64,
    /// ln P(k | e, b)
    pub degrees_given_blocks: f64,
    /// ln P(e | b)
    pub blocks: f64,
}

impl MicrocanonicalTerms {
    pub fn total(&self) -> f64 {
        self.edges_given_degrees + self.degrees_given_blocks + self.blocks
    }
}

fn ln_edge_count_prior(groups: u64, edges: u64) -> f64 {
    let pairs = groups * (groups + 1) / 2;
    -ln_binomial(pairs + edges - 1, edges)
}

pub fn microcanonical_decompose(a: &MultiGraph, b: &Partition) -> MicrocanonicalTerms {
    let c = BlockCounts::new(a, b);
    let mut first = 0.0;
    for (&(r, s), &e) in &c.block_edges {
        first += if r == s { ln_double_factorial_even(e) } else { lnf(e) };
    }
    first += c.degrees.iter().map(|&k| lnf(k)).sum::<f64>();
    first -= a.iter().map(|(_, m)| lnf(m)).sum::<f64>();
    first -= c.group_degrees.values().map(|&e| lnf(e)).sum::<f64>();

    let mut second: f64 = c.degree_histogram.values().map(|&h| lnf(h)).sum();
    for (&r, &n) in &c.sizes {
        let e = c.group_degrees[&r];
        second -= lnf(n) + lnq(e, n);
    }
    MicrocanonicalTerms {
        edges_given_degrees: first,
        degrees_given_blocks: second,
        blocks: ln_edge_count_prior(c.num_groups(), c.total_edges),
    }
}

/// ln P(A' | b) of the degree-corrected model with uniform hyperpriors.
pub fn dcsbm_log_marginal(a: &MultiGraph, b: &Partition) -> f64 {
    microcanonical_decompose(a, b).total()
}

fn ln_partition_prior_from_sizes(n: u64, sizes: impl Iterator<Item = u64>) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut groups = 0;
    let mut acc = 0.0;
    for s in sizes.filter(|&s| s > 0) {
        groups += 1;
        acc += lnf(s);
    }
    acc - lnf(n) - ln_binomial(n - 1, groups - 1) - (n as f64).ln()
}

/// ln P(b): uniform over the group count, over size compositions and over
/// labelings given the sizes.
pub fn partition_log_prior(b: &Partition) -> f64 {
    ln_partition_prior_from_sizes(b.len() as u64, b.group_sizes().into_iter())
}

/// Sparse symmetric block edge-count matrix, keyed by `(r, s)` with `r <= s`.
/// Diagonal entries count internal edges twice.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMatrix {
    entries: BTreeMap<(u32, u32), u64>,
}

impl BlockMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, r: u32, s: u32, value: u64) {
        let key = (r.min(s), r.max(s));
        if value == 0 {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, value);
        }
    }

    pub fn get(&self, r: u32, s: u32) -> u64 {
        self.entries.get(&(r.min(s), r.max(s))).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// e_r = sum over s of e_rs.
    pub fn group_degree(&self, r: u32) -> u64 {
        self.entries.iter().filter(|(&(a, b), _)| a == r || b == r).map(|(_, &v)| v).sum()
    }

    pub fn total_edges(&self) -> u64 {
        self.entries.iter().map(|(&(r, s), &v)| if r == s { v / 2 } else { v }).sum()
    }

    pub fn from_counts(c: &BlockCounts) -> Self {
        BlockMatrix { entries: c.block_edges.clone() }
    }
}

/// Planted-partition specification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PPSpec {
    pub groups: u32,
    pub nodes: u32,
    pub edges: u64,
    pub c: f64,
}

impl PPSpec {
    /// Edge count `round(N <k> / 2)`.
    pub fn from_mean_degree(groups: u32, nodes: u32, mean_degree: f64, c: f64) -> Self {
        let edges = (nodes as f64 * mean_degree / 2.0).round() as u64;
        PPSpec { groups, nodes, edges, c }
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges as f64 / self.nodes as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.nodes == 0 {
            return Err(Error::Infeasible("groups and nodes must be positive".into()));
        }
        if self.nodes % self.groups != 0 {
            return Err(Error::Infeasible(format!("{} nodes not divisible into {} groups", self.nodes, self.groups)));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::Infeasible(format!("c = {} outside [0, 1]", self.c)));
        }
        if self.groups == 1 && self.c < 1.0 && self.edges > 0 {
            return Err(Error::Infeasible("a single group cannot hold cross-group edges".into()));
        }
        Ok(())
    }

    /// Planted labels: node `v` in group `v / (N / B)`.
    pub fn planted_partition(&self) -> Partition {
        let size = self.nodes / self.groups;
        Partition::new((0..self.nodes).map(|v| v / size).collect())
    }
}

/// Detectability thresholds `c*_-` and `c*_+` of the planted partition.
pub fn detectability_thresholds(groups: u32, mean_degree: f64) -> (f64, f64) {
    let b = groups as f64;
    let w = (b - 1.0) / (b * mean_degree.sqrt());
    (1.0 / b - w, 1.0 / b + w)
}

/// Block matrix of the planted-partition model with largest-remainder
/// rounding over edge cells (one cell per group and per unordered pair).
pub fn pp_block_matrix(spec: &PPSpec) -> Result<BlockMatrix> {
    spec.validate()?;
    let b = spec.groups;
    let e = spec.edges as f64;
    let mut cells: Vec<((u32, u32), f64)> = Vec::new();
    for r in 0..b {
        cells.push(((r, r), e * spec.c / b as f64));
    }
    if b > 1 {
        let pairs = (b as f64) * (b as f64 - 1.0) / 2.0;
        for r in 0..b {
            for s in r + 1..b {
                cells.push(((r, s), e * (1.0 - spec.c) / pairs));
            }
        }
    }
    let mut counts: Vec<u64> = cells.iter().map(|(_, x)| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&x, &y| {
        let fx = cells[x].1 - cells[x].1.floor();
        let fy = cells[y].1 - cells[y].1.floor();
        fy.partial_cmp(&fx).unwrap().then(x.cmp(&y))
    });
    for &idx in order.iter().take((spec.edges - assigned) as usize) {
        counts[idx] += 1;
    }
    let mut m = BlockMatrix::new();
    for (((r, s), _), c) in cells.iter().zip(counts) {
        m.set(*r, *s, if r == s { 2 * c } else { c });
    }
    Ok(m)
}

/// Uniform stub matching with the given degrees and block counts.
/// Pairs `(i, i)` are possible and returned as they fall.
pub fn sample_stub_pairs<R: Rng + ?Sized>(
    degrees: &[u64],
    blocks: &BlockMatrix,
    b: &Partition,
    rng: &mut R,
) -> Result<Vec<(u32, u32)>> {
    b.check_len(degrees.len())?;
    let mut pools: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (v, &k) in degrees.iter().enumerate() {
        let pool = pools.entry(b.label(v as u32)).or_default();
        pool.extend(std::iter::repeat(v as u32).take(k as usize));
    }
    let mut need: BTreeMap<u32, u64> = BTreeMap::new();
    for ((r, s), c) in blocks.iter() {
        if r == s && c % 2 == 1 {
            return Err(Error::Constraint(format!("odd diagonal count e_{r}{r} = {c}")));
        }
        *need.entry(r).or_insert(0) += c;
        if r != s {
            *need.entry(s).or_insert(0) += c;
        }
    }
    for (&r, pool) in &pools {
        if pool.len() as u64 != need.get(&r).copied().unwrap_or(0) {
            return Err(Error::Constraint(format!(
                "group {r} has {} stubs but block counts require {}",
                pool.len(),
                need.get(&r).copied().unwrap_or(0)
            )));
        }
    }
    for (&r, &c) in &need {
        if c > 0 && !pools.contains_key(&r) {
            return Err(Error::Constraint(format!("block counts reference empty group {r}")));
        }
    }
    for pool in pools.values_mut() {
        pool.shuffle(rng);
    }
    let mut cursor: BTreeMap<u32, usize> = BTreeMap::new();
    let mut take = |r: u32, c: usize, pools: &BTreeMap<u32, Vec<u32>>| -> Vec<u32> {
        let at = cursor.entry(r).or_insert(0);
        let out = pools[&r][*at..*at + c].to_vec();
        *at += c;
        out
    };
    let mut pairs = Vec::with_capacity(degrees.iter().sum::<u64>() as usize / 2);
    for ((r, s), c) in blocks.iter() {
        if r == s {
            let stubs = take(r, c as usize, &pools);
            pairs.extend(stubs.chunks_exact(2).map(|p| (p[0], p[1])));
        } else {
            let a = take(r, c as usize, &pools);
            let z = take(s, c as usize, &pools);
            pairs.extend(a.into_iter().zip(z));
        }
    }
    Ok(pairs)
}

const LOOP_RETRIES: usize = 1000;

/// A uniformly random loop-free multigraph with exactly the given degrees
/// and block counts.
pub fn sample_microcanonical<R: Rng + ?Sized>(
    degrees: &[u64],
    blocks: &BlockMatrix,
    b: &Partition,
    rng: &mut R,
) -> Result<MultiGraph> {
    for _ in 0..LOOP_RETRIES {
        let pairs = sample_stub_pairs(degrees, blocks, b, rng)?;
        if pairs.iter().all(|&(i, j)| i != j) {
            let mut a = MultiGraph::new(degrees.len());
            for (i, j) in pairs {
                a.add(i, j, 1)?;
            }
            return Ok(a);
        }
    }
    Err(Error::Constraint(format!("no loop-free matching found in {LOOP_RETRIES} attempts")))
}

/// Incrementally maintained block counts over a mutable multigraph.
///
/// Group labels live in `[0, N)`; unused labels sit on a free list.
#[derive(Clone, Debug)]
pub struct BlockState {
    labels: Vec<u32>,
    sizes: Vec<u64>,
    group_degree: Vec<u64>,
    block_edges: Vec<FxHashMap<u32, u64>>,
    degree_hist: Vec<FxHashMap<u64, u64>>,
    degrees: Vec<u64>,
    active: Vec<u32>,
    active_pos: Vec<u32>,
    free: Vec<u32>,
    total_edges: u64,
    ln_mult_factorials: f64,
}

const NOT_ACTIVE: u32 = u32::MAX;

impl BlockState {
    /// Builds the state from `(i, j, multiplicity)` triples.
    pub fn new<I>(b: &Partition, edges: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, u64)>,
    {
        let n = b.len();
        let labels = if b.labels().iter().all(|&r| (r as usize) < n) {
            b.labels().to_vec()
        } else {
            b.canonical().labels().to_vec()
        };
        let mut st = BlockState {
            labels,
            sizes: vec![0; n],
            group_degree: vec![0; n],
            block_edges: vec![FxHashMap::default(); n],
            degree_hist: vec![FxHashMap::default(); n],
            degrees: vec![0; n],
            active: Vec::new(),
            active_pos: vec![NOT_ACTIVE; n],
            free: Vec::new(),
            total_edges: 0,
            ln_mult_factorials: 0.0,
        };
        for (i, j, m) in edges {
            assert!(i != j, "self-loop in block state");
            if m == 0 {
                continue;
            }
            st.degrees[i as usize] += m;
            st.degrees[j as usize] += m;
            st.total_edges += m;
            st.ln_mult_factorials += lnf(m);
            let (r, s) = (st.labels[i as usize], st.labels[j as usize]);
            st.add_block_edges(r, s, m);
        }
        for v in 0..n {
            let r = st.labels[v] as usize;
            st.sizes[r] += 1;
            st.group_degree[r] += st.degrees[v];
            *st.degree_hist[r].entry(st.degrees[v]).or_insert(0) += 1;
        }
        for r in 0..n as u32 {
            if st.sizes[r as usize] > 0 {
                st.active_pos[r as usize] = st.active.len() as u32;
                st.active.push(r);
            }
        }
        for r in (0..n as u32).rev() {
            if st.sizes[r as usize] == 0 {
                st.free.push(r);
            }
        }
        st
    }

    pub fn from_multigraph(a: &MultiGraph, b: &Partition) -> Self {
        Self::new(b, a.iter().map(|((i, j), m)| (i, j, m)))
    }

    fn add_block_edges(&mut self, r: u32, s: u32, m: u64) {
        if r == s {
            *self.block_edges[r as usize].entry(r).or_insert(0) += 2 * m;
        } else {
            *self.block_edges[r as usize].entry(s).or_insert(0) += m;
            *self.block_edges[s as usize].entry(r).or_insert(0) += m;
        }
    }

    fn adjust_block(&mut self, r: u32, s: u32, delta: i64) {
        let entry = self.block_edges[r as usize].entry(s).or_insert(0);
        *entry = (*entry as i64 + delta) as u64;
        if *entry == 0 {
            self.block_edges[r as usize].remove(&s);
        }
        if r != s {
            let entry = self.block_edges[s as usize].entry(r).or_insert(0);
            *entry = (*entry as i64 + delta) as u64;
            if *entry == 0 {
                self.block_edges[s as usize].remove(&r);
            }
        }
    }

    fn adjust_hist(&mut self, r: u32, k: u64, delta: i64) {
        let entry = self.degree_hist[r as usize].entry(k).or_insert(0);
        *entry = (*entry as i64 + delta) as u64;
        if *entry == 0 {
            self.degree_hist[r as usize].remove(&k);
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, v: u32) -> u32 {
        self.labels[v as usize]
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.labels.clone())
    }

    pub fn num_groups(&self) -> usize {
        self.active.len()
    }

    /// Nonempty group labels in arbitrary order.
    pub fn active_groups(&self) -> &[u32] {
        &self.active
    }

    pub fn group_size(&self, r: u32) -> u64 {
        self.sizes[r as usize]
    }

    pub fn degree(&self, v: u32) -> u64 {
        self.degrees[v as usize]
    }

    pub fn total_edges(&self) -> u64 {
        self.total_edges
    }

    pub fn block_edges(&self, r: u32, s: u32) -> u64 {
        self.block_edges[r as usize].get(&s).copied().unwrap_or(0)
    }

    /// Active labels and the free list, in their internal order.
    pub fn label_order(&self) -> (Vec<u32>, Vec<u32>) {
        (self.active.clone(), self.free.clone())
    }

    /// Restores an internal label order saved by
    /// [`label_order`](Self::label_order).
    pub fn set_label_order(&mut self, active: Vec<u32>, free: Vec<u32>) -> Result<()> {
        let mut a = active.clone();
        let mut b = self.active.clone();
        a.sort_unstable();
        b.sort_unstable();
        let mut f = free.clone();
        let mut g = self.free.clone();
        f.sort_unstable();
        g.sort_unstable();
        if a != b || f != g {
            return Err(Error::Argument("label order does not match the partition".into()));
        }
        for (pos, &r) in active.iter().enumerate() {
            self.active_pos[r as usize] = pos as u32;
        }
        self.active = active;
        self.free = free;
        Ok(())
    }

    /// A label not currently in use, if any.
    pub fn free_label(&self) -> Option<u32> {
        self.free.last().copied()
    }

    pub fn block_matrix(&self) -> BlockMatrix {
        let mut m = BlockMatrix::new();
        for &r in &self.active {
            for (&s, &v) in &self.block_edges[r as usize] {
                if r <= s {
                    m.set(r, s, v);
                }
            }
        }
        m
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degrees
    }

    /// ln P(A' | b), recomputed from the cached counts.
    pub fn log_likelihood(&self) -> f64 {
        let mut acc = 0.0;
        for &r in &self.active {
            for (&s, &e) in &self.block_edges[r as usize] {
                if r == s {
                    acc += ln_double_factorial_even(e);
                } else if r < s {
                    acc += lnf(e);
                }
            }
            let er = self.group_degree[r as usize];
            let nr = self.sizes[r as usize];
            acc -= lnf(er) + lnf(nr) + lnq(er, nr);
            acc += self.degree_hist[r as usize].values().map(|&h| lnf(h)).sum::<f64>();
        }
        acc += self.degrees.iter().map(|&k| lnf(k)).sum::<f64>();
        acc -= self.ln_mult_factorials;
        acc + ln_edge_count_prior(self.active.len() as u64, self.total_edges)
    }

    pub fn log_prior(&self) -> f64 {
        ln_partition_prior_from_sizes(self.labels.len() as u64, self.active.iter().map(|&r| self.sizes[r as usize]))
    }

    /// Change in ln P(A' | b) when `A'_ij` goes from `old` to `new`.
    pub fn edge_delta(&self, i: u32, j: u32, old: u64, new: u64) -> f64 {
        if old == new {
            return 0.0;
        }
        let d = new as i64 - old as i64;
        let add = |x: u64, y: i64| (x as i64 + y) as u64;
        let (r, s) = (self.labels[i as usize], self.labels[j as usize]);
        let mut dl = 0.0;
        if r != s {
            let e = self.block_edges(r, s);
            dl += lnf(add(e, d)) - lnf(e);
            for g in [r, s] {
                let er = self.group_degree[g as usize];
                let nr = self.sizes[g as usize];
                dl += lnf(er) - lnf(add(er, d)) + lnq(er, nr) - lnq(add(er, d), nr);
            }
        } else {
            let e = self.block_edges(r, r);
            dl += ln_double_factorial_even(add(e, 2 * d)) - ln_double_factorial_even(e);
            let er = self.group_degree[r as usize];
            let nr = self.sizes[r as usize];
            dl += lnf(er) - lnf(add(er, 2 * d)) + lnq(er, nr) - lnq(add(er, 2 * d), nr);
        }
        let (ki, kj) = (self.degrees[i as usize], self.degrees[j as usize]);
        dl += lnf(add(ki, d)) - lnf(ki) + lnf(add(kj, d)) - lnf(kj);

        let mut changes = [(r, ki, -1i64), (r, add(ki, d), 1), (s, kj, -1), (s, add(kj, d), 1)];
        changes.sort_unstable();
        let mut idx = 0;
        while idx < changes.len() {
            let (g, k, mut net) = changes[idx];
            let mut nxt = idx + 1;
            while nxt < changes.len() && changes[nxt].0 == g && changes[nxt].1 == k {
                net += changes[nxt].2;
                nxt += 1;
            }
            if net != 0 {
                let h = self.degree_hist[g as usize].get(&k).copied().unwrap_or(0);
                dl += lnf(add(h, net)) - lnf(h);
            }
            idx = nxt;
        }
        dl -= lnf(new) - lnf(old);
        let groups = self.active.len() as u64;
        dl + ln_edge_count_prior(groups, add(self.total_edges, d)) - ln_edge_count_prior(groups, self.total_edges)
    }

    pub fn apply_edge(&mut self, i: u32, j: u32, old: u64, new: u64) {
        if old == new {
            return;
        }
        let d = new as i64 - old as i64;
        let (r, s) = (self.labels[i as usize], self.labels[j as usize]);
        self.adjust_block(r, s, if r == s { 2 * d } else { d });
        for (v, g) in [(i, r), (j, s)] {
            let k = self.degrees[v as usize];
            self.adjust_hist(g, k, -1);
            let nk = (k as i64 + d) as u64;
            self.adjust_hist(g, nk, 1);
            self.degrees[v as usize] = nk;
            self.group_degree[g as usize] = (self.group_degree[g as usize] as i64 + d) as u64;
        }
        self.total_edges = (self.total_edges as i64 + d) as u64;
        self.ln_mult_factorials += lnf(new) - lnf(old);
    }

    /// Collects `(group, multiplicity sum)` of the given neighbor list into
    /// `out`, merged and sorted by group.
    pub fn neighbor_groups<I>(&self, nbrs: I, out: &mut Vec<(u32, u64)>)
    where
        I: IntoIterator<Item = (u32, u64)>,
    {
        out.clear();
        out.extend(nbrs.into_iter().map(|(u, m)| (self.labels[u as usize], m)));
        out.sort_unstable_by_key(|x| x.0);
        let mut w = 0;
        for idx in 0..out.len() {
            if w > 0 && out[w - 1].0 == out[idx].0 {
                out[w - 1].1 += out[idx].1;
            } else {
                out[w] = out[idx];
                w += 1;
            }
        }
        out.truncate(w);
    }

    /// Change in ln P(A' | b) + ln P(b) when `v` moves to group `s`.
    /// `groups` is the output of [`neighbor_groups`](Self::neighbor_groups)
    /// for `v`. `s` may be an unused label.
    pub fn move_delta(&self, v: u32, s: u32, groups: &[(u32, u64)]) -> f64 {
        let r = self.labels[v as usize];
        if r == s {
            return 0.0;
        }
        let k = self.degrees[v as usize];
        let (nr, ns) = (self.sizes[r as usize], self.sizes[s as usize]);
        let (er, es) = (self.group_degree[r as usize], self.group_degree[s as usize]);
        let mut dr = 0;
        let mut ds = 0;
        let mut dl = 0.0;
        for &(t, d) in groups {
            if t == r {
                dr = d;
            } else if t == s {
                ds = d;
            } else {
                let ert = self.block_edges(r, t);
                let est = self.block_edges(s, t);
                dl += lnf(ert - d) - lnf(ert) + lnf(est + d) - lnf(est);
            }
        }
        let err = self.block_edges(r, r);
        let ess = self.block_edges(s, s);
        dl += ln_double_factorial_even(err - 2 * dr) - ln_double_factorial_even(err);
        dl += ln_double_factorial_even(ess + 2 * ds) - ln_double_factorial_even(ess);
        let ers = self.block_edges(r, s);
        dl += lnf(ers + dr - ds) - lnf(ers);

        dl += lnf(er) - lnf(er - k) + lnf(es) - lnf(es + k);
        let hr = self.degree_hist[r as usize].get(&k).copied().unwrap_or(0);
        let hs = self.degree_hist[s as usize].get(&k).copied().unwrap_or(0);
        dl += lnf(hr - 1) - lnf(hr) + lnf(hs + 1) - lnf(hs);
        dl += lnq(er, nr) - lnq(er - k, nr - 1) + lnq(es, ns) - lnq(es + k, ns + 1);
        // -ln n_r! in the degree term cancels +ln n_r! in the prior

        let groups_before = self.active.len() as u64;
        let groups_after = groups_before - (nr == 1) as u64 + (ns == 0) as u64;
        if groups_after != groups_before {
            let n = self.labels.len() as u64;
            dl += ln_edge_count_prior(groups_after, self.total_edges)
                - ln_edge_count_prior(groups_before, self.total_edges);
            dl += ln_binomial(n - 1, groups_before - 1) - ln_binomial(n - 1, groups_after - 1);
        }
        dl
    }

    /// Moves `v` to group `s`, updating every cache.
    pub fn apply_move(&mut self, v: u32, s: u32, groups: &[(u32, u64)]) {
        let r = self.labels[v as usize];
        if r == s {
            return;
        }
        if self.sizes[s as usize] == 0 {
            let pos = self.free.iter().rposition(|&x| x == s).expect("label neither active nor free");
            self.free.swap_remove(pos);
            self.active_pos[s as usize] = self.active.len() as u32;
            self.active.push(s);
        }
        for &(t, d) in groups {
            let d = d as i64;
            if t == r {
                self.adjust_block(r, r, -2 * d);
                self.adjust_block(r, s, d);
            } else if t == s {
                self.adjust_block(s, s, 2 * d);
                self.adjust_block(r, s, -d);
            } else {
                self.adjust_block(r, t, -d);
                self.adjust_block(s, t, d);
            }
        }
        let k = self.degrees[v as usize];
        self.adjust_hist(r, k, -1);
        self.adjust_hist(s, k, 1);
        self.group_degree[r as usize] -= k;
        self.group_degree[s as usize] += k;
        self.sizes[r as usize] -= 1;
        self.sizes[s as usize] += 1;
        self.labels[v as usize] = s;
        if self.sizes[r as usize] == 0 {
            let pos = self.active_pos[r as usize] as usize;
            let last = *self.active.last().unwrap();
            self.active.swap_remove(pos);
            if last != r {
                self.active_pos[last as usize] = pos as u32;
            }
            self.active_pos[r as usize] = NOT_ACTIVE;
            self.free.push(r);
        }
    }

    /// Checks the caches against a recomputation from `edges`.
    pub fn verify<I>(&self, edges: I) -> std::result::Result<(), String>
    where
        I: IntoIterator<Item = (u32, u32, u64)>,
    {
        let fresh = BlockState::new(&self.partition(), edges);
        if fresh.degrees != self.degrees {
            return Err("degrees differ".into());
        }
        if fresh.total_edges != self.total_edges {
            return Err("edge totals differ".into());
        }
        if self.active.len() != fresh.active.len() {
            return Err("group counts differ".into());
        }
        for &r in &self.active {
            let fr = r;
            if self.sizes[r as usize] != fresh.sizes[fr as usize]
                || self.group_degree[r as usize] != fresh.group_degree[fr as usize]
                || self.degree_hist[r as usize] != fresh.degree_hist[fr as usize]
            {
                return Err(format!("group {r} caches differ"));
            }
            for (&s, &e) in &self.block_edges[r as usize] {
                if fresh.block_edges(fr, s) != e {
                    return Err(format!("e_{r},{s} differs"));
                }
            }
            if self.block_edges[r as usize].len() != fresh.block_edges[fr as usize].len() {
                return Err(format!("block row {r} differs"));
            }
        }
        for r in 0..self.labels.len() {
            let is_free = self.free.contains(&(r as u32));
            let is_active = self.active_pos[r] != NOT_ACTIVE;
            if is_free == is_active || (self.sizes[r] > 0) != is_active {
                return Err(format!("label bookkeeping broken at {r}"));
            }
        }
        if (self.ln_mult_factorials - fresh.ln_mult_factorials).abs() > 1e-9 {
            return Err("multiplicity factorials differ".into());
        }
        Ok(())
    }
}
