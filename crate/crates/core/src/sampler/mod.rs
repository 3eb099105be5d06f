//! The MCMC driver: move schedule, sweeps, sample collection and
//! checkpoints.

pub mod init;
pub mod moves;
pub mod rng;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::analysis::effective_groups;
use crate::closure::Decomposition;
use crate::error::{Error, Result};
use crate::graph::{global_clustering, SimpleGraph};
use crate::partition::Partition;
use crate::state::{DecompositionState, MeasurementState, Support};

pub use moves::{MoveStats, Outcome};
pub use rng::{ChainRng, RngCursor};

/// Relative weights of the move kinds; normalized when used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveMix {
    pub owner_swap: f64,
    pub multiplicity: f64,
    pub partition: f64,
    #[serde(default)]
    pub toggle: f64,
}

impl MoveMix {
    /// One edge attempt per required pair split evenly between the two
    /// edge kinds, one partition attempt per node, one toggle attempt per
    /// optional pair.
    pub fn proportional(edges: usize, nodes: usize, optional: usize, layers: u8) -> Self {
        let e = edges as f64;
        let (owner, mult) = if layers == 0 { (0.0, e) } else { (e / 2.0, e / 2.0) };
        let total = (edges + nodes + optional).max(1) as f64;
        MoveMix {
            owner_swap: owner / total,
            multiplicity: mult / total,
            partition: nodes as f64 / total,
            toggle: optional as f64 / total,
        }
    }

    fn validate(&self) -> Result<()> {
        let w = [self.owner_swap, self.multiplicity, self.partition, self.toggle];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Argument("move mix weights must be non-negative and not all zero".into()));
        }
        Ok(())
    }

    fn cumulative(&self) -> [f64; 4] {
        let w = [self.owner_swap, self.multiplicity, self.partition, self.toggle];
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        let mut c = [0.0; 4];
        for (k, x) in w.iter().enumerate() {
            acc += x / total;
            c[k] = acc;
        }
        c[3] = 1.0;
        c
    }
}

/// Starting decomposition of a chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Every edge seminal.
    AllSeminal,
    /// Greedy first-generation closures, see
    /// [`Decomposition::close_greedily`](crate::closure::Decomposition::close_greedily).
    #[default]
    GreedyClosure,
}

/// Starting partition of a chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionInit {
    SingleGroup,
    /// See [`init::agglomerate`].
    #[default]
    Agglomerative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total sweeps including burn-in.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    /// Closure generations; zero gives the plain SBM.
    pub layers: u8,
    pub seed: u64,
    /// Defaults to [`MoveMix::proportional`].
    pub move_mix: Option<MoveMix>,
    /// Probability of a merge-split within partition moves. Defaults to
    /// `min(0.1, 10 / N)`.
    pub merge_split_rate: Option<f64>,
    /// Upper bound on stored predictive snapshots.
    pub max_snapshots: usize,
    pub store_partitions: bool,
    /// Full cache verification every this many sweeps; zero disables it.
    pub verify_every: u64,
    /// Restricts the target to seminal multiplicities up to this value.
    #[serde(default)]
    pub max_multiplicity: Option<u32>,
    #[serde(default)]
    pub init: InitialState,
    /// Used when no initial partition is given and partitions are sampled.
    #[serde(default)]
    pub partition_init: PartitionInit,
    /// Inverse temperature at the first sweep. It rises geometrically to
    /// one over the first half of burn-in; retained sweeps always use the
    /// untempered target.
    #[serde(default)]
    pub anneal_from: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            sweeps: 2000,
            burn_in: 1000,
            thin: 10,
            layers: 1,
            seed: 0,
            move_mix: None,
            merge_split_rate: None,
            max_snapshots: 100,
            store_partitions: false,
            verify_every: 0,
            max_multiplicity: None,
            anneal_from: None,
            init: InitialState::default(),
            partition_init: PartitionInit::default(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Argument("thin must be at least 1".into()));
        }
        if self.burn_in > self.sweeps {
            return Err(Error::Argument("burn-in exceeds the number of sweeps".into()));
        }
        if self.layers > crate::closure::MAX_LAYERS {
            return Err(Error::Argument(format!("at most {} layers", crate::closure::MAX_LAYERS)));
        }
        if let Some(r) = self.merge_split_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Argument("merge-split rate must lie in [0, 1]".into()));
            }
        }
        if self.max_multiplicity == Some(0) {
            return Err(Error::Argument("multiplicity cap must be at least 1".into()));
        }
        if let Some(m) = &self.move_mix {
            m.validate()?;
        }
        if let Some(b) = self.anneal_from {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::Argument("initial inverse temperature must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// floor((sweeps - burn_in) / thin)
    pub fn retained(&self) -> u64 {
        (self.sweeps - self.burn_in) / self.thin
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub owner_swap: MoveStats,
    pub multiplicity: MoveStats,
    pub single_node: MoveStats,
    pub merge_split: MoveStats,
    pub toggle: MoveStats,
}

impl AcceptanceStats {
    pub fn total(&self) -> MoveStats {
        let mut t = MoveStats::default();
        for s in [&self.owner_swap, &self.multiplicity, &self.single_node, &self.merge_split, &self.toggle] {
            t.merge(s);
        }
        t
    }

    fn merge(&mut self, o: &AcceptanceStats) {
        self.owner_swap.merge(&o.owner_swap);
        self.multiplicity.merge(&o.multiplicity);
        self.single_node.merge(&o.single_node);
        self.merge_split.merge(&o.merge_split);
        self.toggle.merge(&o.toggle);
    }
}

/// Everything needed to regenerate a network from one retained sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub labels: Vec<u32>,
    /// (i, j, A'_ij) for every pair with positive multiplicity.
    pub seminal: Vec<(u32, u32, u32)>,
    /// (u, l, M_u^(l), E_u^(l)) for every ego with an open triad.
    pub cells: Vec<(u32, u8, u64, u64)>,
}

impl Snapshot {
    pub fn capture(st: &DecompositionState) -> Self {
        let g = st.graph();
        let seminal = g
            .edges()
            .iter()
            .enumerate()
            .filter_map(|(e, &(i, j))| {
                let s = st.seminal(e as u32);
                (s > 0).then_some((i, j, s))
            })
            .collect();
        let mut cells = Vec::new();
        for u in 0..st.node_count() as u32 {
            for l in 1..=st.layers() {
                let m = st.open_triad_count(u, l);
                if m > 0 {
                    cells.push((u, l, m, st.closed_count(u, l)));
                }
            }
        }
        Snapshot { labels: st.blocks().labels().to_vec(), seminal, cells }
    }
}

mod pair_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<Vec<u32>, u64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Vec<u32>, u64>, D::Error> {
        Ok(Vec::<(Vec<u32>, u64)>::deserialize(d)?.into_iter().collect())
    }
}

/// Running sums and traces over the retained samples of one or more
/// chains.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainCollectors {
    pub samples: u64,
    /// Per support pair: samples in which A'_ij > 0.
    pub seminal_counts: Vec<u64>,
    /// Per support pair: samples in which the pair is present.
    pub present_counts: Vec<u64>,
    /// Sigma = -ln P of each retained state, in nats.
    pub description_length: Vec<f64>,
    pub groups: Vec<u32>,
    pub effective_groups: Vec<f64>,
    /// Fraction of present pairs with no seminal multiplicity.
    pub closure_fraction: Vec<f64>,
    /// Global clustering of the seminal graph A(A').
    pub seminal_clustering: Vec<f64>,
    #[serde(with = "pair_list")]
    pub partition_counts: BTreeMap<Vec<u32>, u64>,
    pub partitions: Vec<Partition>,
    pub snapshots: Vec<Snapshot>,
    /// Lowest Sigma seen at any point after burn-in and its partition.
    pub min_description_length: f64,
    pub min_partition: Option<Partition>,
    pub stats: AcceptanceStats,
}

impl ChainCollectors {
    fn new(pairs: usize) -> Self {
        ChainCollectors {
            seminal_counts: vec![0; pairs],
            present_counts: vec![0; pairs],
            min_description_length: f64::INFINITY,
            ..Default::default()
        }
    }

    /// Posterior probability that each support pair is seminal.
    pub fn seminal_marginals(&self) -> Vec<f64> {
        self.ratio(&self.seminal_counts)
    }

    /// Posterior probability that each support pair is present.
    pub fn presence_marginals(&self) -> Vec<f64> {
        self.ratio(&self.present_counts)
    }

    fn ratio(&self, c: &[u64]) -> Vec<f64> {
        let n = self.samples.max(1) as f64;
        c.iter().map(|&x| x as f64 / n).collect()
    }

    /// Most frequent partition up to relabeling, falling back to the
    /// lowest-Sigma partition when every sample is distinct.
    pub fn modal_partition(&self) -> Option<Partition> {
        let best = self.partition_counts.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)));
        match best {
            Some((labels, &c)) if c > 1 || self.min_partition.is_none() => Some(Partition::new(labels.clone())),
            _ => self.min_partition.clone(),
        }
    }

    pub fn mean(trace: &[f64]) -> f64 {
        if trace.is_empty() {
            f64::NAN
        } else {
            trace.iter().sum::<f64>() / trace.len() as f64
        }
    }

    /// Combines chains in the given order: counts add, traces concatenate.
    pub fn merge(chains: &[ChainCollectors]) -> Result<ChainCollectors> {
        let first = chains.first().ok_or_else(|| Error::Argument("no chains to merge".into()))?;
        let mut out = ChainCollectors::new(first.seminal_counts.len());
        for c in chains {
            if c.seminal_counts.len() != out.seminal_counts.len() {
                return Err(Error::Argument("chains cover different supports".into()));
            }
            out.samples += c.samples;
            for (a, b) in out.seminal_counts.iter_mut().zip(&c.seminal_counts) {
                *a += b;
            }
            for (a, b) in out.present_counts.iter_mut().zip(&c.present_counts) {
                *a += b;
            }
            out.description_length.extend_from_slice(&c.description_length);
            out.groups.extend_from_slice(&c.groups);
            out.effective_groups.extend_from_slice(&c.effective_groups);
            out.closure_fraction.extend_from_slice(&c.closure_fraction);
            out.seminal_clustering.extend_from_slice(&c.seminal_clustering);
            for (k, v) in &c.partition_counts {
                *out.partition_counts.entry(k.clone()).or_insert(0) += v;
            }
            out.partitions.extend(c.partitions.iter().cloned());
            out.snapshots.extend(c.snapshots.iter().cloned());
            if c.min_description_length < out.min_description_length {
                out.min_description_length = c.min_description_length;
                out.min_partition = c.min_partition.clone();
            }
            out.stats.merge(&c.stats);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    OwnerSwap,
    Multiplicity,
    Partition,
    Toggle,
}

/// A single Markov chain with its collectors.
pub struct Chain {
    state: DecompositionState,
    config: ChainConfig,
    rng: ChainRng,
    cumulative: [f64; 4],
    merge_split_rate: f64,
    optional: Vec<u32>,
    sweep_len: u64,
    sweeps_done: u64,
    snapshot_stride: u64,
    collectors: ChainCollectors,
}

/// Serializable chain state for bit-exact resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: ChainConfig,
    pub decomposition: Decomposition,
    pub active_labels: Vec<u32>,
    pub free_labels: Vec<u32>,
    pub log_prob: f64,
    pub rng: RngCursor,
    pub sweeps_done: u64,
    pub collectors: ChainCollectors,
}

const CHECKPOINT_FORMAT: u32 = 1;

impl Chain {
    /// Starts from the all-seminal state: every required pair present with
    /// multiplicity one, optional pairs absent, empty ego graphs.
    pub fn new(
        support: Arc<Support>,
        config: ChainConfig,
        initial: Option<&Partition>,
        measurement: Option<MeasurementState>,
    ) -> Result<Self> {
        config.validate()?;
        let g = support.graph();
        let n = g.node_count();
        let b = initial.cloned().unwrap_or_else(|| Partition::single_group(n));
        b.check_len(n)?;
        let present: Vec<bool> = (0..g.edge_count() as u32).map(|e| support.is_required(e)).collect();
        let mut d = DecompositionState::new(Arc::clone(&support), config.layers, &b, &present)?.to_decomposition();
        d.labels = b.labels().to_vec();
        let mut rng = ChainRng::new(config.seed);
        let greedy = config.init == InitialState::GreedyClosure && config.layers > 0;
        if greedy {
            d.close_greedily(&mut rng.owner);
            let mut scratch = DecompositionState::from_decomposition(Arc::clone(&support), &d, None)?;
            init::release_spokes(&mut scratch, &mut rng.owner);
            d = scratch.to_decomposition();
        }
        let moves_partition = config.move_mix.map_or(true, |m| m.partition > 0.0);
        if initial.is_none() && moves_partition && config.partition_init == PartitionInit::Agglomerative {
            let mut scratch = DecompositionState::from_decomposition(Arc::clone(&support), &d, None)?;
            d.labels = init::agglomerate(&mut scratch, &mut rng.partition).labels().to_vec();
        }
        let mut state = DecompositionState::from_decomposition(support, &d, measurement)?;
        if !state.log_prob().is_finite() {
            return Err(Error::Infeasible("initial state has zero probability".into()));
        }
        if greedy {
            init::release_spokes(&mut state, &mut rng.owner);
        }
        Ok(Self::assemble(state, config, rng, 0, None))
    }

    /// Starts from an arbitrary valid state.
    pub fn from_state(state: DecompositionState, config: ChainConfig) -> Result<Self> {
        config.validate()?;
        if state.layers() != config.layers {
            return Err(Error::Argument("state and configuration disagree on the number of layers".into()));
        }
        if !state.log_prob().is_finite() {
            return Err(Error::Infeasible("initial state has zero probability".into()));
        }
        let rng = ChainRng::new(config.seed);
        Ok(Self::assemble(state, config, rng, 0, None))
    }

    fn assemble(
        state: DecompositionState,
        config: ChainConfig,
        rng: ChainRng,
        sweeps_done: u64,
        collectors: Option<ChainCollectors>,
    ) -> Self {
        let support = Arc::clone(state.support());
        let optional: Vec<u32> = support.optional_pairs().collect();
        let required = support.graph().edge_count() - optional.len();
        let n = state.node_count();
        let mix = config.move_mix.unwrap_or_else(|| MoveMix::proportional(required, n, optional.len(), config.layers));
        let merge_split_rate = config.merge_split_rate.unwrap_or_else(|| (10.0 / n.max(1) as f64).min(0.1));
        let retained = config.retained();
        let snapshot_stride =
            if config.max_snapshots == 0 { 0 } else { retained.div_ceil(config.max_snapshots as u64).max(1) };
        let pairs = support.graph().edge_count();
        Chain {
            cumulative: mix.cumulative(),
            merge_split_rate,
            sweep_len: (required + n + optional.len()) as u64,
            optional,
            sweeps_done,
            snapshot_stride,
            collectors: collectors.unwrap_or_else(|| ChainCollectors::new(pairs)),
            state,
            config,
            rng,
        }
    }

    pub fn state(&self) -> &DecompositionState {
        &self.state
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn collectors(&self) -> &ChainCollectors {
        &self.collectors
    }

    /// Move attempts per sweep.
    pub fn sweep_len(&self) -> u64 {
        self.sweep_len
    }

    /// Inverse temperature of the sweep in progress.
    pub fn beta(&self) -> f64 {
        let Some(b0) = self.config.anneal_from else { return 1.0 };
        let ramp = self.config.burn_in / 2;
        if self.sweeps_done >= ramp {
            return 1.0;
        }
        b0.powf(1.0 - self.sweeps_done as f64 / ramp as f64)
    }

    fn pick_kind(&mut self) -> Kind {
        let u: f64 = self.rng.schedule.gen();
        let c = &self.cumulative;
        if u < c[0] {
            Kind::OwnerSwap
        } else if u < c[1] {
            Kind::Multiplicity
        } else if u < c[2] {
            Kind::Partition
        } else {
            Kind::Toggle
        }
    }

    fn attempt(&mut self, kind: Kind, beta: f64) {
        let cap = self.config.max_multiplicity.unwrap_or(u32::MAX);
        let st = &mut self.state;
        let stats = &mut self.collectors.stats;
        match kind {
            Kind::OwnerSwap => {
                let rng = &mut self.rng.owner;
                let o = match moves::draw_owner_swap(st, rng).and_then(|d| moves::apply_swap_draw(st, &d)) {
                    Some(p) => moves::metropolis_edge(st, &p, true, cap, beta, rng),
                    None => Outcome::Aborted,
                };
                stats.owner_swap.record(o);
            }
            Kind::Multiplicity => {
                let rng = &mut self.rng.multiplicity;
                let o = match moves::propose_multiplicity(st, rng) {
                    Some(p) => moves::metropolis_edge(st, &p, true, cap, beta, rng),
                    None => Outcome::Aborted,
                };
                stats.multiplicity.record(o);
            }
            Kind::Partition => {
                let rng = &mut self.rng.partition;
                if rng.gen::<f64>() < self.merge_split_rate {
                    stats.merge_split.record(moves::merge_split(st, beta, rng));
                } else {
                    stats.single_node.record(moves::single_node_move(st, beta, rng));
                }
            }
            Kind::Toggle => {
                let rng = &mut self.rng.toggle;
                let o = match moves::propose_toggle(st, &self.optional, rng) {
                    Some(p) => moves::metropolis_edge(st, &p, false, cap, beta, rng),
                    None => Outcome::Aborted,
                };
                stats.toggle.record(o);
            }
        }
    }

    /// One sweep of move attempts without collection.
    pub fn sweep(&mut self) {
        let beta = self.beta();
        for _ in 0..self.sweep_len {
            let k = self.pick_kind();
            self.attempt(k, beta);
        }
    }

    /// Runs until the configured number of sweeps is done.
    pub fn run(&mut self) -> Result<()> {
        self.run_for(self.config.sweeps.saturating_sub(self.sweeps_done))
    }

    /// Runs at most `sweeps` further sweeps, collecting as configured.
    pub fn run_for(&mut self, sweeps: u64) -> Result<()> {
        let end = (self.sweeps_done + sweeps).min(self.config.sweeps);
        while self.sweeps_done < end {
            self.sweep();
            self.sweeps_done += 1;
            let s = self.sweeps_done;
            if self.config.verify_every > 0 && s % self.config.verify_every == 0 {
                self.check()?;
            }
            if s > self.config.burn_in {
                self.track_minimum();
                if (s - self.config.burn_in) % self.config.thin == 0 {
                    self.collect();
                }
            }
        }
        Ok(())
    }

    /// Verifies every cache and the running log probability.
    pub fn check(&self) -> Result<()> {
        self.state.verify().map_err(Error::Numerical)?;
        let fresh = self.state.recompute_log_prob();
        let drift = (fresh - self.state.log_prob()).abs();
        if drift > 1e-6 * fresh.abs().max(1.0) {
            return Err(Error::Numerical(format!("log probability drifted by {drift}")));
        }
        Ok(())
    }

    fn track_minimum(&mut self) {
        let sigma = -self.state.log_prob();
        if sigma < self.collectors.min_description_length {
            self.collectors.min_description_length = sigma;
            self.collectors.min_partition = Some(self.state.blocks().partition().canonical());
        }
    }

    fn collect(&mut self) {
        let st = &self.state;
        let c = &mut self.collectors;
        let index = c.samples;
        c.samples += 1;
        let g = st.graph();
        let mut seminal_edges = Vec::new();
        let mut present = 0usize;
        let mut closure = 0usize;
        for e in 0..g.edge_count() as u32 {
            let s = st.seminal(e);
            if s > 0 {
                c.seminal_counts[e as usize] += 1;
                seminal_edges.push(g.edges()[e as usize]);
            }
            if st.is_present(e) {
                c.present_counts[e as usize] += 1;
                present += 1;
                closure += (s == 0) as usize;
            }
        }
        c.description_length.push(-st.log_prob());
        let b = st.blocks().partition();
        c.groups.push(st.blocks().num_groups() as u32);
        c.effective_groups.push(effective_groups(&b));
        c.closure_fraction.push(if present == 0 { 0.0 } else { closure as f64 / present as f64 });
        let a = SimpleGraph::from_edges(g.node_count(), seminal_edges).expect("seminal pairs form a simple graph");
        c.seminal_clustering.push(global_clustering(&a).value);
        let canonical = b.canonical();
        if self.config.store_partitions {
            c.partitions.push(canonical.clone());
        }
        *c.partition_counts.entry(canonical.labels().to_vec()).or_insert(0) += 1;
        if self.snapshot_stride > 0
            && index % self.snapshot_stride == 0
            && c.snapshots.len() < self.config.max_snapshots
        {
            c.snapshots.push(Snapshot::capture(st));
        }
    }

    pub fn into_collectors(self) -> ChainCollectors {
        self.collectors
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let (active, free) = self.state.blocks().label_order();
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            decomposition: self.state.to_decomposition(),
            active_labels: active,
            free_labels: free,
            log_prob: self.state.log_prob(),
            rng: self.rng.cursor(self.config.seed),
            sweeps_done: self.sweeps_done,
            collectors: self.collectors.clone(),
        }
    }

    /// Rebuilds a chain from a checkpoint over the same support and
    /// measurement data.
    pub fn resume(support: Arc<Support>, ck: Checkpoint, measurement: Option<MeasurementState>) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Argument(format!("unsupported checkpoint format {}", ck.format)));
        }
        ck.config.validate()?;
        if ck.rng.seed != ck.config.seed {
            return Err(Error::Argument("checkpoint seed mismatch".into()));
        }
        let mut state = DecompositionState::from_decomposition(support, &ck.decomposition, measurement)?;
        state.set_label_order(ck.active_labels, ck.free_labels)?;
        state.set_log_prob(ck.log_prob);
        let rng = ChainRng::from_cursor(&ck.rng);
        Ok(Self::assemble(state, ck.config, rng, ck.sweeps_done, Some(ck.collectors)))
    }
}

/// Runs one chain on an observed graph from the default initial state.
pub fn run_chain(g: &SimpleGraph, config: &ChainConfig) -> Result<ChainCollectors> {
    let support = Arc::new(Support::observed(g));
    let mut chain = Chain::new(support, config.clone(), None, None)?;
    chain.run()?;
    Ok(chain.into_collectors())
}

/// Runs independent chains in parallel, one per seed; results come back in
/// seed order.
pub fn run_chains(g: &SimpleGraph, config: &ChainConfig, seeds: &[u64]) -> Result<Vec<ChainCollectors>> {
    let support = Arc::new(Support::observed(g));
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ChainConfig { seed, ..config.clone() };
            let mut chain = Chain::new(Arc::clone(&support), cfg, None, None)?;
            chain.run()?;
            Ok(chain.into_collectors())
        })
        .collect()
}

/// Counts of distinct canonical partitions, for tests and diagnostics.
pub fn partition_histogram(parts: &[Partition]) -> FxHashMap<Vec<u32>, u64> {
    let mut h = FxHashMap::default();
    for p in parts {
        *h.entry(p.canonical().labels().to_vec()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sweeps: u64, layers: u8, seed: u64) -> ChainConfig {
        ChainConfig { sweeps, burn_in: sweeps / 4, thin: 1, layers, seed, verify_every: 50, ..Default::default() }
    }

    #[test]
    fn single_edge_is_always_seminal() {
        let g = SimpleGraph::parse_str("0 1").unwrap();
        let c = run_chain(&g, &cfg(400, 2, 3)).unwrap();
        assert_eq!(c.samples, 300);
        assert_eq!(c.seminal_marginals(), vec![1.0]);
    }

    #[test]
    fn trace_length_and_stats() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n0 2\n2 3\n3 4\n2 4").unwrap();
        let config = ChainConfig { sweeps: 103, burn_in: 10, thin: 4, layers: 2, ..Default::default() };
        let c = run_chain(&g, &config).unwrap();
        assert_eq!(c.description_length.len() as u64, config.retained());
        assert_eq!(c.description_length.len(), 23);
        let t = c.stats.total();
        assert_eq!(t.accepted + t.rejected, t.proposed);
        assert_eq!(t.proposed, 103 * (6 + 5));
        for p in c.seminal_marginals() {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn identical_seeds_identical_output() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n0 2\n2 3\n3 4\n2 4\n4 5\n5 0").unwrap();
        let a = run_chain(&g, &cfg(300, 2, 11)).unwrap();
        let b = run_chain(&g, &cfg(300, 2, 11)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run_chain(&g, &cfg(300, 2, 12)).unwrap();
        assert_ne!(a.description_length, c.description_length);
    }

    #[test]
    fn checkpoint_resume_is_bit_exact() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n0 2\n2 3\n3 4\n2 4\n4 5\n5 0\n1 5").unwrap();
        let support = Arc::new(Support::observed(&g));
        let config = cfg(400, 2, 21);
        let mut whole = Chain::new(Arc::clone(&support), config.clone(), None, None).unwrap();
        whole.run().unwrap();
        let mut first = Chain::new(Arc::clone(&support), config, None, None).unwrap();
        first.run_for(170).unwrap();
        let json = serde_json::to_string(&first.checkpoint()).unwrap();
        let ck: Checkpoint = serde_json::from_str(&json).unwrap();
        let mut second = Chain::resume(support, ck, None).unwrap();
        second.run().unwrap();
        assert_eq!(
            serde_json::to_string(whole.collectors()).unwrap(),
            serde_json::to_string(second.collectors()).unwrap()
        );
    }

    #[test]
    fn parallel_chains_merge_in_seed_order() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n0 2\n2 3").unwrap();
        let config = cfg(100, 1, 0);
        let chains = run_chains(&g, &config, &[5, 6]).unwrap();
        let single = run_chain(&g, &ChainConfig { seed: 6, ..config.clone() }).unwrap();
        assert_eq!(chains[1], single);
        let merged = ChainCollectors::merge(&chains).unwrap();
        assert_eq!(merged.samples, chains[0].samples + chains[1].samples);
    }

    #[test]
    fn mix_weights() {
        let m = MoveMix::proportional(10, 5, 5, 0);
        assert_eq!(m.owner_swap, 0.0);
        assert!((m.multiplicity - 0.5).abs() < 1e-12);
        let c = MoveMix::proportional(10, 5, 0, 2).cumulative();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12 && (c[2] - 1.0).abs() < 1e-12);
    }
}
