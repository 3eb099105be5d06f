//! The incrementally maintained MCMC state.

use std::sync::Arc;

use smallvec::SmallVec;

use crate::closure::{ln_cell_term, ln_level_term, triad_level, Decomposition, Owner, NEVER};
use crate::error::{Error, Result};
use crate::graph::{EdgeTriangles, SimpleGraph};
use crate::partition::Partition;
use crate::sbm::BlockState;
use crate::special::ln_binomial;

pub type Owners = SmallVec<[Owner; 2]>;

/// The pairs the sampler may populate, with their triangle structure.
///
/// For plain inference every pair is an edge of the observed graph and is
/// required to stay present. For reconstruction, optional pairs may toggle.
#[derive(Clone, Debug)]
pub struct Support {
    graph: SimpleGraph,
    triangles: EdgeTriangles,
    required: Vec<bool>,
}

impl Support {
    pub fn observed(g: &SimpleGraph) -> Self {
        Support { graph: g.clone(), triangles: g.edge_triangles(), required: vec![true; g.edge_count()] }
    }

    /// `certain` pairs must stay present; `optional` pairs may toggle.
    pub fn with_optional(n: usize, certain: &[(u32, u32)], optional: &[(u32, u32)]) -> Result<Self> {
        let graph = SimpleGraph::from_edges(n, certain.iter().chain(optional).copied())?;
        if graph.edge_count() != certain.len() + optional.len() {
            return Err(Error::Argument("certain and optional pairs overlap or repeat".into()));
        }
        let mut required = vec![false; graph.edge_count()];
        for &(i, j) in certain {
            required[graph.edge_id(i, j).unwrap() as usize] = true;
        }
        Ok(Support { triangles: graph.edge_triangles(), graph, required })
    }

    pub fn graph(&self) -> &SimpleGraph {
        &self.graph
    }

    /// Triangles through pair `e`.
    pub fn triangles(&self, e: u32) -> &[crate::graph::Triangle] {
        self.triangles.of(e)
    }

    pub fn is_required(&self, e: u32) -> bool {
        self.required[e as usize]
    }

    pub fn optional_pairs(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.required.len() as u32).filter(|&e| !self.required[e as usize])
    }
}

/// Measurement counts on the finite pairs of a reconstruction problem.
#[derive(Clone, Debug)]
pub struct MeasurementState {
    trials: Vec<u64>,
    hits: Vec<u64>,
    finite: Vec<bool>,
    total_trials: u64,
    total_hits: u64,
    present_trials: u64,
    present_hits: u64,
}

impl MeasurementState {
    /// `pairs[e] = Some((n, x))` for finite pairs of the support.
    pub fn new(pairs: Vec<Option<(u64, u64)>>) -> Self {
        let mut st = MeasurementState {
            trials: Vec::with_capacity(pairs.len()),
            hits: Vec::with_capacity(pairs.len()),
            finite: Vec::with_capacity(pairs.len()),
            total_trials: 0,
            total_hits: 0,
            present_trials: 0,
            present_hits: 0,
        };
        for p in pairs {
            let (n, x) = p.unwrap_or((0, 0));
            st.trials.push(n);
            st.hits.push(x);
            st.finite.push(p.is_some());
            st.total_trials += n;
            st.total_hits += x;
        }
        st
    }

    fn log_likelihood_at(&self, e_trials: u64, e_hits: u64) -> f64 {
        measurement_terms(self.total_trials, self.total_hits, e_trials, e_hits)
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood_at(self.present_trials, self.present_hits)
    }

    fn toggle_delta(&self, e: u32, on: bool) -> f64 {
        if !self.finite[e as usize] {
            return 0.0;
        }
        let (n, x) = (self.trials[e as usize], self.hits[e as usize]);
        let (pt, ph) = if on {
            (self.present_trials + n, self.present_hits + x)
        } else {
            (self.present_trials - n, self.present_hits - x)
        };
        self.log_likelihood_at(pt, ph) - self.log_likelihood()
    }

    fn apply_toggle(&mut self, e: u32, on: bool) {
        if !self.finite[e as usize] {
            return;
        }
        let (n, x) = (self.trials[e as usize], self.hits[e as usize]);
        if on {
            self.present_trials += n;
            self.present_hits += x;
        } else {
            self.present_trials -= n;
            self.present_hits -= x;
        }
    }
}

/// ln P(x | G, n) from the totals over finite pairs.
pub fn measurement_terms(total_trials: u64, total_hits: u64, e_trials: u64, e_hits: u64) -> f64 {
    if e_hits > e_trials || total_hits - e_hits > total_trials - e_trials {
        return f64::NEG_INFINITY;
    }
    -ln_binomial(e_trials, e_hits)
        - (1.0 + e_trials as f64).ln()
        - ln_binomial(total_trials - e_trials, total_hits - e_hits)
        - (1.0 + (total_trials - e_trials) as f64).ln()
}

#[derive(Clone, Debug, Default)]
struct Pending {
    edge: u32,
    seminal: u32,
    owners: Owners,
    creation: u8,
    cells: Vec<(u32, u8, i64, i64)>,
    delta: f64,
    ready: bool,
}

/// (A', ego-graph layers, b) with every cache needed for O(k_i + k_j)
/// edge moves and O(k_v) node moves.
#[derive(Clone, Debug)]
pub struct DecompositionState {
    support: Arc<Support>,
    layers: u8,
    seminal: Vec<u32>,
    owners: Vec<Owners>,
    creation: Vec<u8>,
    // M_u^(l) and E_u^(l) at u * L + l - 1
    open: Vec<u64>,
    closed: Vec<u64>,
    // present incident edges of u by creation generation, at u * (L + 1) + c
    hist: Vec<u32>,
    level_open: Vec<u64>,
    level_active: Vec<u64>,
    blocks: BlockState,
    present: Vec<u32>,
    present_pos: Vec<u32>,
    measurement: Option<MeasurementState>,
    log_prob: f64,
    pending: Pending,
    level_scratch: Vec<(i64, i64)>,
    group_scratch: Vec<(u32, u64)>,
}

const ABSENT: u32 = u32::MAX;

impl DecompositionState {
    /// All-seminal state over the present pairs.
    pub fn new(support: Arc<Support>, layers: u8, b: &Partition, present: &[bool]) -> Result<Self> {
        let m = support.graph.edge_count();
        if present.len() != m {
            return Err(Error::Argument("presence mask does not match the support".into()));
        }
        let d = Decomposition {
            layers,
            node_count: support.graph.node_count(),
            pairs: support.graph.edges().to_vec(),
            seminal: present.iter().map(|&p| p as u32).collect(),
            owners: vec![Vec::new(); m],
            labels: b.labels().to_vec(),
        };
        Self::from_decomposition(support, &d, None)
    }

    pub fn from_decomposition(
        support: Arc<Support>,
        d: &Decomposition,
        measurement: Option<MeasurementState>,
    ) -> Result<Self> {
        let g = &support.graph;
        let n = g.node_count();
        if d.node_count != n || d.pairs != g.edges() {
            return Err(Error::Argument("decomposition pairs differ from the support".into()));
        }
        if d.layers > crate::closure::MAX_LAYERS {
            return Err(Error::Argument(format!("at most {} layers", crate::closure::MAX_LAYERS)));
        }
        let b = Partition::new(d.labels.clone());
        b.check_len(n)?;
        let l = d.layers as usize;
        let blocks = BlockState::new(&b, g.edges().iter().zip(&d.seminal).map(|(&(i, j), &s)| (i, j, s as u64)));
        let mut st = DecompositionState {
            layers: d.layers,
            seminal: d.seminal.clone(),
            owners: d.owners.iter().map(|o| o.iter().copied().collect()).collect(),
            creation: d.creation(),
            open: vec![0; n * l],
            closed: vec![0; n * l],
            hist: vec![0; n * (l + 1)],
            level_open: vec![0; l],
            level_active: vec![0; l],
            blocks,
            present: Vec::new(),
            present_pos: vec![ABSENT; g.edge_count()],
            measurement,
            log_prob: 0.0,
            pending: Pending::default(),
            level_scratch: vec![(0, 0); l],
            group_scratch: Vec::new(),
            support,
        };
        st.rebuild_caches();
        if let Some(meas) = st.measurement.as_mut() {
            for &e in &st.present {
                meas.apply_toggle(e, true);
            }
        }
        st.log_prob = st.recompute_log_prob();
        Ok(st)
    }

    fn rebuild_caches(&mut self) {
        let g = &self.support.graph;
        let l = self.layers as usize;
        self.present.clear();
        self.present_pos.iter_mut().for_each(|p| *p = ABSENT);
        self.open.iter_mut().for_each(|x| *x = 0);
        self.closed.iter_mut().for_each(|x| *x = 0);
        self.hist.iter_mut().for_each(|x| *x = 0);
        for e in 0..g.edge_count() {
            let c = self.creation[e];
            if c != NEVER {
                self.present_pos[e] = self.present.len() as u32;
                self.present.push(e as u32);
                let (i, j) = g.edges()[e];
                if (c as usize) <= l {
                    self.hist[i as usize * (l + 1) + c as usize] += 1;
                    self.hist[j as usize * (l + 1) + c as usize] += 1;
                }
            }
            for o in &self.owners[e] {
                if o.level >= 1 && (o.level as usize) <= l {
                    self.closed[o.ego as usize * l + o.level as usize - 1] += 1;
                }
            }
        }
        if l > 0 {
            for u in 0..g.node_count() as u32 {
                let inc = g.incident(u);
                for x in 0..inc.len() {
                    let ca = self.creation[inc[x].1 as usize];
                    if ca == NEVER {
                        continue;
                    }
                    for y in x + 1..inc.len() {
                        let cb = self.creation[inc[y].1 as usize];
                        let cab = g.edge_id(inc[x].0, inc[y].0).map_or(NEVER, |e| self.creation[e as usize]);
                        let lev = triad_level(ca, cb, cab, self.layers);
                        if lev > 0 {
                            self.open[u as usize * l + lev as usize - 1] += 1;
                        }
                    }
                }
            }
        }
        for lev in 0..l {
            self.level_open[lev] = 0;
            self.level_active[lev] = 0;
        }
        for u in 0..g.node_count() {
            for lev in 0..l {
                self.level_open[lev] += (self.open[u * l + lev] > 0) as u64;
                self.level_active[lev] += (self.closed[u * l + lev] > 0) as u64;
            }
        }
    }

    pub fn support(&self) -> &Arc<Support> {
        &self.support
    }

    pub fn graph(&self) -> &SimpleGraph {
        &self.support.graph
    }

    pub fn layers(&self) -> u8 {
        self.layers
    }

    pub fn node_count(&self) -> usize {
        self.support.graph.node_count()
    }

    pub fn blocks(&self) -> &BlockState {
        &self.blocks
    }

    pub fn seminal(&self, e: u32) -> u32 {
        self.seminal[e as usize]
    }

    pub fn owners(&self, e: u32) -> &[Owner] {
        &self.owners[e as usize]
    }

    pub fn creation(&self, e: u32) -> u8 {
        self.creation[e as usize]
    }

    pub fn is_present(&self, e: u32) -> bool {
        self.creation[e as usize] != NEVER
    }

    /// Ids of present pairs, in arbitrary order.
    pub fn present_edges(&self) -> &[u32] {
        &self.present
    }

    pub fn measurement(&self) -> Option<&MeasurementState> {
        self.measurement.as_ref()
    }

    /// Running ln P(G, {g}, A', b) (times the measurement likelihood in
    /// reconstruction mode).
    pub fn log_prob(&self) -> f64 {
        self.log_prob
    }

    pub(crate) fn set_log_prob(&mut self, v: f64) {
        self.log_prob = v;
    }

    /// `M_u^(l)` from the cache.
    pub fn open_triad_count(&self, u: u32, l: u8) -> u64 {
        self.open[u as usize * self.layers as usize + l as usize - 1]
    }

    /// `E_u^(l)` from the cache.
    pub fn closed_count(&self, u: u32, l: u8) -> u64 {
        self.closed[u as usize * self.layers as usize + l as usize - 1]
    }

    /// Number of egos with open triads at generation `l`.
    pub fn egos_with_open_triads(&self, l: u8) -> u64 {
        self.level_open[l as usize - 1]
    }

    /// Sum of the layer marginals from the caches.
    pub fn layers_log_marginal(&self) -> f64 {
        let l = self.layers as usize;
        let mut acc = 0.0;
        for (&m, &e) in self.open.iter().zip(&self.closed) {
            if e > m {
                return f64::NEG_INFINITY;
            }
            acc += ln_cell_term(m, e);
        }
        for lev in 0..l {
            acc += ln_level_term(self.level_open[lev], self.level_active[lev]);
        }
        acc
    }

    /// ln P(A' | b) + ln P(b) from the caches.
    pub fn block_log_prob(&self) -> f64 {
        self.blocks.log_likelihood() + self.blocks.log_prior()
    }

    /// Log probability recomputed from the caches (not from the running
    /// total).
    pub fn recompute_log_prob(&self) -> f64 {
        let meas = self.measurement.as_ref().map_or(0.0, |m| m.log_likelihood());
        self.layers_log_marginal() + self.block_log_prob() + meas
    }

    pub fn to_decomposition(&self) -> Decomposition {
        Decomposition {
            layers: self.layers,
            node_count: self.node_count(),
            pairs: self.support.graph.edges().to_vec(),
            seminal: self.seminal.clone(),
            owners: self.owners.iter().map(|o| o.to_vec()).collect(),
            labels: self.blocks.labels().to_vec(),
        }
    }

    /// Restores the group label bookkeeping saved by
    /// [`BlockState::label_order`].
    pub fn set_label_order(&mut self, active: Vec<u32>, free: Vec<u32>) -> Result<()> {
        self.blocks.set_label_order(active, free)
    }

    /// Egos relevant for pair `e` at generation `l >= 1`: common neighbors
    /// whose spokes would open the pair at exactly that generation.
    pub fn relevant_egos(&self, e: u32, l: u8, out: &mut SmallVec<[u32; 16]>) {
        out.clear();
        for t in self.support.triangles.of(e) {
            let lev = triad_level(self.creation[t.e_wi as usize], self.creation[t.e_wj as usize], NEVER, self.layers);
            if lev == l {
                out.push(t.w);
            }
        }
    }

    /// Evaluates replacing the ownership of pair `e` by `seminal` and
    /// `owners`. Returns the change in log probability, or negative infinity
    /// for an invalid result. A finite result may be committed with
    /// [`commit`](Self::commit).
    pub fn evaluate_edge(&mut self, e: u32, seminal: u32, owners: &[Owner]) -> f64 {
        self.pending.ready = false;
        let delta = self.evaluate_inner(e, seminal, owners);
        if delta.is_finite() {
            self.pending.edge = e;
            self.pending.seminal = seminal;
            self.pending.owners.clear();
            self.pending.owners.extend_from_slice(owners);
            self.pending.delta = delta;
            self.pending.ready = true;
        }
        delta
    }

    fn evaluate_inner(&mut self, e: u32, seminal: u32, owners: &[Owner]) -> f64 {
        let support = Arc::clone(&self.support);
        let g = &support.graph;
        let tris = support.triangles.of(e);
        let lay = self.layers;
        let (i, j) = g.edges()[e as usize];
        let old_c = self.creation[e as usize];
        let new_c = if seminal > 0 { 0 } else { owners.iter().map(|o| o.level).min().unwrap_or(NEVER) };
        if new_c == NEVER && support.required[e as usize] {
            return f64::NEG_INFINITY;
        }
        for (x, o) in owners.iter().enumerate() {
            if o.level == 0 || o.level > lay || owners[..x].contains(o) {
                return f64::NEG_INFINITY;
            }
            let Some(t) = tris.iter().find(|t| t.w == o.ego) else {
                return f64::NEG_INFINITY;
            };
            let lev = triad_level(self.creation[t.e_wi as usize], self.creation[t.e_wj as usize], new_c, lay);
            if lev != o.level {
                return f64::NEG_INFINITY;
            }
        }
        let cells = &mut self.pending.cells;
        cells.clear();
        for o in self.owners[e as usize].iter() {
            cells.push((o.ego, o.level, 0, -1));
        }
        for o in owners {
            cells.push((o.ego, o.level, 0, 1));
        }
        if old_c != new_c && lay > 0 {
            let l1 = lay as usize + 1;
            let mut hi: SmallVec<[i64; 8]> = (0..l1).map(|c| self.hist[i as usize * l1 + c] as i64).collect();
            let mut hj: SmallVec<[i64; 8]> = (0..l1).map(|c| self.hist[j as usize * l1 + c] as i64).collect();
            if (old_c as usize) < l1 {
                hi[old_c as usize] -= 1;
                hj[old_c as usize] -= 1;
            }
            for t in tris {
                let (cwi, cwj) = (self.creation[t.e_wi as usize], self.creation[t.e_wj as usize]);
                if (cwi as usize) < l1 {
                    hi[cwi as usize] -= 1;
                }
                if (cwj as usize) < l1 {
                    hj[cwj as usize] -= 1;
                }
                // w as ego, (i, j) as the closing pair
                let a = triad_level(cwi, cwj, old_c, lay);
                let b = triad_level(cwi, cwj, new_c, lay);
                if a != b {
                    if a > 0 {
                        cells.push((t.w, a, -1, 0));
                    }
                    if b > 0 {
                        cells.push((t.w, b, 1, 0));
                    }
                }
                // i as ego, (j, w) as the closing pair
                let a = triad_level(old_c, cwi, cwj, lay);
                let b = triad_level(new_c, cwi, cwj, lay);
                if a != b {
                    if a > 0 {
                        cells.push((i, a, -1, 0));
                    }
                    if b > 0 {
                        cells.push((i, b, 1, 0));
                    }
                }
                if let Some(o) = self.owners[t.e_wj as usize].iter().find(|o| o.ego == i) {
                    if b != o.level {
                        return f64::NEG_INFINITY;
                    }
                }
                // j as ego, (i, w) as the closing pair
                let a = triad_level(old_c, cwj, cwi, lay);
                let b = triad_level(new_c, cwj, cwi, lay);
                if a != b {
                    if a > 0 {
                        cells.push((j, a, -1, 0));
                    }
                    if b > 0 {
                        cells.push((j, b, 1, 0));
                    }
                }
                if let Some(o) = self.owners[t.e_wi as usize].iter().find(|o| o.ego == j) {
                    if b != o.level {
                        return f64::NEG_INFINITY;
                    }
                }
            }
            for (ego, h) in [(i, &hi), (j, &hj)] {
                for (c, &count) in h.iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    debug_assert!(count > 0);
                    let a = triad_level(old_c, c as u8, NEVER, lay);
                    let b = triad_level(new_c, c as u8, NEVER, lay);
                    if a != b {
                        if a > 0 {
                            cells.push((ego, a, -count, 0));
                        }
                        if b > 0 {
                            cells.push((ego, b, count, 0));
                        }
                    }
                }
            }
        }
        let layer_delta = self.cell_delta();
        if !layer_delta.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.pending.creation = new_c;
        let old_s = self.seminal[e as usize];
        let mut delta = layer_delta + self.blocks.edge_delta(i, j, old_s as u64, seminal as u64);
        if let Some(m) = &self.measurement {
            if (old_c == NEVER) != (new_c == NEVER) {
                delta += m.toggle_delta(e, new_c != NEVER);
            }
        }
        delta
    }

    /// Merges pending cell changes in place and returns the layer delta.
    fn cell_delta(&mut self) -> f64 {
        let cells = &mut self.pending.cells;
        if cells.is_empty() {
            return 0.0;
        }
        cells.sort_unstable_by_key(|c| (c.0, c.1));
        let mut w = 0;
        for idx in 0..cells.len() {
            if w > 0 && cells[w - 1].0 == cells[idx].0 && cells[w - 1].1 == cells[idx].1 {
                cells[w - 1].2 += cells[idx].2;
                cells[w - 1].3 += cells[idx].3;
            } else {
                cells[w] = cells[idx];
                w += 1;
            }
        }
        cells.truncate(w);
        let l = self.layers as usize;
        for x in self.level_scratch.iter_mut() {
            *x = (0, 0);
        }
        let mut delta = 0.0;
        for &(u, lev, dm, de) in cells.iter() {
            if dm == 0 && de == 0 {
                continue;
            }
            let idx = u as usize * l + lev as usize - 1;
            let (m0, e0) = (self.open[idx] as i64, self.closed[idx] as i64);
            let (m1, e1) = (m0 + dm, e0 + de);
            debug_assert!(m1 >= 0 && e1 >= 0);
            if e1 > m1 || m1 < 0 || e1 < 0 {
                return f64::NEG_INFINITY;
            }
            delta += ln_cell_term(m1 as u64, e1 as u64) - ln_cell_term(m0 as u64, e0 as u64);
            let s = &mut self.level_scratch[lev as usize - 1];
            s.0 += (m1 > 0) as i64 - (m0 > 0) as i64;
            s.1 += (e1 > 0) as i64 - (e0 > 0) as i64;
        }
        for lev in 0..l {
            let (dno, dna) = self.level_scratch[lev];
            if dno != 0 || dna != 0 {
                let (no, na) = (self.level_open[lev] as i64, self.level_active[lev] as i64);
                delta += ln_level_term((no + dno) as u64, (na + dna) as u64) - ln_level_term(no as u64, na as u64);
            }
        }
        delta
    }

    /// Applies the last finite evaluation.
    pub fn commit(&mut self) {
        assert!(self.pending.ready, "commit without a valid evaluation");
        self.pending.ready = false;
        let e = self.pending.edge;
        let (i, j) = self.support.graph.edges()[e as usize];
        let l = self.layers as usize;
        for idx in 0..self.pending.cells.len() {
            let (u, lev, dm, de) = self.pending.cells[idx];
            if dm == 0 && de == 0 {
                continue;
            }
            let k = u as usize * l + lev as usize - 1;
            let (m0, e0) = (self.open[k], self.closed[k]);
            let m1 = (m0 as i64 + dm) as u64;
            let e1 = (e0 as i64 + de) as u64;
            self.open[k] = m1;
            self.closed[k] = e1;
            let lv = lev as usize - 1;
            self.level_open[lv] = (self.level_open[lv] as i64 + (m1 > 0) as i64 - (m0 > 0) as i64) as u64;
            self.level_active[lv] = (self.level_active[lv] as i64 + (e1 > 0) as i64 - (e0 > 0) as i64) as u64;
        }
        let old_c = self.creation[e as usize];
        let new_c = self.pending.creation;
        if old_c != new_c {
            let l1 = l + 1;
            for v in [i, j] {
                if (old_c as usize) < l1 {
                    self.hist[v as usize * l1 + old_c as usize] -= 1;
                }
                if (new_c as usize) < l1 {
                    self.hist[v as usize * l1 + new_c as usize] += 1;
                }
            }
            if old_c == NEVER {
                self.present_pos[e as usize] = self.present.len() as u32;
                self.present.push(e);
                if let Some(m) = self.measurement.as_mut() {
                    m.apply_toggle(e, true);
                }
            } else if new_c == NEVER {
                let pos = self.present_pos[e as usize] as usize;
                let last = *self.present.last().unwrap();
                self.present.swap_remove(pos);
                if last != e {
                    self.present_pos[last as usize] = pos as u32;
                }
                self.present_pos[e as usize] = ABSENT;
                if let Some(m) = self.measurement.as_mut() {
                    m.apply_toggle(e, false);
                }
            }
            self.creation[e as usize] = new_c;
        }
        let old_s = self.seminal[e as usize];
        let new_s = self.pending.seminal;
        self.blocks.apply_edge(i, j, old_s as u64, new_s as u64);
        self.seminal[e as usize] = new_s;
        std::mem::swap(&mut self.owners[e as usize], &mut self.pending.owners);
        self.log_prob += self.pending.delta;
    }

    fn collect_groups(&mut self, v: u32) {
        let g = &self.support.graph;
        let seminal = &self.seminal;
        let nbrs = g.incident(v).iter().filter_map(|&(u, e)| {
            let s = seminal[e as usize];
            (s > 0).then_some((u, s as u64))
        });
        let mut scratch = std::mem::take(&mut self.group_scratch);
        self.blocks.neighbor_groups(nbrs, &mut scratch);
        self.group_scratch = scratch;
    }

    /// Change in log probability when node `v` moves to group `s`.
    pub fn node_move_delta(&mut self, v: u32, s: u32) -> f64 {
        if self.blocks.label(v) == s {
            return 0.0;
        }
        self.collect_groups(v);
        self.blocks.move_delta(v, s, &self.group_scratch)
    }

    /// Moves `v` to group `s` and adds `delta` to the running total.
    pub fn apply_node_move(&mut self, v: u32, s: u32, delta: f64) {
        if self.blocks.label(v) == s {
            return;
        }
        self.collect_groups(v);
        let groups = std::mem::take(&mut self.group_scratch);
        self.blocks.apply_move(v, s, &groups);
        self.group_scratch = groups;
        self.log_prob += delta;
    }

    /// Full consistency check of every cache against a recomputation.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let d = self.to_decomposition();
        let mut fresh = self.clone();
        fresh.creation = d.creation();
        fresh.rebuild_caches();
        if fresh.creation != self.creation {
            return Err("creation generations differ".into());
        }
        if fresh.open != self.open {
            return Err("open triad counts differ".into());
        }
        if fresh.closed != self.closed {
            return Err("closure counts differ".into());
        }
        if fresh.hist != self.hist {
            return Err("generation histograms differ".into());
        }
        if fresh.level_open != self.level_open || fresh.level_active != self.level_active {
            return Err("per-generation ego counts differ".into());
        }
        let mut p1 = self.present.clone();
        let mut p2 = fresh.present.clone();
        p1.sort_unstable();
        p2.sort_unstable();
        if p1 != p2 {
            return Err("present sets differ".into());
        }
        for (pos, &e) in self.present.iter().enumerate() {
            if self.present_pos[e as usize] as usize != pos {
                return Err("present index broken".into());
            }
        }
        let g = &self.support.graph;
        self.blocks.verify(
            g.edges().iter().zip(&self.seminal).filter(|(_, &s)| s > 0).map(|(&(i, j), &s)| (i, j, s as u64)),
        )?;
        if let Some(m) = &self.measurement {
            let (mut t, mut h) = (0, 0);
            for &e in &self.present {
                if m.finite[e as usize] {
                    t += m.trials[e as usize];
                    h += m.hits[e as usize];
                }
            }
            if (t, h) != (m.present_trials, m.present_hits) {
                return Err("measurement totals differ".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{joint_log_probability, triad_counts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(text: &str, layers: u8) -> DecompositionState {
        let g = SimpleGraph::parse_str(text).unwrap();
        let n = g.node_count();
        let m = g.edge_count();
        DecompositionState::new(Arc::new(Support::observed(&g)), layers, &Partition::single_group(n), &vec![true; m])
            .unwrap()
    }

    #[test]
    fn initial_state_matches_oracle() {
        let st = state("0 1\n1 2\n2 3\n3 0\n0 2\n3 4", 3);
        st.verify().unwrap();
        let d = st.to_decomposition();
        let oracle = joint_log_probability(&d, st.graph());
        assert!((st.log_prob() - oracle).abs() < 1e-12);
        let counts = triad_counts(&d);
        for u in 0..5 {
            for l in 1..=3 {
                assert_eq!(st.open_triad_count(u, l), counts.open_count(u, l));
            }
        }
    }

    #[test]
    fn swap_to_closure_on_triangle() {
        let mut st = state("0 1\n1 2\n0 2", 1);
        let e = st.graph().edge_id(0, 1).unwrap();
        let mut rel = SmallVec::new();
        st.relevant_egos(e, 1, &mut rel);
        assert_eq!(rel.as_slice(), &[2]);
        let before = st.log_prob();
        let d = st.evaluate_edge(e, 0, &[Owner { ego: 2, level: 1 }]);
        assert!(d.is_finite());
        st.commit();
        st.verify().unwrap();
        let oracle = joint_log_probability(&st.to_decomposition(), st.graph());
        assert!((st.log_prob() - oracle).abs() < 1e-12);
        assert!((st.log_prob() - before - d).abs() < 1e-15);
        // the other two edges can no longer be closed by the remaining egos
        let f = st.graph().edge_id(1, 2).unwrap();
        assert_eq!(st.evaluate_edge(f, 0, &[Owner { ego: 0, level: 1 }]), f64::NEG_INFINITY);
        // seminal plus ego ownership is not an open triad
        assert_eq!(st.evaluate_edge(e, 1, &[Owner { ego: 2, level: 1 }]), f64::NEG_INFINITY);
        // removing every owner uncovers an observed edge
        assert_eq!(st.evaluate_edge(e, 0, &[]), f64::NEG_INFINITY);
    }

    /// Random valid and invalid edge changes and node moves; the running
    /// total must track the oracle.
    fn random_walk(text: &str, layers: u8, steps: usize, seed: u64) {
        let mut st = state(text, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = st.graph().edge_count() as u32;
        let n = st.node_count() as u32;
        let mut rel = SmallVec::new();
        for step in 0..steps {
            if rng.gen_bool(0.3) {
                let v = rng.gen_range(0..n);
                let groups = st.blocks().num_groups();
                let pick = rng.gen_range(0..=groups);
                let s = if pick == groups {
                    match st.blocks().free_label() {
                        Some(s) => s,
                        None => continue,
                    }
                } else {
                    st.blocks().active_groups()[pick]
                };
                let d = st.node_move_delta(v, s);
                st.apply_node_move(v, s, d);
            } else {
                let e = rng.gen_range(0..m);
                let l = rng.gen_range(1..=layers);
                st.relevant_egos(e, l, &mut rel);
                let mut owners: Vec<Owner> = st.owners(e).to_vec();
                let mut seminal = st.seminal(e);
                match rng.gen_range(0..3) {
                    0 => seminal = rng.gen_range(0..3),
                    1 if !rel.is_empty() => {
                        let u = rel[rng.gen_range(0..rel.len())];
                        let o = Owner { ego: u, level: l };
                        if let Some(p) = owners.iter().position(|x| *x == o) {
                            owners.remove(p);
                        } else {
                            owners.push(o);
                        }
                    }
                    _ => {
                        seminal = 0;
                        owners.clear();
                        if !rel.is_empty() {
                            owners.push(Owner { ego: rel[0], level: l });
                        }
                    }
                }
                let mut cand = st.to_decomposition();
                cand.seminal[e as usize] = seminal;
                cand.owners[e as usize] = owners.clone();
                let oracle = joint_log_probability(&cand, st.graph());
                let d = st.evaluate_edge(e, seminal, &owners);
                if oracle == f64::NEG_INFINITY {
                    assert_eq!(d, f64::NEG_INFINITY, "step {step}: oracle rejects");
                    continue;
                }
                assert!(d.is_finite(), "step {step}: incremental rejects a valid state");
                assert!((st.log_prob() + d - oracle).abs() < 1e-9, "step {step}");
                st.commit();
            }
            if step % 7 == 0 {
                st.verify().unwrap();
            }
            let oracle = joint_log_probability(&st.to_decomposition(), st.graph());
            assert!((st.log_prob() - oracle).abs() < 1e-9, "step {step}");
        }
    }

    #[test]
    fn random_walk_on_small_graphs() {
        random_walk("0 1\n1 2\n0 2\n2 3\n1 3\n3 4\n2 4\n4 5\n0 5", 3, 3000, 1);
        random_walk("0 1\n0 2\n0 3\n0 4\n1 2\n2 3\n3 4\n1 4\n1 3", 2, 3000, 2);
        random_walk("0 1\n1 2\n2 3\n3 0\n0 2\n1 3\n4 0\n4 1\n4 2", 4, 3000, 3);
    }

    #[test]
    fn reconstruction_toggles_track_measurement() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n0 2\n2 3").unwrap();
        let support = Arc::new(Support::with_optional(4, g.edges(), &[(0, 3), (1, 3)]).unwrap());
        let m = support.graph().edge_count();
        let present: Vec<bool> = (0..m as u32).map(|e| support.is_required(e)).collect();
        let meas = (0..m as u32).map(|e| (!support.is_required(e)).then_some((1u64, 1u64))).collect();
        let mut d = DecompositionState::new(Arc::clone(&support), 2, &Partition::single_group(4), &present)
            .unwrap()
            .to_decomposition();
        d.labels = vec![0; 4];
        let mut st =
            DecompositionState::from_decomposition(support.clone(), &d, Some(MeasurementState::new(meas))).unwrap();
        let e = support.graph().edge_id(0, 3).unwrap();
        let before = st.log_prob();
        let delta = st.evaluate_edge(e, 1, &[]);
        assert!(delta.is_finite());
        st.commit();
        st.verify().unwrap();
        // both finite pairs observed once with a hit: totals M = X = 2
        let expected_meas = measurement_terms(2, 2, 1, 1) - measurement_terms(2, 2, 0, 0);
        let d_after = st.to_decomposition();
        let g_after = d_after.observed();
        let joint = joint_log_probability(&d_after, &g_after);
        let joint_before = {
            let mut d0 = d_after.clone();
            d0.seminal[e as usize] = 0;
            joint_log_probability(&d0, &d0.observed())
        };
        assert!((delta - (joint - joint_before) - expected_meas).abs() < 1e-12);
        assert!((st.log_prob() - before - delta).abs() < 1e-12);
        // closing (0,3) through ego 2 at generation 1 is also possible
        let delta2 = st.evaluate_edge(e, 0, &[Owner { ego: 2, level: 1 }]);
        assert!(delta2.is_finite());
        st.commit();
        st.verify().unwrap();
        // now remove it
        assert!(st.evaluate_edge(e, 0, &[]).is_finite());
        st.commit();
        st.verify().unwrap();
        assert!(!st.is_present(e));
    }
}
