//! Triadic-closure layers: open-triad bookkeeping and the marginal
//! likelihood of the ego-graph layers, evaluated from scratch.
//!
//! The incremental counterpart lives in [`crate::state`]; everything here
//! recomputes from a plain [`Decomposition`] and doubles as its oracle.

use std::collections::BTreeMap;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::graph::{MultiGraph, SimpleGraph};
use crate::partition::Partition;
use crate::sbm::{dcsbm_log_marginal, partition_log_prior};
use crate::special::ln_binomial;

/// Creation generation of a pair that is absent at every generation.
pub const NEVER: u8 = u8::MAX;

/// Largest supported number of closure generations.
pub const MAX_LAYERS: u8 = 32;

/// An ego graph membership: pair closed by `ego` at generation `level >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Owner {
    pub ego: u32,
    pub level: u8,
}

/// Level at which ego `u` with spokes created at `c1`, `c2` sees the pair
/// closed at `c3` as an open triad, or 0 if it never does within `layers`.
#[inline]
pub fn triad_level(c1: u8, c2: u8, c3: u8, layers: u8) -> u8 {
    if c1 == NEVER || c2 == NEVER {
        return 0;
    }
    let mx = c1.max(c2);
    if c3 <= mx || mx >= layers {
        0
    } else {
        mx + 1
    }
}

/// Log of the generalized layer marginal for one ego and generation.
#[inline]
pub fn ln_cell_term(open: u64, closed: u64) -> f64 {
    if closed == 0 {
        0.0
    } else {
        -ln_binomial(open, closed) - (open as f64).ln()
    }
}

/// Log of the per-generation factor over the number of egos with open
/// triads and the number of egos that closed any.
#[inline]
pub fn ln_level_term(egos_open: u64, egos_active: u64) -> f64 {
    -ln_binomial(egos_open, egos_active) - (1.0 + egos_open as f64).ln()
}

/// A full decomposition of a set of pairs into seminal multiplicities and
/// ego-graph memberships, together with a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub layers: u8,
    pub node_count: usize,
    /// Candidate pairs `(i, j)`, `i < j`.
    pub pairs: Vec<(u32, u32)>,
    pub seminal: Vec<u32>,
    pub owners: Vec<Vec<Owner>>,
    pub labels: Vec<u32>,
}

impl Decomposition {
    /// Every edge seminal with multiplicity one, no closures.
    pub fn all_seminal(g: &SimpleGraph, layers: u8, b: &Partition) -> Self {
        Decomposition {
            layers,
            node_count: g.node_count(),
            pairs: g.edges().to_vec(),
            seminal: vec![1; g.edge_count()],
            owners: vec![Vec::new(); g.edge_count()],
            labels: b.labels().to_vec(),
        }
    }

    /// Turns present pairs into first-generation closures where possible.
    /// Pairs are visited by increasing number of triangles they sit in,
    /// ties broken at random. Each is closed by the common neighbor whose
    /// spokes sit in the most triangles, provided neither spoke is a
    /// closure, and those spokes are pinned as seminal. Multiplicities
    /// reset to one.
    pub fn close_greedily<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.layers == 0 {
            return;
        }
        let n = self.node_count;
        let present: Vec<usize> = (0..self.pairs.len()).filter(|&e| self.is_present(e)).collect();
        let mut adj: Vec<FxHashMap<u32, usize>> = vec![FxHashMap::default(); n];
        for &e in &present {
            let (i, j) = self.pairs[e];
            adj[i as usize].insert(j, e);
            adj[j as usize].insert(i, e);
        }
        let common = |i: u32, j: u32| {
            let (a, b) = if adj[i as usize].len() <= adj[j as usize].len() { (i, j) } else { (j, i) };
            let mut out: Vec<(u32, usize, usize)> =
                adj[a as usize].iter().filter_map(|(&u, &ea)| adj[b as usize].get(&u).map(|&eb| (u, ea, eb))).collect();
            out.sort_unstable();
            out
        };
        let mut triangles = vec![0usize; self.pairs.len()];
        for &e in &present {
            let (i, j) = self.pairs[e];
            triangles[e] = common(i, j).len();
        }
        let mut order: Vec<(usize, u64, usize)> = present.iter().map(|&e| (triangles[e], rng.gen(), e)).collect();
        order.sort_unstable();
        // 0 free, 1 pinned seminal, 2 closed
        let mut status = vec![0u8; self.pairs.len()];
        for (_, _, e) in order {
            if status[e] != 0 {
                continue;
            }
            let (i, j) = self.pairs[e];
            let best = common(i, j)
                .into_iter()
                .filter(|&(_, ea, eb)| status[ea] != 2 && status[eb] != 2)
                .max_by_key(|&(_, ea, eb)| triangles[ea].min(triangles[eb]));
            match best {
                Some((u, ea, eb)) => {
                    status[e] = 2;
                    status[ea] = 1;
                    status[eb] = 1;
                    self.seminal[e] = 0;
                    self.owners[e] = vec![Owner { ego: u, level: 1 }];
                }
                None => status[e] = 1,
            }
        }
        for e in present {
            if status[e] != 2 {
                self.seminal[e] = 1;
                self.owners[e].clear();
            }
        }
    }

    pub fn is_present(&self, e: usize) -> bool {
        self.seminal[e] > 0 || !self.owners[e].is_empty()
    }

    /// The graph of present pairs.
    pub fn observed(&self) -> SimpleGraph {
        let edges = (0..self.pairs.len()).filter(|&e| self.is_present(e)).map(|e| self.pairs[e]);
        SimpleGraph::from_edges(self.node_count, edges).expect("pairs are valid")
    }

    pub fn seminal_multigraph(&self) -> MultiGraph {
        let mut a = MultiGraph::new(self.node_count);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            a.add(i, j, self.seminal[e] as u64).expect("pairs are valid");
        }
        a
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.labels.clone())
    }

    /// Creation generation per pair: 0 if seminal, else the lowest owner
    /// level, else [`NEVER`].
    pub fn creation(&self) -> Vec<u8> {
        (0..self.pairs.len())
            .map(
                |e| {
                    if self.seminal[e] > 0 {
                        0
                    } else {
                        self.owners[e].iter().map(|o| o.level).min().unwrap_or(NEVER)
                    }
                },
            )
            .collect()
    }
}

/// Per-(ego, generation) counts `M_u^(l)` and `E_u^(l)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TriadCounts {
    /// `(u, l) -> M_u^(l)`, nonzero entries only.
    pub open: BTreeMap<(u32, u8), u64>,
    /// `(u, l) -> E_u^(l)`, nonzero entries only.
    pub closed: BTreeMap<(u32, u8), u64>,
}

impl TriadCounts {
    pub fn open_count(&self, u: u32, l: u8) -> u64 {
        self.open.get(&(u, l)).copied().unwrap_or(0)
    }

    pub fn closed_count(&self, u: u32, l: u8) -> u64 {
        self.closed.get(&(u, l)).copied().unwrap_or(0)
    }
}

pub fn triad_counts(d: &Decomposition) -> TriadCounts {
    let c = d.creation();
    let mut nbrs: Vec<Vec<(u32, u8)>> = vec![Vec::new(); d.node_count];
    let mut gen: BTreeMap<(u32, u32), u8> = BTreeMap::new();
    for (e, &(i, j)) in d.pairs.iter().enumerate() {
        if c[e] != NEVER {
            nbrs[i as usize].push((j, c[e]));
            nbrs[j as usize].push((i, c[e]));
            gen.insert((i, j), c[e]);
        }
    }
    let mut counts = TriadCounts::default();
    for (u, list) in nbrs.iter().enumerate() {
        for x in 0..list.len() {
            for y in x + 1..list.len() {
                let (a, ca) = list[x];
                let (b, cb) = list[y];
                let cab = gen.get(&(a.min(b), a.max(b))).copied().unwrap_or(NEVER);
                let l = triad_level(ca, cb, cab, d.layers);
                if l > 0 {
                    *counts.open.entry((u as u32, l)).or_insert(0) += 1;
                }
            }
        }
    }
    for list in &d.owners {
        for o in list {
            *counts.closed.entry((o.ego, o.level)).or_insert(0) += 1;
        }
    }
    counts
}

/// `M_u^(l)` recomputed from scratch.
pub fn open_triad_count(d: &Decomposition, u: u32, l: u8) -> u64 {
    triad_counts(d).open_count(u, l)
}

/// A broken invariant found by [`validate_state`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// An observed edge without any owner.
    Coverage { i: u32, j: u32 },
    /// An owned pair that is not an edge of the observed graph.
    Spurious { i: u32, j: u32 },
    /// An ego membership whose triad is not open at its generation.
    Triad { i: u32, j: u32, ego: u32, level: u8 },
    /// Generation outside `[1, L]` or a repeated membership.
    Layer { i: u32, j: u32, ego: u32, level: u8 },
    /// Partition length does not match the node count.
    Partition,
}

/// Full check of the decomposition against an observed graph.
pub fn validate_state(d: &Decomposition, g: &SimpleGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.labels.len() != d.node_count || g.node_count() != d.node_count {
        out.push(Violation::Partition);
    }
    let c = d.creation();
    let mut index = BTreeMap::new();
    for (e, &(i, j)) in d.pairs.iter().enumerate() {
        index.insert((i, j), e);
        let present = d.is_present(e);
        if present && !g.has_edge(i, j) {
            out.push(Violation::Spurious { i, j });
        }
    }
    for &(i, j) in g.edges() {
        match index.get(&(i, j)) {
            Some(&e) if d.is_present(e) => {}
            _ => out.push(Violation::Coverage { i, j }),
        }
    }
    let gen_of = |a: u32, b: u32| -> u8 {
        if a == b {
            return NEVER;
        }
        index.get(&(a.min(b), a.max(b))).map_or(NEVER, |&e| c[e])
    };
    for (e, &(i, j)) in d.pairs.iter().enumerate() {
        let mut seen = std::collections::BTreeSet::new();
        for o in &d.owners[e] {
            if o.level == 0 || o.level > d.layers || !seen.insert(*o) || o.ego as usize >= d.node_count {
                out.push(Violation::Layer { i, j, ego: o.ego, level: o.level });
                continue;
            }
            let l = triad_level(gen_of(o.ego, i), gen_of(o.ego, j), c[e], d.layers);
            if l != o.level {
                out.push(Violation::Triad { i, j, ego: o.ego, level: o.level });
            }
        }
    }
    out
}

/// Sum of the generalized layer marginals over all generations, or
/// negative infinity when some membership is not an open triad.
pub fn layers_log_marginal(d: &Decomposition) -> f64 {
    (1..=d.layers).map(|l| layer_log_marginal(d, l)).sum()
}

/// Generalized marginal of generation `l`.
pub fn layer_log_marginal(d: &Decomposition, l: u8) -> f64 {
    let counts = triad_counts(d);
    layer_log_marginal_from_counts(&counts, l)
}

pub fn layer_log_marginal_from_counts(counts: &TriadCounts, l: u8) -> f64 {
    let mut acc = 0.0;
    let mut egos_open = 0;
    let mut egos_active = 0;
    for (&(u, lev), &m) in &counts.open {
        if lev != l {
            continue;
        }
        egos_open += 1;
        let e = counts.closed_count(u, l);
        if e > 0 {
            egos_active += 1;
            if e > m {
                return f64::NEG_INFINITY;
            }
            acc += ln_cell_term(m, e);
        }
    }
    for &(u, lev) in counts.closed.keys() {
        if lev == l && counts.open_count(u, l) == 0 {
            return f64::NEG_INFINITY;
        }
    }
    acc + ln_level_term(egos_open, egos_active)
}

/// ln P(G, {g}, A', b), negative infinity when the decomposition does not
/// reproduce `g` or contains an invalid membership.
pub fn joint_log_probability(d: &Decomposition, g: &SimpleGraph) -> f64 {
    if !validate_state(d, g).is_empty() {
        return f64::NEG_INFINITY;
    }
    let counts = triad_counts(d);
    let layers: f64 = (1..=d.layers).map(|l| layer_log_marginal_from_counts(&counts, l)).sum();
    let b = d.partition();
    layers + dcsbm_log_marginal(&d.seminal_multigraph(), &b) + partition_log_prior(&b)
}

/// ln P(G, A', b) of the block model alone: the joint without any layer
/// factors. Requires an all-seminal decomposition.
pub fn sbm_log_probability(d: &Decomposition, g: &SimpleGraph) -> f64 {
    if d.owners.iter().any(|o| !o.is_empty()) || !validate_state(d, g).is_empty() {
        return f64::NEG_INFINITY;
    }
    let b = d.partition();
    dcsbm_log_marginal(&d.seminal_multigraph(), &b) + partition_log_prior(&b)
}

/// The simple closure marginal with independent uniform priors on each
/// ego's probability, summed over egos.
pub fn simple_layer_log_marginal(open: &[u64], closed: &[u64]) -> f64 {
    open.iter().zip(closed).map(|(&m, &e)| -ln_binomial(m, e) - (1.0 + m as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decomp(g: &SimpleGraph, layers: u8) -> Decomposition {
        Decomposition::all_seminal(g, layers, &Partition::single_group(g.node_count()))
    }

    fn set_closure(d: &mut Decomposition, i: u32, j: u32, ego: u32, level: u8) {
        let e = d.pairs.iter().position(|&p| p == (i.min(j), i.max(j))).unwrap();
        d.seminal[e] = 0;
        d.owners[e].push(Owner { ego, level });
    }

    #[test]
    fn open_triad_examples() {
        let tri = SimpleGraph::parse_str("0 1\n1 2\n0 2").unwrap();
        for u in 0..3 {
            assert_eq!(open_triad_count(&decomp(&tri, 1), u, 1), 0);
        }
        let path = SimpleGraph::parse_str("0 1\n1 2").unwrap();
        assert_eq!(open_triad_count(&decomp(&path, 1), 1, 1), 1);
        let star = SimpleGraph::parse_str("0 1\n0 2\n0 3").unwrap();
        assert_eq!(open_triad_count(&decomp(&star, 1), 0, 1), 3);
    }

    #[test]
    fn layer_marginal_examples() {
        let mut c = TriadCounts::default();
        c.open.insert((0, 1), 1);
        assert!((layer_log_marginal_from_counts(&c, 1) + 2f64.ln()).abs() < 1e-15);
        c.closed.insert((0, 1), 1);
        assert!((layer_log_marginal_from_counts(&c, 1) + 2f64.ln()).abs() < 1e-15);
        assert_eq!(layer_log_marginal_from_counts(&TriadCounts::default(), 1), 0.0);
    }

    #[test]
    fn closure_on_triangle_is_valid() {
        let tri = SimpleGraph::parse_str("0 1\n1 2\n0 2").unwrap();
        let mut d = decomp(&tri, 1);
        set_closure(&mut d, 0, 1, 2, 1);
        assert!(validate_state(&d, &tri).is_empty());
        let counts = triad_counts(&d);
        assert_eq!(counts.open_count(2, 1), 1);
        assert_eq!(counts.closed_count(2, 1), 1);
        assert!(joint_log_probability(&d, &tri).is_finite());
    }

    #[test]
    fn invalid_states_are_reported() {
        let tri = SimpleGraph::parse_str("0 1\n1 2\n0 2").unwrap();
        let mut d = decomp(&tri, 2);
        assert!(validate_state(&d, &tri).is_empty());
        d.seminal[0] = 0;
        assert_eq!(validate_state(&d, &tri), vec![Violation::Coverage { i: 0, j: 1 }]);
        assert_eq!(joint_log_probability(&d, &tri), f64::NEG_INFINITY);

        // second-generation closure supported only by seminal spokes
        let mut d = decomp(&tri, 2);
        set_closure(&mut d, 0, 1, 2, 2);
        assert_eq!(validate_state(&d, &tri), vec![Violation::Triad { i: 0, j: 1, ego: 2, level: 2 }]);

        // a closure whose pair is also seminal is not an open triad
        let mut d = decomp(&tri, 1);
        d.owners[0].push(Owner { ego: 2, level: 1 });
        assert!(!validate_state(&d, &tri).is_empty());
        assert_eq!(joint_log_probability(&d, &tri), f64::NEG_INFINITY);
    }

    #[test]
    fn second_generation_closure() {
        // path 0-1-2-3 plus closure 0-2 at l=1 by ego 1, then 0-3 at l=2 by ego 2
        let g = SimpleGraph::parse_str("0 1\n1 2\n2 3\n0 2\n0 3").unwrap();
        let mut d = decomp(&g, 2);
        set_closure(&mut d, 0, 2, 1, 1);
        set_closure(&mut d, 0, 3, 2, 2);
        assert!(validate_state(&d, &g).is_empty(), "{:?}", validate_state(&d, &g));
        let counts = triad_counts(&d);
        assert_eq!(counts.open_count(2, 2), 1);
        assert_eq!(counts.closed_count(2, 2), 1);
    }

    #[test]
    fn all_seminal_nesting() {
        let g = SimpleGraph::parse_str("0 1\n1 2\n2 3\n3 0\n0 2").unwrap();
        let b = Partition::new(vec![0, 1, 0, 1]);
        let d = Decomposition::all_seminal(&g, 3, &b);
        let counts = triad_counts(&d);
        let with_open = counts.open.keys().filter(|k| k.1 == 1).count() as f64;
        let expected = sbm_log_probability(&d, &g) - (1.0 + with_open).ln();
        assert!((joint_log_probability(&d, &g) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_edge_joint_equals_sbm() {
        let g = SimpleGraph::parse_str("0 1").unwrap();
        let d = decomp(&g, 5);
        assert_eq!(joint_log_probability(&d, &g), sbm_log_probability(&d, &g));
    }

    #[test]
    fn simple_and_general_forms_on_stars() {
        // both are normalized over ego graphs of a star and agree on the
        // conditional law of g given its edge count
        for k in 2..=5u64 {
            let m = k * (k - 1) / 2;
            let mut total_general = 0.0;
            let mut total_simple = 0.0;
            for subset in 0u32..(1 << m) {
                let e = subset.count_ones() as u64;
                let mut c = TriadCounts::default();
                c.open.insert((0, 1), m);
                if e > 0 {
                    c.closed.insert((0, 1), e);
                }
                let general = layer_log_marginal_from_counts(&c, 1);
                let simple = simple_layer_log_marginal(&[m], &[e]);
                total_general += general.exp();
                total_simple += simple.exp();
                let ratio = general - simple;
                let expected = if e == 0 {
                    (1.0 + m as f64).ln() - 2f64.ln()
                } else {
                    (1.0 + m as f64).ln() - (m as f64).ln() - 2f64.ln()
                };
                assert!((ratio - expected).abs() < 1e-12);
            }
            assert!((total_general - 1.0).abs() < 1e-12);
            assert!((total_simple - 1.0).abs() < 1e-12);
        }
    }
}
