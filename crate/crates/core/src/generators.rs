//! Forward samplers for synthetic networks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::closure::{triad_level, NEVER};
use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::partition::Partition;
use crate::sbm::{pp_block_matrix, sample_stub_pairs, PPSpec};

/// Planted-partition graph with its ground-truth partition. Stubs of each
/// group are spread uniformly over its members and matched
/// microcanonically; self-loops are dropped and multi-edges collapsed.
pub fn sample_pp_graph<R: Rng + ?Sized>(spec: &PPSpec, rng: &mut R) -> Result<(SimpleGraph, Partition)> {
    let blocks = pp_block_matrix(spec)?;
    let b = spec.planted_partition();
    let size = (spec.nodes / spec.groups) as usize;
    let mut degrees = vec![0u64; spec.nodes as usize];
    for r in 0..spec.groups {
        let base = r as usize * size;
        for _ in 0..blocks.group_degree(r) {
            degrees[base + rng.gen_range(0..size)] += 1;
        }
    }
    let pairs = sample_stub_pairs(&degrees, &blocks, &b, rng)?;
    let g = SimpleGraph::from_edges(spec.nodes as usize, pairs.into_iter().filter(|(i, j)| i != j))?;
    Ok((g, b))
}

/// How the edge count of a geometric-degree substrate is controlled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EdgeControl {
    /// Degrees drawn freely; the edge count fluctuates around N<k>/2.
    Expected,
    /// Redraw until the simple graph has exactly this many edges.
    Exact { edges: usize, max_attempts: usize },
}

/// Configuration-model graph with i.i.d. geometric degrees on {0, 1, ...}
/// with success probability 1 / (<k> + 1). An odd degree sum is fixed by
/// one extra stub on a random node; self-loops and multi-edges are erased.
pub fn sample_geometric_degree_graph<R: Rng + ?Sized>(
    n: usize,
    mean_degree: f64,
    control: EdgeControl,
    rng: &mut R,
) -> Result<SimpleGraph> {
    if !mean_degree.is_finite() || mean_degree < 0.0 {
        return Err(Error::Argument(format!("mean degree {mean_degree} must be non-negative")));
    }
    match control {
        EdgeControl::Expected => Ok(geometric_once(n, mean_degree, rng)),
        EdgeControl::Exact { edges, max_attempts } => {
            for _ in 0..max_attempts {
                let g = geometric_once(n, mean_degree, rng);
                if g.edge_count() == edges {
                    return Ok(g);
                }
            }
            Err(Error::Infeasible(format!("no graph with exactly {edges} edges in {max_attempts} attempts")))
        }
    }
}

fn geometric_once<R: Rng + ?Sized>(n: usize, mean_degree: f64, rng: &mut R) -> SimpleGraph {
    if n == 0 || mean_degree == 0.0 {
        return SimpleGraph::empty(n);
    }
    let geo = Geometric::new(1.0 / (mean_degree + 1.0)).expect("valid probability");
    let mut stubs = Vec::new();
    for v in 0..n as u32 {
        let k = geo.sample(rng);
        stubs.extend(std::iter::repeat(v).take(k as usize));
    }
    if stubs.len() % 2 == 1 {
        stubs.push(rng.gen_range(0..n as u32));
    }
    stubs.shuffle(rng);
    let pairs = stubs.chunks_exact(2).map(|p| (p[0], p[1])).filter(|(i, j)| i != j);
    SimpleGraph::from_edges(n, pairs).expect("self-loops removed")
}

/// Closure probability per ego.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClosureProbability {
    Uniform(f64),
    PerNode(Vec<f64>),
    /// Indexed by generation - 1, then node.
    PerGeneration(Vec<Vec<f64>>),
}

impl ClosureProbability {
    fn at(&self, u: u32, l: u8) -> f64 {
        match self {
            ClosureProbability::Uniform(p) => *p,
            ClosureProbability::PerNode(v) => v[u as usize],
            ClosureProbability::PerGeneration(v) => v[l as usize - 1][u as usize],
        }
    }

    fn validate(&self, n: usize, layers: u8) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        let row = |v: &Vec<f64>| v.len() == n && v.iter().all(|&p| ok(p));
        match self {
            ClosureProbability::Uniform(p) if ok(*p) => Ok(()),
            ClosureProbability::PerNode(v) if row(v) => Ok(()),
            ClosureProbability::PerGeneration(v) if v.len() >= layers as usize && v.iter().all(row) => Ok(()),
            _ => Err(Error::Argument("closure probabilities must lie in [0, 1], one per node and generation".into())),
        }
    }
}

/// How one edge of a generated graph came to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeOrigin {
    pub i: u32,
    pub j: u32,
    /// 0 for substrate edges.
    pub generation: u8,
    /// First ego to close the pair; `None` for substrate edges.
    pub ego: Option<u32>,
    /// Number of egos that closed the pair in its generation.
    pub owners: u32,
}

impl EdgeOrigin {
    pub fn is_seminal(&self) -> bool {
        self.generation == 0
    }
}

/// Runs `layers` generations of triadic closure over the substrate `a`.
///
/// In generation `l` each ego, taken in random order, closes each of its
/// open triads admissible at `l` with probability `p_u`; admissibility is
/// judged on the graph as it stood at the start of the generation.
/// Returns the final graph and, in its edge order, the origin of every
/// edge.
pub fn apply_triadic_closure<R: Rng + ?Sized>(
    a: &SimpleGraph,
    p: &ClosureProbability,
    layers: u8,
    rng: &mut R,
) -> Result<(SimpleGraph, Vec<EdgeOrigin>)> {
    let n = a.node_count();
    p.validate(n, layers)?;
    if layers > crate::closure::MAX_LAYERS {
        return Err(Error::Argument(format!("at most {} generations", crate::closure::MAX_LAYERS)));
    }
    let key = |i: u32, j: u32| if i < j { (i, j) } else { (j, i) };
    let mut origin: FxHashMap<(u32, u32), EdgeOrigin> =
        a.edges().iter().map(|&(i, j)| ((i, j), EdgeOrigin { i, j, generation: 0, ego: None, owners: 0 })).collect();
    let mut adj: Vec<Vec<u32>> = (0..n as u32).map(|v| a.neighbors(v).collect()).collect();
    let mut egos: Vec<u32> = (0..n as u32).collect();
    for l in 1..=layers {
        let snapshot = adj.clone();
        let created =
            |x: u32, y: u32, o: &FxHashMap<(u32, u32), EdgeOrigin>| o.get(&key(x, y)).map_or(NEVER, |e| e.generation);
        let before = origin.clone();
        egos.shuffle(rng);
        let mut added = 0usize;
        for &u in &egos {
            let pu = p.at(u, l);
            if pu == 0.0 {
                continue;
            }
            let nb = &snapshot[u as usize];
            for x in 0..nb.len() {
                for y in x + 1..nb.len() {
                    let (i, j) = (nb[x], nb[y]);
                    let lev =
                        triad_level(created(u, i, &before), created(u, j, &before), created(i, j, &before), layers);
                    if lev != l || !rng.gen_bool(pu) {
                        continue;
                    }
                    let (i, j) = key(i, j);
                    let entry = origin.entry((i, j)).or_insert_with(|| {
                        added += 1;
                        EdgeOrigin { i, j, generation: l, ego: Some(u), owners: 0 }
                    });
                    entry.owners += 1;
                    if entry.owners == 1 {
                        adj[i as usize].push(j);
                        adj[j as usize].push(i);
                    }
                }
            }
        }
        if added == 0 {
            break;
        }
    }
    let g = SimpleGraph::from_edges(n, origin.keys().copied())?;
    let origins = g.edges().iter().map(|e| origin[e]).collect();
    Ok((g, origins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pp_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = PPSpec::from_mean_degree(2, 100, 4.0, 1.0);
        let (g, b) = sample_pp_graph(&spec, &mut rng).unwrap();
        assert!(g.edges().iter().all(|&(i, j)| b.label(i) == b.label(j)));
        assert_eq!(b.group_sizes(), vec![50, 50]);
    }

    #[test]
    fn pp_within_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = PPSpec::from_mean_degree(4, 1000, 5.0, 0.9);
        for _ in 0..20 {
            let (g, b) = sample_pp_graph(&spec, &mut rng).unwrap();
            let within = g.edges().iter().filter(|&&(i, j)| b.label(i) == b.label(j)).count();
            let f = within as f64 / g.edge_count() as f64;
            assert!((f - 0.9).abs() < 0.03, "{f}");
        }
    }

    #[test]
    fn geometric_mean_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_geometric_degree_graph(10_000, 3.0, EdgeControl::Expected, &mut rng).unwrap();
        let mean = 2.0 * g.edge_count() as f64 / 1e4;
        assert!((mean - 3.0).abs() < 0.15, "{mean}");
        let empty = sample_geometric_degree_graph(10, 0.0, EdgeControl::Expected, &mut rng).unwrap();
        assert_eq!(empty.edge_count(), 0);
        let exact =
            sample_geometric_degree_graph(100, 1.9, EdgeControl::Exact { edges: 94, max_attempts: 10_000 }, &mut rng)
                .unwrap();
        assert_eq!(exact.edge_count(), 94);
    }

    #[test]
    fn closure_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let star = SimpleGraph::parse_str("0 1\n0 2\n0 3\n0 4").unwrap();
        let (g, o) = apply_triadic_closure(&star, &ClosureProbability::Uniform(0.0), 2, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert!(o.iter().all(|e| e.is_seminal()));
        let (g, o) = apply_triadic_closure(&star, &ClosureProbability::Uniform(1.0), 1, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 10);
        assert_eq!(o.iter().filter(|e| e.generation == 1 && e.ego == Some(0)).count(), 6);
    }

    #[test]
    fn closure_provenance_replays() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sample_geometric_degree_graph(200, 2.5, EdgeControl::Expected, &mut rng).unwrap();
        let (g, origins) = apply_triadic_closure(&a, &ClosureProbability::Uniform(0.5), 3, &mut rng).unwrap();
        let gen = |i: u32, j: u32| g.edge_id(i, j).map(|e| origins[e as usize].generation);
        for o in &origins {
            assert!(g.has_edge(o.i, o.j));
            if o.is_seminal() {
                assert!(a.has_edge(o.i, o.j));
                continue;
            }
            let u = o.ego.unwrap();
            let (gi, gj) = (gen(u, o.i).unwrap(), gen(u, o.j).unwrap());
            assert!(gi < o.generation && gj < o.generation);
            assert_eq!(gi.max(gj) + 1, o.generation);
        }
        for &(i, j) in a.edges() {
            assert!(g.has_edge(i, j));
        }
    }
}
