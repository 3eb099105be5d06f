//! Graph containers, edge-list parsing and elementary statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub(crate) fn pair_key(i: u32, j: u32) -> u64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    ((a as u64) << 32) | b as u64
}

/// An immutable simple undirected graph.
///
/// Edges are stored once with `i < j`, sorted lexicographically; the
/// position in that order is the edge id used throughout the crate.
#[derive(Clone, Debug)]
pub struct SimpleGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    // (neighbor, edge id), sorted by neighbor
    adj: Vec<(u32, u32)>,
    index: FxHashMap<u64, u32>,
}

impl PartialEq for SimpleGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl Eq for SimpleGraph {}

impl SimpleGraph {
    /// Builds a graph from an edge iterator. Repeated pairs collapse.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut list = Vec::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::Argument(format!("self-loop at node {i}")));
            }
            if i as usize >= n || j as usize >= n {
                return Err(Error::Argument(format!("edge ({i},{j}) outside {n} nodes")));
            }
            list.push(if i < j { (i, j) } else { (j, i) });
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted(n, list))
    }

    fn from_sorted(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j) in &edges {
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &deg {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut adj = vec![(0u32, 0u32); 2 * edges.len()];
        let mut index = FxHashMap::default();
        index.reserve(edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            adj[fill[i as usize]] = (j, e as u32);
            fill[i as usize] += 1;
            adj[fill[j as usize]] = (i, e as u32);
            fill[j as usize] += 1;
            index.insert(pair_key(i, j), e as u32);
        }
        for v in 0..n {
            adj[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        SimpleGraph { n, edges, offsets, adj, index }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sorted(n, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(i, j)` with `i < j`, indexed by edge id.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, v: u32) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn degrees(&self) -> Vec<u64> {
        (0..self.n as u32).map(|v| self.degree(v) as u64).collect()
    }

    /// Sorted `(neighbor, edge id)` pairs of `v`.
    pub fn incident(&self, v: u32) -> &[(u32, u32)] {
        &self.adj[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.incident(v).iter().map(|&(u, _)| u)
    }

    pub fn has_edge(&self, i: u32, j: u32) -> bool {
        i != j && self.index.contains_key(&pair_key(i, j))
    }

    pub fn edge_id(&self, i: u32, j: u32) -> Option<u32> {
        if i == j {
            return None;
        }
        self.index.get(&pair_key(i, j)).copied()
    }

    /// Sorted common neighbors of `i` and `j`.
    pub fn common_neighbors(&self, i: u32, j: u32) -> Result<Vec<u32>> {
        if i == j {
            return Err(Error::Argument("common neighbors of a node with itself".into()));
        }
        if i as usize >= self.n || j as usize >= self.n {
            return Err(Error::Argument(format!("node out of range for {} nodes", self.n)));
        }
        let (small, other) = if self.degree(i) <= self.degree(j) { (i, j) } else { (j, i) };
        Ok(self.neighbors(small).filter(|&w| w != other && self.has_edge(w, other)).collect())
    }

    /// Canonical edge-list text: a node-count header, then `i j` lines.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 * self.edges.len() + 16);
        let _ = writeln!(out, "# nodes {}", self.n);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses whitespace-separated `i j` lines. Lines starting with `#`
    /// are comments, except `# nodes N` which fixes the node count.
    pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut max_id: Option<u32> = None;
        let mut edges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if let (Some(key), Some(val)) = (parts.next(), parts.next()) {
                    if key.trim_end_matches(':') == "nodes" {
                        declared =
                            Some(val.parse().map_err(|_| Error::Parse {
                                line: lineno,
                                message: format!("bad node count {val:?}"),
                            })?);
                    }
                }
                continue;
            }
            let mut parts = t.split_whitespace();
            let mut next_id = || -> Result<u32> {
                let tok = parts
                    .next()
                    .ok_or_else(|| Error::Parse { line: lineno, message: "expected two node ids".into() })?;
                tok.parse::<u32>()
                    .map_err(|_| Error::Parse { line: lineno, message: format!("malformed node id {tok:?}") })
            };
            let i = next_id()?;
            let j = next_id()?;
            if parts.next().is_some() {
                return Err(Error::Parse { line: lineno, message: "trailing tokens".into() });
            }
            if i == j {
                return Err(Error::SelfLoop { line: lineno });
            }
            max_id = Some(max_id.unwrap_or(0).max(i).max(j));
            edges.push((i, j));
        }
        let needed = max_id.map_or(0, |m| m as usize + 1);
        let n = match declared {
            Some(d) if d < needed => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("node count {d} smaller than largest id {}", needed - 1),
                })
            }
            Some(d) => d,
            None => needed,
        };
        Self::from_edges(n, edges)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::parse_edge_list(text.as_bytes())
    }

    /// Triangles through each edge: for edge `e = (i, j)`, entries
    /// `(w, e_wi, e_wj)` for every common neighbor `w`.
    pub fn edge_triangles(&self) -> EdgeTriangles {
        let mut offsets = Vec::with_capacity(self.edges.len() + 1);
        offsets.push(0u32);
        let mut entries = Vec::new();
        for &(i, j) in &self.edges {
            let (a, b) = (self.incident(i), self.incident(j));
            let (mut x, mut y) = (0, 0);
            while x < a.len() && y < b.len() {
                match a[x].0.cmp(&b[y].0) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        entries.push(Triangle { w: a[x].0, e_wi: a[x].1, e_wj: b[y].1 });
                        x += 1;
                        y += 1;
                    }
                }
            }
            offsets.push(entries.len() as u32);
        }
        EdgeTriangles { offsets, entries }
    }

    pub fn triangle_count(&self) -> u64 {
        let t = self.edge_triangles();
        t.entries.len() as u64 / 3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triangle {
    pub w: u32,
    pub e_wi: u32,
    pub e_wj: u32,
}

#[derive(Clone, Debug)]
pub struct EdgeTriangles {
    offsets: Vec<u32>,
    entries: Vec<Triangle>,
}

impl EdgeTriangles {
    #[inline]
    pub fn of(&self, e: u32) -> &[Triangle] {
        &self.entries[self.offsets[e as usize] as usize..self.offsets[e as usize + 1] as usize]
    }
}

/// Global clustering with its raw counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub value: f64,
    /// Closed ordered wedges, six per triangle.
    pub closed: u64,
    /// Ordered wedges, sum over nodes of k(k-1).
    pub wedges: u64,
}

impl Clustering {
    /// The ratio is the global transitivity, summed over all nodes.
    pub const CONVENTION: &'static str = "sum_ijk G_ij G_jk G_ki / sum_i k_i (k_i - 1)";

    /// False when the graph has no wedges and the value 0 is a convention.
    pub fn is_defined(&self) -> bool {
        self.wedges > 0
    }
}

pub fn global_clustering(g: &SimpleGraph) -> Clustering {
    let wedges: u64 = (0..g.node_count() as u32)
        .map(|v| {
            let k = g.degree(v) as u64;
            k * k.saturating_sub(1)
        })
        .sum();
    let closed = 6 * g.triangle_count();
    let value = if wedges == 0 { 0.0 } else { closed as f64 / wedges as f64 };
    Clustering { value, closed, wedges }
}

/// Undirected multigraph without self-loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiGraph {
    n: usize,
    mult: BTreeMap<(u32, u32), u64>,
}

impl MultiGraph {
    pub fn new(n: usize) -> Self {
        MultiGraph { n, mult: BTreeMap::new() }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: u32, j: u32, m: u64) -> Result<()> {
        if i == j {
            return Err(Error::Argument(format!("self-loop at node {i}")));
        }
        if i as usize >= self.n || j as usize >= self.n {
            return Err(Error::Argument(format!("edge ({i},{j}) outside {} nodes", self.n)));
        }
        if m > 0 {
            let key = if i < j { (i, j) } else { (j, i) };
            *self.mult.entry(key).or_insert(0) += m;
        }
        Ok(())
    }

    pub fn multiplicity(&self, i: u32, j: u32) -> u64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.mult.get(&key).copied().unwrap_or(0)
    }

    /// Entries `((i, j), A'_ij)` with `i < j`, all positive.
    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), u64)> + '_ {
        self.mult.iter().map(|(&k, &v)| (k, v))
    }

    pub fn total_edges(&self) -> u64 {
        self.mult.values().sum()
    }

    pub fn degrees(&self) -> Vec<u64> {
        let mut k = vec![0u64; self.n];
        for (&(i, j), &m) in &self.mult {
            k[i as usize] += m;
            k[j as usize] += m;
        }
        k
    }

    /// The simple graph of pairs with positive multiplicity.
    pub fn binarize(&self) -> SimpleGraph {
        SimpleGraph::from_sorted(self.n, self.mult.keys().copied().collect())
    }

    pub fn from_simple(g: &SimpleGraph) -> Self {
        MultiGraph { n: g.node_count(), mult: g.edges().iter().map(|&e| (e, 1)).collect() }
    }
}
