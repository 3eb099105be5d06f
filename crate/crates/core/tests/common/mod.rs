//! Brute-force posterior for tiny graphs with one closure generation,
//! written directly from the model definition and sharing no code with
//! the library.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

pub const MAX_MULTIPLICITY: u32 = 5;

pub fn lnf(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn lnc(n: u64, k: u64) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        lnf(n) - lnf(k) - lnf(n - k)
    }
}

/// Partitions of m into at most n parts by direct enumeration of
/// non-increasing sequences.
pub fn q(m: u64, n: u64) -> u64 {
    fn count(m: u64, parts_left: u64, max_part: u64) -> u64 {
        if m == 0 {
            return 1;
        }
        if parts_left == 0 {
            return 0;
        }
        (1..=max_part.min(m)).map(|p| count(m - p, parts_left - 1, p)).sum()
    }
    count(m, n, m)
}

/// All set partitions of n elements as canonical label vectors.
pub fn set_partitions(n: usize) -> Vec<Vec<u32>> {
    fn grow(prefix: &mut Vec<u32>, n: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// ln P(A'|b) for a loopless multigraph given as (i, j, multiplicity).
pub fn ln_sbm(n: usize, edges: &[(u32, u32, u32)], labels: &[u32]) -> f64 {
    let groups = labels.iter().copied().collect::<BTreeSet<_>>().len();
    let mut ers = vec![vec![0u64; groups]; groups];
    let mut k = vec![0u64; n];
    let mut total = 0u64;
    let mut ln_aij = 0.0;
    for &(i, j, m) in edges {
        let (r, s) = (labels[i as usize] as usize, labels[j as usize] as usize);
        let m = m as u64;
        ers[r][s] += m;
        ers[s][r] += m;
        k[i as usize] += m;
        k[j as usize] += m;
        total += m;
        ln_aij += lnf(m);
    }
    let mut first = -ln_aij;
    for r in 0..groups {
        for s in r + 1..groups {
            first += lnf(ers[r][s]);
        }
        // e_rr!! with e_rr even: 2^(e_rr/2) (e_rr/2)!
        let half = ers[r][r] / 2;
        first += half as f64 * 2f64.ln() + lnf(half);
    }
    first += k.iter().map(|&x| lnf(x)).sum::<f64>();
    let mut second = 0.0;
    for r in 0..groups {
        let er: u64 = ers[r].iter().sum();
        first -= lnf(er);
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] as usize == r).collect();
        let mut eta = std::collections::BTreeMap::new();
        for &i in &members {
            *eta.entry(k[i]).or_insert(0u64) += 1;
        }
        second += eta.values().map(|&c| lnf(c)).sum::<f64>();
        second -= lnf(members.len() as u64);
        second -= (q(er, members.len() as u64) as f64).ln();
    }
    let b = groups as u64;
    let third = -lnc(b * (b + 1) / 2 + total - 1, total);
    first + second + third
}

pub fn ln_prior(labels: &[u32]) -> f64 {
    let n = labels.len() as u64;
    let groups = labels.iter().copied().collect::<BTreeSet<_>>();
    let sizes: Vec<u64> = groups.iter().map(|&r| labels.iter().filter(|&&x| x == r).count() as u64).collect();
    sizes.iter().map(|&s| lnf(s)).sum::<f64>() - lnf(n) - lnc(n - 1, sizes.len() as u64 - 1) - (n as f64).ln()
}

/// A tiny fixture: nodes, required edges, optional pairs.
pub struct Fixture {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    pub optional: Vec<(u32, u32)>,
}

impl Fixture {
    pub fn observed(n: usize, edges: &[(u32, u32)]) -> Self {
        Fixture { n, edges: edges.to_vec(), optional: Vec::new() }
    }

    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.edges.iter().chain(&self.optional).copied().collect()
    }
}

/// Per-pair state in the one-generation model.
#[derive(Clone, Debug)]
enum PairState {
    Absent,
    Seminal(u32),
    Closed(Vec<u32>),
}

/// Joint log probability of a one-generation configuration.
fn ln_joint(fx: &Fixture, pairs: &[(u32, u32)], states: &[PairState], labels: &[u32], with_layers: bool) -> f64 {
    let n = fx.n;
    let mut adj = vec![vec![false; n]; n];
    let mut multi = Vec::new();
    for (p, s) in pairs.iter().zip(states) {
        if let PairState::Seminal(m) = s {
            adj[p.0 as usize][p.1 as usize] = true;
            adj[p.1 as usize][p.0 as usize] = true;
            multi.push((p.0, p.1, *m));
        }
    }
    let mut lp = ln_sbm(n, &multi, labels) + ln_prior(labels);
    if !with_layers {
        return lp;
    }
    let mut open = vec![0u64; n];
    for u in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                if i != u && j != u && adj[u][i] && adj[u][j] && !adj[i][j] {
                    open[u] += 1;
                }
            }
        }
    }
    let mut closed = vec![0u64; n];
    for (p, s) in pairs.iter().zip(states) {
        if let PairState::Closed(egos) = s {
            for &u in egos {
                let u = u as usize;
                if !(adj[u][p.0 as usize] && adj[u][p.1 as usize]) {
                    return f64::NEG_INFINITY;
                }
                closed[u] += 1;
            }
        }
    }
    let n_open = open.iter().filter(|&&m| m > 0).count() as u64;
    let n_active = closed.iter().filter(|&&e| e > 0).count() as u64;
    for u in 0..n {
        if closed[u] > 0 {
            lp += -lnc(open[u], closed[u]) - (open[u] as f64).ln();
        }
    }
    lp - lnc(n_open, n_active) - (1.0 + n_open as f64).ln()
}

fn pair_options(fx: &Fixture, p: (u32, u32), optional: bool, with_layers: bool) -> Vec<PairState> {
    let mut out = Vec::new();
    if optional {
        out.push(PairState::Absent);
    }
    for m in 1..=MAX_MULTIPLICITY {
        out.push(PairState::Seminal(m));
    }
    if with_layers {
        let pairs = fx.pairs();
        let adjacent = |a: u32, b: u32| pairs.contains(&(a.min(b), a.max(b)));
        let cands: Vec<u32> =
            (0..fx.n as u32).filter(|&u| u != p.0 && u != p.1 && adjacent(u, p.0) && adjacent(u, p.1)).collect();
        for mask in 1u32..(1 << cands.len()) {
            let egos = (0..cands.len()).filter(|&b| mask >> b & 1 == 1).map(|b| cands[b]).collect();
            out.push(PairState::Closed(egos));
        }
    }
    out
}

/// Exact marginals by enumeration.
pub struct OracleResult {
    /// P(pair is seminal) per pair in `Fixture::pairs` order.
    pub seminal: Vec<f64>,
    /// P(pair is present) per pair.
    pub present: Vec<f64>,
    /// Posterior over canonical partitions.
    pub partitions: Vec<(Vec<u32>, f64)>,
    /// ln of the total mass.
    pub ln_evidence: f64,
}

/// Enumerates every (A', g, b) with multiplicity at most
/// [`MAX_MULTIPLICITY`]; `with_layers = false` gives the plain SBM.
pub fn enumerate(fx: &Fixture, with_layers: bool) -> OracleResult {
    let pairs = fx.pairs();
    let options: Vec<Vec<PairState>> =
        pairs.iter().enumerate().map(|(k, &p)| pair_options(fx, p, k >= fx.edges.len(), with_layers)).collect();
    let partitions = set_partitions(fx.n);
    let mut log_terms: Vec<(usize, Vec<u8>, usize, f64)> = Vec::new();
    let mut idx = vec![0usize; pairs.len()];
    let mut states: Vec<PairState> = Vec::with_capacity(pairs.len());
    loop {
        states.clear();
        states.extend(idx.iter().zip(&options).map(|(&i, o)| o[i].clone()));
        for (pi, labels) in partitions.iter().enumerate() {
            let lp = ln_joint(fx, &pairs, &states, labels, with_layers);
            if lp.is_finite() {
                let flags = states
                    .iter()
                    .map(|s| match s {
                        PairState::Absent => 0u8,
                        PairState::Seminal(_) => 3,
                        PairState::Closed(_) => 1,
                    })
                    .collect();
                log_terms.push((pi, flags, 0, lp));
            }
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return finish(&pairs, &partitions, log_terms);
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn finish(pairs: &[(u32, u32)], partitions: &[Vec<u32>], terms: Vec<(usize, Vec<u8>, usize, f64)>) -> OracleResult {
    let max = terms.iter().map(|t| t.3).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut seminal = vec![0.0; pairs.len()];
    let mut present = vec![0.0; pairs.len()];
    let mut part = vec![0.0; partitions.len()];
    for (pi, flags, _, lp) in &terms {
        let w = (lp - max).exp();
        z += w;
        part[*pi] += w;
        for (k, &f) in flags.iter().enumerate() {
            if f == 3 {
                seminal[k] += w;
            }
            if f != 0 {
                present[k] += w;
            }
        }
    }
    OracleResult {
        seminal: seminal.iter().map(|x| x / z).collect(),
        present: present.iter().map(|x| x / z).collect(),
        partitions: partitions.iter().cloned().zip(part.iter().map(|x| x / z)).collect(),
        ln_evidence: max + z.ln(),
    }
}

pub fn triangle() -> Fixture {
    Fixture::observed(3, &[(0, 1), (1, 2), (0, 2)])
}

/// Triangle 0-1-2 with pendant 2-3.
pub fn paw() -> Fixture {
    Fixture::observed(4, &[(0, 1), (1, 2), (0, 2), (2, 3)])
}

/// Triangle 0-1-2 with pendants 0-3 and 1-4.
pub fn bull() -> Fixture {
    Fixture::observed(5, &[(0, 1), (1, 2), (0, 2), (0, 3), (1, 4)])
}

/// K4 without the pair (2, 3).
pub fn diamond() -> Fixture {
    Fixture::observed(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])
}
