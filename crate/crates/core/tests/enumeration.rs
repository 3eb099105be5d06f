mod common;

use std::sync::Arc;

use common::{enumerate, Fixture};
use sbmtc::sampler::{Chain, ChainCollectors, ChainConfig, MoveMix};
use sbmtc::state::Support;
use sbmtc::SimpleGraph;

fn graph(fx: &Fixture) -> SimpleGraph {
    SimpleGraph::from_edges(fx.n, fx.edges.iter().copied()).unwrap()
}

fn chain_marginals(fx: &Fixture, layers: u8, sweeps: u64, seed: u64) -> (Vec<f64>, ChainCollectors) {
    let g = graph(fx);
    let config = ChainConfig {
        sweeps,
        burn_in: 1000,
        thin: 1,
        layers,
        seed,
        max_snapshots: 0,
        max_multiplicity: Some(common::MAX_MULTIPLICITY),
        ..Default::default()
    };
    let mut chain = Chain::new(Arc::new(Support::observed(&g)), config, None, None).unwrap();
    chain.run().unwrap();
    chain.check().unwrap();
    let c = chain.into_collectors();
    // the support orders pairs lexicographically; map back to fixture order
    let pi = c.seminal_marginals();
    let out = fx.edges.iter().map(|&(i, j)| pi[g.edge_id(i, j).unwrap() as usize]).collect();
    (out, c)
}

#[test]
fn triangle_seminal_marginals_match_enumeration() {
    let fx = common::triangle();
    let exact = enumerate(&fx, true);
    let (pi, c) = chain_marginals(&fx, 1, 200_000, 7);
    for (a, b) in pi.iter().zip(&exact.seminal) {
        assert!((a - b).abs() < 0.02, "chain {a} exact {b}");
    }
    let t = c.stats.total();
    assert_eq!(t.accepted + t.rejected, t.proposed);
}

#[test]
fn paw_seminal_marginals_match_enumeration() {
    let fx = common::paw();
    let exact = enumerate(&fx, true);
    let (pi, _) = chain_marginals(&fx, 1, 200_000, 8);
    for (a, b) in pi.iter().zip(&exact.seminal) {
        assert!((a - b).abs() < 0.02, "chain {a} exact {b}");
    }
    // the pendant edge has no possible ego
    assert_eq!(pi[3], 1.0);
}

#[test]
fn plain_sbm_partition_posterior_matches_enumeration() {
    // partition moves only, A' pinned to G: the chain samples P(b | A')
    let fx = common::bull();
    let g = graph(&fx);
    let mut exact: Vec<(Vec<u32>, f64)> = common::set_partitions(fx.n)
        .into_iter()
        .map(|labels| {
            let edges: Vec<_> = fx.edges.iter().map(|&(i, j)| (i, j, 1)).collect();
            let lp = common::ln_sbm(fx.n, &edges, &labels) + common::ln_prior(&labels);
            (labels, lp)
        })
        .collect();
    let max = exact.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = exact.iter().map(|x| (x.1 - max).exp()).sum();
    for x in exact.iter_mut() {
        x.1 = (x.1 - max).exp() / z;
    }
    assert_eq!(exact.len(), 52);
    let mix = MoveMix { owner_swap: 0.0, multiplicity: 0.0, partition: 1.0, toggle: 0.0 };
    for (rate, seed) in [(0.0, 1), (0.5, 2)] {
        let config = ChainConfig {
            sweeps: 150_000,
            burn_in: 1000,
            thin: 1,
            layers: 0,
            seed,
            move_mix: Some(mix),
            merge_split_rate: Some(rate),
            max_snapshots: 0,
            ..Default::default()
        };
        let mut chain = Chain::new(Arc::new(Support::observed(&g)), config, None, None).unwrap();
        chain.run().unwrap();
        let c = chain.into_collectors();
        let n = c.samples as f64;
        let tv: f64 = exact
            .iter()
            .map(|(labels, p)| {
                let f = c.partition_counts.get(labels).copied().unwrap_or(0) as f64 / n;
                (f - p).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "merge-split rate {rate}: total variation {tv}");
    }
}

#[test]
fn reconstruction_presence_matches_enumeration() {
    // paw with the pair (0, 3) unobserved: measurement terms vanish
    let fx = Fixture { n: 4, edges: vec![(0, 1), (1, 2), (0, 2), (2, 3)], optional: vec![(0, 3)] };
    let exact = enumerate(&fx, true);
    let support = Arc::new(Support::with_optional(fx.n, &fx.edges, &fx.optional).unwrap());
    let meas = sbmtc::state::MeasurementState::new(
        (0..support.graph().edge_count() as u32).map(|e| (!support.is_required(e)).then_some((0, 0))).collect(),
    );
    let config = ChainConfig {
        sweeps: 200_000,
        burn_in: 1000,
        thin: 1,
        layers: 1,
        seed: 4,
        max_multiplicity: Some(common::MAX_MULTIPLICITY),
        ..Default::default()
    };
    let mut chain = Chain::new(Arc::clone(&support), config, None, Some(meas)).unwrap();
    chain.run().unwrap();
    chain.check().unwrap();
    let c = chain.into_collectors();
    let e = support.graph().edge_id(0, 3).unwrap() as usize;
    let p = c.presence_marginals()[e];
    assert!((p - exact.present[4]).abs() < 0.02, "chain {p} exact {}", exact.present[4]);
    let s = c.seminal_marginals()[e];
    assert!((s - exact.seminal[4]).abs() < 0.02, "chain {s} exact {}", exact.seminal[4]);
}
