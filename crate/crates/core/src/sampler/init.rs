//! Starting partitions by greedy agglomeration.

use rand::seq::SliceRandom;
use rand::Rng;
use rustc_hash::FxHashMap;

use crate::closure::Owner;
use crate::partition::Partition;
use crate::state::DecompositionState;

/// Groups shrink by about this factor per level.
const SHRINK: f64 = 1.3;
/// Merge targets tried per group and level.
const CANDIDATES: usize = 8;
/// Independent agglomerations; the best is kept.
const RESTARTS: usize = 4;
/// Zero-temperature node sweeps after each level.
const REFINE_SWEEPS: usize = 10;
/// Passes over the seminal pairs in `release_spokes`.
const RELEASE_PASSES: usize = 3;

/// Greedy agglomerative fit of the partition of `st` with its seminal
/// multigraph held fixed. Starts from singletons, repeatedly merges each
/// group into the best of a few neighboring groups, refines with
/// improving node moves, and returns the partition with the highest
/// joint probability seen over all levels and a few restarts. `st` is
/// left in an unspecified partition.
pub fn agglomerate<R: Rng + ?Sized>(st: &mut DecompositionState, rng: &mut R) -> Partition {
    if st.node_count() < 2 {
        return st.blocks().partition();
    }
    let mut best = agglomerate_once(st, rng);
    for _ in 1..RESTARTS {
        let next = agglomerate_once(st, rng);
        if next.0 > best.0 {
            best = next;
        }
    }
    best.1
}

fn agglomerate_once<R: Rng + ?Sized>(st: &mut DecompositionState, rng: &mut R) -> (f64, Partition) {
    let n = st.node_count();
    let mut members: FxHashMap<u32, Vec<u32>> = FxHashMap::default();
    for v in 0..n as u32 {
        let r = st.blocks().label(v);
        if st.blocks().group_size(r) > 1 {
            let t = st.blocks().free_label().expect("a free label exists when a group has two members");
            let d = st.node_move_delta(v, t);
            st.apply_node_move(v, t, d);
        }
        members.insert(st.blocks().label(v), vec![v]);
    }
    let adj: Vec<Vec<u32>> = (0..n as u32).map(|v| st.graph().neighbors(v).collect()).collect();
    let mut best = (st.log_prob(), st.blocks().partition());
    while st.blocks().num_groups() > 1 {
        let groups = st.blocks().num_groups();
        let target = ((groups as f64 / SHRINK).floor() as usize).max(1);
        let mut proposals = Vec::with_capacity(groups);
        let mut active = st.blocks().active_groups().to_vec();
        active.sort_unstable();
        for &r in &active {
            let mut top: Option<(f64, u32)> = None;
            for _ in 0..CANDIDATES {
                let own = &members[&r];
                let v = own[rng.gen_range(0..own.len())];
                let s = match adj[v as usize].choose(rng) {
                    Some(&w) if st.blocks().label(w) != r => st.blocks().label(w),
                    _ => active[rng.gen_range(0..groups)],
                };
                if s == r {
                    continue;
                }
                let d = merge_delta(st, &members[&r], r, s);
                if top.map_or(true, |(x, _)| d > x) {
                    top = Some((d, s));
                }
            }
            if let Some((d, s)) = top {
                proposals.push((d, r, s));
            }
        }
        proposals.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut touched = FxHashMap::default();
        let mut remaining = groups;
        for (_, r, s) in proposals {
            if remaining <= target {
                break;
            }
            if touched.contains_key(&r) || touched.contains_key(&s) {
                continue;
            }
            touched.insert(r, ());
            touched.insert(s, ());
            let moved = members.remove(&r).expect("active group");
            for &v in &moved {
                let d = st.node_move_delta(v, s);
                st.apply_node_move(v, s, d);
            }
            members.get_mut(&s).expect("active group").extend(moved);
            remaining -= 1;
        }
        if remaining == groups {
            break;
        }
        refine(st, &adj, &mut members, rng);
        if st.log_prob() > best.0 {
            best = (st.log_prob(), st.blocks().partition());
        }
    }
    best
}

/// Change in log probability from moving all of group `r` into `s`;
/// leaves the state as it was.
fn merge_delta(st: &mut DecompositionState, nodes: &[u32], r: u32, s: u32) -> f64 {
    let saved = st.log_prob();
    let mut total = 0.0;
    for &v in nodes {
        let d = st.node_move_delta(v, s);
        st.apply_node_move(v, s, d);
        total += d;
    }
    for &v in nodes {
        let d = st.node_move_delta(v, r);
        st.apply_node_move(v, r, d);
    }
    st.set_log_prob(saved);
    total
}

fn refine<R: Rng + ?Sized>(
    st: &mut DecompositionState,
    adj: &[Vec<u32>],
    members: &mut FxHashMap<u32, Vec<u32>>,
    rng: &mut R,
) {
    let n = st.node_count() as u32;
    let mut order: Vec<u32> = (0..n).collect();
    for _ in 0..REFINE_SWEEPS {
        order.shuffle(rng);
        let mut changed = false;
        for &v in &order {
            let r = st.blocks().label(v);
            if st.blocks().group_size(r) == 1 {
                continue;
            }
            let mut top = (0.0, r);
            for &w in &adj[v as usize] {
                let s = st.blocks().label(w);
                if s == r || s == top.1 {
                    continue;
                }
                let d = st.node_move_delta(v, s);
                if d > top.0 {
                    top = (d, s);
                }
            }
            if top.1 != r {
                st.apply_node_move(v, top.1, top.0);
                let own = members.get_mut(&r).expect("active group");
                let at = own.iter().position(|&x| x == v).expect("member");
                own.swap_remove(at);
                members.get_mut(&top.1).expect("active group").push(v);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Greedy repair of the decomposition with the partition held fixed.
///
/// A seminal pair that is really a closure is often held in place by
/// closures that use it as a spoke, which no single-pair move can undo.
/// Releasing a pair re-homes every such dependent closure to its best
/// other ego (or makes it seminal) and turns the pair into a closure by
/// its best ego. Pinning makes a closed pair seminal and then releases
/// the seminal pairs it could close. Either is kept only if the joint
/// probability went up. Returns the number of changes kept.
pub fn release_spokes<R: Rng + ?Sized>(st: &mut DecompositionState, rng: &mut R) -> usize {
    let mut changed = 0;
    let mut log = Vec::new();
    for _ in 0..RELEASE_PASSES {
        let mut order: Vec<u32> = st.present_edges().to_vec();
        order.sort_unstable();
        order.shuffle(rng);
        let before = changed;
        for e in order {
            log.clear();
            let kept = if st.seminal(e) > 0 {
                st.owners(e).is_empty() && release(st, e, 0.0, &mut log).is_some()
            } else {
                pin(st, e, &mut log)
            };
            changed += kept as usize;
        }
        if changed == before {
            break;
        }
    }
    changed
}

type Undo = Vec<(u32, u32, Vec<Owner>)>;

fn set_edge(st: &mut DecompositionState, f: u32, seminal: u32, owners: &[Owner], log: &mut Undo) -> f64 {
    log.push((f, st.seminal(f), st.owners(f).to_vec()));
    let d = st.evaluate_edge(f, seminal, owners);
    assert!(d.is_finite(), "only valid changes are applied");
    st.commit();
    d
}

fn rollback(st: &mut DecompositionState, log: &mut Undo, mark: usize) {
    while log.len() > mark {
        let (f, seminal, owners) = log.pop().expect("nonempty");
        let d = st.evaluate_edge(f, seminal, &owners);
        assert!(d.is_finite(), "undo restores a valid state");
        st.commit();
    }
}

/// Turns seminal pair `e` into a closure; keeps the change and returns
/// its gain when that exceeds `floor`.
fn release(st: &mut DecompositionState, e: u32, floor: f64, log: &mut Undo) -> Option<f64> {
    let mark = log.len();
    let support = std::sync::Arc::clone(st.support());
    let (i, j) = support.graph().edges()[e as usize];
    let mut total = 0.0;
    let mut egos = smallvec::SmallVec::<[u32; 16]>::new();
    for t in support.triangles(e) {
        // ego i closes (w, j) through spokes (i, w) and e, and likewise for j
        for (ego, f) in [(i, t.e_wj), (j, t.e_wi)] {
            let Some(at) = st.owners(f).iter().position(|o| o.ego == ego) else { continue };
            let seminal = st.seminal(f);
            let level = st.owners(f)[at].level;
            let mut rest = st.owners(f).to_vec();
            rest.remove(at);
            let mut best: Option<(f64, u32, Vec<Owner>)> = None;
            let mut consider = |st: &mut DecompositionState, s: u32, owners: Vec<Owner>| {
                let d = st.evaluate_edge(f, s, &owners);
                if d.is_finite() && best.as_ref().map_or(true, |b| d > b.0) {
                    best = Some((d, s, owners));
                }
            };
            consider(st, seminal.max(rest.is_empty() as u32), rest.clone());
            st.relevant_egos(f, level, &mut egos);
            for &w in egos.iter().filter(|&&w| w != ego && rest.iter().all(|o| o.ego != w || o.level != level)) {
                let mut owners = rest.clone();
                owners.push(Owner { ego: w, level });
                consider(st, seminal, owners);
            }
            let Some((_, s, owners)) = best else {
                rollback(st, log, mark);
                return None;
            };
            total += set_edge(st, f, s, &owners, log);
        }
    }
    let mut best: Option<(f64, Owner)> = None;
    for level in 1..=st.layers() {
        st.relevant_egos(e, level, &mut egos);
        for &w in egos.iter() {
            let o = Owner { ego: w, level };
            let d = st.evaluate_edge(e, 0, &[o]);
            if d.is_finite() && best.map_or(true, |b| d > b.0) {
                best = Some((d, o));
            }
        }
    }
    match best {
        Some((d, o)) if total + d > floor + 1e-9 => Some(total + set_edge(st, e, 0, &[o], log)),
        _ => {
            rollback(st, log, mark);
            None
        }
    }
}

/// Makes closed pair `e` seminal and releases the seminal pairs it then
/// admits as closures; keeps all of it if the total gain is positive.
fn pin(st: &mut DecompositionState, e: u32, log: &mut Undo) -> bool {
    let d = st.evaluate_edge(e, 1, &[]);
    if !d.is_finite() {
        return false;
    }
    let mut total = set_edge(st, e, 1, &[], log);
    let support = std::sync::Arc::clone(st.support());
    for t in support.triangles(e) {
        for f in [t.e_wi, t.e_wj] {
            if st.seminal(f) > 0 && st.owners(f).is_empty() {
                if let Some(g) = release(st, f, 0.0, log) {
                    total += g;
                }
            }
        }
    }
    if total > 1e-9 {
        return true;
    }
    rollback(st, log, 0);
    false
}
