//! Metropolis-Hastings moves over the decomposition state.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::closure::Owner;
use crate::state::{DecompositionState, Owners};

/// Result of one move attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
    /// Rejected before evaluation: no relevant ego, negative counts, or a
    /// repeated membership.
    Aborted,
}

/// A proposed replacement of one pair's ownership.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProposal {
    pub edge: u32,
    pub seminal: u32,
    pub owners: Owners,
    /// ln q(reverse) - ln q(forward)
    pub log_hastings: f64,
}

/// Generation `level` with its owner; `ego` is `None` for the seminal slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub level: u8,
    pub ego: Option<u32>,
}

/// Uniform selection of an owner swap: pair, two distinct generations and
/// a relevant ego at each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SwapDraw {
    pub edge: u32,
    pub from: Slot,
    pub to: Slot,
}

fn pick_slot<R: Rng + ?Sized>(
    st: &DecompositionState,
    e: u32,
    level: u8,
    rng: &mut R,
    buf: &mut SmallVec<[u32; 16]>,
) -> Option<Slot> {
    if level == 0 {
        return Some(Slot { level, ego: None });
    }
    st.relevant_egos(e, level, buf);
    if buf.is_empty() {
        return None;
    }
    Some(Slot { level, ego: Some(buf[rng.gen_range(0..buf.len())]) })
}

/// Draws the selection part of an owner swap; `None` when a generation has
/// no relevant ego.
pub fn draw_owner_swap<R: Rng + ?Sized>(st: &DecompositionState, rng: &mut R) -> Option<SwapDraw> {
    let present = st.present_edges();
    let layers = st.layers();
    if present.is_empty() || layers == 0 {
        return None;
    }
    let e = present[rng.gen_range(0..present.len())];
    let l = rng.gen_range(0..=layers);
    let mut l2 = rng.gen_range(0..layers);
    if l2 >= l {
        l2 += 1;
    }
    let mut buf = SmallVec::new();
    let from = pick_slot(st, e, l, rng, &mut buf)?;
    let to = pick_slot(st, e, l2, rng, &mut buf)?;
    Some(SwapDraw { edge: e, from, to })
}

/// Configuration after moving one unit of ownership along `d`, or `None`
/// when it would go negative or repeat a membership.
pub fn apply_swap_draw(st: &DecompositionState, d: &SwapDraw) -> Option<EdgeProposal> {
    let mut seminal = st.seminal(d.edge);
    let mut owners: Owners = st.owners(d.edge).iter().copied().collect();
    match d.from.ego {
        None => seminal = seminal.checked_sub(1)?,
        Some(u) => {
            let pos = owners.iter().position(|o| o.ego == u && o.level == d.from.level)?;
            owners.remove(pos);
        }
    }
    match d.to.ego {
        None => seminal += 1,
        Some(v) => {
            let o = Owner { ego: v, level: d.to.level };
            if owners.contains(&o) {
                return None;
            }
            owners.push(o);
        }
    }
    Some(EdgeProposal { edge: d.edge, seminal, owners, log_hastings: 0.0 })
}

/// ln P(to | from) of the geometric multiplicity proposal with mean
/// `from + 1`.
pub fn ln_geometric_proposal(from: u32, to: u32) -> f64 {
    let f = from as f64;
    to as f64 * ((f + 1.0) / (f + 2.0)).ln() - (f + 2.0).ln()
}

/// Draws a multiplicity change of one pair at a uniform generation.
pub fn propose_multiplicity<R: Rng + ?Sized>(st: &DecompositionState, rng: &mut R) -> Option<EdgeProposal> {
    let present = st.present_edges();
    if present.is_empty() {
        return None;
    }
    let e = present[rng.gen_range(0..present.len())];
    let l = rng.gen_range(0..=st.layers());
    let old = st.seminal(e);
    let mut owners: Owners = st.owners(e).iter().copied().collect();
    if l == 0 {
        let p = 1.0 / (old as f64 + 2.0);
        let new = Geometric::new(p).expect("valid probability").sample(rng) as u32;
        if new == old {
            return None;
        }
        let log_hastings = ln_geometric_proposal(new, old) - ln_geometric_proposal(old, new);
        return Some(EdgeProposal { edge: e, seminal: new, owners, log_hastings });
    }
    let mut buf = SmallVec::new();
    let slot = pick_slot(st, e, l, rng, &mut buf)?;
    let o = Owner { ego: slot.ego.unwrap(), level: l };
    let pos = owners.iter().position(|x| *x == o);
    if rng.gen_bool(0.5) {
        if pos.is_some() {
            return None;
        }
        owners.push(o);
    } else {
        owners.remove(pos?);
    }
    Some(EdgeProposal { edge: e, seminal: old, owners, log_hastings: 0.0 })
}

/// Draws an on/off toggle of a uniformly chosen optional pair.
pub fn propose_toggle<R: Rng + ?Sized>(st: &DecompositionState, optional: &[u32], rng: &mut R) -> Option<EdgeProposal> {
    if optional.is_empty() {
        return None;
    }
    let e = optional[rng.gen_range(0..optional.len())];
    let on = rng.gen_bool(0.5);
    if on == st.is_present(e) {
        return None;
    }
    if on {
        Some(EdgeProposal { edge: e, seminal: 1, owners: Owners::new(), log_hastings: 0.0 })
    } else {
        if st.seminal(e) != 1 || !st.owners(e).is_empty() {
            return None;
        }
        Some(EdgeProposal { edge: e, seminal: 0, owners: Owners::new(), log_hastings: 0.0 })
    }
}

#[inline]
fn accept<R: Rng + ?Sized>(log_alpha: f64, rng: &mut R) -> bool {
    if log_alpha >= 0.0 {
        return true;
    }
    if log_alpha == f64::NEG_INFINITY || log_alpha.is_nan() {
        return false;
    }
    rng.gen::<f64>().ln() < log_alpha
}

/// Evaluates and accepts or rejects an edge proposal. Pairs may only
/// become absent through toggles, so `keep_present` rejects any proposal
/// that removes the last owner. Multiplicities above `max_multiplicity`
/// are outside the support of the target, which is tempered by the
/// inverse temperature `beta`.
pub fn metropolis_edge<R: Rng + ?Sized>(
    st: &mut DecompositionState,
    p: &EdgeProposal,
    keep_present: bool,
    max_multiplicity: u32,
    beta: f64,
    rng: &mut R,
) -> Outcome {
    if keep_present && p.seminal == 0 && p.owners.is_empty() {
        return Outcome::Aborted;
    }
    if p.seminal > max_multiplicity {
        return Outcome::Rejected;
    }
    let delta = st.evaluate_edge(p.edge, p.seminal, &p.owners);
    if !delta.is_finite() {
        return Outcome::Rejected;
    }
    if accept(beta * delta + p.log_hastings, rng) {
        st.commit();
        Outcome::Accepted
    } else {
        Outcome::Rejected
    }
}

/// Single-node relabel to one of the existing groups or a fresh one.
pub fn single_node_move<R: Rng + ?Sized>(st: &mut DecompositionState, beta: f64, rng: &mut R) -> Outcome {
    let n = st.node_count() as u32;
    if n == 0 {
        return Outcome::Aborted;
    }
    let v = rng.gen_range(0..n);
    let groups = st.blocks().num_groups();
    let pick = rng.gen_range(0..=groups);
    let r = st.blocks().label(v);
    let target = if pick == groups {
        if st.blocks().group_size(r) == 1 {
            return Outcome::Accepted;
        }
        st.blocks().free_label().expect("a free label exists when a group has two members")
    } else {
        st.blocks().active_groups()[pick]
    };
    if target == r {
        return Outcome::Accepted;
    }
    let after = groups - (st.blocks().group_size(r) == 1) as usize + (st.blocks().group_size(target) == 0) as usize;
    let delta = st.node_move_delta(v, target);
    let log_alpha = beta * delta + ((groups + 1) as f64).ln() - ((after + 1) as f64).ln();
    if accept(log_alpha, rng) {
        st.apply_node_move(v, target, delta);
        Outcome::Accepted
    } else {
        Outcome::Rejected
    }
}

/// Floor on the allocation probabilities of the merge-split move.
pub const ALLOCATION_FLOOR: f64 = 0.02;

#[inline]
fn allocation_probability(delta: f64) -> f64 {
    ALLOCATION_FLOOR + (1.0 - 2.0 * ALLOCATION_FLOOR) / (1.0 + (-delta).exp())
}

fn members(st: &DecompositionState, r: u32) -> Vec<u32> {
    st.blocks().labels().iter().enumerate().filter(|(_, &x)| x == r).map(|(v, _)| v as u32).collect()
}

/// Merge two groups or split one, with equal probability.
///
/// A split draws a random order of the group's members; the first stays
/// and every later member moves to the new group with a probability
/// guided by its log-probability change at that point. A merge draws a
/// fresh random order and replays the same allocation to obtain the
/// reverse probability, so both directions are exact.
pub fn merge_split<R: Rng + ?Sized>(st: &mut DecompositionState, beta: f64, rng: &mut R) -> Outcome {
    if rng.gen_bool(0.5) {
        split(st, beta, rng)
    } else {
        merge(st, beta, rng)
    }
}

fn split<R: Rng + ?Sized>(st: &mut DecompositionState, beta: f64, rng: &mut R) -> Outcome {
    let groups = st.blocks().num_groups();
    let r = st.blocks().active_groups()[rng.gen_range(0..groups)];
    let mut order = members(st, r);
    if order.len() < 2 {
        return Outcome::Aborted;
    }
    let s = st.blocks().free_label().expect("free label exists");
    order.shuffle(rng);
    let saved = st.log_prob();
    let mut ln_q = 0.0;
    let mut total = 0.0;
    let mut moved = Vec::new();
    for &v in &order[1..] {
        let d = st.node_move_delta(v, s);
        let p = allocation_probability(d);
        if rng.gen::<f64>() < p {
            ln_q += p.ln();
            st.apply_node_move(v, s, d);
            total += d;
            moved.push(v);
        } else {
            ln_q += (1.0 - p).ln();
        }
    }
    if moved.is_empty() {
        return Outcome::Rejected;
    }
    // B -> B + 1: ln[1/C(B+1, 2)] - ln(1/B) = ln 2 - ln(B + 1)
    let log_alpha = beta * total + std::f64::consts::LN_2 - ((groups + 1) as f64).ln() - ln_q;
    if accept(log_alpha, rng) {
        st.set_log_prob(saved + total);
        Outcome::Accepted
    } else {
        for &v in &moved {
            let d = st.node_move_delta(v, r);
            st.apply_node_move(v, r, d);
        }
        st.set_log_prob(saved);
        Outcome::Rejected
    }
}

fn merge<R: Rng + ?Sized>(st: &mut DecompositionState, beta: f64, rng: &mut R) -> Outcome {
    let groups = st.blocks().num_groups();
    if groups < 2 {
        return Outcome::Aborted;
    }
    let x = rng.gen_range(0..groups);
    let mut y = rng.gen_range(0..groups - 1);
    if y >= x {
        y += 1;
    }
    let (r, s) = (st.blocks().active_groups()[x], st.blocks().active_groups()[y]);
    let in_s = members(st, s);
    let mut order = members(st, r);
    order.extend_from_slice(&in_s);
    let n = st.node_count();
    let mut side_s = vec![false; n];
    for &v in &in_s {
        side_s[v as usize] = true;
    }
    let saved = st.log_prob();
    let mut total = 0.0;
    for &v in &in_s {
        let d = st.node_move_delta(v, r);
        st.apply_node_move(v, r, d);
        total += d;
    }
    order.shuffle(rng);
    // the side holding the first element keeps the merged label
    let first_in_s = side_s[order[0] as usize];
    let t = st.blocks().free_label().expect("free label exists");
    let mut ln_q = 0.0;
    let mut moved = Vec::new();
    for &v in &order[1..] {
        let d = st.node_move_delta(v, t);
        let p = allocation_probability(d);
        if side_s[v as usize] != first_in_s {
            ln_q += p.ln();
            st.apply_node_move(v, t, d);
            moved.push(v);
        } else {
            ln_q += (1.0 - p).ln();
        }
    }
    // B -> B - 1: ln[1/(B-1)] - ln[1/C(B, 2)] = ln B - ln 2
    let log_alpha = beta * total + (groups as f64).ln() - std::f64::consts::LN_2 + ln_q;
    if accept(log_alpha, rng) {
        for &v in &moved {
            let d = st.node_move_delta(v, r);
            st.apply_node_move(v, r, d);
        }
        st.set_log_prob(saved + total);
        Outcome::Accepted
    } else {
        st.set_log_prob(saved);
        Outcome::Rejected
    }
}

/// Per-kind counts of attempts and their outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub aborted: u64,
}

impl MoveStats {
    pub fn record(&mut self, o: Outcome) {
        self.proposed += 1;
        match o {
            Outcome::Accepted => self.accepted += 1,
            Outcome::Rejected => self.rejected += 1,
            Outcome::Aborted => {
                self.rejected += 1;
                self.aborted += 1;
            }
        }
    }

    pub fn merge(&mut self, o: &MoveStats) {
        self.proposed += o.proposed;
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.aborted += o.aborted;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}
