//! C ABI for the sbmtc inference engine.
//!
//! Objects are opaque handles created by `*_new` or `*_parse` functions
//! and released with the matching `*_free`. Every fallible call returns an
//! [`SbmtcStatus`]; on failure a description is available from
//! [`sbmtc_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use sbmtc::analysis::PosteriorSummary;
use sbmtc::sampler::{Chain, ChainConfig};
use sbmtc::state::Support;
use sbmtc::{global_clustering, Error, SimpleGraph};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbmtcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Infeasible = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Observed simple graph.
pub struct SbmtcGraph {
    graph: SimpleGraph,
}

/// Markov chain over decompositions of one graph.
pub struct SbmtcChain {
    graph: SimpleGraph,
    chain: Chain,
}

/// Sampler settings understood by [`sbmtc_chain_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SbmtcChainConfig {
    /// Total sweeps including burn-in.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    /// Closure generations; zero samples the plain block model.
    pub layers: u8,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SbmtcStatus, msg: impl Into<String>) -> SbmtcStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SbmtcStatus {
    let status = match &e {
        Error::Parse { .. } | Error::SelfLoop { .. } | Error::Json(_) => SbmtcStatus::Parse,
        Error::Io(_) => SbmtcStatus::Io,
        Error::Argument(_) => SbmtcStatus::InvalidArgument,
        Error::Infeasible(_) | Error::Constraint(_) => SbmtcStatus::Infeasible,
        Error::Numerical(_) => SbmtcStatus::Numerical,
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> SbmtcStatus>(f: F) -> SbmtcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SbmtcStatus::Panic, format!("internal error: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SbmtcStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn sbmtc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sbmtc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Defaults matching the library's `ChainConfig`.
#[no_mangle]
pub extern "C" fn sbmtc_chain_config_default() -> SbmtcChainConfig {
    let c = ChainConfig::default();
    SbmtcChainConfig { sweeps: c.sweeps, burn_in: c.burn_in, thin: c.thin, layers: c.layers, seed: c.seed }
}

/// Builds a graph on `nodes` nodes from `count` pairs stored as
/// `pairs[2k], pairs[2k + 1]`. Repeated pairs collapse; self-loops fail.
///
/// # Safety
/// `pairs` must point to `2 * count` readable values (or be null when
/// `count` is zero) and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_new(
    nodes: usize,
    pairs: *const u32,
    count: usize,
    out: *mut *mut SbmtcGraph,
) -> SbmtcStatus {
    guard(|| {
        non_null!(out);
        if count > 0 {
            non_null!(pairs);
        }
        let raw = if count == 0 { &[][..] } else { std::slice::from_raw_parts(pairs, 2 * count) };
        match SimpleGraph::from_edges(nodes, raw.chunks_exact(2).map(|p| (p[0], p[1]))) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(SbmtcGraph { graph }));
                SbmtcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Parses an edge list: one `i j` pair per line, `#` comments, optional
/// `# nodes N` header.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_parse(text: *const c_char, out: *mut *mut SbmtcGraph) -> SbmtcStatus {
    guard(|| {
        non_null!(text, out);
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            return fail(SbmtcStatus::Parse, "edge list is not UTF-8");
        };
        match SimpleGraph::parse_str(s) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(SbmtcGraph { graph }));
                SbmtcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_free(g: *mut SbmtcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_node_count(g: *const SbmtcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.node_count())
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_edge_count(g: *const SbmtcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.edge_count())
}

/// Copies the edges as `out[2k], out[2k + 1]` in the order used by every
/// per-edge array of this API. `len` counts `u32` slots.
///
/// # Safety
/// `g` must be live and `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_edges(g: *const SbmtcGraph, out: *mut u32, len: usize) -> SbmtcStatus {
    guard(|| {
        non_null!(g, out);
        let edges = (*g).graph.edges();
        if len < 2 * edges.len() {
            return fail(SbmtcStatus::BufferTooSmall, format!("need {} slots", 2 * edges.len()));
        }
        for (k, &(i, j)) in edges.iter().enumerate() {
            *out.add(2 * k) = i;
            *out.add(2 * k + 1) = j;
        }
        SbmtcStatus::Ok
    })
}

/// Global clustering coefficient; writes NaN for graphs without a
/// connected triple.
///
/// # Safety
/// `g` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_graph_clustering(g: *const SbmtcGraph, out: *mut f64) -> SbmtcStatus {
    guard(|| {
        non_null!(g, out);
        let c = global_clustering(&(*g).graph);
        *out = if c.is_defined() { c.value } else { f64::NAN };
        SbmtcStatus::Ok
    })
}

/// Starts a chain on a copy of `g`; the graph handle may be freed
/// afterwards.
///
/// # Safety
/// `g` and `config` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_new(
    g: *const SbmtcGraph,
    config: *const SbmtcChainConfig,
    out: *mut *mut SbmtcChain,
) -> SbmtcStatus {
    guard(|| {
        non_null!(g, config, out);
        let c = &*config;
        let cfg = ChainConfig {
            sweeps: c.sweeps,
            burn_in: c.burn_in,
            thin: c.thin,
            layers: c.layers,
            seed: c.seed,
            ..Default::default()
        };
        let graph = (*g).graph.clone();
        match Chain::new(Arc::new(Support::observed(&graph)), cfg, None, None) {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(SbmtcChain { graph, chain }));
                SbmtcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `c` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_free(c: *mut SbmtcChain) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Runs the remaining sweeps of the configured schedule.
///
/// # Safety
/// `c` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_run(c: *mut SbmtcChain) -> SbmtcStatus {
    guard(|| {
        non_null!(c);
        (*c).chain.run().map_or_else(from_error, |_| SbmtcStatus::Ok)
    })
}

/// Runs up to `sweeps` more sweeps, stopping at the end of the schedule.
///
/// # Safety
/// `c` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_run_for(c: *mut SbmtcChain, sweeps: u64) -> SbmtcStatus {
    guard(|| {
        non_null!(c);
        (*c).chain.run_for(sweeps).map_or_else(from_error, |_| SbmtcStatus::Ok)
    })
}

/// # Safety
/// `c` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_sweeps_done(c: *const SbmtcChain) -> u64 {
    c.as_ref().map_or(0, |c| c.chain.sweeps_done())
}

/// Log joint probability of the current state, in nats.
///
/// # Safety
/// `c` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_log_prob(c: *const SbmtcChain) -> f64 {
    c.as_ref().map_or(f64::NAN, |c| c.chain.state().log_prob())
}

/// # Safety
/// `c` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_num_groups(c: *const SbmtcChain) -> usize {
    c.as_ref().map_or(0, |c| c.chain.state().blocks().num_groups())
}

/// Current group label of every node; `len` must be at least the node
/// count.
///
/// # Safety
/// `c` must be live and `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_labels(c: *const SbmtcChain, out: *mut u32, len: usize) -> SbmtcStatus {
    guard(|| {
        non_null!(c, out);
        let labels = (*c).chain.state().blocks().labels();
        if len < labels.len() {
            return fail(SbmtcStatus::BufferTooSmall, format!("need {} slots", labels.len()));
        }
        ptr::copy_nonoverlapping(labels.as_ptr(), out, labels.len());
        SbmtcStatus::Ok
    })
}

/// Posterior probability that each edge is seminal, over the samples
/// retained so far, in graph edge order.
///
/// # Safety
/// `c` must be live and `out` must hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_seminal_marginals(c: *const SbmtcChain, out: *mut f64, len: usize) -> SbmtcStatus {
    guard(|| {
        non_null!(c, out);
        let pi = (*c).chain.collectors().seminal_marginals();
        if len < pi.len() {
            return fail(SbmtcStatus::BufferTooSmall, format!("need {} slots", pi.len()));
        }
        ptr::copy_nonoverlapping(pi.as_ptr(), out, pi.len());
        SbmtcStatus::Ok
    })
}

/// Posterior summary of the retained samples as a JSON string, to be
/// released with [`sbmtc_string_free`].
///
/// # Safety
/// `c` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_chain_summary_json(c: *const SbmtcChain, out: *mut *mut c_char) -> SbmtcStatus {
    guard(|| {
        non_null!(c, out);
        let c = &*c;
        let s = PosteriorSummary::new(&c.graph, c.chain.config().layers, c.chain.collectors());
        match serde_json::to_string(&s) {
            Ok(text) => {
                *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
                SbmtcStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbmtc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
