use std::ffi::{CStr, CString};
use std::ptr;

use sbmtc_ffi::*;

fn last_error() -> String {
    let p = sbmtc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut SbmtcGraph {
    let c = CString::new(text).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { sbmtc_graph_parse(c.as_ptr(), &mut g) }, SbmtcStatus::Ok);
    g
}

#[test]
fn graph_round_trip() {
    let g = parse("0 1\n1 2\n0 2\n2 3\n");
    unsafe {
        assert_eq!(sbmtc_graph_node_count(g), 4);
        assert_eq!(sbmtc_graph_edge_count(g), 4);
        let mut c = 0.0;
        assert_eq!(sbmtc_graph_clustering(g, &mut c), SbmtcStatus::Ok);
        assert!((c - 0.6).abs() < 1e-12);
        let mut edges = [0u32; 8];
        assert_eq!(sbmtc_graph_edges(g, edges.as_mut_ptr(), 8), SbmtcStatus::Ok);
        assert_eq!(edges, [0, 1, 0, 2, 1, 2, 2, 3]);
        assert_eq!(sbmtc_graph_edges(g, edges.as_mut_ptr(), 7), SbmtcStatus::BufferTooSmall);
        sbmtc_graph_free(g);

        let pairs = [0u32, 1, 1, 0, 1, 2];
        let mut h = ptr::null_mut();
        assert_eq!(sbmtc_graph_new(3, pairs.as_ptr(), 3, &mut h), SbmtcStatus::Ok);
        assert_eq!(sbmtc_graph_edge_count(h), 2);
        sbmtc_graph_free(h);
    }
}

#[test]
fn errors_set_codes_and_messages() {
    let mut g = ptr::null_mut();
    let bad = CString::new("0 1\n2 x\n").unwrap();
    assert_eq!(unsafe { sbmtc_graph_parse(bad.as_ptr(), &mut g) }, SbmtcStatus::Parse);
    assert!(last_error().contains("line 2"), "{}", last_error());
    assert!(g.is_null());

    let loops = [1u32, 1];
    assert_eq!(unsafe { sbmtc_graph_new(2, loops.as_ptr(), 1, &mut g) }, SbmtcStatus::InvalidArgument);
    assert!(last_error().contains("self-loop"));

    assert_eq!(unsafe { sbmtc_graph_parse(ptr::null(), &mut g) }, SbmtcStatus::NullPointer);
    assert!(last_error().contains("null"));

    let h = parse("0 1\n1 2");
    let mut cfg = sbmtc_chain_config_default();
    cfg.burn_in = cfg.sweeps + 1;
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { sbmtc_chain_new(h, &cfg, &mut c) }, SbmtcStatus::InvalidArgument);
    assert!(last_error().contains("burn-in"));
    unsafe { sbmtc_graph_free(h) };
}

#[test]
fn chain_lifecycle() {
    let g = parse("0 1\n1 2\n0 2\n2 3\n3 4\n2 4\n4 5\n5 6\n4 6\n");
    let cfg = SbmtcChainConfig { sweeps: 200, burn_in: 50, thin: 5, layers: 1, seed: 3 };
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(sbmtc_chain_new(g, &cfg, &mut c), SbmtcStatus::Ok);
        sbmtc_graph_free(g);
        assert_eq!(sbmtc_chain_run_for(c, 20), SbmtcStatus::Ok);
        assert_eq!(sbmtc_chain_sweeps_done(c), 20);
        assert_eq!(sbmtc_chain_run(c), SbmtcStatus::Ok);
        assert_eq!(sbmtc_chain_sweeps_done(c), 200);
        assert!(sbmtc_chain_log_prob(c).is_finite());
        let mut labels = [u32::MAX; 7];
        assert_eq!(sbmtc_chain_labels(c, labels.as_mut_ptr(), 7), SbmtcStatus::Ok);
        assert!(labels.iter().all(|&l| l != u32::MAX));
        let mut pi = [f64::NAN; 9];
        assert_eq!(sbmtc_chain_seminal_marginals(c, pi.as_mut_ptr(), 9), SbmtcStatus::Ok);
        assert!(pi.iter().all(|p| (0.0..=1.0).contains(p)));
        let mut json = ptr::null_mut();
        assert_eq!(sbmtc_chain_summary_json(c, &mut json), SbmtcStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        sbmtc_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["samples"], 30);
        assert_eq!(v["seminal_marginals"].as_array().unwrap().len(), 9);
        sbmtc_chain_free(c);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/sbmtc.h");
    for name in [
        "sbmtc_last_error",
        "sbmtc_version",
        "sbmtc_chain_config_default",
        "sbmtc_graph_new",
        "sbmtc_graph_parse",
        "sbmtc_graph_free",
        "sbmtc_graph_edges",
        "sbmtc_graph_clustering",
        "sbmtc_chain_new",
        "sbmtc_chain_run",
        "sbmtc_chain_run_for",
        "sbmtc_chain_labels",
        "sbmtc_chain_seminal_marginals",
        "sbmtc_chain_summary_json",
        "sbmtc_chain_free",
        "sbmtc_string_free",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name}");
    }
    assert!(header.contains("typedef struct SbmtcChain SbmtcChain;"));
    let v = unsafe { CStr::from_ptr(sbmtc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
