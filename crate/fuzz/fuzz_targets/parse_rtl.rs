#![no_main]

use coverassert_core::rtl_ast::parse_rtl;
use coverassert_core::struct_features::lca_distance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|src: &str| {
    let Ok(index) = parse_rtl(&[("fuzz.v", src)]) else { return };
    let penalty = 2.0 * f64::from(index.max_depth()) + 1.0;
    let nodes: Vec<_> = index.signal_map().values().flatten().copied().take(8).collect();
    for &a in &nodes {
        for &b in &nodes {
            let d = lca_distance(&index, a, b, penalty);
            assert!(d >= 0.0 && d <= penalty);
            assert_eq!(d, lca_distance(&index, b, a, penalty));
        }
    }
});
