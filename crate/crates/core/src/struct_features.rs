//! Structural assertion features derived from the RTL syntax trees: the
//! pairwise LCA-based distance matrix and the padded path-kind matrix.

use std::collections::HashMap;

use serde_json::{json, Value};

use crate::rtl_ast::{AstIndex, NodeId};
use crate::sva::Assertion;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralFeatures {
    /// Dense symmetric N×N distance matrix.
    pub sd: Vec<Vec<f64>>,
    /// N×d_max path-kind codes, zero padded.
    pub q: Vec<Vec<u32>>,
    pub d_max: usize,
    pub penalty: f64,
    /// Assertions with an empty signal set (rows/columns forced to penalty).
    pub structurally_unknown: Vec<bool>,
    /// `(assertion index, signal)` pairs not found in the RTL index.
    pub absent_signals: Vec<(usize, String)>,
}

/// Cross-tree penalty: strictly above any same-tree distance.
pub fn default_penalty(index: &AstIndex) -> f64 {
    2.0 * f64::from(index.max_depth()) + 1.0
}

/// Tree distance through the lowest common ancestor, or `penalty` for
/// nodes in different trees.
pub fn lca_distance(index: &AstIndex, s: NodeId, t: NodeId, penalty: f64) -> f64 {
    let (ns, nt) = (index.node(s), index.node(t));
    if ns.tree != nt.tree {
        return penalty;
    }
    let (mut a, mut b) = (s, t);
    let (mut da, mut db) = (ns.depth, nt.depth);
    let mut edges = 0u32;
    while da > db {
        a = index.node(a).parent.expect("non-root above depth 0");
        da -= 1;
        edges += 1;
    }
    while db > da {
        b = index.node(b).parent.expect("non-root above depth 0");
        db -= 1;
        edges += 1;
    }
    while a != b {
        a = index.node(a).parent.expect("same tree shares a root");
        b = index.node(b).parent.expect("same tree shares a root");
        edges += 2;
    }
    f64::from(edges)
}

/// Minimum distance over all occurrence pairs of two signals.
fn signal_distance(index: &AstIndex, v: &str, u: &str, penalty: f64) -> f64 {
    let (nv, nu) = (index.signal_nodes(v), index.signal_nodes(u));
    if nv.is_empty() || nu.is_empty() {
        return penalty;
    }
    let mut best = penalty;
    for &a in nv {
        for &b in nu {
            let d = lca_distance(index, a, b, penalty);
            if d < best {
                best = d;
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
    }
    best
}

pub fn sd_matrix(assertions: &[Assertion], index: &AstIndex, penalty: f64) -> Vec<Vec<f64>> {
    let n = assertions.len();
    let mut cache: HashMap<(&str, &str), f64> = HashMap::new();
    let mut sd = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let (si, sj) = (&assertions[i].signals, &assertions[j].signals);
            let value = if si.is_empty() || sj.is_empty() {
                penalty
            } else {
                let mut total = 0.0;
                for v in si {
                    for u in sj {
                        let key = if v <= u { (v.as_str(), u.as_str()) } else { (u.as_str(), v.as_str()) };
                        total += *cache
                            .entry(key)
                            .or_insert_with(|| signal_distance(index, key.0, key.1, penalty));
                    }
                }
                total / (si.len() * sj.len()) as f64
            };
            sd[i][j] = value;
            sd[j][i] = value;
        }
    }
    sd
}

/// Representative occurrence used for path vectors: minimal depth, then
/// earliest span start, then arena order.
pub fn representative_node(index: &AstIndex, signal: &str) -> Option<NodeId> {
    index
        .signal_nodes(signal)
        .iter()
        .copied()
        .min_by_key(|&id| (index.node(id).depth, index.node(id).span.start, id))
}

/// Concatenated root-to-node kind codes (`1 + kind code`) for one assertion.
pub fn path_vector(index: &AstIndex, assertion: &Assertion) -> Vec<u32> {
    let mut row = Vec::new();
    for s in &assertion.signals {
        if let Some(node) = representative_node(index, s) {
            row.extend(index.node_path(node).into_iter().map(|p| 1 + index.node(p).kind.code()));
        }
    }
    row
}

/// Returns the zero-padded path matrix and `d_max` (at least 1).
pub fn path_matrix(assertions: &[Assertion], index: &AstIndex) -> (Vec<Vec<u32>>, usize) {
    let rows: Vec<Vec<u32>> = assertions.iter().map(|a| path_vector(index, a)).collect();
    let d_max = rows.iter().map(Vec::len).max().unwrap_or(0).max(1);
    let q = rows
        .into_iter()
        .map(|mut r| {
            r.resize(d_max, 0);
            r
        })
        .collect();
    (q, d_max)
}

pub fn extract(assertions: &[Assertion], index: &AstIndex) -> StructuralFeatures {
    let penalty = default_penalty(index);
    let sd = sd_matrix(assertions, index, penalty);
    let (q, d_max) = path_matrix(assertions, index);
    let structurally_unknown = assertions.iter().map(|a| a.signals.is_empty()).collect();
    let absent_signals = assertions
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            a.signals.iter().filter(|s| index.signal_nodes(s).is_empty()).map(move |s| (i, s.clone()))
        })
        .collect();
    StructuralFeatures { sd, q, d_max, penalty, structurally_unknown, absent_signals }
}

impl StructuralFeatures {
    /// `sd.json` body, schema `features/v1`.
    pub fn sd_json(&self, ids: &[String]) -> Value {
        json!({ "schema": "features/v1", "ids": ids, "penalty": self.penalty, "sd": self.sd })
    }

    /// `q.json` body, schema `features/v1`.
    pub fn q_json(&self, ids: &[String]) -> Value {
        json!({ "schema": "features/v1", "ids": ids, "d_max": self.d_max, "rows": self.q })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl_ast::{parse_rtl, NodeKind};
    use crate::sva::{ingest_one, RawAssertion, SignalFilter};
    use proptest::prelude::*;

    fn assertion(signals: &[&str]) -> Assertion {
        Assertion {
            id: "x".into(),
            text: String::new(),
            signals: signals.iter().map(|s| s.to_string()).collect(),
            origin_iteration: 0,
            syntax_ok: true,
            tokenize_error: None,
        }
    }

    /// Independent route: full root paths, longest common prefix.
    fn oracle(index: &AstIndex, s: NodeId, t: NodeId, penalty: f64) -> f64 {
        let (ps, pt) = (index.node_path(s), index.node_path(t));
        if ps[0] != pt[0] {
            return penalty;
        }
        let common = ps.iter().zip(&pt).take_while(|(a, b)| a == b).count();
        ((ps.len() - common) + (pt.len() - common)) as f64
    }

    fn sample() -> AstIndex {
        parse_rtl(&[
            (
                "a.v",
                "module m1(input clk, input en, input [3:0] d, output reg [3:0] r);\n\
                 always @(posedge clk) begin if (en) r <= d; else r <= r + 1; end\n\
                 assign w = en & d[0];\nendmodule",
            ),
            ("b.v", "module m2(input clk, output y); assign y = z; endmodule"),
        ])
        .unwrap()
    }

    #[test]
    fn identity_and_cross_tree() {
        let ix = sample();
        let p = default_penalty(&ix);
        let r = ix.signal_nodes("r")[0];
        assert_eq!(lca_distance(&ix, r, r, p), 0.0);
        let y = ix.signal_nodes("y")[0];
        assert_eq!(lca_distance(&ix, r, y, p), p);
    }

    #[test]
    fn hand_built_depths() {
        // Block(2) → If(3) → Expr(4) → Identifier `en`(5); `r` in the
        // then-branch Statement(4) → Expr(5) → Identifier(6); LCA is If at 3.
        let ix = sample();
        let p = default_penalty(&ix);
        let en = *ix.signal_nodes("en").iter().find(|&&n| ix.node(n).depth == 5).unwrap();
        let r = *ix.signal_nodes("r").iter().find(|&&n| ix.node(n).depth == 6).unwrap();
        assert_eq!(lca_distance(&ix, en, r, p), (5 - 3 + 6 - 3) as f64);
        assert_eq!(oracle(&ix, en, r, p), (5 - 3 + 6 - 3) as f64);
    }

    #[test]
    fn matches_path_oracle_on_all_pairs() {
        let ix = sample();
        let p = default_penalty(&ix);
        let ids: Vec<_> = ix.nodes().map(|(id, _)| id).collect();
        for &a in &ids {
            for &b in &ids {
                assert_eq!(lca_distance(&ix, a, b, p), oracle(&ix, a, b, p));
            }
        }
    }

    #[test]
    fn sibling_signals_at_same_depth() {
        // `x` and `y` are both children of one Expr at depth 3
        let ix = parse_rtl(&[("t.v", "module m; assign q = (x + y); endmodule")]).unwrap();
        let (x, y) = (ix.signal_nodes("x")[0], ix.signal_nodes("y")[0]);
        assert_eq!(ix.node(x).depth, ix.node(y).depth);
        assert_eq!(ix.node(x).parent, ix.node(y).parent);
        let sd = sd_matrix(&[assertion(&["x"]), assertion(&["y"])], &ix, default_penalty(&ix));
        assert_eq!(sd[0][1], 2.0);
    }

    #[test]
    fn diagonal_uses_zero_same_name_terms() {
        let ix = sample();
        let p = default_penalty(&ix);
        let a = assertion(&["d", "en", "r"]);
        let sd = sd_matrix(std::slice::from_ref(&a), &ix, p);
        let mut expected = 0.0;
        for v in &a.signals {
            for u in &a.signals {
                let mut best = p;
                for &nv in ix.signal_nodes(v) {
                    for &nu in ix.signal_nodes(u) {
                        best = best.min(oracle(&ix, nv, nu, p));
                    }
                }
                expected += best;
            }
        }
        expected /= 9.0;
        assert!((sd[0][0] - expected).abs() < 1e-12);
        assert!(sd[0][0] > 0.0);
    }

    #[test]
    fn absent_and_empty_signals_use_penalty() {
        let ix = sample();
        let p = default_penalty(&ix);
        let sd = sd_matrix(&[assertion(&["ghost"]), assertion(&["en"]), assertion(&[])], &ix, p);
        assert_eq!(sd[0][1], p);
        assert_eq!(sd[0][0], p);
        assert!(sd[2].iter().all(|&v| v == p));
        let feats = extract(&[assertion(&["ghost", "en"]), assertion(&[])], &ix);
        assert_eq!(feats.absent_signals, vec![(0, "ghost".to_string())]);
        assert_eq!(feats.structurally_unknown, vec![false, true]);
    }

    #[test]
    fn path_rows_and_padding() {
        let ix = sample();
        let (q, d_max) = path_matrix(&[assertion(&["en", "y"]), assertion(&["d"]), assertion(&[])], &ix);
        let len = |s: &str| ix.node(representative_node(&ix, s).unwrap()).depth as usize + 1;
        assert_eq!(d_max, len("en") + len("y"));
        assert_eq!(q[0].len(), d_max);
        assert!(q[0].iter().all(|&c| c > 0));
        assert_eq!(q[1][..len("d")].iter().filter(|&&c| c == 0).count(), 0);
        assert!(q[1][len("d")..].iter().all(|&c| c == 0));
        assert!(q[2].iter().all(|&c| c == 0));
        // every row starts at a module root
        assert_eq!(q[0][0], 1 + NodeKind::Module.code());
    }

    #[test]
    fn path_lengths_add_up() {
        // A has paths of length 3 and 4 (depths 2 and 3), B one of length 5.
        let ix = parse_rtl(&[(
            "t.v",
            "module m(input a); assign b = c; assign e = (f); always @(g) if (h) k = 1; endmodule",
        )])
        .unwrap();
        let depth = |s: &str| ix.node(representative_node(&ix, s).unwrap()).depth;
        assert_eq!((depth("a"), depth("b"), depth("f")), (2, 3, 4));
        let (q, d_max) = path_matrix(&[assertion(&["a", "b"]), assertion(&["f"])], &ix);
        assert_eq!(d_max, 7);
        assert_eq!(&q[1][5..], &[0, 0]);
        assert!(q[1][..5].iter().all(|&c| c > 0));
    }

    #[test]
    fn row_permutation() {
        let ix = sample();
        let a = [assertion(&["en"]), assertion(&["d", "r"]), assertion(&["y"])];
        let b = [a[2].clone(), a[0].clone(), a[1].clone()];
        let (qa, da) = path_matrix(&a, &ix);
        let (qb, db) = path_matrix(&b, &ix);
        assert_eq!(da, db);
        assert_eq!(qb, vec![qa[2].clone(), qa[0].clone(), qa[1].clone()]);
    }

    #[test]
    fn representative_prefers_shallow_then_early() {
        let ix = parse_rtl(&[("t.v", "module m(input a); always @(a) if (a) x = a; endmodule")]).unwrap();
        let rep = representative_node(&ix, "a").unwrap();
        let min_depth = ix.signal_nodes("a").iter().map(|&n| ix.node(n).depth).min().unwrap();
        assert_eq!(ix.node(rep).depth, min_depth);
    }

    #[test]
    fn ingest_to_features() {
        let ix = sample();
        let f = SignalFilter::default();
        let a = ingest_one(&RawAssertion { id: "1".into(), text: "assert property (@(posedge clk) en |=> r == d);".into(), iteration: None }, &f);
        let feats = extract(&[a], &ix);
        assert!(feats.absent_signals.is_empty());
        assert_eq!(feats.sd.len(), 1);
    }

    proptest! {
        #[test]
        fn sd_symmetric_bounded_and_order_invariant(
            picks in proptest::collection::vec(proptest::collection::vec(0usize..7, 0..4), 1..6),
            shuffle_seed in any::<u64>(),
        ) {
            let names = ["clk", "en", "d", "r", "w", "y", "ghost"];
            let ix = sample();
            let p = default_penalty(&ix);
            let mut set: Vec<Assertion> = picks.iter().map(|ix_list| {
                let mut s: Vec<&str> = ix_list.iter().map(|&k| names[k]).collect();
                s.sort();
                s.dedup();
                assertion(&s)
            }).collect();
            let sd = sd_matrix(&set, &ix, p);
            for i in 0..set.len() {
                for j in 0..set.len() {
                    prop_assert_eq!(sd[i][j], sd[j][i]);
                    prop_assert!(sd[i][j] >= 0.0 && sd[i][j] <= p);
                }
            }
            // rotating the internal order of a signal set leaves SD unchanged
            for a in &mut set {
                let k = (shuffle_seed as usize) % a.signals.len().max(1);
                a.signals.rotate_left(k);
            }
            let sd2 = sd_matrix(&set, &ix, p);
            for i in 0..set.len() {
                for j in 0..set.len() {
                    prop_assert!((sd[i][j] - sd2[i][j]).abs() < 1e-12);
                }
            }
        }
    }
}
