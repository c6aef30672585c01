//! Hierarchical syntax trees over a Verilog subset, plus the
//! signal-name → node-set index used by the structural distance metric.
//!
//! One tree is built per module declaration. Nodes live in a single arena
//! owned by [`AstIndex`] and are addressed by [`NodeId`]; the index is
//! immutable once built and can be shared across threads.

mod parser;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::Serialize;
use serde_json::{json, Value};

pub use parser::MAX_NESTING;

/// Node categories. The discriminant order is part of the path-vector
/// encoding and must not be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeKind {
    Module = 0,
    PortList = 1,
    Always = 2,
    Initial = 3,
    Assign = 4,
    If = 5,
    Case = 6,
    Block = 7,
    Statement = 8,
    Expr = 9,
    Identifier = 10,
}

impl NodeKind {
    pub const ALL: [NodeKind; 11] = [
        NodeKind::Module,
        NodeKind::PortList,
        NodeKind::Always,
        NodeKind::Initial,
        NodeKind::Assign,
        NodeKind::If,
        NodeKind::Case,
        NodeKind::Block,
        NodeKind::Statement,
        NodeKind::Expr,
        NodeKind::Identifier,
    ];

    /// Stable integer code (declaration order).
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Module => "Module",
            NodeKind::PortList => "PortList",
            NodeKind::Always => "Always",
            NodeKind::Initial => "Initial",
            NodeKind::Assign => "Assign",
            NodeKind::If => "If",
            NodeKind::Case => "Case",
            NodeKind::Block => "Block",
            NodeKind::Statement => "Statement",
            NodeKind::Expr => "Expr",
            NodeKind::Identifier => "Identifier",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    pub depth: u32,
    pub file: FileId,
    /// Byte offsets into the source file.
    pub span: Range<usize>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Index into [`AstIndex::roots`] of the tree holding this node.
    pub tree: u32,
    /// Token text for `Identifier` nodes.
    pub text: Option<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AstError {
    #[error("no RTL sources given")]
    EmptyInput,
    #[error("{file_id}: cannot parse at byte {offset}: {reason}")]
    UnparsableSource { file_id: String, offset: usize, reason: String },
}

#[derive(Debug, Clone, Default)]
pub struct AstIndex {
    files: Vec<String>,
    nodes: Vec<SyntaxNode>,
    roots: Vec<NodeId>,
    signal_map: BTreeMap<String, Vec<NodeId>>,
    max_depth: u32,
}

/// Parses every source and builds the combined index.
///
/// Each element of `sources` is `(file_id, text)`. Files without any module
/// declaration contribute no trees.
pub fn parse_rtl<S: AsRef<str>, T: AsRef<str>>(sources: &[(S, T)]) -> Result<AstIndex, AstError> {
    if sources.is_empty() {
        return Err(AstError::EmptyInput);
    }
    let mut index = AstIndex::default();
    for (file_id, text) in sources {
        let file = FileId(index.files.len() as u32);
        index.files.push(file_id.as_ref().to_string());
        parser::parse_file(&mut index, file, text.as_ref()).map_err(|e| {
            AstError::UnparsableSource {
                file_id: file_id.as_ref().to_string(),
                offset: e.offset,
                reason: e.reason,
            }
        })?;
    }
    index.finish();
    Ok(index)
}

impl AstIndex {
    fn finish(&mut self) {
        self.max_depth = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut map: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let Some(text) = &node.text else { continue };
            let id = NodeId(i as u32);
            map.entry(text.clone()).or_default().push(id);
            if let Some((_, leaf)) = text.rsplit_once('.') {
                if !leaf.is_empty() {
                    map.entry(leaf.to_string()).or_default().push(id);
                }
            }
        }
        self.signal_map = map;
    }

    pub fn node(&self, id: NodeId) -> &SyntaxNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &SyntaxNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn file_name(&self, file: FileId) -> &str {
        &self.files[file.0 as usize]
    }

    pub fn signal_map(&self) -> &BTreeMap<String, Vec<NodeId>> {
        &self.signal_map
    }

    /// Nodes where `name` occurs, in arena order.
    pub fn signal_nodes(&self, name: &str) -> &[NodeId] {
        self.signal_map.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Root-to-node inclusive path.
    pub fn node_path(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = Vec::with_capacity(self.node(id).depth as usize + 1);
        let mut cur = Some(id);
        while let Some(n) = cur {
            path.push(n);
            cur = self.node(n).parent;
        }
        path.reverse();
        path
    }

    /// JSON tree dump, schema `ast-dump/v1`.
    pub fn dump(&self) -> Value {
        let trees: Vec<Value> = self.roots.iter().map(|&r| self.dump_node(r)).collect();
        json!({
            "schema": "ast-dump/v1",
            "files": self.files,
            "max_depth": self.max_depth,
            "trees": trees,
        })
    }

    fn dump_node(&self, id: NodeId) -> Value {
        let n = self.node(id);
        let mut obj = json!({
            "kind": n.kind.name(),
            "depth": n.depth,
            "file": self.file_name(n.file),
            "span": [n.span.start, n.span.end],
            "children": n.children.iter().map(|&c| self.dump_node(c)).collect::<Vec<_>>(),
        });
        if let Some(text) = &n.text {
            obj["text"] = Value::String(text.clone());
        }
        obj
    }

    // arena construction used by the parser

    fn open(&mut self, kind: NodeKind, parent: Option<NodeId>, file: FileId, start: usize) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let (depth, tree) = match parent {
            Some(p) => {
                let pn = &self.nodes[p.index()];
                (pn.depth + 1, pn.tree)
            }
            None => (0, self.roots.len() as u32),
        };
        self.nodes.push(SyntaxNode {
            kind,
            depth,
            file,
            span: start..start,
            parent,
            children: Vec::new(),
            tree,
            text: None,
        });
        match parent {
            Some(p) => self.nodes[p.index()].children.push(id),
            None => self.roots.push(id),
        }
        id
    }

    fn close(&mut self, id: NodeId, end: usize) {
        let n = &mut self.nodes[id.index()];
        n.span.end = end.max(n.span.start);
    }

    /// Drops every node created after `len` (used to discard top-level
    /// items that are not module declarations).
    fn truncate(&mut self, len: usize, roots: usize) {
        self.nodes.truncate(len);
        self.roots.truncate(roots);
    }
}

/// Builds an index by hand, without source text. Useful for synthetic
/// trees in tests and tools.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    index: AstIndex,
}

impl TreeBuilder {
    pub fn new() -> Self {
        let mut index = AstIndex::default();
        index.files.push("<synthetic>".into());
        TreeBuilder { index }
    }

    /// Adds a node under `parent` (a new tree root when `None`). `name`
    /// makes it an identifier visible in the signal map.
    pub fn add(&mut self, kind: NodeKind, parent: Option<NodeId>, name: Option<&str>) -> NodeId {
        let id = self.index.open(kind, parent, FileId(0), 0);
        self.index.nodes[id.index()].text = name.map(str::to_string);
        id
    }

    pub fn finish(mut self) -> AstIndex {
        self.index.finish();
        self.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_one(src: &str) -> AstIndex {
        parse_rtl(&[("t.v", src)]).unwrap()
    }

    fn check_tree_invariants(ix: &AstIndex) {
        for (id, n) in ix.nodes() {
            match n.parent {
                None => {
                    assert_eq!(n.depth, 0);
                    assert!(ix.roots().contains(&id));
                }
                Some(p) => {
                    let pn = ix.node(p);
                    assert_eq!(n.depth, pn.depth + 1);
                    assert_eq!(n.tree, pn.tree);
                    assert!(pn.span.start <= n.span.start && n.span.end <= pn.span.end);
                }
            }
            for w in n.children.windows(2) {
                assert!(ix.node(w[0]).span.end <= ix.node(w[1]).span.start);
            }
        }
        for (name, ids) in ix.signal_map() {
            assert!(!ids.is_empty());
            for &id in ids {
                let text = ix.node(id).text.as_deref().unwrap();
                assert!(text == name || text.rsplit_once('.').is_some_and(|(_, l)| l == name));
            }
        }
    }

    #[test]
    fn minimal_module() {
        let ix = parse_one("module m(input a); assign b = a; endmodule");
        assert_eq!(ix.roots().len(), 1);
        assert_eq!(ix.node(ix.roots()[0]).kind, NodeKind::Module);
        assert!(!ix.signal_nodes("a").is_empty());
        assert!(!ix.signal_nodes("b").is_empty());
        check_tree_invariants(&ix);
    }

    #[test]
    fn shared_names_across_files() {
        let ix = parse_rtl(&[
            ("a.v", "module m1(input clk); endmodule"),
            ("b.v", "module m2(input clk); endmodule"),
        ])
        .unwrap();
        assert_eq!(ix.roots().len(), 2);
        let files: std::collections::BTreeSet<_> =
            ix.signal_nodes("clk").iter().map(|&n| ix.node(n).file).collect();
        assert_eq!(files.len(), 2);
    }

    #[test]
    fn nested_statement_is_deeper_than_always() {
        let ix = parse_one("module m; always @(posedge clk) if (en) r <= d; endmodule");
        let always = ix.nodes().find(|(_, n)| n.kind == NodeKind::Always).unwrap().1;
        let r = ix.node(ix.signal_nodes("r")[0]);
        assert!(r.depth > always.depth);
        // walk up from r and find the always block on the way
        let path = ix.node_path(ix.signal_nodes("r")[0]);
        assert!(path.iter().any(|&p| ix.node(p).kind == NodeKind::Always));
        // clock identifiers inside event controls are indexed
        assert!(!ix.signal_nodes("clk").is_empty());
    }

    #[test]
    fn node_path_of_root_and_deep_node() {
        let ix = parse_one("module m; always @(posedge clk) begin if (en) r <= d; end endmodule");
        let root = ix.roots()[0];
        assert_eq!(ix.node_path(root), vec![root]);
        for (id, n) in ix.nodes() {
            let path = ix.node_path(id);
            assert_eq!(path.len(), n.depth as usize + 1);
            assert_eq!(path[0], root);
            assert_eq!(*path.last().unwrap(), id);
            for (k, p) in path.iter().enumerate() {
                assert_eq!(ix.node(*p).depth as usize, k);
            }
            for w in path.windows(2) {
                assert_eq!(ix.node(w[1]).parent, Some(w[0]));
            }
        }
    }

    #[test]
    fn hierarchical_reference_indexed_twice() {
        let ix = parse_one("module m; assign x = top.u1.sig; endmodule");
        assert_eq!(ix.signal_nodes("top.u1.sig"), ix.signal_nodes("sig"));
        assert_eq!(ix.signal_nodes("sig").len(), 1);
    }

    #[test]
    fn keywords_literals_and_system_names_not_indexed() {
        let ix = parse_one(
            "module m; initial begin $display(\"hi %d\", 8'hff); x = `W; end endmodule",
        );
        let keys: Vec<_> = ix.signal_map().keys().cloned().collect();
        assert_eq!(keys, ["m", "x"]);
    }

    #[test]
    fn max_depth_covers_all_nodes() {
        let ix = parse_one(
            "module m(input clk, input [1:0] s, output reg q);\n\
             always @(posedge clk) begin\n\
               case (s)\n  2'd0: q <= 1'b0;\n  default: begin if (s[1]) q <= ~q; end\n\
               endcase\n end\nendmodule",
        );
        let deepest = ix.nodes().map(|(_, n)| n.depth).max().unwrap();
        assert_eq!(ix.max_depth(), deepest);
        assert!(ix.nodes().any(|(_, n)| n.kind == NodeKind::Case));
        check_tree_invariants(&ix);
    }

    #[test]
    fn one_tree_per_module_in_a_file() {
        let ix = parse_one("`timescale 1ns/1ps\nmodule a; endmodule\nmodule b; endmodule : b\n");
        assert_eq!(ix.roots().len(), 2);
    }

    #[test]
    fn empty_input_and_unparsable_source() {
        let none: [(&str, &str); 0] = [];
        assert_eq!(parse_rtl(&none).unwrap_err(), AstError::EmptyInput);
        match parse_rtl(&[("bad.v", "module m; assign a = (b; endmodule")]).unwrap_err() {
            AstError::UnparsableSource { file_id, .. } => assert_eq!(file_id, "bad.v"),
            e => panic!("{e:?}"),
        }
        assert!(parse_rtl(&[("bad.v", "module m; assign a = b;")]).is_err());
        assert!(parse_rtl(&[("bad.v", "module m; end endmodule")]).is_err());
    }

    #[test]
    fn dump_is_versioned_and_nested() {
        let ix = parse_one("module m(input a); assign b = a; endmodule");
        let d = ix.dump();
        assert_eq!(d["schema"], "ast-dump/v1");
        assert_eq!(d["trees"][0]["kind"], "Module");
        assert_eq!(d["trees"][0]["depth"], 0);
        assert!(d["trees"][0]["children"].as_array().unwrap().len() >= 2);
    }

    fn arb_stmt(depth: u32) -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            "[a-e]".prop_map(|v| format!("{v} <= {v}x;")),
            "[a-e]".prop_map(|v| format!("{v} = ({v} & y);")),
            Just(";".to_string()),
        ];
        if depth == 0 {
            return leaf.boxed();
        }
        let inner = arb_stmt(depth - 1);
        prop_oneof![
            leaf,
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("if (c) {a} else {b}")),
            proptest::collection::vec(inner.clone(), 0..3)
                .prop_map(|v| format!("begin {} end", v.join(" "))),
            inner.prop_map(|s| format!("case (sel) 1: {s} default: ; endcase")),
        ]
        .boxed()
    }

    proptest! {
        #[test]
        fn random_modules_satisfy_tree_invariants(stmts in proptest::collection::vec(arb_stmt(4), 1..4)) {
            let src = format!(
                "module m(input clk);\n{}\nendmodule",
                stmts.iter().map(|s| format!("always @(posedge clk) {s}")).collect::<Vec<_>>().join("\n")
            );
            let ix = parse_one(&src);
            check_tree_invariants(&ix);
            prop_assert_eq!(ix.max_depth(), ix.nodes().map(|(_, n)| n.depth).max().unwrap());
        }
    }
}
