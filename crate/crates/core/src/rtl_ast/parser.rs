//! Recursive-descent segmentation of Verilog into the node hierarchy.
//!
//! Only containment matters downstream, so expressions are kept flat:
//! an `Expr` node holds `Identifier` children and one nested `Expr` per
//! bracketed group. Anything not recognised becomes a `Statement`.

use super::{AstIndex, FileId, NodeId, NodeKind};
use crate::lexer::{tokenize, Token, TokenKind};

/// Limit on syntactic nesting (blocks, statements and bracket groups).
pub const MAX_NESTING: usize = 256;

#[derive(Debug)]
pub(super) struct ParseError {
    pub offset: usize,
    pub reason: String,
}

type PResult<T> = Result<T, ParseError>;

const MODULE_LIKE: &[(&str, &str)] = &[
    ("module", "endmodule"),
    ("macromodule", "endmodule"),
    ("interface", "endinterface"),
    ("program", "endprogram"),
    ("package", "endpackage"),
];

/// Constructs with a body closed by a dedicated keyword. The flag tells
/// whether a `;`-terminated header precedes the body.
const REGIONS: &[(&str, &[&str], bool)] = &[
    ("function", &["endfunction"], true),
    ("task", &["endtask"], true),
    ("generate", &["endgenerate"], false),
    ("fork", &["join", "join_any", "join_none"], false),
    ("specify", &["endspecify"], false),
    ("property", &["endproperty"], true),
    ("sequence", &["endsequence"], true),
    ("covergroup", &["endgroup"], true),
    ("clocking", &["endclocking"], true),
    ("class", &["endclass"], true),
    ("checker", &["endchecker"], true),
    ("primitive", &["endprimitive"], true),
    ("table", &["endtable"], false),
    ("config", &["endconfig"], true),
    ("module", &["endmodule"], true),
    ("macromodule", &["endmodule"], true),
    ("interface", &["endinterface"], true),
    ("program", &["endprogram"], true),
    ("package", &["endpackage"], true),
];

fn is_closing_keyword(t: &Token) -> bool {
    t.kind == TokenKind::Keyword
        && (t.text.starts_with("end") || matches!(t.text.as_str(), "join" | "join_any" | "join_none"))
}

pub(super) fn parse_file(index: &mut AstIndex, file: FileId, src: &str) -> PResult<()> {
    let tokens = tokenize(src).map_err(|e| ParseError { offset: e.offset, reason: e.message.into() })?;
    let mut p = Parser { ix: index, file, toks: &tokens, pos: 0, nesting: 0, src_len: src.len() };
    p.top_level()
}

struct Parser<'a> {
    ix: &'a mut AstIndex,
    file: FileId,
    toks: &'a [Token],
    pos: usize,
    nesting: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + k)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.src_len, |t| t.span.start)
    }

    fn err<T>(&self, reason: impl Into<String>) -> PResult<T> {
        Err(ParseError { offset: self.offset(), reason: reason.into() })
    }

    fn prev_end(&self) -> usize {
        self.pos.checked_sub(1).map_or(0, |i| self.toks[i].span.end)
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.toks[self.pos];
        self.pos += 1;
        t
    }

    fn enter(&mut self) -> PResult<()> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return self.err("nesting too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.nesting -= 1;
    }

    fn open(&mut self, kind: NodeKind, parent: Option<NodeId>) -> NodeId {
        let start = self.offset();
        self.ix.open(kind, parent, self.file, start)
    }

    fn close(&mut self, id: NodeId) {
        let end = self.prev_end();
        self.ix.close(id, end);
    }

    fn identifier(&mut self, parent: NodeId) {
        let t = self.bump().clone();
        let id = self.ix.open(NodeKind::Identifier, Some(parent), self.file, t.span.start);
        self.ix.close(id, t.span.end);
        self.ix.nodes[id.index()].text = Some(t.text);
    }

    fn top_level(&mut self) -> PResult<()> {
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Directive {
                self.pos += 1;
                continue;
            }
            if let Some(&(_, end)) = MODULE_LIKE.iter().find(|(k, _)| t.is_keyword(k)) {
                self.module(end)?;
                continue;
            }
            if is_closing_keyword(t) {
                return self.err(format!("unexpected `{}`", t.text));
            }
            // Anything else (imports, typedefs, packages' free functions…)
            // is parsed for well-formedness and then discarded.
            let (len, roots) = (self.ix.nodes.len(), self.ix.roots.len());
            let scratch = self.open(NodeKind::Statement, None);
            let before = self.pos;
            self.item(scratch)?;
            if self.pos == before {
                return self.err("unrecognised top-level construct");
            }
            self.ix.truncate(len, roots);
        }
        Ok(())
    }

    fn module(&mut self, end_kw: &str) -> PResult<()> {
        let start_offset = self.offset();
        let root = self.open(NodeKind::Module, None);
        self.pos += 1;
        while self.at_keyword("automatic") || self.at_keyword("static") {
            self.pos += 1;
        }
        if self.peek().is_some_and(|t| t.kind == TokenKind::Ident) {
            self.identifier(root);
        }
        while self.at_keyword("import") {
            self.generic(root)?;
        }
        if self.at_punct("#") {
            let params = self.open(NodeKind::Statement, Some(root));
            self.pos += 1;
            if self.at_punct("(") {
                self.group(params)?;
            }
            self.close(params);
        }
        if self.at_punct("(") {
            let ports = self.open(NodeKind::PortList, Some(root));
            self.pos += 1;
            self.enter()?;
            self.flat(ports, &[], Some(")"))?;
            self.leave();
            if !self.at_punct(")") {
                return self.err("unterminated port list");
            }
            self.pos += 1;
            self.close(ports);
        }
        if self.at_punct(";") {
            self.pos += 1;
        }
        loop {
            match self.peek() {
                None => {
                    return Err(ParseError {
                        offset: start_offset,
                        reason: format!("missing `{end_kw}`"),
                    })
                }
                Some(t) if t.is_keyword(end_kw) => {
                    self.pos += 1;
                    self.end_label(root);
                    break;
                }
                Some(_) => self.item(root)?,
            }
        }
        self.close(root);
        Ok(())
    }

    /// Optional `: name` after a closing keyword.
    fn end_label(&mut self, parent: NodeId) {
        if self.at_punct(":") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident) {
            self.pos += 1;
            self.identifier(parent);
        }
    }

    fn item(&mut self, parent: NodeId) -> PResult<()> {
        self.enter()?;
        let r = self.item_inner(parent);
        self.leave();
        r
    }

    fn item_inner(&mut self, parent: NodeId) -> PResult<()> {
        let Some(t) = self.peek() else {
            return self.err("unexpected end of input");
        };
        if t.is_punct(";") {
            self.pos += 1;
            return Ok(());
        }
        if t.kind == TokenKind::Directive {
            let s = self.open(NodeKind::Statement, Some(parent));
            self.pos += 1;
            self.close(s);
            return Ok(());
        }
        if t.is_punct("@") || t.is_punct("#") {
            let s = self.open(NodeKind::Statement, Some(parent));
            self.timing_control(s)?;
            self.item(s)?;
            self.close(s);
            return Ok(());
        }
        if t.kind == TokenKind::Ident
            && self.peek_at(1).is_some_and(|n| n.is_punct(":"))
            && !self.peek_at(2).is_some_and(|n| n.is_punct(":"))
        {
            // labelled statement
            let s = self.open(NodeKind::Statement, Some(parent));
            self.identifier(s);
            self.pos += 1;
            self.item(s)?;
            self.close(s);
            return Ok(());
        }
        if t.kind != TokenKind::Keyword {
            return self.generic(parent);
        }
        let kw = t.text.clone();
        match kw.as_str() {
            "begin" => self.block(parent),
            "assign" => self.assign(parent),
            "always" | "always_ff" | "always_comb" | "always_latch" => {
                let node = self.open(NodeKind::Always, Some(parent));
                self.pos += 1;
                if self.at_punct("@") || self.at_punct("#") {
                    self.timing_control(node)?;
                }
                self.item(node)?;
                self.close(node);
                Ok(())
            }
            "initial" => {
                let node = self.open(NodeKind::Initial, Some(parent));
                self.pos += 1;
                self.item(node)?;
                self.close(node);
                Ok(())
            }
            "final" | "forever" => {
                let node = self.open(NodeKind::Statement, Some(parent));
                self.pos += 1;
                self.item(node)?;
                self.close(node);
                Ok(())
            }
            "unique" | "unique0" | "priority" => {
                self.pos += 1;
                self.item_inner(parent)
            }
            "if" => self.if_stmt(parent),
            "case" | "casez" | "casex" | "randcase" => self.case_stmt(parent),
            "for" | "while" | "repeat" | "foreach" | "wait" => {
                let node = self.open(NodeKind::Statement, Some(parent));
                self.pos += 1;
                if self.at_punct("(") {
                    self.group(node)?;
                }
                self.item(node)?;
                self.close(node);
                Ok(())
            }
            "do" => {
                let node = self.open(NodeKind::Statement, Some(parent));
                self.pos += 1;
                self.item(node)?;
                if !self.at_keyword("while") {
                    return self.err("expected `while` after `do` body");
                }
                self.pos += 1;
                self.generic_tail(node)?;
                self.close(node);
                Ok(())
            }
            "else" => self.err("`else` without `if`"),
            _ => {
                if let Some(&(_, ends, header)) = REGIONS.iter().find(|(k, _, _)| *k == kw) {
                    return self.region(parent, ends, header);
                }
                if is_closing_keyword(t) {
                    return self.err(format!("unexpected `{kw}`"));
                }
                self.generic(parent)
            }
        }
    }

    fn block(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::Block, Some(parent));
        self.pos += 1;
        self.end_label(node);
        loop {
            match self.peek() {
                None => return self.err("missing `end`"),
                Some(t) if t.is_keyword("end") => {
                    self.pos += 1;
                    self.end_label(node);
                    break;
                }
                Some(_) => self.item(node)?,
            }
        }
        self.close(node);
        Ok(())
    }

    fn region(&mut self, parent: NodeId, ends: &[&str], header: bool) -> PResult<()> {
        let node = self.open(NodeKind::Statement, Some(parent));
        self.pos += 1;
        if header {
            self.flat(node, &[";"], None)?;
            if self.at_punct(";") {
                self.pos += 1;
            }
        }
        loop {
            match self.peek() {
                None => return self.err(format!("missing `{}`", ends[0])),
                Some(t) if ends.iter().any(|e| t.is_keyword(e)) => {
                    self.pos += 1;
                    self.end_label(node);
                    break;
                }
                Some(_) => self.item(node)?,
            }
        }
        self.close(node);
        Ok(())
    }

    fn assign(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::Assign, Some(parent));
        self.pos += 1;
        loop {
            self.expr_until(node, &["=", ",", ";"])?;
            if self.at_punct("=") {
                self.pos += 1;
                self.expr_until(node, &[",", ";"])?;
            }
            if self.at_punct(",") {
                self.pos += 1;
                continue;
            }
            break;
        }
        if !self.at_punct(";") {
            return self.err("expected `;` after continuous assignment");
        }
        self.pos += 1;
        self.close(node);
        Ok(())
    }

    fn if_stmt(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::If, Some(parent));
        self.pos += 1;
        if !self.at_punct("(") {
            return self.err("expected `(` after `if`");
        }
        self.group(node)?;
        self.item(node)?;
        if self.at_keyword("else") {
            self.pos += 1;
            self.item(node)?;
        }
        self.close(node);
        Ok(())
    }

    fn case_stmt(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::Case, Some(parent));
        self.pos += 1;
        if self.at_punct("(") {
            self.group(node)?;
        }
        if self.at_keyword("inside") || self.at_keyword("matches") {
            self.pos += 1;
        }
        loop {
            match self.peek() {
                None => return self.err("missing `endcase`"),
                Some(t) if t.is_keyword("endcase") => {
                    self.pos += 1;
                    break;
                }
                Some(t) if is_closing_keyword(t) => {
                    return self.err(format!("unexpected `{}` in case", t.text))
                }
                Some(_) => {}
            }
            self.enter()?;
            let arm = self.open(NodeKind::Statement, Some(node));
            if self.at_keyword("default") {
                self.pos += 1;
                if self.at_punct(":") {
                    self.pos += 1;
                }
            } else {
                self.expr_until(arm, &[":"])?;
                if !self.at_punct(":") {
                    return self.err("expected `:` after case label");
                }
                self.pos += 1;
            }
            self.item(arm)?;
            self.close(arm);
            self.leave();
        }
        self.close(node);
        Ok(())
    }

    /// `@(...)`, `@*`, `@name`, `#delay`, `#(...)`.
    fn timing_control(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::Expr, Some(parent));
        let hash = self.at_punct("#");
        self.pos += 1;
        match self.peek() {
            Some(t) if t.is_punct("(") => self.group(node)?,
            Some(t) if t.is_punct("*") => self.pos += 1,
            Some(t) if t.kind == TokenKind::Ident => self.identifier(node),
            Some(t) if t.kind == TokenKind::Number && hash => self.pos += 1,
            _ => return self.err("malformed timing control"),
        }
        self.close(node);
        Ok(())
    }

    /// Generic statement: an optional assignment split into lhs/rhs
    /// expressions, otherwise a flat run of identifiers and groups up to `;`.
    fn generic(&mut self, parent: NodeId) -> PResult<()> {
        let node = self.open(NodeKind::Statement, Some(parent));
        self.generic_tail(node)?;
        self.close(node);
        Ok(())
    }

    fn generic_tail(&mut self, node: NodeId) -> PResult<()> {
        let start = self.pos;
        if self.has_assignment_op() {
            self.expr_until(node, &["=", "<="])?;
            if self.at_punct("=") || self.at_punct("<=") {
                self.pos += 1;
                self.expr_until(node, &[";"])?;
            }
        } else {
            self.flat(node, &[";"], None)?;
        }
        if self.at_punct(";") {
            self.pos += 1;
        } else if self.at_keyword("begin") {
            self.block(node)?;
        } else if self.pos == start {
            let what = self.peek().map_or("end of input".to_string(), |t| format!("`{}`", t.text));
            return self.err(format!("unexpected {what}"));
        }
        Ok(())
    }

    /// True when a depth-0 `=` or `<=` precedes the statement's `;`.
    fn has_assignment_op(&self) -> bool {
        let mut depth = 0usize;
        for t in &self.toks[self.pos..] {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" | "[" | "{" | "'{" => depth += 1,
                    ")" | "]" | "}" => depth = depth.saturating_sub(1),
                    ";" if depth == 0 => return false,
                    "=" | "<=" if depth == 0 => return true,
                    _ => {}
                }
            } else if depth == 0
                && (t.is_keyword("begin") || t.is_keyword("fork") || is_closing_keyword(t))
            {
                return false;
            }
        }
        false
    }

    fn expr_until(&mut self, parent: NodeId, stops: &[&str]) -> PResult<()> {
        let node = self.open(NodeKind::Expr, Some(parent));
        self.flat(node, stops, None)?;
        self.close(node);
        Ok(())
    }

    fn group(&mut self, parent: NodeId) -> PResult<()> {
        self.enter()?;
        let node = self.open(NodeKind::Expr, Some(parent));
        let open = self.bump().text.clone();
        let close = match open.as_str() {
            "(" => ")",
            "[" | "[*" | "[=" | "[->" => "]",
            _ => "}",
        };
        self.flat(node, &[], Some(close))?;
        if !self.at_punct(close) {
            return self.err(format!("unbalanced `{open}`"));
        }
        self.pos += 1;
        self.close(node);
        self.leave();
        Ok(())
    }

    /// Consumes identifiers, literals, operators and bracket groups until a
    /// stop punctuation, the `closer` of an enclosing group, or (outside of
    /// groups) a structural keyword.
    fn flat(&mut self, parent: NodeId, stops: &[&str], closer: Option<&str>) -> PResult<()> {
        while let Some(t) = self.peek() {
            if t.kind == TokenKind::Punct {
                if stops.contains(&t.text.as_str()) || closer == Some(t.text.as_str()) {
                    return Ok(());
                }
                match t.text.as_str() {
                    "(" | "[" | "{" | "'{" | "[*" | "[=" | "[->" => self.group(parent)?,
                    ")" | "]" | "}" => return self.err(format!("unbalanced `{}`", t.text)),
                    _ => self.pos += 1,
                }
                continue;
            }
            if closer.is_none()
                && (t.is_keyword("begin") || t.is_keyword("fork") || is_closing_keyword(t))
            {
                return Ok(());
            }
            match t.kind {
                TokenKind::Ident => self.identifier(parent),
                _ => self.pos += 1,
            }
        }
        Ok(())
    }
}
