//! Token stream shared by the RTL parser and the assertion tokenizer.
//!
//! The lexer understands enough of Verilog/SystemVerilog to separate
//! identifiers from keywords, literals, comments and directives. It never
//! panics on arbitrary input; malformed comments and strings are reported
//! with the byte offset where they start.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Plain, escaped or hierarchical (`a.b.c`) identifier.
    Ident,
    /// Reserved word.
    Keyword,
    /// `$name` system task or function.
    SystemName,
    /// Sized, based, real or unbased literal.
    Number,
    Str,
    /// A `` `name `` macro usage or a full directive line.
    Directive,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
    pub text: String,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == k
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: &'static str,
}

// Longest first so that greedy matching picks `|->` over `|`.
const PUNCTS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "==?", "!=?", "|->", "|=>", "<<<", ">>>", "<<=", ">>=", "->>",
    "<->", "[*]", "[+]", "[->", "[=", "[*", "##", "==", "!=", "<=", ">=", "&&", "||", "**", "<<",
    ">>", "->", "+:", "-:", "::", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "~&", "~|",
    "~^", "^~", "++", "--", "'{", "(", ")", "[", "]", "{", "}", ";", ",", ".", ":", "?", "@",
    "#", "=", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "'",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer { src, bytes: src.as_bytes(), pos: 0 }.run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

impl Lexer<'_> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut out = Vec::new();
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let start = self.pos;
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'/' && self.peek(1) == Some(b'/') {
                self.skip_line();
            } else if b == b'/' && self.peek(1) == Some(b'*') {
                self.skip_until(b"*/", 2, start, "unterminated block comment")?;
            } else if b == b'(' && self.peek(1) == Some(b'*') && self.peek(2) != Some(b')') {
                // attribute instance `(* ... *)`
                self.skip_until(b"*)", 2, start, "unterminated attribute")?;
            } else if b == b'"' {
                self.string(start)?;
                out.push(self.token(TokenKind::Str, start));
            } else if b == b'`' {
                out.push(self.directive(start));
            } else if b == b'\\' {
                out.push(self.escaped_ident(start));
            } else if b == b'$' && self.peek(1).is_some_and(is_ident_start) {
                self.pos += 1;
                self.eat_while(is_ident_char);
                out.push(self.token(TokenKind::SystemName, start));
            } else if is_ident_start(b) {
                out.push(self.ident(start));
            } else if b.is_ascii_digit() {
                self.number_from_digits();
                out.push(self.token(TokenKind::Number, start));
            } else if b == b'\'' && self.based_tail() {
                out.push(self.token(TokenKind::Number, start));
            } else if !b.is_ascii() {
                // consume the whole UTF-8 scalar so spans stay on char boundaries
                let ch = self.src[start..].chars().next().map_or(1, char::len_utf8);
                self.pos += ch;
                out.push(self.token(TokenKind::Punct, start));
            } else {
                let rest = &self.bytes[self.pos..];
                let len = PUNCTS
                    .iter()
                    .find(|p| rest.starts_with(p.as_bytes()))
                    .map_or(1, |p| p.len());
                self.pos += len;
                out.push(self.token(TokenKind::Punct, start));
            }
        }
        Ok(out)
    }

    fn token(&self, kind: TokenKind, start: usize) -> Token {
        Token { kind, span: start..self.pos, text: self.src[start..self.pos].to_string() }
    }

    fn eat_while(&mut self, f: impl Fn(u8) -> bool) {
        while self.pos < self.bytes.len() && f(self.bytes[self.pos]) {
            self.pos += 1;
        }
    }

    fn skip_line(&mut self) {
        self.eat_while(|b| b != b'\n');
    }

    fn skip_until(
        &mut self,
        end: &[u8],
        open_len: usize,
        start: usize,
        message: &'static str,
    ) -> Result<(), LexError> {
        self.pos += open_len;
        while self.pos < self.bytes.len() {
            if self.bytes[self.pos..].starts_with(end) {
                self.pos += end.len();
                return Ok(());
            }
            self.pos += 1;
        }
        Err(LexError { offset: start, message })
    }

    fn string(&mut self, start: usize) -> Result<(), LexError> {
        self.pos += 1;
        while let Some(b) = self.peek(0) {
            match b {
                b'\\' => self.pos += 2,
                b'"' => {
                    self.pos += 1;
                    return Ok(());
                }
                b'\n' => break,
                _ => self.pos += 1,
            }
        }
        self.pos = self.pos.min(self.bytes.len());
        Err(LexError { offset: start, message: "unterminated string literal" })
    }

    /// `` `define ``/`` `include `` and friends swallow the rest of the line
    /// (with backslash continuations); other backtick names are macro uses.
    fn directive(&mut self, start: usize) -> Token {
        self.pos += 1;
        self.eat_while(is_ident_char);
        let name = &self.src[start + 1..self.pos];
        if matches!(
            name,
            "define" | "include" | "timescale" | "ifdef" | "ifndef" | "else" | "elsif" | "endif"
                | "undef" | "default_nettype" | "resetall" | "celldefine" | "endcelldefine"
                | "pragma" | "line" | "undefineall" | "begin_keywords" | "end_keywords"
        ) {
            while let Some(b) = self.peek(0) {
                if b == b'\n' && self.pos > 0 && self.bytes[self.pos - 1] != b'\\' {
                    break;
                }
                self.pos += 1;
            }
        }
        self.token(TokenKind::Directive, start)
    }

    fn escaped_ident(&mut self, start: usize) -> Token {
        self.pos += 1;
        self.eat_while(|b| !b.is_ascii_whitespace());
        let text = self.src[start + 1..self.pos].to_string();
        Token { kind: TokenKind::Ident, span: start..self.pos, text }
    }

    fn ident(&mut self, start: usize) -> Token {
        self.eat_while(is_ident_char);
        let word = &self.src[start..self.pos];
        if is_keyword(word) {
            return self.token(TokenKind::Keyword, start);
        }
        // hierarchical reference: only when segments are directly adjacent
        while self.peek(0) == Some(b'.') && self.peek(1).is_some_and(is_ident_start) {
            let save = self.pos;
            self.pos += 1;
            let seg = self.pos;
            self.eat_while(is_ident_char);
            if is_keyword(&self.src[seg..self.pos]) {
                self.pos = save;
                break;
            }
        }
        self.token(TokenKind::Ident, start)
    }

    fn number_from_digits(&mut self) {
        self.eat_while(|b| b.is_ascii_digit() || b == b'_');
        if self.peek(0) == Some(b'.') && self.peek(1).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
            self.eat_while(|b| b.is_ascii_digit() || b == b'_');
        }
        if matches!(self.peek(0), Some(b'e' | b'E'))
            && self.peek(1).is_some_and(|b| b.is_ascii_digit() || b == b'-' || b == b'+')
        {
            self.pos += 2;
            self.eat_while(|b| b.is_ascii_digit());
        }
        // size prefix with adjacent base, e.g. 8'hff
        if self.peek(0) == Some(b'\'') {
            let save = self.pos;
            if !self.based_tail() {
                self.pos = save;
            }
        }
        // time unit suffix such as `10ns`
        self.eat_while(is_ident_char);
    }

    /// At a `'`: consumes `'[s]b0101`, `'hFF`, `'0`, `'1`, `'x`, `'z`.
    fn based_tail(&mut self) -> bool {
        let mut i = 1;
        if matches!(self.peek(i), Some(b's' | b'S')) {
            i += 1;
        }
        match self.peek(i) {
            Some(b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H') => {
                i += 1;
                while self.peek(i).is_some_and(|b| b == b' ' || b == b'\t') {
                    i += 1;
                }
                let digits_start = i;
                while self
                    .peek(i)
                    .is_some_and(|b| b.is_ascii_hexdigit() || matches!(b, b'_' | b'x' | b'X' | b'z' | b'Z' | b'?'))
                {
                    i += 1;
                }
                if i == digits_start {
                    return false;
                }
                self.pos += i;
                true
            }
            Some(b'0' | b'1' | b'x' | b'X' | b'z' | b'Z') if i == 1 => {
                if self.peek(2).is_some_and(is_ident_char) {
                    return false;
                }
                self.pos += 2;
                true
            }
            _ => false,
        }
    }
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

/// IEEE 1800-2017 reserved words, sorted for binary search.
pub const KEYWORDS: &[&str] = &[
    "accept_on", "alias", "always", "always_comb", "always_ff", "always_latch", "and", "assert",
    "assign", "assume", "automatic", "before", "begin", "bind", "bins", "binsof", "bit", "break",
    "buf", "bufif0", "bufif1", "byte", "case", "casex", "casez", "cell", "chandle", "checker",
    "class", "clocking", "cmos", "config", "const", "constraint", "context", "continue", "cover",
    "covergroup", "coverpoint", "cross", "deassign", "default", "defparam", "design", "disable",
    "dist", "do", "edge", "else", "end", "endcase", "endchecker", "endclass", "endclocking",
    "endconfig", "endfunction", "endgenerate", "endgroup", "endinterface", "endmodule",
    "endpackage", "endprimitive", "endprogram", "endproperty", "endsequence", "endspecify",
    "endtable", "endtask", "enum", "event", "eventually", "expect", "export", "extends", "extern",
    "final", "first_match", "for", "force", "foreach", "forever", "fork", "forkjoin", "function",
    "generate", "genvar", "global", "highz0", "highz1", "if", "iff", "ifnone", "ignore_bins",
    "illegal_bins", "implements", "implies", "import", "incdir", "include", "initial", "inout",
    "input", "inside", "instance", "int", "integer", "interconnect", "interface", "intersect",
    "join", "join_any", "join_none", "large", "let", "liblist", "library", "local", "localparam",
    "logic", "longint", "macromodule", "matches", "medium", "modport", "module", "nand",
    "negedge", "nettype", "new", "nexttime", "nmos", "nor", "noshowcancelled", "not", "notif0",
    "notif1", "null", "or", "output", "package", "packed", "parameter", "pmos", "posedge",
    "primitive", "priority", "program", "property", "protected", "pull0", "pull1", "pulldown",
    "pullup", "pulsestyle_ondetect", "pulsestyle_onevent", "pure", "rand", "randc", "randcase",
    "randsequence", "rcmos", "real", "realtime", "ref", "reg", "reject_on", "release", "repeat",
    "restrict", "return", "rnmos", "rpmos", "rtran", "rtranif0", "rtranif1", "s_always",
    "s_eventually", "s_nexttime", "s_until", "s_until_with", "scalared", "sequence", "shortint",
    "shortreal", "showcancelled", "signed", "small", "soft", "solve", "specify", "specparam",
    "static", "string", "strong", "strong0", "strong1", "struct", "super", "supply0", "supply1",
    "sync_accept_on", "sync_reject_on", "table", "tagged", "task", "this", "throughout", "time",
    "timeprecision", "timeunit", "tran", "tranif0", "tranif1", "tri", "tri0", "tri1", "triand",
    "trior", "trireg", "type", "typedef", "union", "unique", "unique0", "unsigned", "until",
    "until_with", "untyped", "use", "uwire", "var", "vectored", "virtual", "void", "wait",
    "wait_order", "wand", "weak", "weak0", "weak1", "while", "wildcard", "wire", "with", "within",
    "wor", "xnor", "xor",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn keyword_table_is_sorted() {
        assert!(KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn based_literals_are_single_tokens() {
        let toks = kinds("x = 8'hFF + 'b0 + 4 'd3 + '1;");
        let nums: Vec<_> =
            toks.iter().filter(|(k, _)| *k == TokenKind::Number).map(|(_, t)| t.as_str()).collect();
        assert_eq!(nums, ["8'hFF", "'b0", "4", "'d3", "'1"]);
        assert!(!toks.iter().any(|(k, t)| *k == TokenKind::Ident && t != "x"));
    }

    #[test]
    fn implication_and_delay_operators() {
        let toks = kinds("a |-> ##1 b |=> c");
        let puncts: Vec<_> =
            toks.iter().filter(|(k, _)| *k == TokenKind::Punct).map(|(_, t)| t.as_str()).collect();
        assert_eq!(puncts, ["|->", "##", "|=>"]);
    }

    #[test]
    fn hierarchical_and_escaped_identifiers() {
        let toks = kinds("top.u1.sig \\bus[0] .port(x)");
        assert_eq!(toks[0], (TokenKind::Ident, "top.u1.sig".into()));
        assert_eq!(toks[1], (TokenKind::Ident, "bus[0]".into()));
        assert_eq!(toks[2], (TokenKind::Punct, ".".into()));
        assert_eq!(toks[3], (TokenKind::Ident, "port".into()));
    }

    #[test]
    fn comments_attributes_and_directives() {
        let toks = kinds("`define W 8\n(* keep *) a /* b */ // c\n @(*) `W");
        assert_eq!(toks[0].0, TokenKind::Directive);
        assert_eq!(toks[1], (TokenKind::Ident, "a".into()));
        assert_eq!(toks[2].1, "@");
        assert_eq!(toks[3].1, "(");
        assert_eq!(toks[4].1, "*");
        assert_eq!(toks.last().unwrap(), &(TokenKind::Directive, "`W".into()));
    }

    #[test]
    fn unterminated_comment_reports_offset() {
        let err = tokenize("a /* never closed").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = tokenize("x \"abc").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn non_ascii_input_does_not_split_chars() {
        let toks = tokenize("a ü b").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].text, "ü");
    }
}
