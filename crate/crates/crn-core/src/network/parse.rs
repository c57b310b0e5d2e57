//! Line-oriented network text format.
//!
//! One statement per line: `complex -> complex` or `complex <-> complex`
//! (the latter expands to both directions). `#` starts a comment. A complex
//! is `0` or terms joined by `+`, each term an optional positive coefficient
//! followed by a species name. The species universe and its order are fixed
//! by first appearance.

use super::{Complex, Reaction, ReactionNetwork};
use crate::{CrnError, Result};
use std::collections::HashMap;

/// Vertex coordinate restriction applied while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    /// Coordinates must be nonnegative integers.
    #[default]
    Integer,
    /// Coordinates must lie in {0} or [1, inf).
    Real,
}

/// Parses network text in the default integer mode.
pub fn parse_network(text: &str) -> Result<ReactionNetwork> {
    parse_network_with(text, ValidationMode::Integer)
}

/// Parses network text with an explicit coordinate restriction.
pub fn parse_network_with(text: &str, mode: ValidationMode) -> Result<ReactionNetwork> {
    Parser::new(mode).run(text)
}

type SparseComplex = Vec<(usize, f64)>; // (species index, coefficient), sorted

struct Parser {
    mode: ValidationMode,
    species: Vec<String>,
    species_idx: HashMap<String, usize>,
    vertices: Vec<SparseComplex>,
    vertex_idx: HashMap<Vec<(usize, u64)>, usize>,
    edges: Vec<Reaction>,
    edge_set: HashMap<(usize, usize), (usize, usize)>, // -> first occurrence position
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    text: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(line_no: usize, text: &'a str) -> Self {
        Cursor { chars: text.chars().collect(), pos: 0, line: line_no, text }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn err(&self, col: usize, msg: impl Into<String>) -> CrnError {
        CrnError::Parse { line: self.line, col, msg: msg.into() }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.text
            .get(self.char_byte_offset()..)
            .map(|rest| rest.starts_with(s))
            .unwrap_or(false)
    }

    fn char_byte_offset(&self) -> usize {
        self.chars[..self.pos].iter().map(|c| c.len_utf8()).sum()
    }
}

impl Parser {
    fn new(mode: ValidationMode) -> Self {
        Parser {
            mode,
            species: Vec::new(),
            species_idx: HashMap::new(),
            vertices: Vec::new(),
            vertex_idx: HashMap::new(),
            edges: Vec::new(),
            edge_set: HashMap::new(),
        }
    }

    fn run(mut self, text: &str) -> Result<ReactionNetwork> {
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            if content.trim().is_empty() {
                continue;
            }
            self.statement(line_no, content)?;
        }
        if self.edges.is_empty() {
            return Err(CrnError::Parse {
                line: 1,
                col: 1,
                msg: "network text contains no reactions".into(),
            });
        }
        let n = self.species.len();
        let complexes = self
            .vertices
            .iter()
            .map(|sparse| {
                let mut coords = vec![0.0; n];
                for &(k, c) in sparse {
                    coords[k] = c;
                }
                Complex::new(coords)
            })
            .collect();
        ReactionNetwork::new(self.species, complexes, self.edges)
    }

    fn statement(&mut self, line_no: usize, content: &str) -> Result<()> {
        let mut cur = Cursor::new(line_no, content);
        cur.skip_ws();
        let stmt_col = cur.col();
        let lhs = self.complex(&mut cur)?;
        cur.skip_ws();
        let reversible = if cur.starts_with("<->") {
            cur.pos += 3;
            true
        } else if cur.starts_with("->") {
            cur.pos += 2;
            false
        } else {
            return Err(cur.err(cur.col(), "expected '->' or '<->'"));
        };
        let rhs = self.complex(&mut cur)?;
        cur.skip_ws();
        if cur.peek().is_some() {
            return Err(cur.err(cur.col(), "unexpected trailing input after reaction"));
        }
        let src = self.intern_vertex(lhs);
        let tgt = self.intern_vertex(rhs);
        if src == tgt {
            return Err(cur.err(stmt_col, "reaction connects a complex to itself"));
        }
        self.add_edge(&cur, stmt_col, src, tgt)?;
        if reversible {
            self.add_edge(&cur, stmt_col, tgt, src)?;
        }
        Ok(())
    }

    fn add_edge(&mut self, cur: &Cursor, col: usize, src: usize, tgt: usize) -> Result<()> {
        if let Some(&(l, c)) = self.edge_set.get(&(src, tgt)) {
            return Err(cur.err(
                col,
                format!("duplicate reaction; first written at line {l}, column {c}"),
            ));
        }
        self.edge_set.insert((src, tgt), (cur.line, col));
        self.edges.push(Reaction { source: src, target: tgt });
        Ok(())
    }

    fn intern_vertex(&mut self, sparse: SparseComplex) -> usize {
        let key: Vec<(usize, u64)> = sparse.iter().map(|&(k, c)| (k, c.to_bits())).collect();
        if let Some(&v) = self.vertex_idx.get(&key) {
            return v;
        }
        let v = self.vertices.len();
        self.vertices.push(sparse);
        self.vertex_idx.insert(key, v);
        v
    }

    /// Parses one complex, returning sorted (species, coefficient) pairs.
    /// Repeated species within a complex accumulate.
    fn complex(&mut self, cur: &mut Cursor) -> Result<SparseComplex> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        let mut first = true;
        loop {
            cur.skip_ws();
            let term_col = cur.col();
            let coeff = self.number(cur)?;
            cur.skip_ws();
            let name_start = cur.col();
            let name = ident(cur);
            match (coeff, name) {
                (Some((c, num_col)), None) => {
                    // A bare number is only the zero complex: a lone "0".
                    if c != 0.0 {
                        return Err(cur.err(num_col, "number without a species name"));
                    }
                    if !first || !acc.is_empty() {
                        return Err(cur.err(num_col, "zero complex cannot appear in a sum"));
                    }
                    cur.skip_ws();
                    if matches!(cur.peek(), Some('+')) {
                        return Err(cur.err(cur.col(), "zero complex cannot appear in a sum"));
                    }
                    return Ok(Vec::new());
                }
                (coeff, Some(name)) => {
                    let c = match coeff {
                        Some((c, num_col)) => {
                            if c <= 0.0 {
                                return Err(cur.err(
                                    num_col,
                                    "coefficient must be positive; omit the term instead",
                                ));
                            }
                            self.check_coeff(cur, num_col, c)?;
                            c
                        }
                        None => 1.0,
                    };
                    let k = self.intern_species(name);
                    *acc.entry(k).or_insert(0.0) += c;
                }
                (None, None) => {
                    return Err(cur.err(
                        name_start.max(term_col),
                        "expected a complex: species term or 0",
                    ));
                }
            }
            cur.skip_ws();
            if matches!(cur.peek(), Some('+')) {
                cur.pos += 1;
                first = false;
            } else {
                break;
            }
        }
        let mut sparse: SparseComplex = acc.into_iter().collect();
        sparse.sort_unstable_by_key(|&(k, _)| k);
        Ok(sparse)
    }

    fn check_coeff(&self, cur: &Cursor, col: usize, c: f64) -> Result<()> {
        match self.mode {
            ValidationMode::Integer => {
                if c.fract() != 0.0 {
                    return Err(cur.err(col, "non-integer coefficient in integer mode"));
                }
            }
            ValidationMode::Real => {
                if c < 1.0 {
                    return Err(cur.err(col, "coefficient in (0, 1) not allowed in real mode"));
                }
            }
        }
        Ok(())
    }

    fn intern_species(&mut self, name: String) -> usize {
        if let Some(&k) = self.species_idx.get(&name) {
            return k;
        }
        let k = self.species.len();
        self.species.push(name.clone());
        self.species_idx.insert(name, k);
        k
    }

    /// Parses an optional nonnegative numeric literal, returning the value
    /// and its starting column.
    fn number(&self, cur: &mut Cursor) -> Result<Option<(f64, usize)>> {
        let start = cur.pos;
        let col = cur.col();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.pos += 1;
        }
        if matches!(cur.peek(), Some('.')) {
            let dot = cur.pos;
            cur.pos += 1;
            let mut digits = false;
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.pos += 1;
                digits = true;
            }
            if !digits {
                return Err(cur.err(dot + 1, "expected digits after decimal point"));
            }
        }
        if cur.pos == start {
            return Ok(None);
        }
        let text: String = cur.chars[start..cur.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some((v, col))),
            _ => Err(cur.err(col, format!("invalid number '{text}'"))),
        }
    }
}

fn ident(cur: &mut Cursor) -> Option<String> {
    match cur.peek() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return None,
    }
    let start = cur.pos;
    cur.pos += 1;
    while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
        cur.pos += 1;
    }
    Some(cur.chars[start..cur.pos].iter().collect())
}
