//! Execution results: a parent [`ResultBuffer`] holding one [`ChildResult`]
//! per executed circuit, in submission order.
//!
//! # Text format
//!
//! ```text
//! qpuvirt-buffer 1
//! qubits <n>
//! meta <key> <int|float|text> <value>     (sorted by key)
//! child <name>                            (name runs to end of line)
//! shots <n>
//! expectation <float>                     (optional)
//! count <bitstring> <n>                   (sorted by bitstring)
//! prob <bitstring> <float>                (sorted by bitstring)
//! end
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! finite `f64` exactly. A buffer without children serializes to the two
//! header lines plus its metadata.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::ops::Range;

use thiserror::Error;

/// Bitstring → number of shots that produced it.
pub type Counts = BTreeMap<String, u64>;

/// Bitstring → exact probability.
pub type Distribution = BTreeMap<String, f64>;

const HEADER: &str = "qpuvirt-buffer 1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BufferError {
    #[error("child `{0}` already present")]
    DuplicateName(String),
    #[error("child name must be a nonempty single line")]
    InvalidName,
    #[error("metadata key `{0}` must be nonempty without whitespace")]
    InvalidKey(String),
    #[error("block ranges leave indices {0:?} uncovered")]
    CoverageGap(Range<usize>),
    #[error("block {0:?} overlaps an earlier block")]
    CoverageOverlap(Range<usize>),
    #[error("block {range:?} holds {actual} children")]
    BlockSize { range: Range<usize>, actual: usize },
    #[error("local buffer has {local} qubits, global has {global}")]
    QubitMismatch { global: usize, local: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetaValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<i64> for MetaValue {
    fn from(v: i64) -> Self {
        MetaValue::Int(v)
    }
}

impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        MetaValue::Float(v)
    }
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Text(v.to_string())
    }
}

impl From<String> for MetaValue {
    fn from(v: String) -> Self {
        MetaValue::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChildResult {
    pub name: String,
    pub counts: Counts,
    pub expectation: Option<f64>,
    pub shots: u64,
    /// Exact outcome distribution, filled only by probability-mode execution.
    pub probabilities: Distribution,
}

impl ChildResult {
    pub fn with_expectation(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            expectation: Some(value),
            ..Self::default()
        }
    }

    pub fn with_counts(name: impl Into<String>, counts: Counts) -> Self {
        let shots = counts.values().sum();
        Self {
            name: name.into(),
            counts,
            shots,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBuffer {
    n_qubits: usize,
    children: Vec<ChildResult>,
    metadata: BTreeMap<String, MetaValue>,
    index: HashMap<String, usize>,
}

impl ResultBuffer {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            children: Vec::new(),
            metadata: BTreeMap::new(),
            index: HashMap::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn children(&self) -> &[ChildResult] {
        &self.children
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn child(&self, name: &str) -> Option<&ChildResult> {
        self.index.get(name).map(|&i| &self.children[i])
    }

    pub fn metadata(&self) -> &BTreeMap<String, MetaValue> {
        &self.metadata
    }

    pub fn set_metadata(
        &mut self,
        key: impl Into<String>,
        value: impl Into<MetaValue>,
    ) -> Result<(), BufferError> {
        let key = key.into();
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(BufferError::InvalidKey(key));
        }
        self.metadata.insert(key, value.into());
        Ok(())
    }

    pub fn append_child(&mut self, child: ChildResult) -> Result<(), BufferError> {
        if child.name.is_empty() || child.name.contains(['\n', '\r']) {
            return Err(BufferError::InvalidName);
        }
        if self.index.contains_key(&child.name) {
            return Err(BufferError::DuplicateName(child.name));
        }
        self.index.insert(child.name.clone(), self.children.len());
        self.children.push(child);
        Ok(())
    }

    /// Expectation values in child order; `None` where a child has none.
    pub fn expectations(&self) -> Vec<Option<f64>> {
        self.children.iter().map(|c| c.expectation).collect()
    }

    pub fn serialize(&self) -> String {
        self.to_string()
    }

    pub fn deserialize(text: &str) -> Result<Self, BufferError> {
        parse_buffer(text)
    }
}

/// A worker's private buffer tagged with the global indices it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBuffer {
    pub range: Range<usize>,
    pub buffer: ResultBuffer,
}

/// Orders the children of `locals` by global index, checking that the block
/// ranges are disjoint, start at 0, leave no gaps, and match each local's
/// child count.
pub fn ordered_children(locals: &[LocalBuffer]) -> Result<Vec<&ChildResult>, BufferError> {
    let mut order: Vec<&LocalBuffer> = locals.iter().collect();
    order.sort_by_key(|l| (l.range.start, l.range.end));
    let mut next = 0;
    let mut out = Vec::with_capacity(order.last().map_or(0, |l| l.range.end));
    for local in order {
        let range = local.range.clone();
        if range.start > next {
            return Err(BufferError::CoverageGap(next..range.start));
        }
        if range.start < next || range.end < range.start {
            return Err(BufferError::CoverageOverlap(range));
        }
        if local.buffer.len() != range.len() {
            return Err(BufferError::BlockSize {
                range,
                actual: local.buffer.len(),
            });
        }
        out.extend(local.buffer.children());
        next = range.end;
    }
    Ok(out)
}

/// Appends the children of `locals` to `global` in ascending global-index
/// order, as serial execution would have produced them. `global` is left
/// untouched on error.
pub fn merge(global: &mut ResultBuffer, locals: &[LocalBuffer]) -> Result<(), BufferError> {
    for l in locals {
        if l.buffer.n_qubits() != global.n_qubits() {
            return Err(BufferError::QubitMismatch {
                global: global.n_qubits(),
                local: l.buffer.n_qubits(),
            });
        }
    }
    let children = ordered_children(locals)?;
    let mut names: HashSet<&str> = HashSet::with_capacity(children.len());
    for c in &children {
        if global.index.contains_key(&c.name) || !names.insert(&c.name) {
            return Err(BufferError::DuplicateName(c.name.clone()));
        }
    }
    for c in children {
        global.append_child(c.clone())?;
    }
    Ok(())
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl fmt::Display for ResultBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        writeln!(out, "{HEADER}")?;
        writeln!(out, "qubits {}", self.n_qubits)?;
        for (k, v) in &self.metadata {
            match v {
                MetaValue::Int(i) => writeln!(out, "meta {k} int {i}")?,
                MetaValue::Float(x) => writeln!(out, "meta {k} float {}", fmt_float(*x))?,
                MetaValue::Text(s) => writeln!(out, "meta {k} text {}", s.replace('\n', " "))?,
            }
        }
        for c in &self.children {
            writeln!(out, "child {}", c.name)?;
            writeln!(out, "shots {}", c.shots)?;
            if let Some(e) = c.expectation {
                writeln!(out, "expectation {}", fmt_float(e))?;
            }
            for (bits, n) in &c.counts {
                writeln!(out, "count {bits} {n}")?;
            }
            for (bits, p) in &c.probabilities {
                writeln!(out, "prob {bits} {}", fmt_float(*p))?;
            }
            writeln!(out, "end")?;
        }
        f.write_str(&out)
    }
}

fn parse_buffer(text: &str) -> Result<ResultBuffer, BufferError> {
    let err = |line: usize, message: &str| BufferError::Parse {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(err(1, "missing header")),
    }
    let n_qubits = match lines.next() {
        Some((ln, l)) => l
            .strip_prefix("qubits ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, "expected `qubits <n>`"))?,
        None => return Err(err(2, "missing qubit count")),
    };
    let mut buffer = ResultBuffer::new(n_qubits);
    let mut current: Option<ChildResult> = None;
    for (ln, line) in lines {
        let (keyword, rest) = line.split_once(' ').unwrap_or((line, ""));
        match (keyword, current.as_mut()) {
            ("meta", None) => {
                let mut parts = rest.splitn(3, ' ');
                let (Some(key), Some(kind), Some(value)) =
                    (parts.next(), parts.next(), parts.next())
                else {
                    return Err(err(ln, "expected `meta <key> <type> <value>`"));
                };
                let value = match kind {
                    "int" => MetaValue::Int(value.parse().map_err(|_| err(ln, "bad int"))?),
                    "float" => MetaValue::Float(value.parse().map_err(|_| err(ln, "bad float"))?),
                    "text" => MetaValue::Text(value.to_string()),
                    _ => return Err(err(ln, "unknown metadata type")),
                };
                buffer.set_metadata(key, value)?;
            }
            ("child", None) => {
                current = Some(ChildResult {
                    name: rest.to_string(),
                    ..ChildResult::default()
                });
            }
            ("shots", Some(c)) => c.shots = rest.parse().map_err(|_| err(ln, "bad shot count"))?,
            ("expectation", Some(c)) => {
                c.expectation = Some(rest.parse().map_err(|_| err(ln, "bad expectation"))?)
            }
            ("count", Some(c)) => {
                let (bits, n) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(ln, "bad count line"))?;
                let n = n.parse().map_err(|_| err(ln, "bad count"))?;
                c.counts.insert(bits.to_string(), n);
            }
            ("prob", Some(c)) => {
                let (bits, p) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(ln, "bad prob line"))?;
                let p = p.parse().map_err(|_| err(ln, "bad probability"))?;
                c.probabilities.insert(bits.to_string(), p);
            }
            ("end", Some(_)) => {
                let child = current.take().expect("checked by match");
                buffer
                    .append_child(child)
                    .map_err(|e| err(ln, &e.to_string()))?;
            }
            _ => return Err(err(ln, &format!("unexpected `{keyword}`"))),
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "unterminated child"));
    }
    Ok(buffer)
}
