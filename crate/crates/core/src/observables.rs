//! Pauli-string observables.
//!
//! Bit order convention, used throughout the crate: character `i` of a
//! bitstring is the measured value of qubit `i` (leftmost = qubit 0).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::buffer::Counts;
use crate::ir::{Circuit, Gate, IrError};

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: qubit {qubit} appears twice in one term")]
    DuplicateQubit { line: usize, qubit: usize },
    #[error("line {line}: negative qubit index in `{token}`")]
    NegativeQubit { line: usize, token: String },
    #[error("missing AIEM coefficient `{0}`")]
    MissingCoefficient(String),
    #[error("AIEM coefficient `{0}` refers to monomers outside the open chain")]
    BadCoefficientIndex(String),
    #[error("AIEM model needs at least two monomers, got {0}")]
    TooFewMonomers(usize),
    #[error("Y factor on qubit {0} has no measurement basis change")]
    UnsupportedBasis(usize),
    #[error("expectation needs at least one count")]
    EmptyCounts,
    #[error("bitstring `{bits}` too short for qubit {qubit}")]
    ShortBitstring { bits: String, qubit: usize },
    #[error("qubit {qubit} outside a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        })
    }
}

/// Weighted tensor product of single-qubit Paulis. An empty factor map is the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub factors: BTreeMap<usize, Pauli>,
    pub coefficient: f64,
}

impl PauliTerm {
    pub fn new(coefficient: f64, factors: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        Self {
            factors: factors.into_iter().collect(),
            coefficient,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.factors.keys().next_back().copied()
    }

    /// Operator part only, e.g. `X0 Z1`; `I` for the identity.
    pub fn label(&self) -> String {
        if self.factors.is_empty() {
            return "I".to_string();
        }
        self.factors
            .iter()
            .map(|(q, p)| format!("{p}{q}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.coefficient, self.label())
    }
}

/// Sum of Pauli terms plus an identity coefficient. Terms are kept merged:
/// no two share a factor map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observable {
    pub terms: Vec<PauliTerm>,
    pub constant: f64,
}

impl Observable {
    /// Adds `term`, folding it into an existing term with the same factors
    /// (or into the constant, for the identity).
    pub fn add_term(&mut self, term: PauliTerm) {
        if term.is_identity() {
            self.constant += term.coefficient;
            return;
        }
        match self.terms.iter_mut().find(|t| t.factors == term.factors) {
            Some(existing) => existing.coefficient += term.coefficient,
            None => self.terms.push(term),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.terms.iter().filter_map(PauliTerm::max_qubit).max()
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constant != 0.0 || self.terms.is_empty() {
            writeln!(f, "{:?} I", self.constant)?;
        }
        for t in &self.terms {
            writeln!(f, "{:?} {}", t.coefficient, t.label())?;
        }
        Ok(())
    }
}

impl FromStr for Observable {
    type Err = ObservableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pauli(s)
    }
}

/// Parses the line-oriented Hamiltonian format: `coeff FACTOR*` per line,
/// where a factor is `X3`, `Y0`, `Z12` or a bare `I`. `#` starts a comment.
pub fn parse_pauli(text: &str) -> Result<Observable, ObservableError> {
    let mut obs = Observable::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let coeff_tok = tokens.next().unwrap_or_default();
        let coefficient: f64 = coeff_tok
            .parse()
            .map_err(|_| ObservableError::MalformedToken {
                line,
                token: coeff_tok.to_string(),
            })?;
        let mut factors = BTreeMap::new();
        for tok in tokens {
            let malformed = || ObservableError::MalformedToken {
                line,
                token: tok.to_string(),
            };
            let mut chars = tok.chars();
            let pauli = match chars.next() {
                Some('I') => None,
                Some('X') => Some(Pauli::X),
                Some('Y') => Some(Pauli::Y),
                Some('Z') => Some(Pauli::Z),
                _ => return Err(malformed()),
            };
            let index = chars.as_str();
            if index.starts_with('-') {
                return Err(ObservableError::NegativeQubit {
                    line,
                    token: tok.to_string(),
                });
            }
            let Some(pauli) = pauli else {
                if !index.is_empty() && index.parse::<usize>().is_err() {
                    return Err(malformed());
                }
                continue;
            };
            let qubit: usize = index.parse().map_err(|_| malformed())?;
            if factors.insert(qubit, pauli).is_some() {
                return Err(ObservableError::DuplicateQubit { line, qubit });
            }
        }
        obs.add_term(PauliTerm {
            factors,
            coefficient,
        });
    }
    Ok(obs)
}

/// Coefficient table of the ab initio exciton model on an open chain of
/// monomers: one-body `X`/`Z` weights per monomer and `XX`, `XZ`, `ZX`, `ZZ`
/// weights per nearest-neighbour pair `(A, A+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AiemCoefficients {
    pub energy: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub xx: Vec<f64>,
    pub xz: Vec<f64>,
    pub zx: Vec<f64>,
    pub zz: Vec<f64>,
}

impl AiemCoefficients {
    pub fn n_monomers(&self) -> usize {
        self.x.len()
    }

    /// Every entry drawn uniformly from `[-1, 1]` in a fixed order.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut draw =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect() };
        let energy = draw(1)[0];
        let x = draw(n);
        let z = draw(n);
        let pairs = n.saturating_sub(1);
        let xx = draw(pairs);
        let xz = draw(pairs);
        let zx = draw(pairs);
        let zz = draw(pairs);
        Self {
            energy,
            x,
            z,
            xx,
            xz,
            zx,
            zz,
        }
    }

    /// Reads the coefficient file format for an `n`-monomer chain:
    /// `E v`, `X A v`, `Z A v`, `XX A B v`, `XZ A B v`, `ZX A B v`, `ZZ A B v`.
    /// Pair lines must name adjacent monomers `B = A + 1`.
    pub fn parse(text: &str, n: usize) -> Result<Self, ObservableError> {
        if n < 2 {
            return Err(ObservableError::TooFewMonomers(n));
        }
        let mut energy = None;
        let mut one = [vec![None; n], vec![None; n]];
        let mut two = [
            vec![None; n - 1],
            vec![None; n - 1],
            vec![None; n - 1],
            vec![None; n - 1],
        ];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let bad = |t: &str| ObservableError::MalformedToken {
                line,
                token: t.to_string(),
            };
            let num = |t: &str| t.parse::<f64>().map_err(|_| bad(t));
            let idx = |t: &str| t.parse::<usize>().map_err(|_| bad(t));
            match toks.as_slice() {
                ["E", v] => energy = Some(num(v)?),
                [kind @ ("X" | "Z"), a, v] => {
                    let a = idx(a)?;
                    if a >= n {
                        return Err(ObservableError::BadCoefficientIndex(content.to_string()));
                    }
                    one[usize::from(*kind == "Z")][a] = Some(num(v)?);
                }
                [kind @ ("XX" | "XZ" | "ZX" | "ZZ"), a, b, v] => {
                    let (a, b) = (idx(a)?, idx(b)?);
                    if b != a + 1 || b >= n {
                        return Err(ObservableError::BadCoefficientIndex(content.to_string()));
                    }
                    let slot = ["XX", "XZ", "ZX", "ZZ"]
                        .iter()
                        .position(|k| k == kind)
                        .unwrap();
                    two[slot][a] = Some(num(v)?);
                }
                [first, ..] => return Err(bad(first)),
                [] => unreachable!(),
            }
        }
        let energy = energy.ok_or_else(|| ObservableError::MissingCoefficient("E".into()))?;
        let collect = |vals: &[Option<f64>], label: &str, pair: bool| {
            vals.iter()
                .enumerate()
                .map(|(a, v)| {
                    v.ok_or_else(|| {
                        ObservableError::MissingCoefficient(if pair {
                            format!("{label} {a} {}", a + 1)
                        } else {
                            format!("{label} {a}")
                        })
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Self {
            energy,
            x: collect(&one[0], "X", false)?,
            z: collect(&one[1], "Z", false)?,
            xx: collect(&two[0], "XX", true)?,
            xz: collect(&two[1], "XZ", true)?,
            zx: collect(&two[2], "ZX", true)?,
            zz: collect(&two[3], "ZZ", true)?,
        })
    }

    pub fn from_file(path: &Path, n: usize) -> Result<Self, ObservableError> {
        Self::parse(&std::fs::read_to_string(path)?, n)
    }

    /// Inverse of [`AiemCoefficients::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("E {:?}\n", self.energy);
        for (a, v) in self.x.iter().enumerate() {
            out += &format!("X {a} {v:?}\n");
        }
        for (a, v) in self.z.iter().enumerate() {
            out += &format!("Z {a} {v:?}\n");
        }
        for (label, vals) in [
            ("XX", &self.xx),
            ("XZ", &self.xz),
            ("ZX", &self.zx),
            ("ZZ", &self.zz),
        ] {
            for (a, v) in vals.iter().enumerate() {
                out += &format!("{label} {a} {} {v:?}\n", a + 1);
            }
        }
        out
    }
}

/// Builds the exciton-model Hamiltonian on an open chain of `n` monomers:
/// `2n` one-body terms followed by `4(n-1)` nearest-neighbour terms, with the
/// energy offset held as the observable's constant.
pub fn aiem_hamiltonian(
    n: usize,
    coeffs: &AiemCoefficients,
) -> Result<Observable, ObservableError> {
    use Pauli::{X, Z};
    if n < 2 {
        return Err(ObservableError::TooFewMonomers(n));
    }
    let need = |vals: &[f64], len: usize, label: &str| {
        if vals.len() < len {
            Err(ObservableError::MissingCoefficient(format!(
                "{label} {}",
                vals.len()
            )))
        } else {
            Ok(())
        }
    };
    need(&coeffs.x, n, "X")?;
    need(&coeffs.z, n, "Z")?;
    need(&coeffs.xx, n - 1, "XX")?;
    need(&coeffs.xz, n - 1, "XZ")?;
    need(&coeffs.zx, n - 1, "ZX")?;
    need(&coeffs.zz, n - 1, "ZZ")?;

    let mut terms = Vec::with_capacity(6 * n - 4);
    for a in 0..n {
        terms.push(PauliTerm::new(coeffs.x[a], [(a, X)]));
        terms.push(PauliTerm::new(coeffs.z[a], [(a, Z)]));
    }
    for a in 0..n - 1 {
        let b = a + 1;
        terms.push(PauliTerm::new(coeffs.xx[a], [(a, X), (b, X)]));
        terms.push(PauliTerm::new(coeffs.xz[a], [(a, X), (b, Z)]));
        terms.push(PauliTerm::new(coeffs.zx[a], [(a, Z), (b, X)]));
        terms.push(PauliTerm::new(coeffs.zz[a], [(a, Z), (b, Z)]));
    }
    Ok(Observable {
        terms,
        constant: coeffs.energy,
    })
}

/// Number of measurable terms in the `n`-monomer exciton Hamiltonian.
pub fn aiem_term_count(n: usize) -> usize {
    6 * n - 4
}

/// Basis-change circuit that turns a Z-basis measurement into a measurement
/// of `term`: `H` on every X-factor qubit, then `MeasureAll`.
pub fn measurement_basis_circuit(term: &PauliTerm, n: usize) -> Result<Circuit, ObservableError> {
    let mut c = Circuit::new(term.label(), n)?;
    for (&q, &p) in &term.factors {
        if q >= n {
            return Err(ObservableError::QubitOutOfRange {
                qubit: q,
                n_qubits: n,
            });
        }
        match p {
            Pauli::X => {
                c.push(Gate::H(q))?;
            }
            Pauli::Z => {}
            Pauli::Y => return Err(ObservableError::UnsupportedBasis(q)),
        }
    }
    c.push(Gate::MeasureAll)?;
    Ok(c)
}

/// Estimates `<P>` (coefficient excluded) from counts taken in the term's
/// measurement basis, as the parity-weighted mean over factor qubits.
pub fn expectation_from_counts(counts: &Counts, term: &PauliTerm) -> Result<f64, ObservableError> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(ObservableError::EmptyCounts);
    }
    let mut signed: i128 = 0;
    for (bits, &count) in counts {
        let bytes = bits.as_bytes();
        let mut odd = false;
        for &q in term.factors.keys() {
            match bytes.get(q) {
                Some(b'1') => odd = !odd,
                Some(_) => {}
                None => {
                    return Err(ObservableError::ShortBitstring {
                        bits: bits.clone(),
                        qubit: q,
                    })
                }
            }
        }
        signed += if odd { -(count as i128) } else { count as i128 };
    }
    Ok(signed as f64 / total as f64)
}
