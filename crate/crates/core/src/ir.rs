//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered gate list over a fixed register. Rotation
//! angles are either literal radians or references into the circuit's ordered
//! parameter list; [`Circuit::bind`] substitutes a [`ParameterVector`] to make
//! every angle literal, which is what the backends require.
//!
//! The gate set is deliberately small: `H`, `X`, `CNOT`, `Ry`, `Rz` and a
//! terminal `MeasureAll`. New gates are added as [`Gate`] variants together with
//! a kernel in the statevector backend.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IrError {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("CNOT control and target must differ (both {0})")]
    RepeatedQubit(usize),
    #[error("parameter index {0} is not declared by the circuit")]
    UnknownParameter(usize),
    #[error("parameter `{0}` declared twice")]
    DuplicateParameter(String),
    #[error("expected {expected} parameter values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("a circuit needs at least one qubit")]
    EmptyRegister,
    #[error("cannot append a {other}-qubit circuit to a {n_qubits}-qubit circuit")]
    RegisterMismatch { n_qubits: usize, other: usize },
}

/// Index of a named parameter inside its circuit's parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Literal(f64),
    Param(ParamId),
}

impl Angle {
    pub fn literal(self) -> Option<f64> {
        match self {
            Angle::Literal(v) => Some(v),
            Angle::Param(_) => None,
        }
    }
}

impl From<f64> for Angle {
    fn from(v: f64) -> Self {
        Angle::Literal(v)
    }
}

impl From<ParamId> for Angle {
    fn from(p: ParamId) -> Self {
        Angle::Param(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Cnot {
        control: usize,
        target: usize,
    },
    Ry(usize, Angle),
    Rz(usize, Angle),
    /// Terminal measurement of the whole register in the computational basis.
    MeasureAll,
}

impl Gate {
    pub fn touches(&self, qubit: usize) -> bool {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Ry(q, _) | Gate::Rz(q, _) => q == qubit,
            Gate::Cnot { control, target } => control == qubit || target == qubit,
            Gate::MeasureAll => true,
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        match *self {
            Gate::Ry(_, a) | Gate::Rz(_, a) => Some(a),
            _ => None,
        }
    }

    fn with_angle(self, angle: Angle) -> Gate {
        match self {
            Gate::Ry(q, _) => Gate::Ry(q, angle),
            Gate::Rz(q, _) => Gate::Rz(q, angle),
            g => g,
        }
    }

    fn validate(&self, n_qubits: usize, n_params: usize) -> Result<(), IrError> {
        let check = |q: usize| {
            if q < n_qubits {
                Ok(())
            } else {
                Err(IrError::QubitOutOfRange { qubit: q, n_qubits })
            }
        };
        match *self {
            Gate::H(q) | Gate::X(q) => check(q),
            Gate::Ry(q, a) | Gate::Rz(q, a) => {
                check(q)?;
                match a {
                    Angle::Param(ParamId(i)) if i >= n_params => Err(IrError::UnknownParameter(i)),
                    _ => Ok(()),
                }
            }
            Gate::Cnot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target {
                    Err(IrError::RepeatedQubit(control))
                } else {
                    Ok(())
                }
            }
            Gate::MeasureAll => Ok(()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let angle = |a: &Angle| match a {
            Angle::Literal(v) => format!("{v}"),
            Angle::Param(ParamId(i)) => format!("p{i}"),
        };
        match self {
            Gate::H(q) => write!(f, "H({q})"),
            Gate::X(q) => write!(f, "X({q})"),
            Gate::Cnot { control, target } => write!(f, "CNOT({control},{target})"),
            Gate::Ry(q, a) => write!(f, "Ry[{}]({q})", angle(a)),
            Gate::Rz(q, a) => write!(f, "Rz[{}]({q})", angle(a)),
            Gate::MeasureAll => write!(f, "MeasureAll"),
        }
    }
}

/// Ordered angle values for a circuit's parameters, in radians.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Copy of `self` with entry `index` moved by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut values = self.0.clone();
        values[index] += delta;
        Self(values)
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    name: String,
    n_qubits: usize,
    params: Vec<String>,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(name: impl Into<String>, n_qubits: usize) -> Result<Self, IrError> {
        if n_qubits == 0 {
            return Err(IrError::EmptyRegister);
        }
        Ok(Self {
            name: name.into(),
            n_qubits,
            params: Vec::new(),
            gates: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn add_param(&mut self, name: impl Into<String>) -> Result<ParamId, IrError> {
        let name = name.into();
        if self.params.contains(&name) {
            return Err(IrError::DuplicateParameter(name));
        }
        self.params.push(name);
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self, IrError> {
        gate.validate(self.n_qubits, self.params.len())?;
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends every gate of `other`. Parameters of `other` are appended to
    /// this circuit's list and its references renumbered accordingly.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self, IrError> {
        if other.n_qubits != self.n_qubits {
            return Err(IrError::RegisterMismatch {
                n_qubits: self.n_qubits,
                other: other.n_qubits,
            });
        }
        let offset = self.params.len();
        for p in &other.params {
            self.add_param(p.clone())?;
        }
        for g in &other.gates {
            let g = match g.angle() {
                Some(Angle::Param(ParamId(i))) => g.with_angle(Angle::Param(ParamId(i + offset))),
                _ => *g,
            };
            self.gates.push(g);
        }
        Ok(self)
    }

    pub fn is_bound(&self) -> bool {
        self.gates
            .iter()
            .all(|g| !matches!(g.angle(), Some(Angle::Param(_))))
    }

    /// Substitutes `theta` for the circuit's parameters. The result has only
    /// literal angles and no declared parameters; gate order is unchanged.
    pub fn bind(&self, theta: &ParameterVector) -> Result<Circuit, IrError> {
        if theta.len() != self.params.len() {
            return Err(IrError::Dimension {
                expected: self.params.len(),
                actual: theta.len(),
            });
        }
        let gates = self
            .gates
            .iter()
            .map(|g| match g.angle() {
                Some(Angle::Param(ParamId(i))) => g.with_angle(Angle::Literal(theta.0[i])),
                _ => *g,
            })
            .collect();
        Ok(Circuit {
            name: self.name.clone(),
            n_qubits: self.n_qubits,
            params: Vec::new(),
            gates,
        })
    }

    /// Collapses every maximal run of `Ry` gates on one qubit, with no
    /// intervening gate touching that qubit, into a single `Ry` carrying the
    /// summed angle. The merged gate sits where the run started.
    ///
    /// Runs that contain a parameter reference are left alone; merging is
    /// only defined for literal angles.
    pub fn merge_adjacent_ry(&self) -> Circuit {
        let mut gates: Vec<Gate> = Vec::with_capacity(self.gates.len());
        // For each qubit, position in `gates` of a literal Ry that no later
        // gate has touched yet.
        let mut open: Vec<Option<usize>> = vec![None; self.n_qubits];
        for gate in &self.gates {
            if let Gate::Ry(q, Angle::Literal(theta)) = *gate {
                if let Some(pos) = open[q] {
                    if let Gate::Ry(_, Angle::Literal(acc)) = gates[pos] {
                        gates[pos] = Gate::Ry(q, Angle::Literal(acc + theta));
                        continue;
                    }
                }
                gates.push(*gate);
                open[q] = Some(gates.len() - 1);
                continue;
            }
            for (q, slot) in open.iter_mut().enumerate() {
                if gate.touches(q) {
                    *slot = None;
                }
            }
            gates.push(*gate);
        }
        Circuit {
            name: self.name.clone(),
            n_qubits: self.n_qubits,
            params: self.params.clone(),
            gates,
        }
    }

    /// Check that parameter names are distinct and every reference resolves.
    pub fn validate(&self) -> Result<(), IrError> {
        let mut seen = HashSet::new();
        for p in &self.params {
            if !seen.insert(p.as_str()) {
                return Err(IrError::DuplicateParameter(p.clone()));
            }
        }
        for g in &self.gates {
            g.validate(self.n_qubits, self.params.len())?;
        }
        Ok(())
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{} qubits]:", self.name, self.n_qubits)?;
        for g in &self.gates {
            write!(f, " {g}")?;
        }
        Ok(())
    }
}
