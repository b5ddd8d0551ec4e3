//! The backend-agnostic execution contract.
//!
//! An [`Accelerator`] runs a batch of [`Execution`]s serially and appends one
//! child per execution to a [`ResultBuffer`], in input order. The virtual-QPU
//! pool decorates any accelerator with parallel execution.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::buffer::{BufferError, ResultBuffer};
use crate::ir::Circuit;
use crate::observables::{ObservableError, PauliTerm};

pub const DEFAULT_SHOTS: u64 = 8192;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("register of {0} qubits outside the supported range 1..=30")]
    Capacity(usize),
    #[error("circuit has unbound parameter `{0}`")]
    Unbound(String),
    #[error("circuit has {circuit} qubits, buffer has {buffer}")]
    QubitMismatch { circuit: usize, buffer: usize },
    #[error("expectation mode needs an observable term")]
    MissingObservable,
    #[error("shots must be at least 1")]
    NoShots,
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("circuit `{name}`: {source}")]
    Circuit {
        name: String,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("worker {0} panicked")]
    WorkerPanicked(usize),
}

impl ExecError {
    pub fn circuit(name: impl Into<String>, source: impl Into<SimError>) -> Self {
        ExecError::Circuit {
            name: name.into(),
            source: source.into(),
        }
    }

    /// Name of the failing circuit, when the failure is tied to one.
    pub fn circuit_name(&self) -> Option<&str> {
        match self {
            ExecError::Circuit { name, .. } => Some(name),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`")]
    InvalidValue { key: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// Exact `<P>` of the execution's observable term, evaluated directly.
    #[default]
    Expectation,
    /// Sampled bitstring counts in the term's measurement basis.
    Counts,
    /// Exact outcome distribution (infinite-shot limit of `Counts`).
    Probabilities,
}

impl FromStr for ExecutionMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expectation" => Ok(Self::Expectation),
            "counts" => Ok(Self::Counts),
            "probabilities" => Ok(Self::Probabilities),
            _ => Err(ConfigError::InvalidValue {
                key: "mode".into(),
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Expectation => "expectation",
            Self::Counts => "counts",
            Self::Probabilities => "probabilities",
        })
    }
}

/// Backend configuration: keys `shots`, `seed` and `mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionConfig {
    pub shots: u64,
    /// Base seed; execution `i` of a batch samples with `seed + i`.
    pub seed: u64,
    pub mode: ExecutionMode,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            seed: DEFAULT_SEED,
            mode: ExecutionMode::default(),
        }
    }
}

impl ExecutionConfig {
    /// Applies one `key = value` option.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let invalid = || ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
        };
        match key {
            "shots" => self.shots = value.parse().ok().filter(|&s| s > 0).ok_or_else(invalid)?,
            "seed" => self.seed = value.parse().map_err(|_| invalid())?,
            "mode" => self.mode = value.parse()?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn from_options<'a>(
        options: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (k, v) in options {
            config.set(k, v)?;
        }
        Ok(config)
    }

    pub fn seed_for(&self, global_index: usize) -> u64 {
        self.seed.wrapping_add(global_index as u64)
    }
}

/// One circuit execution in a batch. Batches often run one circuit against
/// many observable terms, so the circuit is shared.
#[derive(Debug, Clone)]
pub struct Execution {
    /// Child name; unique within the batch.
    pub name: String,
    pub circuit: Arc<Circuit>,
    /// Term to measure. Required in expectation mode; in the sampling modes
    /// it selects the measurement basis, and `None` means the Z basis.
    pub observable: Option<PauliTerm>,
}

impl Execution {
    pub fn new(
        name: impl Into<String>,
        circuit: Arc<Circuit>,
        observable: Option<PauliTerm>,
    ) -> Self {
        Self {
            name: name.into(),
            circuit,
            observable,
        }
    }

    /// Execution named after its observable, as measurement children are
    /// conventionally named.
    pub fn measuring(circuit: Arc<Circuit>, term: PauliTerm) -> Self {
        Self {
            name: term.label(),
            circuit,
            observable: Some(term),
        }
    }
}

pub trait Accelerator {
    fn name(&self) -> &str;

    /// Runs `executions` in order, appending one child per execution to
    /// `buffer`. `first_index` is the batch-global index of `executions[0]`
    /// and fixes the sampling seeds.
    fn execute(
        &mut self,
        buffer: &mut ResultBuffer,
        executions: &[Execution],
        first_index: usize,
    ) -> Result<(), ExecError>;
}
