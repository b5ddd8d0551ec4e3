//! Parallel quantum-circuit execution over a pool of virtual QPUs.
//!
//! Circuits ([`ir`]) run on an [`accelerator::Accelerator`]; the
//! [`pool::VqpuPool`] decorator spreads a batch over several private backend
//! instances and consolidates their [`buffer::ResultBuffer`]s so the caller
//! sees exactly what a serial run would have produced. [`algorithms`] holds
//! the two gradient workloads that drive the pool.

pub mod accelerator;
pub mod algorithms;
pub mod buffer;
pub mod ir;
pub mod observables;
pub mod pool;
pub mod statevector;

pub use accelerator::{Accelerator, ExecError, Execution, ExecutionConfig, ExecutionMode};
pub use buffer::{ChildResult, Counts, Distribution, ResultBuffer};
pub use ir::{Angle, Circuit, Gate, ParameterVector};
pub use observables::{Observable, Pauli, PauliTerm};
pub use pool::{VqpuPool, VqpuPoolConfig};
pub use statevector::{StateVector, StatevectorBackend};
