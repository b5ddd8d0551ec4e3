//! Virtual-QPU pool.
//!
//! [`VqpuPool`] decorates an [`Accelerator`]: a batch is split into contiguous
//! blocks, one per virtual QPU, and each block runs on its own worker thread
//! against a private backend instance and a private local buffer. Once every
//! worker has finished, the locals are merged into the caller's buffer in
//! global index order. Sampling seeds depend only on the global index, so the
//! result is identical to running the whole batch on one backend.
//!
//! The merge in [`consolidate`] is the seam for a multi-process transport:
//! anything that can deliver the tagged [`LocalBuffer`]s to one place can
//! reuse it unchanged.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::accelerator::{
    Accelerator, ConfigError, ExecError, Execution, ExecutionConfig, ExecutionMode,
};
use crate::buffer::{self, BufferError, ChildResult, LocalBuffer, ResultBuffer};
use crate::statevector::StatevectorBackend;

pub const N_VIRTUAL_QPUS_KEY: &str = "n-virtual-qpus";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VqpuPoolConfig {
    pub n_virtual_qpus: usize,
    pub base_seed: u64,
    pub mode: ExecutionMode,
    pub shots: u64,
}

impl Default for VqpuPoolConfig {
    fn default() -> Self {
        let exec = ExecutionConfig::default();
        Self {
            n_virtual_qpus: 1,
            base_seed: exec.seed,
            mode: exec.mode,
            shots: exec.shots,
        }
    }
}

impl VqpuPoolConfig {
    pub fn with_vqpus(n_virtual_qpus: usize) -> Self {
        Self {
            n_virtual_qpus,
            ..Self::default()
        }
    }

    /// Builds a configuration from string options: `n-virtual-qpus` plus the
    /// backend keys `shots`, `seed` and `mode`.
    pub fn from_options<'a>(
        options: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, ConfigError> {
        let mut exec = ExecutionConfig::default();
        let mut n_virtual_qpus = 1;
        for (key, value) in options {
            if key == N_VIRTUAL_QPUS_KEY {
                n_virtual_qpus = value.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                    ConfigError::InvalidValue {
                        key: key.into(),
                        value: value.into(),
                    }
                })?;
            } else {
                exec.set(key, value)?;
            }
        }
        Ok(Self {
            n_virtual_qpus,
            base_seed: exec.seed,
            mode: exec.mode,
            shots: exec.shots,
        })
    }

    pub fn execution_config(&self) -> ExecutionConfig {
        ExecutionConfig {
            shots: self.shots,
            seed: self.base_seed,
            mode: self.mode,
        }
    }
}

/// Contiguous slice `start..end` of a batch assigned to virtual QPU
/// `vqpu_id` (its colour).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub vqpu_id: usize,
    pub start: usize,
    pub end: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits `n_circuits` into `n_vqpus` contiguous blocks. The first
/// `n_circuits % n_vqpus` blocks get one extra circuit; surplus virtual QPUs
/// get empty blocks.
pub fn partition(n_circuits: usize, n_vqpus: usize) -> Vec<Block> {
    assert!(n_vqpus >= 1, "a pool has at least one virtual QPU");
    let base = n_circuits / n_vqpus;
    let extra = n_circuits % n_vqpus;
    let mut start = 0;
    (0..n_vqpus)
        .map(|vqpu_id| {
            let len = base + usize::from(vqpu_id < extra);
            let block = Block {
                vqpu_id,
                start,
                end: start + len,
            };
            start += len;
            block
        })
        .collect()
}

/// All-gather of worker results: the children of every local buffer, in
/// global index order.
pub fn consolidate(locals: &[LocalBuffer]) -> Result<Vec<ChildResult>, BufferError> {
    Ok(buffer::ordered_children(locals)?
        .into_iter()
        .cloned()
        .collect())
}

/// What a worker thread hands back: `Ok(None)` when it stopped early because
/// another worker failed.
type WorkerOutcome = std::thread::Result<Result<Option<ResultBuffer>, ExecError>>;

/// Parallel decorator over accelerators built by `factory`. Each worker
/// calls the factory once to obtain its private backend.
pub struct VqpuPool<F> {
    config: VqpuPoolConfig,
    factory: F,
}

impl VqpuPool<fn(&ExecutionConfig) -> StatevectorBackend> {
    pub fn statevector(config: VqpuPoolConfig) -> Result<Self, ConfigError> {
        Self::new(config, |c: &ExecutionConfig| StatevectorBackend::new(*c))
    }
}

impl<F, A> VqpuPool<F>
where
    F: Fn(&ExecutionConfig) -> A + Sync,
    A: Accelerator,
{
    pub fn new(config: VqpuPoolConfig, factory: F) -> Result<Self, ConfigError> {
        if config.n_virtual_qpus == 0 {
            return Err(ConfigError::InvalidValue {
                key: N_VIRTUAL_QPUS_KEY.into(),
                value: "0".into(),
            });
        }
        Ok(Self { config, factory })
    }

    pub fn config(&self) -> &VqpuPoolConfig {
        &self.config
    }

    /// Executes `executions` across the pool and appends the results to
    /// `global` in submission order, then records `vqpu_count` in its
    /// metadata. On failure `global` is left unchanged.
    pub fn execute_parallel(
        &mut self,
        global: &mut ResultBuffer,
        executions: &[Execution],
    ) -> Result<(), ExecError> {
        self.run(global, executions, 0)
    }

    fn run(
        &mut self,
        global: &mut ResultBuffer,
        executions: &[Execution],
        first_index: usize,
    ) -> Result<(), ExecError> {
        let mut seen = HashSet::with_capacity(executions.len());
        for e in executions {
            if !seen.insert(e.name.as_str()) {
                return Err(BufferError::DuplicateName(e.name.clone()).into());
            }
        }
        let exec_config = self.config.execution_config();
        let n_qubits = global.n_qubits();
        let blocks = partition(executions.len(), self.config.n_virtual_qpus);

        let locals = if self.config.n_virtual_qpus == 1 {
            let mut backend = (self.factory)(&exec_config);
            let mut local = ResultBuffer::new(n_qubits);
            backend.execute(&mut local, executions, first_index)?;
            vec![LocalBuffer {
                range: 0..executions.len(),
                buffer: local,
            }]
        } else {
            self.run_workers(&blocks, executions, first_index, &exec_config, n_qubits)?
        };

        buffer::merge(global, &locals)?;
        global.set_metadata("vqpu_count", self.config.n_virtual_qpus as i64)?;
        Ok(())
    }

    fn run_workers(
        &self,
        blocks: &[Block],
        executions: &[Execution],
        first_index: usize,
        exec_config: &ExecutionConfig,
        n_qubits: usize,
    ) -> Result<Vec<LocalBuffer>, ExecError> {
        let abort = AtomicBool::new(false);
        let factory = &self.factory;
        let abort = &abort;
        // Joining every handle is the synchronization point.
        let outcomes: Vec<(Block, WorkerOutcome)> = std::thread::scope(|scope| {
            let handles: Vec<_> = blocks
                .iter()
                .map(|&block| {
                    let handle = (!block.is_empty()).then(|| {
                        scope.spawn(move || {
                            let mut backend = factory(exec_config);
                            let mut local = ResultBuffer::new(n_qubits);
                            local.set_metadata("worker_id", block.vqpu_id as i64)?;
                            for (i, execution) in executions
                                .iter()
                                .enumerate()
                                .take(block.end)
                                .skip(block.start)
                            {
                                if abort.load(Ordering::Relaxed) {
                                    return Ok(None);
                                }
                                let one = std::slice::from_ref(execution);
                                if let Err(e) = backend.execute(&mut local, one, first_index + i) {
                                    abort.store(true, Ordering::Relaxed);
                                    return Err(e);
                                }
                            }
                            Ok(Some(local))
                        })
                    });
                    (block, handle)
                })
                .collect();
            handles
                .into_iter()
                .map(|(block, handle)| {
                    let outcome = match handle {
                        Some(h) => h.join(),
                        None => Ok(Ok(Some(ResultBuffer::new(n_qubits)))),
                    };
                    (block, outcome)
                })
                .collect()
        });

        let mut locals = Vec::with_capacity(outcomes.len());
        let mut failure: Option<ExecError> = None;
        for (block, outcome) in outcomes {
            match outcome {
                Ok(Ok(Some(buffer))) => locals.push(LocalBuffer {
                    range: block.start..block.end,
                    buffer,
                }),
                Ok(Ok(None)) => {}
                Ok(Err(e)) => {
                    failure.get_or_insert(e);
                }
                Err(_) => {
                    failure.get_or_insert(ExecError::WorkerPanicked(block.vqpu_id));
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(locals),
        }
    }
}

impl<F, A> Accelerator for VqpuPool<F>
where
    F: Fn(&ExecutionConfig) -> A + Sync,
    A: Accelerator,
{
    fn name(&self) -> &str {
        "vqpu-pool"
    }

    fn execute(
        &mut self,
        buffer: &mut ResultBuffer,
        executions: &[Execution],
        first_index: usize,
    ) -> Result<(), ExecError> {
        self.run(buffer, executions, first_index)
    }
}
