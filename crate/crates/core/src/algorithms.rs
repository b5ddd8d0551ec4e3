//! Gradient workloads built on the pool: MC-VQE over the exciton-model
//! Hamiltonian and data-driven circuit learning (DDCL) against a target
//! distribution.
//!
//! Both use the parameter-shift rule. Every variational angle appears in
//! exactly one `Ry`/`Rz` gate, so the derivative of any expectation `f` with
//! respect to it is `(f(θ + π/2) - f(θ - π/2)) / 2` exactly.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, LN_2};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::accelerator::{ExecError, Execution, ExecutionMode};
use crate::buffer::{ChildResult, Distribution, ResultBuffer};
use crate::ir::{Angle, Circuit, Gate, IrError, ParameterVector};
use crate::observables::{aiem_term_count, Observable, ObservableError};
use crate::pool::{VqpuPool, VqpuPoolConfig};
use crate::statevector::bitstring;

/// Tolerance on the norm of CIS amplitudes.
pub const CIS_NORM_TOLERANCE: f64 = 1e-12;
/// Tolerance on the total mass of a probability distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("amplitudes have norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("distribution sums to {0}, expected 1")]
    NotADistribution(f64),
    #[error("expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("DDCL needs an even, nonzero number of qubits, got {0}")]
    OddQubits(usize),
    #[error("MC-VQE needs at least two monomers, got {0}")]
    TooFewMonomers(usize),
    #[error("{workload} cannot run in {mode} mode")]
    UnsupportedMode {
        workload: &'static str,
        mode: ExecutionMode,
    },
    #[error("bitstring `{0}` does not match the register")]
    BadBitstring(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("child `{0}` carries no result for the requested mode")]
    MissingResult(String),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Config(#[from] crate::accelerator::ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub gradient: Vec<f64>,
    /// Circuits executed for the parameter-shift rule.
    pub n_circuit_executions: usize,
    /// Circuits executed at the unshifted point (DDCL loss evaluation).
    pub n_reference_executions: usize,
    /// Loss at the unshifted parameters, when the workload computes it.
    pub loss: Option<f64>,
    /// Time spent inside the pool only.
    pub wall_time: Duration,
    pub buffer: ResultBuffer,
}

/// Uniform random unit vector (entries drawn from `[-1, 1]`, then normalized).
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Angles drawn uniformly from `[-π, π)`.
pub fn random_angles(len: usize, seed: u64) -> ParameterVector {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    (0..len)
        .map(|_| rng.random_range(-pi..pi))
        .collect::<Vec<_>>()
        .into()
}

/// Controlled-`Ry(theta)` from the native gate set.
fn push_controlled_ry(
    c: &mut Circuit,
    control: usize,
    target: usize,
    theta: f64,
) -> Result<(), IrError> {
    c.push(Gate::Ry(target, Angle::Literal(theta / 2.0)))?;
    c.push(Gate::Cnot { control, target })?;
    c.push(Gate::Ry(target, Angle::Literal(-theta / 2.0)))?;
    c.push(Gate::Cnot { control, target })?;
    Ok(())
}

/// Prepares `sum_k a_k |e_k>` from `|0...0>`, where `e_k` has only qubit `k`
/// set. `X` puts the excitation on qubit 0; then, for each `k`, a controlled
/// rotation splits the remaining amplitude between qubits `k` and `k + 1` and
/// a CNOT from `k + 1` back onto `k` clears qubit `k` on the moved branch.
pub fn w_state_prep(amplitudes: &[f64]) -> Result<Circuit, AlgorithmError> {
    let n = amplitudes.len();
    let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n == 0 || (norm - 1.0).abs() > CIS_NORM_TOLERANCE {
        return Err(AlgorithmError::NotNormalized(norm));
    }
    let mut c = Circuit::new("w_state", n)?;
    c.push(Gate::X(0))?;
    // tail[k] = sqrt(sum_{j >= k} a_j^2), the amplitude carried into qubit k.
    let mut tail = vec![0.0f64; n + 1];
    for k in (0..n).rev() {
        tail[k] = (tail[k + 1].powi(2) + amplitudes[k].powi(2)).sqrt();
    }
    for k in 0..n.saturating_sub(1) {
        // The last qubit keeps its own sign; earlier carriers stay positive.
        let carried = if k + 1 == n - 1 {
            amplitudes[n - 1]
        } else {
            tail[k + 1]
        };
        let theta = 2.0 * carried.atan2(amplitudes[k]);
        push_controlled_ry(&mut c, k, k + 1, theta)?;
        c.push(Gate::Cnot {
            control: k + 1,
            target: k,
        })?;
    }
    Ok(c)
}

/// MC-VQE size metrics for `n` monomers: Hamiltonian terms, variational
/// parameters and circuits per parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McvqeCounts {
    pub n_terms: usize,
    pub n_params: usize,
    pub n_executions: usize,
}

pub fn mcvqe_counts(n: usize) -> McvqeCounts {
    let n_terms = aiem_term_count(n);
    let n_params = mcvqe_parameter_count(n);
    McvqeCounts {
        n_terms,
        n_params,
        n_executions: 2 * n_terms * n_params,
    }
}

pub fn mcvqe_parameter_count(n: usize) -> usize {
    5 * n - 4
}

/// Entangler chain over pairs `(0,1), (1,2), ...`: each entangler is
/// `Ry⊗Ry, CNOT, Ry⊗Ry, CNOT, Ry⊗Ry`. The trailing `Ry` on the shared qubit
/// of one entangler merges with the leading `Ry` of the next, and every
/// surviving `Ry` becomes one parameter.
pub fn mcvqe_entanglers(n: usize) -> Result<Circuit, AlgorithmError> {
    if n < 2 {
        return Err(AlgorithmError::TooFewMonomers(n));
    }
    let mut raw = Circuit::new("entanglers", n)?;
    for a in 0..n - 1 {
        let b = a + 1;
        for stage in 0..3 {
            if stage > 0 {
                raw.push(Gate::Cnot {
                    control: a,
                    target: b,
                })?;
            }
            raw.push(Gate::Ry(a, Angle::Literal(0.0)))?;
            raw.push(Gate::Ry(b, Angle::Literal(0.0)))?;
        }
    }
    let merged = raw.merge_adjacent_ry();
    let mut out = Circuit::new("entanglers", n)?;
    for gate in merged.gates() {
        match *gate {
            Gate::Ry(q, _) => {
                let p = out.add_param(format!("theta_{}", out.n_params()))?;
                out.push(Gate::Ry(q, p.into()))?;
            }
            g => {
                out.push(g)?;
            }
        }
    }
    debug_assert_eq!(out.n_params(), mcvqe_parameter_count(n));
    Ok(out)
}

/// Parameterized MC-VQE circuit: CIS state preparation then the merged
/// entangler chain.
pub fn mcvqe_template(cis_amplitudes: &[f64]) -> Result<Circuit, AlgorithmError> {
    let mut c = w_state_prep(cis_amplitudes)?;
    c.append(&mcvqe_entanglers(cis_amplitudes.len())?)?;
    c.set_name("mcvqe");
    Ok(c)
}

pub fn mcvqe_ansatz(
    n: usize,
    cis_amplitudes: &[f64],
    theta: &ParameterVector,
) -> Result<Circuit, AlgorithmError> {
    if cis_amplitudes.len() != n {
        return Err(AlgorithmError::Dimension {
            expected: n,
            actual: cis_amplitudes.len(),
        });
    }
    let template = mcvqe_template(cis_amplitudes)?;
    if theta.len() != template.n_params() {
        return Err(AlgorithmError::Dimension {
            expected: template.n_params(),
            actual: theta.len(),
        });
    }
    Ok(template.bind(theta)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McvqeAnsatzSpec {
    pub n_monomers: usize,
    pub cis_amplitudes: Vec<f64>,
    pub theta: ParameterVector,
}

impl McvqeAnsatzSpec {
    pub fn new(cis_amplitudes: Vec<f64>, theta: ParameterVector) -> Result<Self, AlgorithmError> {
        let n = cis_amplitudes.len();
        if n < 2 {
            return Err(AlgorithmError::TooFewMonomers(n));
        }
        let norm = cis_amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > CIS_NORM_TOLERANCE {
            return Err(AlgorithmError::NotNormalized(norm));
        }
        if theta.len() != mcvqe_parameter_count(n) {
            return Err(AlgorithmError::Dimension {
                expected: mcvqe_parameter_count(n),
                actual: theta.len(),
            });
        }
        Ok(Self {
            n_monomers: n,
            cis_amplitudes,
            theta,
        })
    }

    /// Random CIS vector from `seed` and random angles from `seed + 1`.
    pub fn random(n: usize, seed: u64) -> Result<Self, AlgorithmError> {
        if n < 2 {
            return Err(AlgorithmError::TooFewMonomers(n));
        }
        Self::new(
            random_unit_vector(n, seed),
            random_angles(mcvqe_parameter_count(n), seed.wrapping_add(1)),
        )
    }

    pub fn circuit(&self) -> Result<Circuit, AlgorithmError> {
        mcvqe_ansatz(self.n_monomers, &self.cis_amplitudes, &self.theta)
    }
}

fn shift_label(k: usize, positive: bool) -> String {
    format!("theta_{k}{}", if positive { '+' } else { '-' })
}

/// The parameter-shift batch for [`mcvqe_gradient`]: one execution per
/// (shifted parameter vector, Hamiltonian term), ordered by parameter, then
/// shift sign, then term.
pub fn mcvqe_executions(
    hamiltonian: &Observable,
    spec: &McvqeAnsatzSpec,
) -> Result<Vec<Execution>, AlgorithmError> {
    let template = mcvqe_template(&spec.cis_amplitudes)?;
    let n_params = template.n_params();
    let mut executions = Vec::with_capacity(2 * n_params * hamiltonian.len());
    for k in 0..n_params {
        for positive in [true, false] {
            let delta = if positive { FRAC_PI_2 } else { -FRAC_PI_2 };
            let mut circuit = template.bind(&spec.theta.shifted(k, delta))?;
            let label = shift_label(k, positive);
            circuit.set_name(label.clone());
            let circuit = Arc::new(circuit);
            for term in &hamiltonian.terms {
                executions.push(Execution::new(
                    format!("{label} {}", term.label()),
                    circuit.clone(),
                    Some(term.clone()),
                ));
            }
        }
    }
    Ok(executions)
}

/// Energy gradient by the parameter-shift rule over the `2 N_H N_θ`
/// executions of [`mcvqe_executions`].
pub fn mcvqe_gradient(
    hamiltonian: &Observable,
    spec: &McvqeAnsatzSpec,
    pool_config: &VqpuPoolConfig,
) -> Result<GradientReport, AlgorithmError> {
    if pool_config.mode == ExecutionMode::Probabilities {
        return Err(AlgorithmError::UnsupportedMode {
            workload: "MC-VQE",
            mode: pool_config.mode,
        });
    }
    let n = spec.n_monomers;
    let n_params = mcvqe_parameter_count(n);
    let executions = mcvqe_executions(hamiltonian, spec)?;

    let mut pool = VqpuPool::statevector(*pool_config)?;
    let mut buffer = ResultBuffer::new(n);
    let start = Instant::now();
    pool.execute_parallel(&mut buffer, &executions)?;
    let wall_time = start.elapsed();

    let n_terms = hamiltonian.len();
    let energy = |children: &[ChildResult]| -> Result<f64, AlgorithmError> {
        let mut e = hamiltonian.constant;
        for (term, child) in hamiltonian.terms.iter().zip(children) {
            let value = child
                .expectation
                .ok_or_else(|| AlgorithmError::MissingResult(child.name.clone()))?;
            e += term.coefficient * value;
        }
        Ok(e)
    };
    let gradient = if n_terms == 0 {
        vec![0.0; n_params]
    } else {
        buffer
            .children()
            .chunks_exact(2 * n_terms)
            .map(|pair| {
                let (plus, minus) = pair.split_at(n_terms);
                Ok(0.5 * (energy(plus)? - energy(minus)?))
            })
            .collect::<Result<Vec<_>, AlgorithmError>>()?
    };

    Ok(GradientReport {
        gradient,
        n_circuit_executions: executions.len(),
        n_reference_executions: 0,
        loss: None,
        wall_time,
        buffer,
    })
}

fn check_distribution(p: &Distribution) -> Result<(), AlgorithmError> {
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE || p.values().any(|&v| v < 0.0) {
        return Err(AlgorithmError::NotADistribution(total));
    }
    Ok(())
}

/// Jensen–Shannon divergence with natural logarithms, in `[0, ln 2]`.
pub fn js_divergence(p: &Distribution, q: &Distribution) -> Result<f64, AlgorithmError> {
    check_distribution(p)?;
    check_distribution(q)?;
    let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    let mut sum = 0.0;
    for b in keys {
        let pb = p.get(b).copied().unwrap_or(0.0);
        let qb = q.get(b).copied().unwrap_or(0.0);
        let m = 0.5 * (pb + qb);
        let side = |x: f64| if x > 0.0 { x * (x / m).ln() } else { 0.0 };
        sum += side(pb) + side(qb);
    }
    Ok((0.5 * sum).clamp(0.0, LN_2))
}

pub fn ddcl_parameter_count(n_qubits: usize, n_layers: usize) -> usize {
    6 * n_qubits * n_layers
}

pub fn ddcl_execution_count(n_qubits: usize, n_layers: usize) -> usize {
    2 * ddcl_parameter_count(n_qubits, n_layers)
}

/// Parameterized DDCL circuit: Bell pairs on `(2i, 2i+1)`, then `n_layers`
/// layers of `Rz Ry Rz` on every qubit, a CNOT ladder, and `Rz Ry Rz` again.
pub fn ddcl_template(n_qubits: usize, n_layers: usize) -> Result<Circuit, AlgorithmError> {
    if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
        return Err(AlgorithmError::OddQubits(n_qubits));
    }
    let mut c = Circuit::new("ddcl", n_qubits)?;
    for i in 0..n_qubits / 2 {
        c.push(Gate::H(2 * i))?;
        c.push(Gate::Cnot {
            control: 2 * i,
            target: 2 * i + 1,
        })?;
    }
    let rotations = |c: &mut Circuit| -> Result<(), IrError> {
        for q in 0..n_qubits {
            for ry in [false, true, false] {
                let p = c.add_param(format!("theta_{}", c.n_params()))?;
                c.push(if ry {
                    Gate::Ry(q, p.into())
                } else {
                    Gate::Rz(q, p.into())
                })?;
            }
        }
        Ok(())
    };
    for _ in 0..n_layers {
        rotations(&mut c)?;
        for i in 0..n_qubits - 1 {
            c.push(Gate::Cnot {
                control: i,
                target: i + 1,
            })?;
        }
        rotations(&mut c)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdclSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub theta: ParameterVector,
    pub target: Distribution,
    pub shots: u64,
}

impl DdclSpec {
    pub fn new(
        n_qubits: usize,
        n_layers: usize,
        theta: ParameterVector,
        target: Distribution,
        shots: u64,
    ) -> Result<Self, AlgorithmError> {
        if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
            return Err(AlgorithmError::OddQubits(n_qubits));
        }
        let expected = ddcl_parameter_count(n_qubits, n_layers);
        if theta.len() != expected {
            return Err(AlgorithmError::Dimension {
                expected,
                actual: theta.len(),
            });
        }
        check_distribution(&target)?;
        if let Some(b) = target
            .keys()
            .find(|b| b.len() != n_qubits || b.bytes().any(|c| c != b'0' && c != b'1'))
        {
            return Err(AlgorithmError::BadBitstring(b.clone()));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            theta,
            target,
            shots,
        })
    }

    /// Random angles from `seed` and a random target from `seed + 1`.
    pub fn random(
        n_qubits: usize,
        n_layers: usize,
        shots: u64,
        seed: u64,
    ) -> Result<Self, AlgorithmError> {
        if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
            return Err(AlgorithmError::OddQubits(n_qubits));
        }
        Self::new(
            n_qubits,
            n_layers,
            random_angles(ddcl_parameter_count(n_qubits, n_layers), seed),
            random_distribution(n_qubits, seed.wrapping_add(1)),
            shots,
        )
    }
}

pub fn ddcl_circuit(spec: &DdclSpec) -> Result<Circuit, AlgorithmError> {
    Ok(ddcl_template(spec.n_qubits, spec.n_layers)?.bind(&spec.theta)?)
}

/// Random distribution over the `2^min(n, 10)` bitstrings whose qubits past
/// the tenth are all zero.
pub fn random_distribution(n_qubits: usize, seed: u64) -> Distribution {
    let m = n_qubits.min(10);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let weights: Vec<f64> = (0..1usize << m)
        .map(|_| rng.random_range(0.0..1.0) + 1e-6)
        .collect();
    let total: f64 = weights.iter().sum();
    let pad = "0".repeat(n_qubits - m);
    weights
        .into_iter()
        .enumerate()
        .map(|(k, w)| (bitstring(k, m) + &pad, w / total))
        .collect()
}

/// Reads `bitstring probability` lines; `#` starts a comment.
pub fn parse_distribution(text: &str) -> Result<Distribution, AlgorithmError> {
    let mut out = Distribution::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: &str| AlgorithmError::Parse {
            line,
            message: message.to_string(),
        };
        let mut parts = content.split_whitespace();
        let (Some(bits), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected `bitstring probability`"));
        };
        let p: f64 = p.parse().map_err(|_| err("bad probability"))?;
        if bits.bytes().any(|c| c != b'0' && c != b'1') {
            return Err(AlgorithmError::BadBitstring(bits.to_string()));
        }
        *out.entry(bits.to_string()).or_default() += p;
    }
    Ok(out)
}

pub fn load_distribution(path: &Path) -> Result<Distribution, AlgorithmError> {
    parse_distribution(&std::fs::read_to_string(path)?)
}

fn child_distribution(
    child: &ChildResult,
    mode: ExecutionMode,
) -> Result<Distribution, AlgorithmError> {
    match mode {
        ExecutionMode::Probabilities if !child.probabilities.is_empty() => {
            Ok(child.probabilities.clone())
        }
        ExecutionMode::Counts if child.shots > 0 => {
            let shots = child.shots as f64;
            Ok(child
                .counts
                .iter()
                .map(|(b, &n)| (b.clone(), n as f64 / shots))
                .collect())
        }
        _ => Err(AlgorithmError::MissingResult(child.name.clone())),
    }
}

/// JS-loss gradient. For every parameter the circuit runs at `θ_k ± π/2`
/// (`2 N_θ` executions), giving the exact derivative of each output
/// probability; one more execution at `θ` supplies the output distribution
/// `Q` at which the loss is linearized:
///
/// `dJS/dθ_k = Σ_b ½ ln(Q(b) / M(b)) · ½ (Q_{θ_k+}(b) - Q_{θ_k-}(b))`,
/// with `M = (P + Q) / 2`.
///
/// Outcomes with `Q(b) = 0` are skipped: `Q(b)` sits at its minimum there, so
/// its exact derivative vanishes.
pub fn ddcl_gradient(
    spec: &DdclSpec,
    pool_config: &VqpuPoolConfig,
) -> Result<GradientReport, AlgorithmError> {
    if pool_config.mode == ExecutionMode::Expectation {
        return Err(AlgorithmError::UnsupportedMode {
            workload: "DDCL",
            mode: pool_config.mode,
        });
    }
    let template = ddcl_template(spec.n_qubits, spec.n_layers)?;
    let n_params = template.n_params();
    let mut executions = Vec::with_capacity(2 * n_params + 1);
    for k in 0..n_params {
        for positive in [true, false] {
            let delta = if positive { FRAC_PI_2 } else { -FRAC_PI_2 };
            let label = shift_label(k, positive);
            let mut circuit = template.bind(&spec.theta.shifted(k, delta))?;
            circuit.set_name(label.clone());
            executions.push(Execution::new(label, Arc::new(circuit), None));
        }
    }
    let n_shifted = executions.len();
    let mut reference = template.bind(&spec.theta)?;
    reference.set_name("theta");
    executions.push(Execution::new("theta", Arc::new(reference), None));

    let config = VqpuPoolConfig {
        shots: spec.shots,
        ..*pool_config
    };
    let mut pool = VqpuPool::statevector(config)?;
    let mut buffer = ResultBuffer::new(spec.n_qubits);
    let start = Instant::now();
    pool.execute_parallel(&mut buffer, &executions)?;
    let wall_time = start.elapsed();

    let children = buffer.children();
    let q = child_distribution(&children[n_shifted], config.mode)?;
    let loss = js_divergence(&spec.target, &q)?;
    // ½ ln(Q/M) for every outcome with Q > 0.
    let sensitivity: Distribution = q
        .iter()
        .map(|(b, &qb)| {
            let pb = spec.target.get(b).copied().unwrap_or(0.0);
            (b.clone(), 0.5 * (qb / (0.5 * (pb + qb))).ln())
        })
        .collect();
    let gradient = children[..n_shifted]
        .chunks_exact(2)
        .map(|pair| {
            let plus = child_distribution(&pair[0], config.mode)?;
            let minus = child_distribution(&pair[1], config.mode)?;
            let mut g = 0.0;
            for (b, s) in &sensitivity {
                let dp = plus.get(b).copied().unwrap_or(0.0) - minus.get(b).copied().unwrap_or(0.0);
                g += s * 0.5 * dp;
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>, AlgorithmError>>()?;

    Ok(GradientReport {
        gradient,
        n_circuit_executions: n_shifted,
        n_reference_executions: 1,
        loss: Some(loss),
        wall_time,
        buffer,
    })
}
