//! Dense statevector simulation.
//!
//! Amplitude index bit `i` is qubit `i`, so basis index `k` corresponds to the
//! bitstring whose character `i` is bit `i` of `k`.
//!
//! Sampling draws from `Xoshiro256PlusPlus` seeded through `seed_from_u64`
//! (SplitMix64 expansion); each shot takes one `next_u64`, keeps the top 53
//! bits as a uniform in `[0, 1)`, scales it by the total probability and
//! inverts the cumulative distribution. Any implementation following those
//! steps reproduces the same counts.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::accelerator::{
    Accelerator, ExecError, Execution, ExecutionConfig, ExecutionMode, SimError,
};
use crate::buffer::{ChildResult, Counts, Distribution, ResultBuffer};
use crate::ir::{Angle, Circuit, Gate};
use crate::observables::{
    expectation_from_counts, measurement_basis_circuit, Observable, Pauli, PauliTerm,
};

pub const MAX_QUBITS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn allocate(n: usize) -> Result<Self, SimError> {
        if !(1..=MAX_QUBITS).contains(&n) {
            return Err(SimError::Capacity(n));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits: n,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies one gate in place. Angles must be literal.
    pub fn apply(&mut self, gate: &Gate) -> Result<(), SimError> {
        let literal = |a: Angle| {
            a.literal()
                .ok_or_else(|| SimError::Unbound(format!("{gate}")))
        };
        match *gate {
            Gate::H(q) => self.pairwise(q, |a, b| {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::X(q) => self.pairwise(q, std::mem::swap),
            Gate::Ry(q, angle) => {
                let half = literal(angle)? / 2.0;
                let (s, c) = half.sin_cos();
                self.pairwise(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                });
            }
            Gate::Rz(q, angle) => {
                let half = literal(angle)? / 2.0;
                let lo = Complex64::from_polar(1.0, -half);
                let hi = Complex64::from_polar(1.0, half);
                self.pairwise(q, |a, b| {
                    *a *= lo;
                    *b *= hi;
                });
            }
            Gate::Cnot { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            Gate::MeasureAll => {}
        }
        Ok(())
    }

    pub fn run(&mut self, circuit: &Circuit) -> Result<(), SimError> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(SimError::QubitMismatch {
                circuit: circuit.n_qubits(),
                buffer: self.n_qubits,
            });
        }
        for g in circuit.gates() {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Simulates `circuit` from `|0...0>`.
    pub fn from_circuit(circuit: &Circuit) -> Result<Self, SimError> {
        let mut state = Self::allocate(circuit.n_qubits())?;
        state.run(circuit)?;
        Ok(state)
    }

    fn pairwise(&mut self, qubit: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << qubit;
        for chunk in self.amplitudes.chunks_exact_mut(stride << 1) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    /// Exact `<psi|P|psi>` for the operator part of `term` (coefficient
    /// excluded). Accepts X, Y and Z factors.
    pub fn pauli_expectation(&self, term: &PauliTerm) -> Result<f64, SimError> {
        let mut flip = 0usize;
        let mut phase_mask = 0usize;
        let mut n_y = 0u32;
        for (&q, &p) in &term.factors {
            if q >= self.n_qubits {
                return Err(crate::observables::ObservableError::QubitOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                }
                .into());
            }
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Z => phase_mask |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    phase_mask |= 1 << q;
                    n_y += 1;
                }
            }
        }
        // P|k> = i^{n_y} (-1)^{popcount(k & phase_mask)} |k ^ flip>
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, amp) in self.amplitudes.iter().enumerate() {
            let term = self.amplitudes[k ^ flip].conj() * amp;
            if (k & phase_mask).count_ones().is_multiple_of(2) {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let acc = match n_y % 4 {
            0 => acc,
            1 => acc * Complex64::i(),
            2 => -acc,
            _ => -acc * Complex64::i(),
        };
        Ok(acc.re)
    }

    /// `constant + sum_i c_i <P_i>`, evaluated exactly.
    pub fn expectation(&self, observable: &Observable) -> Result<f64, SimError> {
        let mut e = observable.constant;
        for t in &observable.terms {
            e += t.coefficient * self.pauli_expectation(t)?;
        }
        Ok(e)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Nonzero outcome probabilities keyed by bitstring.
    pub fn distribution(&self) -> Distribution {
        self.probabilities()
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (bitstring(k, self.n_qubits), p))
            .collect()
    }

    /// Draws `shots` computational-basis measurements.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<Counts, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        let mut cdf = Vec::with_capacity(self.amplitudes.len());
        let mut total = 0.0;
        let mut last_nonzero = 0;
        for (k, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = k;
            }
            total += p;
            cdf.push(total);
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut hits: std::collections::BTreeMap<usize, u64> = Default::default();
        for _ in 0..shots {
            let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
            let k = cdf.partition_point(|&c| c <= u).min(last_nonzero);
            *hits.entry(k).or_default() += 1;
        }
        Ok(hits
            .into_iter()
            .map(|(k, n)| (bitstring(k, self.n_qubits), n))
            .collect())
    }
}

/// Bitstring of basis index `k`: character `i` is bit `i`.
pub fn bitstring(k: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|i| if k >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Serial statevector accelerator.
#[derive(Debug, Clone, Default)]
pub struct StatevectorBackend {
    config: ExecutionConfig,
}

impl StatevectorBackend {
    pub fn new(config: ExecutionConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &ExecutionConfig {
        &self.config
    }

    fn run_one(
        &self,
        exec: &Execution,
        n_qubits: usize,
        index: usize,
    ) -> Result<ChildResult, SimError> {
        let circuit = &exec.circuit;
        if circuit.n_qubits() != n_qubits {
            return Err(SimError::QubitMismatch {
                circuit: circuit.n_qubits(),
                buffer: n_qubits,
            });
        }
        if let Some(p) = circuit.params().first() {
            if !circuit.is_bound() {
                return Err(SimError::Unbound(p.clone()));
            }
        }
        let mut state = StateVector::from_circuit(circuit)?;
        let mut child = ChildResult {
            name: exec.name.clone(),
            ..ChildResult::default()
        };
        match self.config.mode {
            ExecutionMode::Expectation => {
                let term = exec
                    .observable
                    .as_ref()
                    .ok_or(SimError::MissingObservable)?;
                child.expectation = Some(state.pauli_expectation(term)?);
            }
            ExecutionMode::Counts => {
                if let Some(term) = &exec.observable {
                    state.run(&measurement_basis_circuit(term, n_qubits)?)?;
                }
                child.counts = state.sample(self.config.shots, self.config.seed_for(index))?;
                child.shots = self.config.shots;
                if let Some(term) = &exec.observable {
                    child.expectation = Some(expectation_from_counts(&child.counts, term)?);
                }
            }
            ExecutionMode::Probabilities => {
                if let Some(term) = &exec.observable {
                    child.expectation = Some(state.pauli_expectation(term)?);
                    state.run(&measurement_basis_circuit(term, n_qubits)?)?;
                }
                child.probabilities = state.distribution();
            }
        }
        Ok(child)
    }
}

impl Accelerator for StatevectorBackend {
    fn name(&self) -> &str {
        "statevector"
    }

    fn execute(
        &mut self,
        buffer: &mut ResultBuffer,
        executions: &[Execution],
        first_index: usize,
    ) -> Result<(), ExecError> {
        for (i, exec) in executions.iter().enumerate() {
            let child = self
                .run_one(exec, buffer.n_qubits(), first_index + i)
                .map_err(|e| ExecError::circuit(&exec.name, e))?;
            buffer
                .append_child(child)
                .map_err(|e| ExecError::circuit(&exec.name, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    fn bell() -> Circuit {
        let mut circ = Circuit::new("bell", 2).unwrap();
        circ.push(Gate::H(0)).unwrap();
        circ.push(Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        circ
    }

    #[test]
    fn allocate_examples() {
        assert_eq!(
            StateVector::allocate(1).unwrap().amplitudes(),
            &[c(1.0), c(0.0)]
        );
        assert_eq!(
            StateVector::allocate(2).unwrap().amplitudes(),
            &[c(1.0), c(0.0), c(0.0), c(0.0)]
        );
        assert!(matches!(
            StateVector::allocate(31),
            Err(SimError::Capacity(31))
        ));
        assert!(matches!(
            StateVector::allocate(0),
            Err(SimError::Capacity(0))
        ));
    }

    #[test]
    fn single_gate_examples() {
        let mut s = StateVector::allocate(1).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        assert!(close(
            s.amplitudes(),
            &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            1e-15
        ));

        let mut s = StateVector::allocate(1).unwrap();
        s.apply(&Gate::Ry(0, PI.into())).unwrap();
        assert!(close(s.amplitudes(), &[c(0.0), c(1.0)], 1e-12));

        // (|00> + |10>)/sqrt2 in bitstring notation is H on qubit 0.
        let s = StateVector::from_circuit(&bell()).unwrap();
        assert!(close(
            s.amplitudes(),
            &[c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)],
            1e-15
        ));
    }

    #[test]
    fn unbound_angle_rejected() {
        let mut circ = Circuit::new("p", 1).unwrap();
        let t = circ.add_param("t").unwrap();
        circ.push(Gate::Ry(0, t.into())).unwrap();
        assert!(matches!(
            StateVector::from_circuit(&circ),
            Err(SimError::Unbound(_))
        ));
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::allocate(1).unwrap();
        let z0 = PauliTerm::new(1.0, [(0, Pauli::Z)]);
        assert_eq!(zero.pauli_expectation(&z0).unwrap(), 1.0);

        let b = StateVector::from_circuit(&bell()).unwrap();
        let xx = PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)]);
        let yy = PauliTerm::new(1.0, [(0, Pauli::Y), (1, Pauli::Y)]);
        assert!((b.pauli_expectation(&xx).unwrap() - 1.0).abs() < 1e-12);
        assert!((b.pauli_expectation(&yy).unwrap() + 1.0).abs() < 1e-12);

        // Rx-like state: Rz(pi/2) H |0> = |+i>, <Y> = 1.
        let mut s = StateVector::allocate(1).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        s.apply(&Gate::Rz(0, (PI / 2.0).into())).unwrap();
        let y = PauliTerm::new(1.0, [(0, Pauli::Y)]);
        assert!((s.pauli_expectation(&y).unwrap() - 1.0).abs() < 1e-12);

        let obs = Observable {
            terms: vec![PauliTerm::new(0.5, [(0, Pauli::Z)])],
            constant: 2.0,
        };
        assert_eq!(zero.expectation(&obs).unwrap(), 2.5);
    }

    #[test]
    fn sampling_examples() {
        let zero = StateVector::allocate(1).unwrap();
        for seed in [0, 1, 99] {
            assert_eq!(
                zero.sample(100, seed).unwrap(),
                Counts::from([("0".into(), 100)])
            );
        }

        let b = StateVector::from_circuit(&bell()).unwrap();
        let counts = b.sample(20_000, 3).unwrap();
        assert_eq!(counts.keys().collect::<Vec<_>>(), ["00", "11"]);
        let f = counts["00"] as f64 / 20_000.0;
        assert!((f - 0.5).abs() < 5.0 * 0.5 / (20_000f64).sqrt());

        let mut plus = StateVector::allocate(1).unwrap();
        plus.apply(&Gate::H(0)).unwrap();
        for seed in 0..20 {
            let counts = plus.sample(10_000, seed).unwrap();
            assert_eq!(counts.values().sum::<u64>(), 10_000);
            let f = counts["0"] as f64 / 10_000.0;
            assert!((f - 0.5).abs() < 5.0 * 0.005, "seed {seed}: {f}");
        }
        assert_eq!(plus.sample(500, 17).unwrap(), plus.sample(500, 17).unwrap());
        assert!(matches!(plus.sample(0, 1), Err(SimError::NoShots)));
    }

    #[test]
    fn bitstring_convention() {
        assert_eq!(bitstring(1, 3), "100");
        assert_eq!(bitstring(6, 3), "011");
    }

    fn batch(n: usize) -> Vec<Execution> {
        let circ = Arc::new(bell());
        (0..n)
            .map(|i| {
                let term = if i % 2 == 0 {
                    PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)])
                } else {
                    PauliTerm::new(1.0, [(0, Pauli::Z)])
                };
                Execution::new(format!("c{i}"), circ.clone(), Some(term))
            })
            .collect()
    }

    #[test]
    fn execute_appends_in_order() {
        let mut backend = StatevectorBackend::default();
        let mut buf = ResultBuffer::new(2);
        backend.execute(&mut buf, &batch(3), 0).unwrap();
        let names: Vec<_> = buf.children().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["c0", "c1", "c2"]);
        assert!((buf.children()[0].expectation.unwrap() - 1.0).abs() < 1e-12);
        assert!(buf.children()[1].expectation.unwrap().abs() < 1e-12);
    }

    #[test]
    fn execute_is_deterministic_in_counts_mode() {
        let config = ExecutionConfig {
            shots: 256,
            seed: 42,
            mode: ExecutionMode::Counts,
        };
        let run = || {
            let mut buf = ResultBuffer::new(2);
            StatevectorBackend::new(config)
                .execute(&mut buf, &batch(6), 0)
                .unwrap();
            buf
        };
        let a = run();
        assert_eq!(a, run());
        for child in a.children() {
            assert_eq!(child.shots, 256);
            assert_eq!(child.counts.values().sum::<u64>(), 256);
        }
        // XX on a Bell state is deterministic even when sampled.
        assert_eq!(a.children()[0].expectation, Some(1.0));
    }

    #[test]
    fn execute_seeds_by_global_index() {
        let config = ExecutionConfig {
            shots: 64,
            seed: 5,
            mode: ExecutionMode::Counts,
        };
        let execs = batch(4);
        let mut whole = ResultBuffer::new(2);
        StatevectorBackend::new(config)
            .execute(&mut whole, &execs, 0)
            .unwrap();
        let mut tail = ResultBuffer::new(2);
        StatevectorBackend::new(config)
            .execute(&mut tail, &execs[2..], 2)
            .unwrap();
        assert_eq!(&whole.children()[2..], tail.children());
    }

    #[test]
    fn execute_reports_failing_circuit() {
        let mut execs = batch(2);
        execs[1].observable = None;
        let mut buf = ResultBuffer::new(2);
        let err = StatevectorBackend::default()
            .execute(&mut buf, &execs, 0)
            .unwrap_err();
        assert_eq!(err.circuit_name(), Some("c1"));

        let mut buf = ResultBuffer::new(3);
        let err = StatevectorBackend::default()
            .execute(&mut buf, &batch(1), 0)
            .unwrap_err();
        assert!(matches!(
            err,
            ExecError::Circuit {
                source: SimError::QubitMismatch { .. },
                ..
            }
        ));
    }

    #[test]
    fn probability_mode_matches_born_rule() {
        let config = ExecutionConfig {
            mode: ExecutionMode::Probabilities,
            ..ExecutionConfig::default()
        };
        let execs = vec![Execution::new("b", Arc::new(bell()), None)];
        let mut buf = ResultBuffer::new(2);
        StatevectorBackend::new(config)
            .execute(&mut buf, &execs, 0)
            .unwrap();
        let p = &buf.children()[0].probabilities;
        assert_eq!(p.len(), 2);
        assert!((p["00"] - 0.5).abs() < 1e-15 && (p["11"] - 0.5).abs() < 1e-15);
    }
}
