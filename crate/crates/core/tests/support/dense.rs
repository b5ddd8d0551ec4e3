//! Dense-matrix reference model for small registers. Every gate is expanded
//! to a full `2^n x 2^n` matrix from its 2x2 / permutation definition, and
//! states are obtained by matrix-vector products from `e_0`. Shares no code
//! with the statevector kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex64;
use qpuvirt::ir::{Angle, Circuit, Gate};
use qpuvirt::observables::{Observable, Pauli, PauliTerm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<Complex64>>;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn one_qubit_matrix(gate: &Gate) -> Option<(usize, [[Complex64; 2]; 2])> {
    let r = |x: f64| Complex64::new(x, 0.0);
    let lit = |a: Angle| a.literal().expect("oracle needs literal angles");
    match *gate {
        Gate::H(q) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Some((q, [[r(s), r(s)], [r(s), r(-s)]]))
        }
        Gate::X(q) => Some((q, [[r(0.0), r(1.0)], [r(1.0), r(0.0)]])),
        Gate::Ry(q, a) => {
            let t = lit(a) / 2.0;
            Some((q, [[r(t.cos()), r(-t.sin())], [r(t.sin()), r(t.cos())]]))
        }
        Gate::Rz(q, a) => {
            let t = lit(a) / 2.0;
            Some((
                q,
                [
                    [Complex64::from_polar(1.0, -t), zero()],
                    [zero(), Complex64::from_polar(1.0, t)],
                ],
            ))
        }
        _ => None,
    }
}

fn bit(x: usize, q: usize) -> usize {
    (x >> q) & 1
}

/// Full-register matrix of one gate.
pub fn gate_matrix(gate: &Gate, n: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![zero(); dim]; dim];
    match *gate {
        Gate::Cnot { control, target } => {
            for j in 0..dim {
                let i = if bit(j, control) == 1 {
                    j ^ (1 << target)
                } else {
                    j
                };
                m[i][j] = Complex64::new(1.0, 0.0);
            }
        }
        Gate::MeasureAll => {
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = Complex64::new(1.0, 0.0);
            }
        }
        ref g => {
            let (q, u) = one_qubit_matrix(g).unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    if (i ^ j) & !(1 << q) == 0 {
                        m[i][j] = u[bit(i, q)][bit(j, q)];
                    }
                }
            }
        }
    }
    m
}

pub fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn state(circuit: &Circuit) -> Vec<Complex64> {
    let n = circuit.n_qubits();
    let mut v = vec![zero(); 1 << n];
    v[0] = Complex64::new(1.0, 0.0);
    for g in circuit.gates() {
        v = mat_vec(&gate_matrix(g, n), &v);
    }
    v
}

fn pauli_2x2(p: Option<Pauli>) -> [[Complex64; 2]; 2] {
    let c = Complex64::new;
    match p {
        None => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        Some(Pauli::X) => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Some(Pauli::Y) => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        Some(Pauli::Z) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}

/// Tensor-product matrix of a term's operator part.
pub fn pauli_matrix(term: &PauliTerm, n: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![zero(); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let mut v = Complex64::new(1.0, 0.0);
            for q in 0..n {
                v *= pauli_2x2(term.factors.get(&q).copied())[bit(i, q)][bit(j, q)];
            }
            *entry = v;
        }
    }
    m
}

pub fn term_expectation(psi: &[Complex64], term: &PauliTerm, n: usize) -> f64 {
    let p = mat_vec(&pauli_matrix(term, n), psi);
    psi.iter()
        .zip(&p)
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        .re
}

pub fn expectation(psi: &[Complex64], obs: &Observable, n: usize) -> f64 {
    obs.constant
        + obs
            .terms
            .iter()
            .map(|t| t.coefficient * term_expectation(psi, t, n))
            .sum::<f64>()
}

pub fn random_circuit(n: usize, n_gates: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(format!("rand{seed}"), n).unwrap();
    for _ in 0..n_gates {
        let q = rng.random_range(0..n);
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let g = match rng.random_range(0..5) {
            0 => Gate::H(q),
            1 => Gate::X(q),
            2 => Gate::Ry(q, angle.into()),
            3 => Gate::Rz(q, angle.into()),
            _ if n > 1 => {
                let mut t = rng.random_range(0..n - 1);
                if t >= q {
                    t += 1;
                }
                Gate::Cnot {
                    control: q,
                    target: t,
                }
            }
            _ => Gate::Ry(q, angle.into()),
        };
        c.push(g).unwrap();
    }
    c
}

pub fn random_observable(n: usize, n_terms: usize, seed: u64) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = Observable {
        terms: Vec::new(),
        constant: rng.random_range(-1.0..1.0),
    };
    for _ in 0..n_terms {
        let factors: Vec<(usize, Pauli)> = (0..n)
            .filter_map(|q| match rng.random_range(0..4) {
                0 => None,
                1 => Some((q, Pauli::X)),
                2 => Some((q, Pauli::Y)),
                _ => Some((q, Pauli::Z)),
            })
            .collect();
        let term = PauliTerm::new(rng.random_range(-1.0..1.0), factors);
        obs.add_term(term);
    }
    obs
}
