//! Gradient workloads against finite differences of dense-model losses.

#[path = "support/dense.rs"]
mod dense;

use qpuvirt::accelerator::ExecutionMode;
use qpuvirt::algorithms::{
    ddcl_circuit, ddcl_gradient, js_divergence, mcvqe_ansatz, mcvqe_gradient, random_angles,
    random_unit_vector, DdclSpec, McvqeAnsatzSpec,
};
use qpuvirt::buffer::Distribution;
use qpuvirt::observables::{aiem_hamiltonian, AiemCoefficients, Observable};
use qpuvirt::pool::VqpuPoolConfig;
use qpuvirt::statevector::{bitstring, StateVector};
use qpuvirt::ParameterVector;

fn dense_energy(h: &Observable, spec: &McvqeAnsatzSpec, theta: &ParameterVector) -> f64 {
    let c = mcvqe_ansatz(spec.n_monomers, &spec.cis_amplitudes, theta).unwrap();
    dense::expectation(&dense::state(&c), h, spec.n_monomers)
}

fn mcvqe_problem(n: usize, coeff_seed: u64, theta_seed: u64) -> (Observable, McvqeAnsatzSpec) {
    let h = aiem_hamiltonian(n, &AiemCoefficients::random(n, coeff_seed)).unwrap();
    let spec = McvqeAnsatzSpec::new(
        random_unit_vector(n, coeff_seed + 100),
        random_angles(5 * n - 4, theta_seed),
    )
    .unwrap();
    (h, spec)
}

#[test]
fn mcvqe_gradient_matches_central_differences() {
    let h_step = 1e-4;
    for n in 2..=6 {
        let (h, spec) = mcvqe_problem(n, 7 + n as u64, 11 + n as u64);
        let report = mcvqe_gradient(&h, &spec, &VqpuPoolConfig::default()).unwrap();
        assert_eq!(report.n_circuit_executions, 2 * (6 * n - 4) * (5 * n - 4));
        for (k, g) in report.gradient.iter().enumerate() {
            let up = dense_energy(&h, &spec, &spec.theta.shifted(k, h_step));
            let down = dense_energy(&h, &spec, &spec.theta.shifted(k, -h_step));
            let fd = (up - down) / (2.0 * h_step);
            assert!((g - fd).abs() < 1e-6, "n={n} k={k}: {g} vs {fd}");
        }
    }
}

#[test]
fn mcvqe_gradient_independent_of_pool_size() {
    let (h, spec) = mcvqe_problem(4, 7, 11);
    let grad = |v, mode| {
        let cfg = VqpuPoolConfig {
            n_virtual_qpus: v,
            base_seed: 5,
            mode,
            shots: 256,
        };
        mcvqe_gradient(&h, &spec, &cfg).unwrap()
    };
    for mode in [ExecutionMode::Expectation, ExecutionMode::Counts] {
        let one = grad(1, mode);
        let eight = grad(8, mode);
        let bits = |r: &qpuvirt::algorithms::GradientReport| {
            r.gradient.iter().map(|g| g.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&one), bits(&eight));
        for (a, b) in one.buffer.children().iter().zip(eight.buffer.children()) {
            assert_eq!(a.counts, b.counts);
        }
    }
}

#[test]
fn mcvqe_sampled_gradient_tracks_exact() {
    let (h, spec) = mcvqe_problem(3, 1, 2);
    let exact = mcvqe_gradient(&h, &spec, &VqpuPoolConfig::default()).unwrap();
    let cfg = VqpuPoolConfig {
        mode: ExecutionMode::Counts,
        shots: 20_000,
        ..VqpuPoolConfig::default()
    };
    let sampled = mcvqe_gradient(&h, &spec, &cfg).unwrap();
    // Each of the 14 terms has |c| <= 1 and shot noise <= 1/sqrt(20000) per
    // side; 5 sigma of the worst case bounds the difference.
    let bound = 5.0 * 14.0 * (2.0f64 / 20_000.0).sqrt() / 2.0;
    for (a, b) in exact.gradient.iter().zip(&sampled.gradient) {
        assert!((a - b).abs() < bound, "{a} vs {b}");
    }
}

fn dense_distribution(spec: &DdclSpec, theta: &ParameterVector) -> Distribution {
    let shifted = DdclSpec {
        theta: theta.clone(),
        ..spec.clone()
    };
    let psi = dense::state(&ddcl_circuit(&shifted).unwrap());
    psi.iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(k, a)| (bitstring(k, spec.n_qubits), a.norm_sqr()))
        .collect()
}

fn exact_config(v: usize) -> VqpuPoolConfig {
    VqpuPoolConfig {
        n_virtual_qpus: v,
        mode: ExecutionMode::Probabilities,
        ..VqpuPoolConfig::default()
    }
}

#[test]
fn ddcl_gradient_matches_central_differences() {
    let spec = DdclSpec::random(4, 1, 1000, 31).unwrap();
    let report = ddcl_gradient(&spec, &exact_config(1)).unwrap();
    let h_step = 1e-5;
    for (k, g) in report.gradient.iter().enumerate() {
        let up = js_divergence(
            &spec.target,
            &dense_distribution(&spec, &spec.theta.shifted(k, h_step)),
        )
        .unwrap();
        let down = js_divergence(
            &spec.target,
            &dense_distribution(&spec, &spec.theta.shifted(k, -h_step)),
        )
        .unwrap();
        let fd = (up - down) / (2.0 * h_step);
        assert!((g - fd).abs() < 1e-6, "k={k}: {g} vs {fd}");
    }
    let loss = js_divergence(&spec.target, &dense_distribution(&spec, &spec.theta)).unwrap();
    assert!((report.loss.unwrap() - loss).abs() < 1e-12);
}

#[test]
fn ddcl_gradient_vanishes_at_target() {
    let mut spec = DdclSpec::random(4, 2, 1000, 5).unwrap();
    spec.target = StateVector::from_circuit(&ddcl_circuit(&spec).unwrap())
        .unwrap()
        .distribution();
    let report = ddcl_gradient(&spec, &exact_config(2)).unwrap();
    assert_eq!(report.gradient.len(), 48);
    let worst = report.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    assert!(worst < 1e-9, "max |g| = {worst}");
    assert!(report.loss.unwrap() < 1e-12);
}

#[test]
fn ddcl_sampled_gradient_independent_of_pool_size() {
    let spec = DdclSpec::random(4, 1, 2000, 9).unwrap();
    let cfg = |v| VqpuPoolConfig {
        n_virtual_qpus: v,
        base_seed: 42,
        mode: ExecutionMode::Counts,
        shots: 1,
    };
    let one = ddcl_gradient(&spec, &cfg(1)).unwrap();
    let eight = ddcl_gradient(&spec, &cfg(8)).unwrap();
    assert_eq!(one.buffer.children(), eight.buffer.children());
    assert_eq!(
        one.gradient.iter().map(|g| g.to_bits()).collect::<Vec<_>>(),
        eight
            .gradient
            .iter()
            .map(|g| g.to_bits())
            .collect::<Vec<_>>()
    );
    assert!(one.buffer.children().iter().all(|c| c.shots == 2000));
}
