use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use qae_ids_core::kernel::kernel_matrix;
use qae_ids_core::qsim::run;
use qae_ids_core::qsvc::solve_dual;
use qae_ids_core::{Circuit, FeatureMapConfig, KernelParams, StateVector};

fn layered_circuit(n: usize, layers: usize) -> Circuit {
    let mut c = Circuit::new(n).unwrap();
    for l in 0..layers {
        for q in 0..n {
            c.ry(q, 0.1 * (l * n + q) as f64).unwrap();
        }
        for q in 0..n - 1 {
            c.cx(q, q + 1).unwrap();
        }
    }
    c
}

fn statevector(c: &mut Criterion) {
    for n in [6, 10, 14] {
        let circuit = layered_circuit(n, 4);
        let init = StateVector::zero(n).unwrap();
        c.bench_function(&format!("statevector_{n}q_4layers"), |b| {
            b.iter(|| run(black_box(&circuit), &[], &init).unwrap())
        });
    }
}

fn points(n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..d).map(|j| ((i * 7 + j * 3) % 11) as f64 / 11.0).collect()).collect()
}

fn kernel(c: &mut Criterion) {
    let z = points(32, 2);
    for shots in [0u64, 256] {
        let fm = FeatureMapConfig {
            num_qubits: 2,
            layers: 2,
            shots,
        };
        let phi = KernelParams::random(&fm, 1);
        c.bench_function(&format!("kernel_matrix_32x32_shots{shots}"), |b| {
            b.iter(|| kernel_matrix(black_box(&z), &phi, &fm, None, 7).unwrap())
        });
    }
}

fn smo(c: &mut Criterion) {
    let n = 160;
    let x = points(n, 3);
    let y: Vec<i8> = (0..n).map(|i| if x[i][0] + 0.3 * x[i][1] > 0.6 { 1 } else { -1 }).collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
        (-2.0 * d2).exp()
    });
    c.bench_function("smo_160", |b| b.iter(|| solve_dual(black_box(&k), &y, 1.0, 1e-3).unwrap()));
}

criterion_group!(benches, statevector, kernel, smo);
criterion_main!(benches);
