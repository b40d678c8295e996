//! Analytic gradients against central finite differences, and closed-form
//! miM variances against the generic quadratic form.

mod common;

use common::*;
use mcc_inference::paired::{grad_paired, method_metric, paired_cov_block, Method, ProbTable3};
use mcc_inference::single::grad;
use mcc_inference::{asymptotic_variance, estimate, MetricKind, ProbTable2};

const TABLES: u64 = 200;

#[test]
fn single_gradients_match_finite_differences() {
    for r in [2usize, 3, 4, 6] {
        for k in MetricKind::ALL {
            let mut worst = 0.0f64;
            for idx in 0..TABLES {
                let p = random_table(r, 101, idx);
                let g = grad(&p, k).unwrap();
                let err = max_relative_fd_error(p.probs(), g.values(), |q| {
                    estimate(&ProbTable2::new(r, q.to_vec()).unwrap(), k).unwrap()
                });
                worst = worst.max(err);
            }
            assert!(worst < 1e-5, "r={r} {k}: {worst:e}");
        }
    }
}

#[test]
fn paired_gradients_match_finite_differences() {
    for r in [2usize, 3, 4, 6] {
        for k in MetricKind::ALL {
            let mut worst = 0.0f64;
            for idx in 0..TABLES {
                let p3 = random_table3(r, 202, idx);
                let ga = grad_paired(&p3, Method::First, k).unwrap();
                let gb = grad_paired(&p3, Method::Second, k).unwrap();
                let diff = ga.minus(&gb).unwrap();
                let err = max_relative_fd_error(p3.probs(), diff.values(), |q| {
                    let t = ProbTable3::new(r, q.to_vec()).unwrap();
                    method_metric(&t, Method::First, k).unwrap()
                        - method_metric(&t, Method::Second, k).unwrap()
                });
                worst = worst.max(err);
                for (m, g) in [(Method::First, &ga), (Method::Second, &gb)] {
                    let err = max_relative_fd_error(p3.probs(), g.values(), |q| {
                        method_metric(&ProbTable3::new(r, q.to_vec()).unwrap(), m, k).unwrap()
                    });
                    worst = worst.max(err);
                }
            }
            assert!(worst < 1e-5, "r={r} {k}: {worst:e}");
        }
    }
}

#[test]
fn micro_variance_closed_form() {
    for r in [2usize, 3, 4, 6] {
        let c = r as f64 / (r as f64 - 1.0);
        for idx in 0..TABLES {
            let p = random_table(r, 303, idx);
            let d = p.accuracy();
            let v = asymptotic_variance(&grad(&p, MetricKind::MiM).unwrap(), &p).unwrap();
            assert!((v - c * c * d * (1.0 - d)).abs() < 1e-12);
        }
    }
}

#[test]
fn paired_micro_block_closed_form() {
    for r in [2usize, 3, 4, 6] {
        let c = r as f64 / (r as f64 - 1.0);
        for idx in 0..TABLES {
            let p3 = random_table3(r, 404, idx);
            let ga = grad_paired(&p3, Method::First, MetricKind::MiM).unwrap();
            let gb = grad_paired(&p3, Method::Second, MetricKind::MiM).unwrap();
            let b = paired_cov_block(&ga, &gb, &p3).unwrap();
            let d1: f64 = p3.agreement(Method::First).iter().sum();
            let d2: f64 = p3.agreement(Method::Second).iter().sum();
            assert!((b.x - c * c * d1 * (1.0 - d1)).abs() < 1e-12);
            assert!((b.y - c * c * d2 * (1.0 - d2)).abs() < 1e-12);
            assert!((b.z - c * c * (p3.both_correct() - d1 * d2)).abs() < 1e-12);
        }
    }
}

#[test]
fn paired_gradient_of_marginal_matches_single() {
    // a method's gradient is the two-way gradient at its marginal table,
    // broadcast over the other method's index
    for idx in 0..50 {
        let p3 = random_table3(4, 505, idx);
        for k in MetricKind::ALL {
            let two = mcc_inference::marginalize(&p3, Method::Second);
            let g2 = grad(&two, k).unwrap();
            let g3 = grad_paired(&p3, Method::Second, k).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    for t in 0..4 {
                        assert!((g3.get(i, j, t) - g2.get(j, t)).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
