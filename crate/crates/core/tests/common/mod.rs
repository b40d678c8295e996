#![allow(dead_code)]

use mcc_inference::paired::{normalize_joint, JointCounts3, ProbTable3};
use mcc_inference::simulation::replicate_rng;
use mcc_inference::{ConfusionCounts2, ProbTable2};
use rand::RngExt;

/// Coverage printed for the single-table scenarios. Columns: maM Wald, maM
/// Fisher-z, miM Wald, miM Fisher-z, miM* Wald, miM* Fisher-z.
pub const SINGLE_COVERAGE: [(&str, u64, [f64; 6]); 16] = [
    ("single-1", 50, [0.9230, 0.9541, 0.9412, 0.9563, 0.9282, 0.9565]),
    ("single-1", 100, [0.9326, 0.9505, 0.9329, 0.9482, 0.9323, 0.9510]),
    ("single-1", 400, [0.9449, 0.9491, 0.9450, 0.9484, 0.9448, 0.9492]),
    ("single-1", 800, [0.9496, 0.9486, 0.9510, 0.9467, 0.9499, 0.9482]),
    ("single-2", 50, [0.9315, 0.9385, 0.9258, 0.9400, 0.9349, 0.9418]),
    ("single-2", 100, [0.9418, 0.9444, 0.9424, 0.9424, 0.9431, 0.9457]),
    ("single-2", 400, [0.9471, 0.9482, 0.9478, 0.9478, 0.9474, 0.9483]),
    ("single-2", 800, [0.9489, 0.9492, 0.9480, 0.9480, 0.9489, 0.9493]),
    ("single-3", 50, [0.8349, 0.8501, 0.8943, 0.9756, 0.9143, 0.9528]),
    ("single-3", 100, [0.8723, 0.8820, 0.9390, 0.9481, 0.9319, 0.9505]),
    ("single-3", 400, [0.9396, 0.9416, 0.9426, 0.9560, 0.9460, 0.9506]),
    ("single-3", 800, [0.9445, 0.9450, 0.9523, 0.9485, 0.9475, 0.9495]),
    ("single-4", 50, [0.9055, 0.9109, 0.9247, 0.9391, 0.9228, 0.9283]),
    ("single-4", 100, [0.9287, 0.9315, 0.9411, 0.9411, 0.9382, 0.9408]),
    ("single-4", 400, [0.9455, 0.9463, 0.9474, 0.9474, 0.9472, 0.9479]),
    ("single-4", 800, [0.9481, 0.9483, 0.9469, 0.9469, 0.9485, 0.9489]),
];

/// Coverage printed for the paired scenarios. Columns: maM Wald, maM g,
/// miM Wald, miM g, miM* Wald, miM* g.
pub const PAIRED_COVERAGE: [(&str, u64, [f64; 6]); 16] = [
    ("paired-1", 50, [0.9360, 0.9387, 0.9462, 0.9467, 0.9381, 0.9409]),
    ("paired-1", 100, [0.9431, 0.9443, 0.9458, 0.9458, 0.9442, 0.9455]),
    ("paired-1", 400, [0.9478, 0.9481, 0.9486, 0.9487, 0.9482, 0.9484]),
    ("paired-1", 800, [0.9488, 0.9489, 0.9491, 0.9493, 0.9487, 0.9489]),
    ("paired-2", 50, [0.9361, 0.9393, 0.9440, 0.9443, 0.9386, 0.9417]),
    ("paired-2", 100, [0.9440, 0.9454, 0.9458, 0.9484, 0.9447, 0.9463]),
    ("paired-2", 400, [0.9486, 0.9490, 0.9492, 0.9498, 0.9489, 0.9494]),
    ("paired-2", 800, [0.9490, 0.9493, 0.9493, 0.9496, 0.9490, 0.9494]),
    ("paired-3", 50, [0.9301, 0.9331, 0.9458, 0.9463, 0.9359, 0.9387]),
    ("paired-3", 100, [0.9420, 0.9432, 0.9478, 0.9478, 0.9446, 0.9460]),
    ("paired-3", 400, [0.9490, 0.9494, 0.9492, 0.9493, 0.9488, 0.9491]),
    ("paired-3", 800, [0.9489, 0.9490, 0.9498, 0.9500, 0.9491, 0.9493]),
    ("paired-4", 50, [0.8974, 0.9010, 0.9393, 0.9443, 0.9211, 0.9249]),
    ("paired-4", 100, [0.9275, 0.9293, 0.9451, 0.9461, 0.9360, 0.9375]),
    ("paired-4", 400, [0.9465, 0.9467, 0.9499, 0.9505, 0.9476, 0.9483]),
    ("paired-4", 800, [0.9484, 0.9486, 0.9489, 0.9490, 0.9491, 0.9491]),
];

/// Printed point estimates (maM, miM, miM*) of the single scenarios.
pub const SINGLE_TRUTH: [(&str, [f64; 3]); 4] = [
    ("single-1", [0.77, 0.78, 0.77]),
    ("single-2", [0.01, 0.01, 0.01]),
    ("single-3", [0.59, 0.81, 0.67]),
    ("single-4", [0.00, 0.01, 0.00]),
];

/// Printed (method 1, method 2) triples of the paired scenarios.
pub const PAIRED_TRUTH: [(&str, [f64; 3], [f64; 3]); 4] = [
    ("paired-1", [0.40, 0.40, 0.40], [0.40, 0.40, 0.40]),
    ("paired-2", [0.40, 0.40, 0.40], [0.25, 0.25, 0.25]),
    ("paired-3", [0.37, 0.40, 0.37], [0.37, 0.40, 0.37]),
    ("paired-4", [0.48, 0.73, 0.53], [0.20, 0.27, 0.20]),
];

/// Faster R-CNN test-set counts; rows prediction, columns truth, classes MM,
/// BCC, Nevus, SK, H/H, SL. The SK/Nevus cell is 30 (printed as 20).
pub const FRCNN: [[u64; 6]; 6] = [
    [327, 6, 42, 21, 3, 0],
    [9, 108, 6, 9, 0, 0],
    [48, 12, 967, 36, 18, 0],
    [21, 6, 30, 223, 0, 3],
    [0, 0, 3, 0, 57, 0],
    [3, 0, 0, 0, 0, 42],
];

/// Dermatologists' counts on the same 2000 subjects.
pub const BCD: [[u64; 6]; 6] = [
    [340, 10, 131, 18, 9, 0],
    [12, 104, 11, 24, 1, 1],
    [22, 3, 823, 17, 6, 0],
    [26, 14, 68, 225, 1, 7],
    [3, 1, 11, 0, 61, 0],
    [5, 0, 4, 5, 0, 37],
];

pub const FRCNN_EXPECTED: [f64; 3] = [0.812, 0.834, 0.788];
pub const BCD_EXPECTED: [f64; 3] = [0.723, 0.754, 0.708];
pub const DIFF_EXPECTED: [f64; 3] = [0.089, 0.080, 0.079];

pub fn counts<const R: usize>(rows: &[[u64; R]; R]) -> ConfusionCounts2 {
    ConfusionCounts2::from_rows(rows).unwrap()
}

pub fn probs_from_counts<const R: usize>(rows: &[[u64; R]; R]) -> ProbTable2 {
    mcc_inference::normalize_counts(&counts(rows)).unwrap()
}

pub fn paired_counts(blocks: [[[u64; 3]; 3]; 3]) -> JointCounts3 {
    let b: Vec<Vec<Vec<u64>>> = blocks
        .iter()
        .map(|blk| blk.iter().map(|row| row.to_vec()).collect())
        .collect();
    JointCounts3::from_truth_blocks(&b).unwrap()
}

fn random_weights(len: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = replicate_rng(seed, index);
    // mix of flat and spiky tables, never a zero cell
    let spike: f64 = rng.random_range(0.0..3.0);
    let w: Vec<f64> = (0..len)
        .map(|_| 0.02 + rng.random::<f64>().powf(1.0 + spike))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random table with every cell positive.
pub fn random_table(r: usize, seed: u64, index: u64) -> ProbTable2 {
    let w = random_weights(r * r, seed, index);
    ProbTable2::new(r, renormalized(w)).unwrap()
}

pub fn random_table3(r: usize, seed: u64, index: u64) -> ProbTable3 {
    let w = random_weights(r * r * r, seed, index);
    ProbTable3::new(r, renormalized(w)).unwrap()
}

// pushes the rounding residue into the largest cell so the sum is 1 to 1e-12
fn renormalized(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    let big = (0..w.len())
        .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        .unwrap();
    w[big] += 1.0 - total;
    w
}

/// Table with joint counts drawn from a random table, for tests that need
/// integer counts.
pub fn joint_from_probs(p: &ProbTable3, scale: f64) -> JointCounts3 {
    let cells = p.probs().iter().map(|v| (v * scale).round() as u64).collect();
    JointCounts3::new(p.r(), cells).unwrap()
}

pub fn p3_of(c: &JointCounts3) -> ProbTable3 {
    normalize_joint(c).unwrap()
}

/// Central difference of `f` along the direction that moves mass `h` into
/// cell `cell` and renormalizes: `d/dh f((pi + h e) / (1 + h))` at 0. The
/// analytic counterpart is `g[cell] - <g, pi>`.
pub fn renormalized_fd(probs: &[f64], cell: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let shift = |t: f64| -> Vec<f64> {
        let mut q: Vec<f64> = probs.to_vec();
        q[cell] += t;
        q.iter().map(|v| v / (1.0 + t)).collect()
    };
    (f(&shift(h)) - f(&shift(-h))) / (2.0 * h)
}

/// Largest entrywise gap between the analytic directional derivatives and
/// the central differences, relative to the largest analytic entry.
pub fn max_relative_fd_error(probs: &[f64], grad: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mean: f64 = grad.iter().zip(probs).map(|(g, p)| g * p).sum();
    let analytic: Vec<f64> = grad.iter().map(|g| g - mean).collect();
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut worst = 0.0f64;
    for (cell, &a) in analytic.iter().enumerate() {
        let fd = renormalized_fd(probs, cell, 1e-6, &f);
        worst = worst.max((fd - a).abs() / scale);
    }
    worst
}
