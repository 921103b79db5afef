//! Deterministic synthetic problems for verification and benchmarking.
//!
//! All randomness flows through a caller-supplied ChaCha8 generator, a
//! counter-based stream cipher seeded from a single 64-bit value, so every
//! battery is reproducible from its seed.

use ndarray::Array3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tt::{DenseTensor, TensorTrain};
use crate::value::{DistributionTensor, ModelTensor};

/// Feasible bond ranks for a train over `sizes`, capped at `rank`.
fn clamped_bonds(sizes: &[usize], rank: usize) -> Vec<usize> {
    let n = sizes.len();
    let mut bonds = vec![1usize; n + 1];
    for (i, bond) in bonds.iter_mut().enumerate().skip(1).take(n - 1) {
        let left: usize = sizes[..i].iter().product();
        let right: usize = sizes[i..].iter().product();
        *bond = rank.min(left).min(right);
    }
    bonds
}

fn random_train(
    rng: &mut ChaCha8Rng,
    sizes: &[usize],
    rank: usize,
    nonnegative: bool,
) -> TensorTrain {
    let bonds = clamped_bonds(sizes, rank);
    let cores = sizes
        .iter()
        .enumerate()
        .map(|(i, &ni)| {
            let mut core = Array3::zeros((bonds[i], ni, bonds[i + 1]));
            for v in core.iter_mut() {
                *v = if nonnegative {
                    rng.gen_range(0.05..1.0)
                } else {
                    rng.gen_range(-1.0..1.0)
                };
            }
            core
        })
        .collect();
    TensorTrain::new(cores).expect("generated cores are consistent")
}

/// Random TT model over `domain` with `n_out` outputs and bond ranks capped
/// at `rank`.
pub fn random_tt_model(
    rng: &mut ChaCha8Rng,
    domain: &[usize],
    n_out: usize,
    rank: usize,
) -> ModelTensor {
    let mut sizes = domain.to_vec();
    sizes.push(n_out);
    let tt = random_train(rng, &sizes, rank, false);
    ModelTensor::from_tt(tt, n_out).expect("generated train has an output mode")
}

/// Random dense model over `domain` with `n_out` outputs.
pub fn random_dense_model(rng: &mut ChaCha8Rng, domain: &[usize], n_out: usize) -> ModelTensor {
    let mut sizes = domain.to_vec();
    sizes.push(n_out);
    let len: usize = sizes.iter().product();
    let entries = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dense = DenseTensor::new(sizes, entries).expect("shape matches by construction");
    ModelTensor::from_dense(dense, n_out).expect("output mode present")
}

/// Random TT distribution with nonnegative cores, normalized to unit mass.
///
/// `rank = 1` yields a product distribution; larger ranks correlate the
/// features.
pub fn random_tt_distribution(
    rng: &mut ChaCha8Rng,
    domain: &[usize],
    rank: usize,
) -> DistributionTensor {
    let tt = random_train(rng, domain, rank, true);
    // Nonnegative cores make the mass positive; scale the last core by it.
    let mass = {
        let mut acc: Vec<f64> = vec![1.0];
        for core in tt.cores() {
            let (rl, ni, rr) = core.dim();
            let mut next = vec![0.0; rr];
            for (a, &va) in acc.iter().enumerate().take(rl) {
                for i in 0..ni {
                    for (b, slot) in next.iter_mut().enumerate() {
                        *slot += va * core[[a, i, b]];
                    }
                }
            }
            acc = next;
        }
        acc[0]
    };
    let mut cores: Vec<Array3<f64>> = tt.cores().to_vec();
    let last = cores.len() - 1;
    cores[last].mapv_inplace(|v| v / mass);
    DistributionTensor::from_tt(TensorTrain::new(cores).expect("shapes unchanged"))
        .expect("normalized mass")
}

/// Random dense distribution (independent positive weights, normalized).
pub fn random_dense_distribution(rng: &mut ChaCha8Rng, domain: &[usize]) -> DistributionTensor {
    let len: usize = domain.iter().product();
    let mut entries: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let mass: f64 = entries.iter().sum();
    entries.iter_mut().for_each(|v| *v /= mass);
    let dense = DenseTensor::new(domain.to_vec(), entries).expect("shape matches");
    DistributionTensor::from_dense(dense).expect("normalized mass")
}

/// Uniformly random domain point.
pub fn random_instance(rng: &mut ChaCha8Rng, domain: &[usize]) -> Vec<usize> {
    domain.iter().map(|&n| rng.gen_range(0..n)).collect()
}

/// The two-feature exclusive-or model with one output.
pub fn xor_model_dense() -> ModelTensor {
    let dense = DenseTensor::new(vec![2, 2, 1], vec![0.0, 1.0, 1.0, 0.0])
        .expect("static shape");
    ModelTensor::from_dense(dense, 1).expect("output mode present")
}

/// Unanimity model on `n` binary features: output 1 exactly when every
/// feature in `t_mask` is set to value 1.
pub fn unanimity_model_dense(n: usize, t_mask: u32) -> ModelTensor {
    let mut sizes = vec![2usize; n];
    sizes.push(1);
    let dense = DenseTensor::from_fn(sizes, |idx| {
        let held = (0..n).all(|i| t_mask >> i & 1 == 0 || idx[i] == 1);
        if held {
            1.0
        } else {
            0.0
        }
    })
    .expect("static shape");
    ModelTensor::from_dense(dense, 1).expect("output mode present")
}
