#![allow(dead_code)]

use diffuser::graph::{
    build_global, build_local_window, build_random_tokenwise, union, AttentionGraph,
};
use diffuser::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_7E57)
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Dense row-stochastic matrix with a random sparsity pattern (diagonal
/// always present).
pub fn random_row_stochastic(n: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || r.random_bool(0.3) {
                a[(i, j)] = r.random_range(0.01..1.0);
            }
        }
        let s: f64 = a.row(i).sum();
        for j in 0..n {
            a[(i, j)] /= s;
        }
    }
    a
}

/// Local + global + random pattern with self loops.
pub fn mixed_pattern(n: usize, seed: u64) -> AttentionGraph {
    let w = 2 * (1 + seed as usize % 3);
    let parts = [
        build_local_window(n, w.min(n - 1 - (n - 1) % 2).max(2)).unwrap(),
        build_global(n, 1 + seed as usize % 2, seed).unwrap(),
        build_random_tokenwise(n, 2.min(n - 1), seed + 1).unwrap(),
    ];
    union(n, &parts).unwrap().finalize()
}

/// Plain triple-loop product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = Matrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            c[(i, j)] = s;
        }
    }
    c
}
