#![allow(dead_code)]

use ecg_anc::TimeSeries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least-squares FIR weights from the normal equations, using the same
/// zero-prepadded regressors as the filters. `ridge` is added to the diagonal.
pub fn batch_least_squares(reference: &[f64], desired: &[f64], taps: usize, ridge: f64) -> Vec<f64> {
    let mut r = vec![vec![0.0; taps]; taps];
    let mut p = vec![0.0; taps];
    for n in 0..desired.len() {
        let u: Vec<f64> = (0..taps).map(|k| if n >= k { reference[n - k] } else { 0.0 }).collect();
        for i in 0..taps {
            p[i] += desired[n] * u[i];
            for j in 0..taps {
                r[i][j] += u[i] * u[j];
            }
        }
    }
    for (i, row) in r.iter_mut().enumerate() {
        row[i] += ridge;
    }
    solve(r, p)
}

pub fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn series(v: Vec<f64>, fs: f64) -> TimeSeries {
    TimeSeries::new(v, fs).unwrap()
}
