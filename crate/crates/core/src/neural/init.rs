use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;

/// Orthogonal matrix (row-major, `rows x cols`) scaled by `gain`.
///
/// QR of a standard-normal matrix with the sign of `diag(R)` folded into
/// `Q`, which makes the result Haar-distributed.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(tall, short, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
            out[i * cols + j] = gain * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gram(m: &[f64], rows: usize, cols: usize, by_rows: bool) -> Vec<f64> {
        let n = if by_rows { rows } else { cols };
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = if by_rows {
                    (0..cols).map(|k| m[a * cols + k] * m[b * cols + k]).sum()
                } else {
                    (0..rows).map(|k| m[k * cols + a] * m[k * cols + b]).sum()
                };
            }
        }
        g
    }

    #[test]
    fn orthonormal_rows_or_columns() {
        let mut rng = Rng::seed_from_u64(1);
        for &(r, c) in &[(5, 3), (3, 5), (4, 4)] {
            let m = orthogonal(r, c, 1.0, &mut rng);
            let g = gram(&m, r, c, r < c);
            let n = r.min(c);
            for a in 0..n {
                for b in 0..n {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g[a * n + b] - want).abs() < 1e-12);
                }
            }
        }
    }
}
