//! Null vectors of small dense homogeneous systems via column-pivoted
//! Householder QR of the transpose, with the full orthogonal factor kept so
//! the orthogonal complement of the row space falls out directly.

use crate::error::{Error, Result};

/// Orthonormal basis of the null space of `rows` (a matrix given row-wise
/// with `cols` columns). Empty when the matrix has full column rank.
pub fn null_space(rows: &[Vec<f64>], cols: usize) -> Vec<Vec<f64>> {
    let n = rows.len();
    // b = transpose(rows): cols x n, factored as b * perm = q * r
    let mut b: Vec<Vec<f64>> = (0..cols)
        .map(|c| rows.iter().map(|row| row[c]).collect())
        .collect();
    let mut q: Vec<Vec<f64>> = (0..cols)
        .map(|i| {
            let mut e = vec![0.0; cols];
            e[i] = 1.0;
            e
        })
        .collect();

    let steps = cols.min(n);
    let mut col_order: Vec<usize> = (0..n).collect();
    let mut diag = Vec::with_capacity(steps);
    for step in 0..steps {
        // column pivot: largest remaining column norm below the step row
        let (pivot, norm) = (step..n)
            .map(|j| {
                let c = col_order[j];
                let norm: f64 = (step..cols).map(|i| b[i][c] * b[i][c]).sum::<f64>().sqrt();
                (j, norm)
            })
            .fold((step, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        col_order.swap(step, pivot);
        diag.push(norm);
        if norm == 0.0 {
            break;
        }
        let c = col_order[step];
        // Householder vector zeroing b[step+1.., c]
        let alpha = -b[step][c].signum() * norm;
        let mut v: Vec<f64> = (step..cols).map(|i| b[i][c]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // apply H = I - 2 v v^T / |v|^2 to the remaining columns of b
        for j in step..n {
            let cc = col_order[j];
            let dot: f64 = (step..cols).map(|i| v[i - step] * b[i][cc]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in step..cols {
                b[i][cc] -= f * v[i - step];
            }
        }
        // accumulate q <- q * H (apply H to the trailing columns of q)
        for row in q.iter_mut() {
            let dot: f64 = (step..cols).map(|i| v[i - step] * row[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in step..cols {
                row[i] -= f * v[i - step];
            }
        }
    }

    let tol = diag.first().copied().unwrap_or(0.0) * (cols.max(n) as f64) * f64::EPSILON;
    let rank = diag.iter().take_while(|&&d| d > tol).count();
    (rank..cols)
        .map(|k| q.iter().map(|row| row[k]).collect())
        .collect()
}

/// A null vector scaled so its maximum-modulus entry is exactly +1; returns
/// the vector and the index of that entry (smallest index on ties).
pub fn null_vector_max_normalized(rows: &[Vec<f64>], cols: usize) -> Result<(Vec<f64>, usize)> {
    let basis = null_space(rows, cols);
    let v = basis.first().ok_or(Error::NoNullVector {
        rows: rows.len(),
        cols,
    })?;
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    let pivot = v[idx];
    let beta: Vec<f64> = v.iter().map(|x| x / pivot).collect();
    Ok((beta, idx))
}

pub fn residual_inf(rows: &[Vec<f64>], x: &[f64]) -> f64 {
    rows.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

pub fn frobenius(rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .flat_map(|row| row.iter())
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
}
