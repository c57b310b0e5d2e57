//! Small dense linear algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

/// Determinant by cofactor expansion for dim <= 6, LU beyond.
///
/// The cofactor path uses only +, -, * so it is exact for integer-valued
/// entries whose intermediates stay below 2^53; tree-constant minors of
/// small networks rely on that.
pub fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of non-square matrix");
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3..=6 => det_cofactor(m),
        _ => m.clone().lu().determinant(),
    }
}

fn det_cofactor(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut flat = [0.0f64; 36];
    for i in 0..n {
        for j in 0..n {
            flat[i * n + j] = m[(i, j)];
        }
    }
    det_masked(&flat, n, 0, (1u32 << n) - 1)
}

/// Expansion along `row` over the columns still present in `cols`; no
/// allocation, so the hot all-small-digraphs sweep stays cheap.
fn det_masked(flat: &[f64; 36], n: usize, row: usize, cols: u32) -> f64 {
    if cols.count_ones() == 1 {
        let col = cols.trailing_zeros() as usize;
        return flat[row * n + col];
    }
    let mut acc = 0.0;
    let mut sign = 1.0;
    let mut rest = cols;
    while rest != 0 {
        let col = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let pivot = flat[row * n + col];
        if pivot != 0.0 {
            acc += sign * pivot * det_masked(flat, n, row + 1, cols & !(1u32 << col));
        }
        sign = -sign;
    }
    acc
}

/// Determinant of the minor of `m` that skips row and column `skip`, for
/// dim <= 7 without allocating; cofactor arithmetic, so exact for integer
/// entries with small intermediates.
pub fn det_minor(m: &DMatrix<f64>, skip: usize) -> f64 {
    let p = m.nrows();
    assert_eq!(p, m.ncols(), "minor of non-square matrix");
    assert!(p >= 1 && p <= 7, "det_minor covers the small graph case");
    let n = p - 1;
    if n == 0 {
        return 1.0;
    }
    let mut flat = [0.0f64; 36];
    let mut ii = 0;
    for i in 0..p {
        if i == skip {
            continue;
        }
        let mut jj = 0;
        for j in 0..p {
            if j == skip {
                continue;
            }
            flat[ii * n + jj] = m[(i, j)];
            jj += 1;
        }
        ii += 1;
    }
    det_masked(&flat, n, 0, (1u32 << n) - 1)
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
/// Entries must be exactly integer-valued f64s; i128 intermediates keep the
/// elimination exact for the small matrices seen here.
pub fn integer_rank(m: &DMatrix<f64>) -> usize {
    let rows = m.nrows();
    let cols = m.ncols();
    let mut a: Vec<Vec<i128>> = (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)].round() as i128).collect())
        .collect();
    let mut rank = 0;
    let mut prev = 1i128;
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(row, p);
        for r in row + 1..rows {
            for c in col + 1..cols {
                a[r][c] = (a[row][col] * a[r][c] - a[r][col] * a[row][c]) / prev;
            }
            a[r][col] = 0;
        }
        prev = a[row][col];
        rank += 1;
        row += 1;
        if row == rows {
            break;
        }
    }
    rank
}

/// Rank of a float matrix from its singular values, cutting at
/// `1e-9 * sigma_max`.
pub fn svd_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-9 * max).count()
}

/// Orthonormal basis pair (range, complement) for the column span of `m`,
/// given the span's dimension. Columns of the first factor span the range,
/// columns of the second its orthogonal complement in R^n.
///
/// Pivoted Gram-Schmidt with a re-orthogonalization pass; the rank is
/// trusted, so the candidate pool is the columns of `m` followed by the
/// identity, and each accepted direction is the pool vector with the
/// largest residual.
pub fn orthonormal_split(m: &DMatrix<f64>, rank: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert!(rank <= n, "rank exceeds the ambient dimension");
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut pool: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
    let orthogonalize = |q: &[DVector<f64>], v: &DVector<f64>| {
        let mut r = v.clone();
        for _ in 0..2 {
            for b in q {
                let dot = b.dot(&r);
                r.axpy(-dot, b, 1.0);
            }
        }
        r
    };
    while q.len() < n {
        if q.len() == rank {
            // Range is complete; fill the complement from the identity.
            pool = (0..n).map(|i| DVector::from_fn(n, |j, _| f64::from(j == i))).collect();
        }
        let best = pool
            .iter()
            .map(|v| orthogonalize(&q, v))
            .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
            .expect("candidate pool cannot be empty before the basis is full");
        let norm = best.norm();
        assert!(
            norm > 1e-12,
            "rank {rank} inconsistent with the span while splitting"
        );
        q.push(best / norm);
    }
    let range = if rank == 0 {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&q[..rank])
    };
    let complement = if rank == n {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&q[rank..])
    };
    (range, complement)
}

/// Minimum-norm least-squares solution of `a x = b` together with the
/// residual norm `|a x - b|`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE))
        .expect("svd solve with u and v_t computed");
    let residual = (a * &x - b).norm();
    (x, residual)
}
