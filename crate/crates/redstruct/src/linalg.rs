//! Small exact linear algebra over ℚ: determinants, solving, inversion,
//! rank. Matrices are row-major `Vec<Vec<Rat>>`; everything here is for
//! ranks ≤ 6, so plain Gaussian elimination with exact rationals is fine.

use crate::ring::Rat;
use num::{BigInt, Zero};

pub fn rat_mat(m: &[Vec<i64>]) -> Vec<Vec<Rat>> {
    m.iter()
        .map(|row| row.iter().map(|&x| Rat::from(BigInt::from(x))).collect())
        .collect()
}

/// Row-reduce in place; returns (rank, determinant-if-square).
fn eliminate(a: Vec<Vec<Rat>>) -> (usize, Vec<Vec<Rat>>, Rat) {
    let cols = if a.is_empty() { 0 } else { a[0].len() };
    eliminate_cols(a, cols)
}

/// Row-reduce, only pivoting on the first `pivot_cols` columns.
fn eliminate_cols(mut a: Vec<Vec<Rat>>, pivot_cols: usize) -> (usize, Vec<Vec<Rat>>, Rat) {
    let rows = a.len();
    let width = if rows == 0 { 0 } else { a[0].len() };
    let mut det = Rat::from(BigInt::from(1));
    let mut rank = 0;
    let mut pivot_col = 0;
    while rank < rows && pivot_col < pivot_cols {
        let Some(p) = (rank..rows).find(|&r| !a[r][pivot_col].is_zero()) else {
            det = Rat::zero();
            pivot_col += 1;
            continue;
        };
        if p != rank {
            a.swap(p, rank);
            det = -det;
        }
        det *= &a[rank][pivot_col];
        let inv = a[rank][pivot_col].recip();
        for c in pivot_col..width {
            let v = &a[rank][c] * &inv;
            a[rank][c] = v;
        }
        for r in 0..rows {
            if r != rank && !a[r][pivot_col].is_zero() {
                let f = a[r][pivot_col].clone();
                for c in pivot_col..width {
                    let v = &a[r][c] - &f * &a[rank][c];
                    a[r][c] = v;
                }
            }
        }
        rank += 1;
        pivot_col += 1;
    }
    (rank, a, det)
}

pub fn rank(a: &[Vec<Rat>]) -> usize {
    eliminate(a.to_vec()).0
}

pub fn det(a: &[Vec<Rat>]) -> Rat {
    assert!(a.iter().all(|r| r.len() == a.len()), "det needs square");
    let n = a.len();
    let (rank, _, d) = eliminate(a.to_vec());
    if rank < n {
        Rat::zero()
    } else {
        d
    }
}

/// Solve A x = b for square A; `None` when A is singular.
pub fn solve(a: &[Vec<Rat>], b: &[Rat]) -> Option<Vec<Rat>> {
    let n = a.len();
    assert!(a.iter().all(|r| r.len() == n) && b.len() == n);
    let mut aug: Vec<Vec<Rat>> = a.to_vec();
    for (row, bv) in aug.iter_mut().zip(b) {
        row.push(bv.clone());
    }
    let (rank, red, _) = eliminate_cols(aug, n);
    if rank < n {
        return None;
    }
    Some(red.iter().map(|r| r[n].clone()).collect())
}

/// Inverse of a square rational matrix; `None` when singular.
pub fn inverse(a: &[Vec<Rat>]) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let mut aug: Vec<Vec<Rat>> = a.to_vec();
    for (i, row) in aug.iter_mut().enumerate() {
        for j in 0..n {
            row.push(if i == j {
                Rat::from(BigInt::from(1))
            } else {
                Rat::zero()
            });
        }
    }
    let (rank, red, _) = eliminate_cols(aug, n);
    if rank < n {
        return None;
    }
    Some(red.iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_vec_i64(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mat_mul_i64(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(av, brow)| av * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// Integer inverse of a unimodular integer matrix; `None` if det ∉ {±1}.
pub fn int_inverse(m: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let rm = rat_mat(m);
    let d = det(&rm);
    if !d.is_integer() {
        return None;
    }
    let dv = d.to_integer();
    if dv != BigInt::from(1) && dv != BigInt::from(-1) {
        return None;
    }
    let inv = inverse(&rm)?;
    Some(
        inv.iter()
            .map(|row| {
                row.iter()
                    .map(|x| {
                        assert!(x.is_integer());
                        i64::try_from(x.to_integer()).expect("entry overflow")
                    })
                    .collect()
            })
            .collect(),
    )
}
