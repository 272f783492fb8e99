//! Exact integer linear algebra: fraction-free determinants and square roots.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

/// Determinant of a square integer matrix by Bareiss elimination.
///
/// Runs in `i128` with overflow checks and restarts over big integers the
/// moment any intermediate product would overflow, so the result is always
/// exact.
pub fn determinant(rows: &[Vec<i64>]) -> BigInt {
    let n = rows.len();
    assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
    if n == 0 {
        return BigInt::one();
    }
    let small: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    match bareiss_i128(small) {
        Some(d) => BigInt::from(d),
        None => bareiss_big(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect(),
        ),
    }
}

fn bareiss_i128(mut a: Vec<Vec<i128>>) -> Option<i128> {
    let n = a.len();
    let mut negate = false;
    let mut prev: i128 = 1;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(swap) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return Some(0);
            };
            a.swap(k, swap);
            negate = !negate;
        }
        let pivot = a[k][k];
        let (top, bottom) = a.split_at_mut(k + 1);
        let row_k = &top[k];
        for row in bottom.iter_mut() {
            let lead = row[k];
            for j in k + 1..n {
                let x = pivot.checked_mul(row[j])?;
                let y = lead.checked_mul(row_k[j])?;
                row[j] = x.checked_sub(y)? / prev;
            }
            row[k] = 0;
        }
        prev = pivot;
    }
    Some(if negate { -prev } else { prev })
}

fn bareiss_big(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    let mut negate = false;
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    negate = !negate;
                }
                None => return BigInt::zero(),
            }
        }
        let (top, bottom) = a.split_at_mut(k + 1);
        let row_k = &top[k];
        let pivot = &row_k[k];
        for row in bottom.iter_mut() {
            let lead = std::mem::take(&mut row[k]);
            for j in k + 1..n {
                let mut t = pivot * &row[j];
                if !lead.is_zero() && !row_k[j].is_zero() {
                    t -= &lead * &row_k[j];
                }
                row[j] = t / &prev;
            }
        }
        prev = row_k[k].clone();
    }
    if negate {
        -prev
    } else {
        prev
    }
}

/// Square root of `v`, or `None` when `v` is negative or not a perfect square.
pub fn integer_sqrt_exact(v: &BigInt) -> Option<BigUint> {
    if v.is_negative() {
        return None;
    }
    let mag = v.magnitude();
    let root = mag.sqrt();
    (&root * &root == *mag).then_some(root)
}
