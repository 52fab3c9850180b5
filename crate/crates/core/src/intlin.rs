//! Exact integer linear algebra: solving `A x = b` over the integers by
//! diagonalising `A` with unimodular row and column operations.

use crate::error::{Error, Result};

fn ovf() -> Error {
    Error::TooLarge("integer overflow during diagonalisation".into())
}

fn sub_mul(a: i128, q: i128, b: i128) -> Result<i128> {
    q.checked_mul(b).and_then(|m| a.checked_sub(m)).ok_or_else(ovf)
}

/// Solves `A x = b` over the integers. Returns `None` when no integer
/// solution exists.
pub fn solve_integer(a: &[Vec<i64>], b: &[i64]) -> Result<Option<Vec<i64>>> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {m} rows but right-hand side has {}",
            b.len()
        )));
    }
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut d: Vec<Vec<i128>> = a
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut rhs: Vec<i128> = b.iter().map(|&x| x as i128).collect();
    // Column operations are accumulated into v so that x = v y.
    let mut v: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| i128::from(i == j)).collect())
        .collect();
    let mut rank = 0usize;
    for t in 0..m.min(n) {
        // Pick the smallest nonzero entry of the trailing block.
        let mut best: Option<(usize, usize, i128)> = None;
        for (i, row) in d.iter().enumerate().skip(t) {
            for (j, &x) in row.iter().enumerate().skip(t) {
                if x != 0 && best.is_none_or(|(_, _, bx)| x.abs() < bx) {
                    best = Some((i, j, x.abs()));
                }
            }
        }
        let Some((pi, pj, _)) = best else { break };
        d.swap(t, pi);
        rhs.swap(t, pi);
        for row in d.iter_mut() {
            row.swap(t, pj);
        }
        for row in v.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut dirty = false;
            // Clear column t below the pivot.
            for i in t + 1..m {
                if d[i][t] != 0 {
                    let q = d[i][t].div_euclid(d[t][t]);
                    for j in t..n {
                        d[i][j] = sub_mul(d[i][j], q, d[t][j])?;
                    }
                    rhs[i] = sub_mul(rhs[i], q, rhs[t])?;
                    if d[i][t] != 0 {
                        dirty = true;
                        if d[i][t].abs() < d[t][t].abs() {
                            d.swap(t, i);
                            rhs.swap(t, i);
                        }
                    }
                }
            }
            // Clear row t right of the pivot.
            for j in t + 1..n {
                if d[t][j] != 0 {
                    let q = d[t][j].div_euclid(d[t][t]);
                    for row in d.iter_mut().skip(t) {
                        row[j] = sub_mul(row[j], q, row[t])?;
                    }
                    for row in v.iter_mut() {
                        row[j] = sub_mul(row[j], q, row[t])?;
                    }
                    if d[t][j] != 0 {
                        dirty = true;
                        if d[t][j].abs() < d[t][t].abs() {
                            for row in d.iter_mut() {
                                row.swap(t, j);
                            }
                            for row in v.iter_mut() {
                                row.swap(t, j);
                            }
                        }
                    }
                }
            }
            if !dirty {
                break;
            }
        }
        rank = t + 1;
    }
    let mut y = vec![0i128; n];
    for t in 0..rank {
        if rhs[t] % d[t][t] != 0 {
            return Ok(None);
        }
        y[t] = rhs[t] / d[t][t];
    }
    if rhs.iter().skip(rank).any(|&r| r != 0) {
        return Ok(None);
    }
    let mut x = vec![0i64; n];
    for (i, xi) in x.iter_mut().enumerate() {
        let mut s: i128 = 0;
        for (j, yj) in y.iter().enumerate().take(rank) {
            s = v[i][j]
                .checked_mul(*yj)
                .and_then(|p| s.checked_add(p))
                .ok_or_else(ovf)?;
        }
        *xi = i64::try_from(s).map_err(|_| ovf())?;
    }
    Ok(Some(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &[Vec<i64>], b: &[i64], x: &[i64]) {
        for (row, bi) in a.iter().zip(b) {
            let s: i64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
            assert_eq!(s, *bi);
        }
    }

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let b = vec![6, -6, 18];
        let x = solve_integer(&a, &b).unwrap().unwrap();
        check(&a, &b, &x);
    }

    #[test]
    fn detects_divisibility_obstruction() {
        let a = vec![vec![2, 4]];
        assert!(solve_integer(&a, &[3]).unwrap().is_none());
        assert!(solve_integer(&a, &[6]).unwrap().is_some());
    }

    #[test]
    fn detects_inconsistent_rank() {
        let a = vec![vec![1, 1], vec![2, 2]];
        assert!(solve_integer(&a, &[1, 3]).unwrap().is_none());
        let x = solve_integer(&a, &[1, 2]).unwrap().unwrap();
        check(&a, &[1, 2], &x);
    }
}
