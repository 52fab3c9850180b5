//! A dense revised simplex method for `min c.x` subject to `A x = b`,
//! `x >= 0`, with Bland's anti-cycling rule and a two-phase start from an
//! all-artificial basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;
/// Pivots between full refactorisations of the basis inverse.
const REFACTOR_EVERY: usize = 200;

/// `min cost.x  s.t.  rows x = rhs, x >= 0`, rows given sparsely.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// A basic solution (empty unless optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            cost: vec![0.0; num_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }
}

struct Tableau {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn column(&self, j: usize) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        for &(r, a) in &self.cols[j] {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += self.binv[i][r] * a;
            }
        }
        u
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![vec![0.0; 2 * m]; m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r][k] = v;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))
                .expect("nonempty");
            if a[piv][c].abs() < 1e-12 {
                return Err(Error::Lp("singular basis during refactorisation".into()));
            }
            a.swap(c, piv);
            let d = a[c][c];
            for v in a[c].iter_mut() {
                *v /= d;
            }
            for r in 0..m {
                if r != c && a[r][c] != 0.0 {
                    let f = a[r][c];
                    let (src, dst) = if r < c {
                        let (lo, hi) = a.split_at_mut(c);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = a.split_at_mut(r);
                        (&lo[c], &mut hi[0])
                    };
                    for (dv, sv) in dst.iter_mut().zip(src.iter()) {
                        *dv -= f * sv;
                    }
                }
            }
        }
        // Rows of a now hold [I | B^-1] with basis order as columns.
        for i in 0..m {
            self.binv[i].copy_from_slice(&a[i][m..]);
        }
        for i in 0..m {
            self.xb[i] = (0..m).map(|r| self.binv[i][r] * self.b[r]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Runs the simplex method with costs `c`; `allowed` masks entering columns.
    fn run(&mut self, c: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<Option<()>> {
        let m = self.m;
        let mut in_basis = vec![false; self.cols.len()];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let mut y = vec![0.0; m];
            for (k, &j) in self.basis.iter().enumerate() {
                let cb = c[j];
                if cb != 0.0 {
                    for (r, yr) in y.iter_mut().enumerate() {
                        *yr += cb * self.binv[k][r];
                    }
                }
            }
            // Bland: lowest-index column with negative reduced cost.
            let entering = (0..self.cols.len()).find(|&j| {
                !in_basis[j]
                    && allowed(j)
                    && c[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>() < -TOL
            });
            let Some(j) = entering else { return Ok(Some(())) };
            let u = self.column(j);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if u[i] > TOL {
                    let ratio = self.xb[i].max(0.0) / u[i];
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - TOL
                                || (ratio <= lr + TOL && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, theta)) = leave else { return Ok(None) };
            for i in 0..m {
                if i != r {
                    self.xb[i] -= theta * u[i];
                }
            }
            self.xb[r] = theta;
            let piv = u[r];
            let prow: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
            for i in 0..m {
                if i != r && u[i] != 0.0 {
                    let f = u[i];
                    for (bv, pv) in self.binv[i].iter_mut().zip(&prow) {
                        *bv -= f * pv;
                    }
                }
            }
            self.binv[r] = prow;
            in_basis[self.basis[r]] = false;
            in_basis[j] = true;
            self.basis[r] = j;
            self.pivots += 1;
            self.since_refactor += 1;
        }
    }
}

/// Solves the program. The returned solution is a vertex of the feasible
/// polyhedron, which is integral whenever the constraint matrix is totally
/// unimodular and the right-hand side integral.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(Error::Lp("row and right-hand side counts differ".into()));
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
    let mut b = lp.rhs.clone();
    for (r, row) in lp.rows.iter().enumerate() {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        b[r] *= sign;
        for &(j, a) in row {
            if j >= n {
                return Err(Error::Lp(format!("variable index {j} out of range")));
            }
            if a != 0.0 {
                cols[j].push((r, sign * a));
            }
        }
        cols[n + r].push((r, 1.0));
    }
    let mut t = Tableau {
        m,
        cols,
        b: b.clone(),
        basis: (n..n + m).collect(),
        binv: (0..m)
            .map(|i| (0..m).map(|k| f64::from(u8::from(i == k))).collect())
            .collect(),
        xb: b,
        pivots: 0,
        since_refactor: 0,
    };
    let mut c1 = vec![0.0; n + m];
    for v in c1.iter_mut().skip(n) {
        *v = 1.0;
    }
    t.run(&c1, &|_| true)?;
    let infeas: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&j, _)| j >= n)
        .map(|(_, v)| *v)
        .sum();
    let scale = lp.rhs.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if infeas > 1e-7 * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
            pivots: t.pivots,
        });
    }
    // Drive remaining artificials out of the basis where possible.
    for r in 0..m {
        if t.basis[r] >= n {
            let in_basis: Vec<bool> = {
                let mut v = vec![false; n + m];
                for &j in &t.basis {
                    v[j] = true;
                }
                v
            };
            if let Some(j) = (0..n).find(|&j| {
                !in_basis[j] && {
                    let u = t.column(j);
                    u[r].abs() > 1e-7
                }
            }) {
                let u = t.column(j);
                let piv = u[r];
                let prow: Vec<f64> = t.binv[r].iter().map(|v| v / piv).collect();
                for i in 0..m {
                    if i != r && u[i] != 0.0 {
                        let f = u[i];
                        for (bv, pv) in t.binv[i].iter_mut().zip(&prow) {
                            *bv -= f * pv;
                        }
                        t.xb[i] -= f * t.xb[r] / piv;
                    }
                }
                t.xb[r] /= piv;
                t.binv[r] = prow;
                t.basis[r] = j;
                t.pivots += 1;
            }
        }
    }
    let mut c2 = lp.cost.clone();
    c2.resize(n + m, 0.0);
    let bounded = t.run(&c2, &|j| j < n)?;
    if bounded.is_none() {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
            pivots: t.pivots,
        });
    }
    t.refactor()?;
    let mut x = vec![0.0; n];
    for (k, &j) in t.basis.iter().enumerate() {
        if j < n {
            x[j] = t.xb[k].max(0.0);
        }
    }
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots: t.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_program() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6.
        let mut lp = LinearProgram::new(4);
        lp.cost = vec![-1.0, -1.0, 0.0, 0.0];
        lp.add_row(vec![(0, 1.0), (1, 2.0), (2, 1.0)], 4.0);
        lp.add_row(vec![(0, 3.0), (1, 1.0), (3, 1.0)], 6.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_relative_eq!(s.objective, -2.8, epsilon = 1e-9);
        assert_relative_eq!(s.x[0], 1.6, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(vec![(0, 1.0)], -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
        let mut lp = LinearProgram::new(2);
        lp.cost = vec![-1.0, 0.0];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        let mut lp = LinearProgram::new(2);
        lp.cost = vec![1.0, 2.0];
        lp.add_row(vec![(0, 1.0), (1, 1.0)], 3.0);
        lp.add_row(vec![(0, 2.0), (1, 2.0)], 6.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_relative_eq!(s.objective, 3.0, epsilon = 1e-9);
    }
}
