//! Depth-first branch and bound over the coefficients of a `(q+1)`-chain
//! `Q`, minimising `cost_P(S - dQ) + cost_Q(Q)` cell by cell. Exact for any
//! coefficient group, exponential in the number of cells.

use std::collections::BTreeMap;

use crate::chains::Cell;
use crate::coeffgroup::{CoefficientGroup, CostedNorm, GroupElement};
use crate::error::{Error, Result};

/// Largest number of cells the search accepts.
pub const MAX_CELLS: usize = 200;
/// Largest number of search nodes visited before giving up.
pub const NODE_BUDGET: u64 = 50_000_000;

pub(crate) struct Problem<'a> {
    pub group: &'a CoefficientGroup,
    pub norm: &'a CostedNorm,
    /// The `q`-cells whose coefficient is charged, with weight.
    pub p_cells: Vec<(Cell, f64)>,
    /// The `(q+1)`-cells carrying a free coefficient, with weight.
    pub q_cells: Vec<(Cell, f64)>,
    /// Candidate coefficients for each entry of `q_cells`.
    pub candidates: Vec<GroupElement>,
    pub s: BTreeMap<Cell, GroupElement>,
}

pub(crate) struct Solution {
    pub q: Vec<GroupElement>,
}

struct State<'a, 'b> {
    pr: &'b Problem<'a>,
    /// For every `q_cells[i]`, the p-cell indices it touches with signs.
    touches: Vec<Vec<(usize, i64)>>,
    /// p-cells finalised once `q_cells[i]` is assigned.
    finalise: Vec<Vec<usize>>,
    cand_norms: Vec<f64>,
    current: Vec<GroupElement>,
    dq: Vec<GroupElement>,
    best: f64,
    best_q: Vec<GroupElement>,
    nodes: u64,
}

impl Problem<'_> {
    pub fn solve(&self) -> Result<Solution> {
        if self.q_cells.len() + self.p_cells.len() > MAX_CELLS {
            return Err(Error::TooLarge(format!(
                "{} cells exceed the limit of {MAX_CELLS}",
                self.q_cells.len() + self.p_cells.len()
            )));
        }
        let p_index: BTreeMap<&Cell, usize> =
            self.p_cells.iter().enumerate().map(|(i, (c, _))| (c, i)).collect();
        let mut touches = vec![Vec::new(); self.q_cells.len()];
        let mut last = vec![None; self.p_cells.len()];
        for (i, (c, _)) in self.q_cells.iter().enumerate() {
            for (f, s) in c.faces() {
                if let Some(&k) = p_index.get(&f) {
                    touches[i].push((k, s));
                    last[k] = Some(i);
                }
            }
        }
        let mut finalise = vec![Vec::new(); self.q_cells.len()];
        let mut base = 0.0;
        for (k, l) in last.iter().enumerate() {
            match l {
                Some(i) => finalise[*i].push(k),
                None => {
                    let g = self.s.get(&self.p_cells[k].0).cloned().unwrap_or_else(|| self.group.zero());
                    base += self.norm.norm(&g)? * self.p_cells[k].1;
                }
            }
        }
        let mut cands = self.candidates.clone();
        let mut cand_norms = Vec::with_capacity(cands.len());
        for g in &cands {
            cand_norms.push(self.norm.norm(g)?);
        }
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| cand_norms[a].total_cmp(&cand_norms[b]).then(cands[a].cmp(&cands[b])));
        cands = order.iter().map(|&i| cands[i].clone()).collect();
        cand_norms = order.iter().map(|&i| cand_norms[i]).collect();
        // Q = 0 is always feasible.
        let mut zero_cost = base;
        for (k, (c, w)) in self.p_cells.iter().enumerate() {
            if last[k].is_some() {
                let g = self.s.get(c).cloned().unwrap_or_else(|| self.group.zero());
                zero_cost += self.norm.norm(&g)? * w;
            }
        }
        let pr = Problem {
            group: self.group,
            norm: self.norm,
            p_cells: self.p_cells.clone(),
            q_cells: self.q_cells.clone(),
            candidates: cands,
            s: self.s.clone(),
        };
        let mut st = State {
            pr: &pr,
            touches,
            finalise,
            cand_norms,
            current: vec![self.group.zero(); self.q_cells.len()],
            dq: vec![self.group.zero(); self.p_cells.len()],
            best: zero_cost,
            best_q: vec![self.group.zero(); self.q_cells.len()],
            nodes: 0,
        };
        st.dfs(0, base)?;
        Ok(Solution {
            q: st.best_q,
        })
    }
}

impl State<'_, '_> {
    fn dfs(&mut self, i: usize, cost: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return Err(Error::TooLarge(format!(
                "search exceeded {NODE_BUDGET} nodes"
            )));
        }
        let tol = 1e-12 * self.best.max(1.0);
        if cost >= self.best - tol {
            return Ok(());
        }
        if i == self.current.len() {
            self.best = cost;
            self.best_q = self.current.clone();
            return Ok(());
        }
        let group = self.pr.group;
        let w = self.pr.q_cells[i].1;
        for ci in 0..self.pr.candidates.len() {
            let qcost = self.cand_norms[ci] * w;
            if cost + qcost >= self.best - tol {
                if w > 0.0 {
                    // Candidates are sorted by norm, so later ones cost more.
                    break;
                }
                continue;
            }
            let g = self.pr.candidates[ci].clone();
            for &(k, s) in &self.touches[i] {
                self.dq[k] = group.add(&self.dq[k], &group.scale(s, &g));
            }
            let mut add = qcost;
            for &k in &self.finalise[i] {
                let (c, wk) = &self.pr.p_cells[k];
                let sk = self.pr.s.get(c).cloned().unwrap_or_else(|| group.zero());
                let pk = group.sub(&sk, &self.dq[k]);
                add += self.pr.norm.norm(&pk)? * wk;
            }
            self.current[i] = g.clone();
            self.dfs(i + 1, cost + add)?;
            for &(k, s) in &self.touches[i] {
                self.dq[k] = group.sub(&self.dq[k], &group.scale(s, &g));
            }
        }
        self.current[i] = group.zero();
        Ok(())
    }
}
